//! Weighted point sets and query balls.
//!
//! A [`WeightedSet`] is the input object of every sampling construction:
//! `n` points in `R^d` (stored row-major) carrying `k >= 1` weight
//! functions, each a vector of `n` (possibly signed) reals. Queries are
//! constrained to a [`QueryBall`] of radius `beta` around the origin.

use crate::error::{invalid, Result};

/// `n` points in `R^d` with `k` weight functions over a shared support.
#[derive(Debug, Clone)]
pub struct WeightedSet {
    n: usize,
    dim: usize,
    /// Row-major `n x dim`.
    points: Vec<f64>,
    /// Row-major `k x n`; row `i` is weight function `w_i`.
    weights: Vec<f64>,
    k: usize,
    /// Cached Euclidean norms, one per point.
    norms: Vec<f64>,
    /// Point-norm bound `alpha`; every `|p_j| <= alpha`.
    alpha: f64,
}

impl WeightedSet {
    /// Builds a set from point rows and weight-function rows; `alpha` is the
    /// maximum point norm.
    pub fn new(points: Vec<Vec<f64>>, weight_functions: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("points", "need at least one point"));
        }
        let dim = points[0].len();
        let n = points.len();
        let mut flat = Vec::with_capacity(n * dim);
        for (j, row) in points.iter().enumerate() {
            if row.len() != dim {
                return Err(invalid(
                    "points",
                    format!("row {j} has length {}, expected {dim}", row.len()),
                ));
            }
            flat.extend_from_slice(row);
        }
        let mut wflat = Vec::with_capacity(weight_functions.len() * n);
        for (i, row) in weight_functions.iter().enumerate() {
            if row.len() != n {
                return Err(invalid(
                    "weight_functions",
                    format!("function {i} has length {}, expected {n}", row.len()),
                ));
            }
            wflat.extend_from_slice(row);
        }
        Self::from_flat(n, dim, flat, weight_functions.len(), wflat)
    }

    /// Builds a set from flat row-major buffers.
    pub fn from_flat(
        n: usize,
        dim: usize,
        points: Vec<f64>,
        k: usize,
        weights: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(invalid(
                "points",
                format!("need n >= 1 and d >= 1, got n={n}, d={dim}"),
            ));
        }
        if points.len() != n * dim {
            return Err(invalid(
                "points",
                format!(
                    "flat buffer has {} entries, expected {}",
                    points.len(),
                    n * dim
                ),
            ));
        }
        if k == 0 {
            return Err(invalid(
                "weight_functions",
                "need at least one weight function",
            ));
        }
        if weights.len() != k * n {
            return Err(invalid(
                "weight_functions",
                format!(
                    "flat buffer has {} entries, expected {}",
                    weights.len(),
                    k * n
                ),
            ));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(invalid(
                "points",
                format!(
                    "non-finite coordinate at point {}, component {}",
                    pos / dim,
                    pos % dim
                ),
            ));
        }
        if let Some(pos) = weights.iter().position(|v| !v.is_finite()) {
            return Err(invalid(
                "weight_functions",
                format!(
                    "non-finite weight at function {}, point {}",
                    pos / n,
                    pos % n
                ),
            ));
        }
        let norms: Vec<f64> = (0..n)
            .map(|j| {
                points[j * dim..(j + 1) * dim]
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let alpha = norms.iter().fold(0.0f64, |a, &b| a.max(b));
        Ok(WeightedSet {
            n,
            dim,
            points,
            weights,
            k,
            norms,
            alpha,
        })
    }

    /// Builds a set with an explicit norm bound, verifying every point obeys it.
    pub fn with_norm_bound(
        points: Vec<Vec<f64>>,
        weight_functions: Vec<Vec<f64>>,
        alpha: f64,
    ) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(invalid(
                "alpha",
                format!("must be finite and non-negative, got {alpha}"),
            ));
        }
        let mut ws = Self::new(points, weight_functions)?;
        // Tiny relative slack absorbs rounding in the caller's own norm math.
        let tol = alpha * 1e-12 + 1e-300;
        if let Some(j) = (0..ws.n).find(|&j| ws.norms[j] > alpha + tol) {
            return Err(invalid(
                "alpha",
                format!("point {j} has norm {} exceeding bound {alpha}", ws.norms[j]),
            ));
        }
        ws.alpha = alpha;
        Ok(ws)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees n >= 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of weight functions `k`.
    pub fn num_functions(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    /// Cached Euclidean norm of point `j`.
    pub fn norm(&self, j: usize) -> f64 {
        self.norms[j]
    }

    /// Weight of point `j` under function `i`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Weight function `i` as a slice over all points.
    pub fn weight_function(&self, i: usize) -> &[f64] {
        &self.weights[i * self.n..(i + 1) * self.n]
    }

    /// `max_i |w_i(j)|`, the weight magnitude entering point `j`'s sensitivity.
    pub fn max_abs_weight(&self, j: usize) -> f64 {
        (0..self.k).fold(0.0f64, |a, i| a.max(self.weight(i, j).abs()))
    }

    /// True when every weight of every function is exactly zero.
    pub fn all_weights_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    /// `p_j . x`; `x` must have length `dim`.
    pub fn point_dot(&self, j: usize, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.point(j).iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Origin-centered Euclidean query ball of radius `beta > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryBall {
    beta: f64,
}

impl QueryBall {
    pub fn new(beta: f64) -> Result<Self> {
        if !beta.is_finite() || beta <= 0.0 {
            return Err(invalid(
                "beta",
                format!("must be positive and finite, got {beta}"),
            ));
        }
        Ok(QueryBall { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}
