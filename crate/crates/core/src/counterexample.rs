//! Hard instances showing that no small subset can carry a multiplicative
//! guarantee for neuron approximation.
//!
//! The construction places `n` points on the sphere of radius `alpha`: every
//! point has last coordinate `alpha / 2` and a random direction of norm
//! `alpha * sqrt(3) / 2` in the remaining coordinates. For any target point
//! there is a query in any ball that makes the target's dot product strictly
//! positive while every other point's is strictly negative. Under an
//! activation that vanishes on negatives and is positive on positives (relu,
//! binary step), the full sum at that query is positive but any subset
//! missing the target contributes exactly zero, so the relative error is 1
//! no matter how the subset is weighted.

use serde::{Deserialize, Serialize};

use crate::activations::ActivationKind;
use crate::error::{invalid, Error, Result};
use crate::rng::{normal_vec, rng_from_seed};

/// Points on the sphere of radius `alpha` with common last coordinate
/// `alpha / 2`.
#[derive(Debug, Clone)]
pub struct SpherePointSet {
    points: Vec<Vec<f64>>,
    alpha: f64,
}

impl SpherePointSet {
    /// Validates an externally assembled point set: at least two points of
    /// dimension at least two, every norm equal to `alpha`, and every last
    /// coordinate equal to `alpha / 2` (both to relative 1e-9).
    pub fn new(points: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(
                "alpha",
                format!("must be positive and finite, got {alpha}"),
            ));
        }
        if points.len() < 2 {
            return Err(invalid("points", "need at least 2 points"));
        }
        let d = points[0].len();
        if d < 2 {
            return Err(invalid("points", "points must have dimension at least 2"));
        }
        let tol = alpha * 1e-9;
        for (j, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(invalid(
                    "points",
                    format!("point {j} has dimension {}", p.len()),
                ));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(invalid(
                    "points",
                    format!("point {j} has a non-finite entry"),
                ));
            }
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - alpha).abs() > tol {
                return Err(invalid(
                    "points",
                    format!("point {j} has norm {norm}, expected {alpha}"),
                ));
            }
            if (p[d - 1] - alpha / 2.0).abs() > tol {
                return Err(invalid(
                    "points",
                    format!(
                        "point {j} has last coordinate {}, expected {}",
                        p[d - 1],
                        alpha / 2.0
                    ),
                ));
            }
        }
        Ok(SpherePointSet { points, alpha })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

/// Samples `n` sphere points in dimension `d`. Directions are uniform on the
/// unit sphere of the leading `d - 1` coordinates, so for `d >= 3` distinct
/// points arise with probability one; `d = 2` leaves only two directions and
/// usually yields a degenerate set.
pub fn build_sphere_points(n: usize, d: usize, alpha: f64, seed: u64) -> Result<SpherePointSet> {
    if n < 2 {
        return Err(invalid("n", format!("need at least 2 points, got {n}")));
    }
    if d < 2 {
        return Err(invalid("d", format!("need dimension at least 2, got {d}")));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(invalid(
            "alpha",
            format!("must be positive and finite, got {alpha}"),
        ));
    }
    let mut rng = rng_from_seed(seed);
    let prefix_norm = alpha * 3f64.sqrt() / 2.0;
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let direction = loop {
            let raw = normal_vec(&mut rng, d - 1);
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break raw.into_iter().map(|v| v / norm).collect::<Vec<f64>>();
            }
        };
        let mut p = Vec::with_capacity(d);
        p.extend(direction.iter().map(|v| v * prefix_norm));
        p.push(alpha / 2.0);
        points.push(p);
    }
    Ok(SpherePointSet { points, alpha })
}

/// A query that separates one point from all the others.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparatingQuery {
    pub query: Vec<f64>,
    /// Dot product of the target point with the query (strictly positive).
    pub target_dot: f64,
    /// Largest dot product among the remaining points (strictly negative).
    pub max_other_dot: f64,
}

/// Builds a query inside the ball of radius `beta` whose dot product is
/// strictly positive with `points[target]` and strictly negative with every
/// other point.
///
/// Writing `p'` for the leading coordinates of the target, the raw query is
/// `(p', -lambda)` with `lambda` the midpoint of the feasible interval
/// `(2g/alpha, 3 alpha / 2)`, where `g` is the largest prefix dot product of
/// another point with `p'`. The interval is nonempty exactly when no other
/// point shares the target's direction. The query is then rescaled to norm
/// `min(beta, 1) / 2` so it stays well inside the ball; rescaling preserves
/// all signs.
pub fn separating_query(
    points: &SpherePointSet,
    target: usize,
    beta: f64,
) -> Result<SeparatingQuery> {
    let n = points.len();
    if target >= n {
        return Err(Error::IndexOutOfRange {
            index: target,
            len: n,
        });
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid(
            "beta",
            format!("must be positive and finite, got {beta}"),
        ));
    }
    let d = points.dim();
    let alpha = points.alpha();
    let p = points.point(target);
    let prefix = &p[..d - 1];

    let mut g = f64::NEG_INFINITY;
    let mut g_at = target;
    for q in 0..n {
        if q == target {
            continue;
        }
        let dot: f64 = prefix
            .iter()
            .zip(&points.point(q)[..d - 1])
            .map(|(a, b)| a * b)
            .sum();
        if dot > g {
            g = dot;
            g_at = q;
        }
    }
    let cap = 3.0 * alpha * alpha / 4.0;
    if g >= cap * (1.0 - 1e-12) {
        return Err(Error::DegenerateSet(target, g_at));
    }

    let lambda = (g + cap) / alpha;
    let mut query: Vec<f64> = prefix.to_vec();
    query.push(-lambda);
    let norm = query.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = beta.min(1.0) / 2.0 / norm;
    for v in &mut query {
        *v *= scale;
    }

    let dot_with =
        |j: usize| -> f64 { points.point(j).iter().zip(&query).map(|(a, b)| a * b).sum() };
    let target_dot = dot_with(target);
    let max_other_dot = (0..n)
        .filter(|&q| q != target)
        .map(dot_with)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(target_dot > 0.0 && max_other_dot < 0.0) {
        return Err(Error::DegenerateSet(target, g_at));
    }
    Ok(SeparatingQuery {
        query,
        target_dot,
        max_other_dot,
    })
}

/// Witness that a subset misses the full sum by the whole amount at `query`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ViolationWitness {
    /// Smallest point index absent from the subset.
    pub omitted: usize,
    pub query: Vec<f64>,
    /// Unit-weight sum over all points at the query (strictly positive).
    pub full_sum: f64,
    /// Unit-weight sum over the subset at the query (exactly zero).
    pub subset_sum: f64,
    /// `|full - subset| / full`; exactly 1 for these instances.
    pub ratio: f64,
}

fn check_violation_inputs(
    points: &SpherePointSet,
    subset: &[usize],
    phi: ActivationKind,
) -> Result<Vec<bool>> {
    match phi {
        ActivationKind::Relu | ActivationKind::BinaryStep => {}
        other => {
            return Err(Error::InvalidActivation {
                activation: other.name().to_string(),
                reason: "the argument needs an activation that is zero on negatives and positive \
                         on positives"
                    .to_string(),
            });
        }
    }
    let n = points.len();
    let mut seen = vec![false; n];
    for &j in subset {
        if j >= n {
            return Err(Error::InvalidSubset(format!(
                "index {j} out of range (len {n})"
            )));
        }
        if seen[j] {
            return Err(Error::InvalidSubset(format!("duplicate index {j}")));
        }
        seen[j] = true;
    }
    if subset.len() >= n {
        return Err(Error::InvalidSubset(format!(
            "subset of size {} is not proper for {n} points",
            subset.len()
        )));
    }
    Ok(seen)
}

/// Exhibits a query where the given subset, under any reweighting, has
/// relative error 1 against the unit-weight full sum. The witness targets
/// the smallest omitted index; see [`violation_with_target`] for others.
///
/// The subset sum reported here uses unit weights, but the conclusion is
/// weight-independent: every subset point has a strictly negative dot
/// product at the query, and the activation vanishes there, so each term is
/// zero before any weight multiplies it. Only activations that are zero on
/// negatives and positive on positives qualify (`relu`, `binary_step`).
pub fn multiplicative_violation(
    points: &SpherePointSet,
    subset: &[usize],
    phi: ActivationKind,
    beta: f64,
) -> Result<ViolationWitness> {
    let seen = check_violation_inputs(points, subset, phi)?;
    let omitted = seen
        .iter()
        .position(|&s| !s)
        .expect("a proper subset omits some index");
    violation_at(points, subset, omitted, phi, beta)
}

/// Like [`multiplicative_violation`] but separates a chosen omitted index,
/// which must not belong to the subset.
pub fn violation_with_target(
    points: &SpherePointSet,
    subset: &[usize],
    target: usize,
    phi: ActivationKind,
    beta: f64,
) -> Result<ViolationWitness> {
    let seen = check_violation_inputs(points, subset, phi)?;
    if target >= points.len() {
        return Err(Error::IndexOutOfRange {
            index: target,
            len: points.len(),
        });
    }
    if seen[target] {
        return Err(Error::InvalidSubset(format!(
            "target {target} belongs to the subset, so omitting it is vacuous"
        )));
    }
    violation_at(points, subset, target, phi, beta)
}

fn violation_at(
    points: &SpherePointSet,
    subset: &[usize],
    omitted: usize,
    phi: ActivationKind,
    beta: f64,
) -> Result<ViolationWitness> {
    let n = points.len();
    let sq = separating_query(points, omitted, beta)?;
    let eval_at = |j: usize| -> f64 {
        let dot: f64 = points
            .point(j)
            .iter()
            .zip(&sq.query)
            .map(|(a, b)| a * b)
            .sum();
        phi.eval(dot)
    };
    let full_sum: f64 = (0..n).map(eval_at).sum();
    let subset_sum: f64 = subset.iter().map(|&j| eval_at(j)).sum();
    // NaN must land in the degenerate branch too, hence the partial_cmp form.
    if full_sum.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::DegenerateSet(omitted, omitted));
    }
    let ratio = (full_sum - subset_sum).abs() / full_sum;
    Ok(ViolationWitness {
        omitted,
        query: sq.query,
        full_sum,
        subset_sum,
        ratio,
    })
}
