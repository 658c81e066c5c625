//! Sensitivity sampling plans and coreset construction.
//!
//! The sensitivity of a point `p` carrying weights `w_1..w_k` with respect
//! to queries in a ball of radius `beta` is
//!
//! ```text
//! s(p) = max_i |w_i(p)| * sup { |phi(z)| : z in [-beta*|p|, beta*|p|] }
//! ```
//!
//! exact because `p . x` ranges over exactly that interval as `x` ranges
//! over the ball (Cauchy-Schwarz, attained at `x = +-beta p/|p|`), and the
//! supremum of a monotone `|phi|` sits at an interval endpoint. Sampling
//! `m` points iid with probability `pr(p) = s(p)/t`, `t = sum s`, and
//! reweighting each draw by `w_i(q)/(m * pr(q))` yields an unbiased
//! estimator of `sum_p w_i(p) phi(p . x)` for every query `x` in the ball
//! and every function `i` simultaneously; the support is shared across all
//! `k` functions by construction.
//!
//! For non-negative weights and non-negative non-decreasing `phi` the
//! formula reduces to the classical `pr(p) = w(p) phi(beta |p|) / sum_q
//! w(q) phi(beta |q|)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::activations::ActivationKind;
use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;
use crate::weighted_set::{QueryBall, WeightedSet};

/// Sum of `pr` must land within this of 1 after renormalization.
const PROBABILITY_DRIFT: f64 = 1e-12;

// --- sampling plan --------------------------------------------------------

/// Per-point sensitivities and the iid sampling distribution they induce.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    sensitivities: Vec<f64>,
    probabilities: Vec<f64>,
    total_sensitivity: f64,
    exact: bool,
    /// Cumulative probabilities for inverse-CDF draws.
    cumulative: Vec<f64>,
    /// Highest index with positive probability (draw fallback at u ~ 1).
    last_positive: usize,
}

impl SamplingPlan {
    fn from_sensitivities(sensitivities: Vec<f64>, total: f64, exact: bool) -> Self {
        let n = sensitivities.len();
        let mut probabilities: Vec<f64> = if exact {
            vec![1.0 / n as f64; n]
        } else {
            sensitivities.iter().map(|s| s / total).collect()
        };
        // Renormalize to cancel rounding drift in the division.
        let sum: f64 = probabilities.iter().sum();
        for p in &mut probabilities {
            *p /= sum;
        }
        debug_assert!((probabilities.iter().sum::<f64>() - 1.0).abs() <= PROBABILITY_DRIFT);
        let mut cumulative = Vec::with_capacity(n);
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (j, &p) in probabilities.iter().enumerate() {
            acc += p;
            cumulative.push(acc);
            if p > 0.0 {
                last_positive = j;
            }
        }
        SamplingPlan {
            sensitivities,
            probabilities,
            total_sensitivity: total,
            exact,
            cumulative,
            last_positive,
        }
    }

    /// Uniform plan for baseline sampling: `pr = 1/n`, unit total mass.
    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(invalid("n", "need at least one point"));
        }
        Ok(Self::from_sensitivities(
            vec![1.0 / n as f64; n],
            1.0,
            false,
        ))
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn probability(&self, j: usize) -> f64 {
        self.probabilities[j]
    }

    pub fn sensitivities(&self) -> &[f64] {
        &self.sensitivities
    }

    /// `t = sum_j s_j`.
    pub fn total_sensitivity(&self) -> f64 {
        self.total_sensitivity
    }

    /// True when `t = 0`: every contribution is identically zero on the
    /// ball, so any sample is exact and draws fall back to uniform.
    pub fn is_exact(&self) -> bool {
        self.exact
    }

    /// Number of points with positive selection probability.
    pub fn support_capacity(&self) -> usize {
        self.probabilities.iter().filter(|&&p| p > 0.0).count()
    }

    /// One inverse-CDF draw. Only indices with `pr > 0` can be returned.
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        if idx < self.cumulative.len() {
            idx
        } else {
            self.last_positive
        }
    }

    /// `m` iid draws.
    pub fn draw_indices(&self, m: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..m).map(|_| self.draw(rng)).collect()
    }
}

/// Computes the sensitivity sampling plan for `ws` under activation `phi`
/// and queries restricted to `ball`.
///
/// When `t = 0` because all weights are zero, or because `phi` vanishes on
/// every point's reachable interval, any coreset has zero error: the plan
/// comes back uniform with `t = 0` and [`SamplingPlan::is_exact`] set.
/// The remaining `t = 0` case (unreachable in exact arithmetic) is
/// [`Error::ZeroSensitivity`].
pub fn sampling_plan(
    ws: &WeightedSet,
    phi: ActivationKind,
    ball: &QueryBall,
) -> Result<SamplingPlan> {
    phi.validate()?;
    let beta = ball.beta();
    let n = ws.len();
    let mut sensitivities = Vec::with_capacity(n);
    let mut total = 0.0f64;
    let mut live_weight_dead_phi = false;
    for j in 0..n {
        let reach = beta * ws.norm(j);
        let sup = phi.sup_abs_on_interval(-reach, reach)?;
        let wmax = ws.max_abs_weight(j);
        let s = wmax * sup;
        if wmax > 0.0 && sup == 0.0 {
            live_weight_dead_phi = true;
        }
        sensitivities.push(s);
        total += s;
    }
    if !total.is_finite() {
        return Err(invalid(
            "sensitivities",
            format!("total sensitivity overflowed to {total}"),
        ));
    }
    if total == 0.0 {
        if ws.all_weights_zero() || live_weight_dead_phi {
            return Ok(SamplingPlan::from_sensitivities(sensitivities, 0.0, true));
        }
        return Err(Error::ZeroSensitivity);
    }
    Ok(SamplingPlan::from_sensitivities(
        sensitivities,
        total,
        false,
    ))
}

// --- coresets --------------------------------------------------------------

/// A surviving point with its draw count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportEntry {
    /// Index into the parent [`WeightedSet`].
    pub index: usize,
    /// Number of times the point was drawn (1 for deterministic methods).
    pub multiplicity: u64,
}

/// A coreset: a small weighted subset standing in for the full set.
///
/// For sampled coresets, `new_weights[i][s] = c(q_s) * w_i(q_s) / (m *
/// pr(q_s))` where `c` is the draw count, so `sum_s u_i(q_s) phi(q_s . x)`
/// is the unbiased estimator for function `i`. Deterministic baselines
/// (percentile) carry their original weights and no plan or seed.
#[derive(Debug, Clone)]
pub struct Coreset {
    entries: Vec<SupportEntry>,
    /// Row-major `k x support`: `new_weights[i]` belongs to function `i`.
    new_weights: Vec<Vec<f64>>,
    budget: usize,
    seed: Option<u64>,
    plan: Option<SamplingPlan>,
}

impl Coreset {
    /// Merges raw iid draws into a deduplicated, reweighted coreset.
    ///
    /// `draws` are indices into `ws` (each must have positive plan
    /// probability; the plan's own sampler guarantees this). The budget `m`
    /// in the reweighting is `draws.len()`.
    pub fn from_draws(
        ws: &WeightedSet,
        plan: &SamplingPlan,
        draws: &[usize],
        seed: Option<u64>,
    ) -> Result<Self> {
        if draws.is_empty() {
            return Err(invalid("draws", "need at least one draw (m >= 1)"));
        }
        if plan.len() != ws.len() {
            return Err(Error::ShapeMismatch(format!(
                "plan covers {} points, set has {}",
                plan.len(),
                ws.len()
            )));
        }
        let n = ws.len();
        let mut counts = vec![0u64; n];
        for &j in draws {
            if j >= n {
                return Err(Error::IndexOutOfRange { index: j, len: n });
            }
            counts[j] += 1;
        }
        let m = draws.len() as f64;
        let k = ws.num_functions();
        let mut entries = Vec::new();
        for (j, &c) in counts.iter().enumerate() {
            if c > 0 {
                entries.push(SupportEntry {
                    index: j,
                    multiplicity: c,
                });
            }
        }
        let mut new_weights = vec![Vec::with_capacity(entries.len()); k];
        for entry in &entries {
            let pr = plan.probability(entry.index);
            debug_assert!(pr > 0.0, "drawn index {} has zero probability", entry.index);
            let scale = entry.multiplicity as f64 / (m * pr);
            for (i, row) in new_weights.iter_mut().enumerate() {
                row.push(ws.weight(i, entry.index) * scale);
            }
        }
        Ok(Coreset {
            entries,
            new_weights,
            budget: draws.len(),
            seed,
            plan: Some(plan.clone()),
        })
    }

    /// Assembles a deterministic (unsampled) coreset from selected indices
    /// carrying their original weights; used by the percentile baseline.
    pub(crate) fn from_selection(
        ws: &WeightedSet,
        mut selected: Vec<usize>,
        budget: usize,
    ) -> Self {
        selected.sort_unstable();
        let k = ws.num_functions();
        let mut new_weights = vec![Vec::with_capacity(selected.len()); k];
        for &j in &selected {
            for (i, row) in new_weights.iter_mut().enumerate() {
                row.push(ws.weight(i, j));
            }
        }
        Coreset {
            entries: selected
                .into_iter()
                .map(|index| SupportEntry {
                    index,
                    multiplicity: 1,
                })
                .collect(),
            new_weights,
            budget,
            seed: None,
            plan: None,
        }
    }

    /// Support entries, sorted by ascending point index.
    pub fn entries(&self) -> &[SupportEntry] {
        &self.entries
    }

    /// Indices of the surviving points, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.index).collect()
    }

    /// Number of distinct surviving points.
    pub fn support_size(&self) -> usize {
        self.entries.len()
    }

    /// New weights of function `i`, aligned with [`Coreset::entries`].
    pub fn new_weights(&self, i: usize) -> &[f64] {
        &self.new_weights[i]
    }

    pub fn num_functions(&self) -> usize {
        self.new_weights.len()
    }

    /// Requested sample budget `m`.
    pub fn budget(&self) -> usize {
        self.budget
    }

    /// Seed used for sampling; `None` for deterministic methods.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Sampling plan used; `None` for deterministic methods.
    pub fn plan(&self) -> Option<&SamplingPlan> {
        self.plan.as_ref()
    }

    /// The coreset estimator `sum_s u_i(q_s) phi(q_s . x)` for function `i`.
    pub fn estimate(&self, ws: &WeightedSet, phi: ActivationKind, x: &[f64], i: usize) -> f64 {
        self.entries
            .iter()
            .zip(&self.new_weights[i])
            .map(|(e, &u)| u * phi.eval(ws.point_dot(e.index, x)))
            .sum()
    }
}

/// Samples a coreset for a set with a single weight function (`k = 1`).
///
/// Bit-identical to [`coreset_layer`] on the same input and seed.
pub fn coreset_single(
    ws: &WeightedSet,
    phi: ActivationKind,
    ball: &QueryBall,
    m: usize,
    seed: u64,
) -> Result<Coreset> {
    if ws.num_functions() != 1 {
        return Err(invalid(
            "weight_functions",
            format!(
                "coreset_single needs exactly one weight function, got {}",
                ws.num_functions()
            ),
        ));
    }
    coreset_layer(ws, phi, ball, m, seed)
}

/// Samples a coreset shared by all `k` weight functions of `ws`: `m` iid
/// draws from the sensitivity plan, deduplicated and reweighted per
/// function. Deterministic given `seed`.
pub fn coreset_layer(
    ws: &WeightedSet,
    phi: ActivationKind,
    ball: &QueryBall,
    m: usize,
    seed: u64,
) -> Result<Coreset> {
    if m == 0 {
        return Err(invalid("m", "sample budget must be at least 1"));
    }
    let plan = sampling_plan(ws, phi, ball)?;
    let mut rng = rng_from_seed(seed);
    let draws = plan.draw_indices(m, &mut rng);
    Coreset::from_draws(ws, &plan, &draws, Some(seed))
}

// --- sample-size bound ------------------------------------------------------

/// Checks shared by the bound arithmetic.
fn check_bound_params(t: f64, d: usize, delta: f64, c: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(invalid(
            "t",
            format!("total sensitivity must be finite and >= 0, got {t}"),
        ));
    }
    if d == 0 {
        return Err(invalid("d", "dimension must be at least 1"));
    }
    if !delta.is_finite() || delta <= 0.0 || delta >= 1.0 {
        return Err(invalid(
            "delta",
            format!("failure probability must lie in (0, 1), got {delta}"),
        ));
    }
    if !c.is_finite() || c <= 0.0 {
        return Err(invalid(
            "c",
            format!("constant must be positive and finite, got {c}"),
        ));
    }
    Ok(())
}

/// Sample size sufficient for an `eps`-additive guarantee with probability
/// `1 - delta`:
///
/// ```text
/// m = ceil( (c * t / eps^2) * (d * max(ln t, 0) + ln(1/delta)) )
/// ```
///
/// Natural logarithms; the `d ln t` term is clamped at zero so sub-unit
/// total sensitivity never reduces the bound below its confidence term.
pub fn required_sample_size(t: f64, d: usize, eps: f64, delta: f64, c: f64) -> Result<u64> {
    check_bound_params(t, d, delta, c)?;
    if t == 0.0 {
        // Exact plans need no samples beyond the minimum legal draw.
        return Ok(1);
    }
    if !eps.is_finite() || eps <= 0.0 {
        return Err(invalid(
            "eps",
            format!("accuracy must be positive and finite, got {eps}"),
        ));
    }
    let log_term = d as f64 * t.ln().max(0.0) + (1.0 / delta).ln();
    let raw = (c * t / (eps * eps)) * log_term;
    if !raw.is_finite() {
        return Err(invalid("m", format!("sample bound overflowed ({raw})")));
    }
    Ok((raw.ceil() as u64).max(1))
}

/// Inverts [`required_sample_size`] at a given budget: the additive accuracy
/// certified by `m` samples,
///
/// ```text
/// eps = sqrt( c * t * (d * max(ln t, 0) + ln(1/delta)) / m )
/// ```
///
/// Strictly decreasing in `m` whenever `t > 0`.
pub fn certified_epsilon(t: f64, d: usize, m: u64, delta: f64, c: f64) -> Result<f64> {
    check_bound_params(t, d, delta, c)?;
    if m == 0 {
        return Err(invalid("m", "sample budget must be at least 1"));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let log_term = d as f64 * t.ln().max(0.0) + (1.0 / delta).ln();
    Ok((c * t * log_term / m as f64).sqrt())
}
