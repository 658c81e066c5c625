//! Experiment harness: error sweeps over (method, budget, trial) grids and
//! empirical calibration of the sample-size constant.
//!
//! Sweeps are deterministic end to end. Every random object is derived from
//! the config's master seed through tagged substreams, and row order is the
//! nested (method, budget, trial) iteration order regardless of how many
//! threads execute it, so repeated runs produce byte-identical CSV.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::activations::ActivationKind;
use crate::baselines::percentile_coreset;
use crate::coreset::{required_sample_size, sampling_plan, Coreset, SamplingPlan};
use crate::error::{invalid, Error, Result};
use crate::metrics::exact_neuron_sum;
use crate::network::{load_model, Layer};
use crate::par;
use crate::pipeline::{conv_layer_to_weighted_set, dense_layer_to_weighted_set, PruneMethod};
use crate::rng::{
    rng_from_seed, substream, uniform_in_ball, STREAM_INSTANCE, STREAM_QUERIES, STREAM_ROW,
    STREAM_TRIAL,
};
use crate::weighted_set::{QueryBall, WeightedSet};

// --- instances -----------------------------------------------------------------

/// Where the weighted set under test comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    /// `n` standard-normal points in `d` dimensions with one unit-mean
    /// Gaussian weight function, points rescaled so the largest norm is
    /// exactly 1.
    Gaussian { n: usize, d: usize },
    /// Like `Gaussian` but with coordinates and weights uniform on `[0, 1]`.
    Uniform { n: usize, d: usize },
    /// The weighted set induced by a prunable layer pair of a saved model.
    /// The layer's own activation applies, not the config-level one.
    ModelLayer { path: String, index: usize },
}

fn scale_to_unit_max_norm(points: &mut [Vec<f64>]) {
    let max_norm = points
        .iter()
        .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0f64, f64::max);
    if max_norm > 0.0 {
        for p in points.iter_mut() {
            for v in p.iter_mut() {
                *v /= max_norm;
            }
        }
    }
}

/// Gaussian points with unit-mean Gaussian weights, max point norm scaled
/// to 1 (`k = 1`).
///
/// The weights are `N(1, 1)`: still signed (about a sixth come out
/// negative), but with a nonzero mean. Zero-mean weights would make the
/// contribution of any discarded subset cancel at square-root scale, at
/// which point the unweighted top-norm baseline wins every comparison by
/// construction and the benchmark stops measuring sampler quality.
pub fn gaussian_instance(n: usize, d: usize, seed: u64) -> Result<WeightedSet> {
    let mut rng = rng_from_seed(seed);
    let mut points: Vec<Vec<f64>> = (0..n)
        .map(|_| crate::rng::normal_vec(&mut rng, d))
        .collect();
    scale_to_unit_max_norm(&mut points);
    let weights: Vec<f64> = crate::rng::normal_vec(&mut rng, n)
        .iter()
        .map(|v| v + 1.0)
        .collect();
    WeightedSet::with_norm_bound(points, vec![weights], 1.0)
}

/// Uniform points on `[0, 1]^d` (then max-norm scaled to 1) with weights
/// uniform on `[0, 1]` (`k = 1`).
pub fn uniform_instance(n: usize, d: usize, seed: u64) -> Result<WeightedSet> {
    let mut rng = rng_from_seed(seed);
    let mut points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen::<f64>()).collect())
        .collect();
    scale_to_unit_max_norm(&mut points);
    let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    WeightedSet::with_norm_bound(points, vec![weights], 1.0)
}

/// Materializes an instance spec into a weighted set plus the activation the
/// experiment should run with.
fn resolve_instance(
    spec: &InstanceSpec,
    config_activation: ActivationKind,
    master_seed: u64,
) -> Result<(WeightedSet, ActivationKind)> {
    match spec {
        InstanceSpec::Gaussian { n, d } => {
            let seed = substream(master_seed, &[STREAM_INSTANCE]);
            Ok((gaussian_instance(*n, *d, seed)?, config_activation))
        }
        InstanceSpec::Uniform { n, d } => {
            let seed = substream(master_seed, &[STREAM_INSTANCE]);
            Ok((uniform_instance(*n, *d, seed)?, config_activation))
        }
        InstanceSpec::ModelLayer { path, index } => {
            let net = load_model(Path::new(path))?;
            let layer = net.layer(*index)?;
            let (ws, act) = match layer {
                Layer::Dense(d) => (dense_layer_to_weighted_set(&net, *index)?, d.activation),
                Layer::Conv2d(c) => (conv_layer_to_weighted_set(&net, *index)?, c.activation),
                Layer::Flatten => {
                    return Err(Error::LayerTypeMismatch {
                        index: *index,
                        expected: "dense or conv2d",
                    })
                }
            };
            Ok((ws, act))
        }
    }
}

// --- queries --------------------------------------------------------------------

fn default_beta() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Where the evaluation queries come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuerySpec {
    /// `count` points uniform in the ball of radius `beta`. With no explicit
    /// seed the master seed's query substream is used.
    UniformBall {
        beta: f64,
        count: usize,
        #[serde(default)]
        seed: Option<u64>,
    },
    /// Rows of a headerless CSV file, one query per line. Rows with norm
    /// above `beta` are rescaled onto the sphere of radius `beta` when
    /// `normalize` is set and rejected otherwise.
    DatasetFile {
        path: String,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default = "default_true")]
        normalize: bool,
    },
}

/// Queries resolved from a [`QuerySpec`].
#[derive(Debug, Clone)]
pub struct LoadedQueries {
    pub queries: Vec<Vec<f64>>,
    /// Ball radius the queries are certified to lie in.
    pub beta: f64,
    /// How many dataset rows had to be rescaled onto the ball boundary.
    pub rescaled: usize,
}

/// Parses queries from CSV text: comma-separated floats, one row per line,
/// blank lines skipped, no header.
pub fn parse_queries_csv(
    text: &str,
    dim: usize,
    beta: f64,
    normalize: bool,
) -> Result<LoadedQueries> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(invalid(
            "beta",
            format!("must be positive and finite, got {beta}"),
        ));
    }
    let mut queries = Vec::new();
    let mut rescaled = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(dim);
        for tok in line.split(',') {
            let v: f64 = tok.trim().parse().map_err(|e| Error::Parse {
                context: format!("queries line {}", lineno + 1),
                reason: format!("`{}`: {e}", tok.trim()),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    context: format!("queries line {}", lineno + 1),
                    reason: format!("non-finite value {v}"),
                });
            }
            row.push(v);
        }
        if row.len() != dim {
            return Err(Error::Parse {
                context: format!("queries line {}", lineno + 1),
                reason: format!("expected {dim} columns, found {}", row.len()),
            });
        }
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > beta {
            if normalize {
                for v in &mut row {
                    *v *= beta / norm;
                }
                rescaled += 1;
            } else {
                return Err(invalid(
                    "queries",
                    format!(
                        "row {} has norm {norm}, outside the ball of radius {beta}",
                        lineno + 1
                    ),
                ));
            }
        }
        queries.push(row);
    }
    if queries.is_empty() {
        return Err(invalid("queries", "no query rows found"));
    }
    Ok(LoadedQueries {
        queries,
        beta,
        rescaled,
    })
}

/// Loads queries from a CSV file on disk. See [`parse_queries_csv`].
pub fn load_queries_csv(
    path: &Path,
    dim: usize,
    beta: f64,
    normalize: bool,
) -> Result<LoadedQueries> {
    let text = std::fs::read_to_string(path)?;
    parse_queries_csv(&text, dim, beta, normalize)
}

fn resolve_queries(spec: &QuerySpec, dim: usize, master_seed: u64) -> Result<LoadedQueries> {
    match spec {
        QuerySpec::UniformBall { beta, count, seed } => {
            if !(beta.is_finite() && *beta > 0.0) {
                return Err(invalid(
                    "beta",
                    format!("must be positive and finite, got {beta}"),
                ));
            }
            if *count == 0 {
                return Err(invalid("count", "need at least one query"));
            }
            let mut rng =
                rng_from_seed(seed.unwrap_or_else(|| substream(master_seed, &[STREAM_QUERIES])));
            let queries = (0..*count)
                .map(|_| uniform_in_ball(&mut rng, dim, *beta))
                .collect();
            Ok(LoadedQueries {
                queries,
                beta: *beta,
                rescaled: 0,
            })
        }
        QuerySpec::DatasetFile {
            path,
            beta,
            normalize,
        } => load_queries_csv(Path::new(path), dim, *beta, *normalize),
    }
}

// --- sweep ----------------------------------------------------------------------

fn default_activation() -> ActivationKind {
    ActivationKind::Relu
}

/// A full sweep request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub instance: InstanceSpec,
    pub methods: Vec<PruneMethod>,
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub queries: QuerySpec,
    pub master_seed: u64,
    /// Activation for synthetic instances (model layers use their own).
    #[serde(default = "default_activation")]
    pub activation: ActivationKind,
}

/// One (method, budget, trial) measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: PruneMethod,
    pub budget: usize,
    pub trial: usize,
    /// Substream seed the trial sampled with.
    pub seed: u64,
    /// Mean absolute neuron error over all queries and weight functions.
    pub mean_abs_err: f64,
}

/// Sweep outcome: config echo plus one row per grid cell in deterministic
/// (method, budget, trial) order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    /// Dataset rows rescaled onto the ball boundary while loading queries.
    pub rescaled_queries: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Renders `method,budget,trial,mean_abs_err` CSV, header included.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("method,budget,trial,mean_abs_err\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.method, row.budget, row.trial, row.mean_abs_err
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Per-instance activation cache: all `phi(p_j . x_s)` values and the exact
/// neuron sums, computed once and shared across every grid cell.
pub(crate) struct ErrorCache {
    q_count: usize,
    k: usize,
    /// `act[j * q_count + s] = phi(p_j . x_s)`, row-major over points.
    act: Vec<f64>,
    /// `full[i * q_count + s]` = exact sum for function `i` at query `s`.
    full: Vec<f64>,
}

impl ErrorCache {
    pub(crate) fn build(ws: &WeightedSet, phi: ActivationKind, queries: &[Vec<f64>]) -> Self {
        let n = ws.len();
        let q_count = queries.len();
        let k = ws.num_functions();
        let act_rows: Vec<Vec<f64>> = par::map_indexed(n, |j| {
            queries
                .iter()
                .map(|x| phi.eval(ws.point_dot(j, x)))
                .collect()
        });
        let mut act = Vec::with_capacity(n * q_count);
        for row in act_rows {
            act.extend(row);
        }
        let full_rows: Vec<Vec<f64>> = par::map_indexed(k, |i| {
            (0..q_count)
                .map(|s| {
                    (0..n)
                        .map(|j| ws.weight(i, j) * act[j * q_count + s])
                        .sum::<f64>()
                })
                .collect()
        });
        let mut full = Vec::with_capacity(k * q_count);
        for row in full_rows {
            full.extend(row);
        }
        ErrorCache {
            q_count,
            k,
            act,
            full,
        }
    }

    /// Same quantity as [`crate::metrics::neuron_additive_error`], computed
    /// from the cache with identical summation order (bit-equal results).
    pub(crate) fn mean_abs_error(&self, coreset: &Coreset) -> f64 {
        let support = coreset.support();
        let q = self.q_count;
        let per_query: Vec<f64> = (0..q)
            .map(|s| {
                (0..self.k)
                    .map(|i| {
                        let est: f64 = support
                            .iter()
                            .zip(coreset.new_weights(i))
                            .map(|(&j, &u)| u * self.act[j * q + s])
                            .sum();
                        (self.full[i * q + s] - est).abs()
                    })
                    .sum::<f64>()
                    / self.k as f64
            })
            .collect();
        per_query.iter().sum::<f64>() / q as f64
    }
}

/// Runs the full (method, budget, trial) grid. Deterministic in the config.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    if config.methods.is_empty() {
        return Err(invalid("methods", "need at least one method"));
    }
    if config.budgets.is_empty() {
        return Err(invalid("budgets", "need at least one budget"));
    }
    if config.trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    let (ws, phi) = resolve_instance(&config.instance, config.activation, config.master_seed)?;
    for &m in &config.budgets {
        if m == 0 {
            return Err(invalid("budgets", "budgets must be at least 1"));
        }
        if m > ws.len() {
            return Err(Error::BudgetExceedsWidth {
                budget: m,
                width: ws.len(),
            });
        }
    }
    let loaded = resolve_queries(&config.queries, ws.dim(), config.master_seed)?;
    let ball = QueryBall::new(loaded.beta)?;

    let coreset_plan = if config.methods.contains(&PruneMethod::Coreset) {
        Some(sampling_plan(&ws, phi, &ball)?)
    } else {
        None
    };
    let uniform_plan = if config.methods.contains(&PruneMethod::Uniform) {
        Some(SamplingPlan::uniform(ws.len())?)
    } else {
        None
    };
    let cache = ErrorCache::build(&ws, phi, &loaded.queries);

    let mut combos =
        Vec::with_capacity(config.methods.len() * config.budgets.len() * config.trials);
    for &method in &config.methods {
        for &budget in &config.budgets {
            for trial in 0..config.trials {
                combos.push((method, budget, trial));
            }
        }
    }
    let rows: Vec<Result<SweepRow>> = par::map_indexed(combos.len(), |idx| {
        let (method, budget, trial) = combos[idx];
        let seed = substream(
            config.master_seed,
            &[STREAM_ROW, method.stream_id(), budget as u64, trial as u64],
        );
        let coreset = match method {
            PruneMethod::Percentile => percentile_coreset(&ws, budget)?,
            PruneMethod::Coreset | PruneMethod::Uniform => {
                let plan = match method {
                    PruneMethod::Coreset => coreset_plan.as_ref(),
                    _ => uniform_plan.as_ref(),
                }
                .expect("plan prepared for every sampled method");
                let mut rng = rng_from_seed(seed);
                let draws = plan.draw_indices(budget, &mut rng);
                Coreset::from_draws(&ws, plan, &draws, Some(seed))?
            }
        };
        Ok(SweepRow {
            method,
            budget,
            trial,
            seed,
            mean_abs_err: cache.mean_abs_error(&coreset),
        })
    });
    let rows: Result<Vec<SweepRow>> = rows.into_iter().collect();
    Ok(SweepReport {
        config: config.clone(),
        rescaled_queries: loaded.rescaled,
        rows: rows?,
    })
}

// --- calibration -------------------------------------------------------------------

/// Smallest constant the calibration search will consider.
pub const CALIBRATION_C_FLOOR: f64 = 1.0 / 1024.0;
/// Largest constant the calibration search will consider.
pub const CALIBRATION_C_CAP: f64 = 1_048_576.0;
/// Absolute bracket width at which bisection stops.
pub const CALIBRATION_C_TOL: f64 = 0.05;
/// Per-trial draw cap; candidates needing more are rejected as infeasible.
pub const MAX_CALIBRATION_DRAWS: u64 = 1 << 23;

fn default_calibration_trials() -> usize {
    1000
}

/// Empirical calibration request for the sample-size constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub instance: InstanceSpec,
    /// Activation for synthetic instances (model layers use their own).
    #[serde(default = "default_activation")]
    pub activation: ActivationKind,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Monte-Carlo trials per candidate constant.
    #[serde(default = "default_calibration_trials")]
    pub trials: usize,
    pub seed: u64,
}

/// One candidate evaluation along the calibration path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationStep {
    pub c: f64,
    /// Sample size the bound demands at this constant.
    pub m: u64,
    /// Fraction of trials whose worst-function error exceeded epsilon.
    pub failure_fraction: f64,
    pub pass: bool,
}

/// Calibration outcome: the smallest constant (to the search tolerance)
/// whose bound-mandated sample size met the failure target empirically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub c: f64,
    pub m: u64,
    pub failure_fraction: f64,
    pub total_sensitivity: f64,
    pub path: Vec<CalibrationStep>,
}

/// Calibrates the constant on an explicit weighted set.
///
/// Each candidate `c` is judged by sampling `m = m(c)` draws per trial and
/// checking whether the worst-function additive error at a fresh ball query
/// stays within `eps`; the candidate passes when the failure fraction is at
/// most `delta`. Trials reuse the same substreams across candidates (common
/// random numbers), so the pass indicator is monotone in `c` up to Monte
/// Carlo noise and the exponential-bracket-plus-bisection search below is
/// well posed. The returned `c` is the passing end of the final bracket.
pub fn calibrate_c_on(
    ws: &WeightedSet,
    phi: ActivationKind,
    beta: f64,
    eps: f64,
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<CalibrationResult> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(invalid(
            "eps",
            format!("must be positive and finite, got {eps}"),
        ));
    }
    if !(delta.is_finite() && delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if trials == 0 {
        return Err(invalid("trials", "need at least one trial"));
    }
    let ball = QueryBall::new(beta)?;
    let plan = sampling_plan(ws, phi, &ball)?;
    let t = plan.total_sensitivity();
    let d = ws.dim();
    let k = ws.num_functions();

    let evaluate = |c: f64| -> Result<(u64, f64)> {
        let m = required_sample_size(t, d, eps, delta, c)?;
        if m > MAX_CALIBRATION_DRAWS {
            return Err(Error::NonConvergent(format!(
                "candidate c = {c} demands {m} draws per trial, above the cap of \
                 {MAX_CALIBRATION_DRAWS}"
            )));
        }
        let outcomes: Vec<Result<bool>> = par::map_indexed(trials, |trial| {
            let mut draw_rng = rng_from_seed(substream(seed, &[STREAM_TRIAL, trial as u64]));
            let draws = plan.draw_indices(m as usize, &mut draw_rng);
            let coreset = Coreset::from_draws(ws, &plan, &draws, None)?;
            let mut query_rng = rng_from_seed(substream(seed, &[STREAM_QUERIES, trial as u64]));
            let x = uniform_in_ball(&mut query_rng, d, beta);
            let failed = (0..k).any(|i| {
                (exact_neuron_sum(ws, phi, &x, i) - coreset.estimate(ws, phi, &x, i)).abs() > eps
            });
            Ok(failed)
        });
        let mut failures = 0usize;
        for o in outcomes {
            if o? {
                failures += 1;
            }
        }
        Ok((m, failures as f64 / trials as f64))
    };

    let mut steps: Vec<CalibrationStep> = Vec::new();
    let eval_step = |c: f64, steps: &mut Vec<CalibrationStep>| -> Result<bool> {
        let (m, failure_fraction) = evaluate(c)?;
        let pass = failure_fraction <= delta;
        steps.push(CalibrationStep {
            c,
            m,
            failure_fraction,
            pass,
        });
        Ok(pass)
    };

    let mut hi;
    let lo;
    if eval_step(1.0, &mut steps)? {
        // Passing at 1: shrink toward the floor until a failure brackets.
        hi = 1.0;
        let mut bracket_lo = None;
        let mut cand = 0.5;
        loop {
            if eval_step(cand, &mut steps)? {
                hi = cand;
                if cand <= CALIBRATION_C_FLOOR {
                    break;
                }
                cand /= 2.0;
            } else {
                bracket_lo = Some(cand);
                break;
            }
        }
        lo = bracket_lo;
    } else {
        // Failing at 1: grow toward the cap until a pass brackets.
        let mut bracket = None;
        let mut fail_at = 1.0;
        let mut cand = 2.0;
        while cand <= CALIBRATION_C_CAP {
            if eval_step(cand, &mut steps)? {
                bracket = Some((fail_at, cand));
                break;
            }
            fail_at = cand;
            cand *= 2.0;
        }
        let Some((found_lo, found_hi)) = bracket else {
            return Err(Error::NonConvergent(format!(
                "no constant up to {CALIBRATION_C_CAP} met the failure target"
            )));
        };
        hi = found_hi;
        lo = Some(found_lo);
    }

    if let Some(mut lo) = lo {
        while hi - lo > CALIBRATION_C_TOL {
            let mid = (lo + hi) / 2.0;
            if eval_step(mid, &mut steps)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    let chosen = steps
        .iter()
        .rev()
        .find(|s| s.c == hi && s.pass)
        .expect("the passing end of the bracket was evaluated")
        .clone();
    Ok(CalibrationResult {
        c: chosen.c,
        m: chosen.m,
        failure_fraction: chosen.failure_fraction,
        total_sensitivity: t,
        path: steps,
    })
}

/// Calibrates the constant for a config-described instance.
pub fn calibrate_c(eps: f64, delta: f64, config: &CalibrationConfig) -> Result<CalibrationResult> {
    let (ws, phi) = resolve_instance(&config.instance, config.activation, config.seed)?;
    calibrate_c_on(
        &ws,
        phi,
        config.beta,
        eps,
        delta,
        config.trials,
        config.seed,
    )
}
