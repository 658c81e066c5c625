//! Structured pruning pipeline: reduce a layer pair to a weighted-set
//! problem, sample a coreset of its units, and rebuild both layers so the
//! consumer computes exactly the coreset estimator.
//!
//! Dense pair `(i, i+1)`: the points are layer `i`'s weight rows (one per
//! neuron); weight function `i'` is row `i'` of layer `i+1`, so all
//! consumers share one support and each receives its own new weights.
//!
//! Conv pair `(l, l+1)`: the points are layer `l`'s flattened kernels (one
//! per output channel); there is one weight function per (next output
//! channel `i`, next-kernel spatial offset `j`), reading
//! `kernels[l+1][i][k][j]` across channels `k`. Rebuilding writes
//! `kernels'[i][s][j] = u_{(i,j)}(q_s)` over the surviving channels.

use serde::{Deserialize, Serialize};

use crate::activations::ActivationKind;
use crate::baselines::percentile_coreset;
use crate::coreset::{certified_epsilon, sampling_plan, Coreset, SamplingPlan};
use crate::error::{invalid, Error, Result};
use crate::network::{ConvLayer, DenseLayer, Layer, Network, Padding};
use crate::rng::{rng_from_seed, substream, STREAM_LAYER};
use crate::tensor::{Kernels, Matrix};
use crate::weighted_set::{QueryBall, WeightedSet};

/// Redraw cap when the caller requires an exact surviving width.
const MAX_REDRAWS: u32 = 64;

// --- method -----------------------------------------------------------------

/// Unit-selection method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PruneMethod {
    /// Sensitivity-sampled coreset (the main construction).
    Coreset,
    /// Uniform sampling with unbiased reweighting.
    Uniform,
    /// Deterministic top-norm selection, no reweighting.
    Percentile,
}

impl PruneMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PruneMethod::Coreset => "coreset",
            PruneMethod::Uniform => "uniform",
            PruneMethod::Percentile => "percentile",
        }
    }

    /// Stable id used in RNG stream derivation.
    pub fn stream_id(&self) -> u64 {
        match self {
            PruneMethod::Coreset => 0,
            PruneMethod::Uniform => 1,
            PruneMethod::Percentile => 2,
        }
    }
}

impl std::fmt::Display for PruneMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PruneMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coreset" => Ok(PruneMethod::Coreset),
            "uniform" => Ok(PruneMethod::Uniform),
            "percentile" => Ok(PruneMethod::Percentile),
            other => Err(invalid("method", format!("unknown method `{other}`"))),
        }
    }
}

// --- layer pair -> weighted set ----------------------------------------------

/// Weighted-set view of dense pair `(i, i+1)`: points are layer `i`'s weight
/// rows, weight functions are layer `i+1`'s rows.
pub fn dense_layer_to_weighted_set(net: &Network, i: usize) -> Result<WeightedSet> {
    let next =
        i.checked_add(1)
            .filter(|&j| j < net.num_layers())
            .ok_or(Error::IndexOutOfRange {
                index: i + 1,
                len: net.num_layers(),
            })?;
    let producer = net.layer(i)?.as_dense(i)?;
    let consumer = net.layer(next)?.as_dense(next)?;
    let points = producer.weights.to_rows();
    let weight_functions = consumer.weights.to_rows();
    WeightedSet::new(points, weight_functions)
}

/// Weighted-set view of conv pair `(l, l+1)`: points are layer `l`'s
/// flattened kernels; function `(i, j)` (stored at index
/// `i * kh' * kw' + j`) maps point `k` to `kernels[l+1][i][k][j]`.
pub fn conv_layer_to_weighted_set(net: &Network, l: usize) -> Result<WeightedSet> {
    let next =
        l.checked_add(1)
            .filter(|&j| j < net.num_layers())
            .ok_or(Error::IndexOutOfRange {
                index: l + 1,
                len: net.num_layers(),
            })?;
    let producer = net.layer(l)?.as_conv(l)?;
    let consumer = net.layer(next)?.as_conv(next)?;
    let n = producer.kernels.out_channels();
    let points: Vec<Vec<f64>> = (0..n)
        .map(|o| producer.kernels.kernel_flat(o).to_vec())
        .collect();
    let (kh, kw) = consumer.kernels.spatial();
    let q = consumer.kernels.out_channels();
    let mut weight_functions = Vec::with_capacity(q * kh * kw);
    for i in 0..q {
        for r in 0..kh {
            for c in 0..kw {
                weight_functions.push((0..n).map(|k| consumer.kernels.get(i, k, r, c)).collect());
            }
        }
    }
    WeightedSet::new(points, weight_functions)
}

// --- selection with optional exact-width redraws ------------------------------

fn select_coreset(
    ws: &WeightedSet,
    phi: ActivationKind,
    ball: &QueryBall,
    m: usize,
    method: PruneMethod,
    seed: u64,
    exact_width: bool,
) -> Result<(Coreset, u32)> {
    if method == PruneMethod::Percentile {
        return Ok((percentile_coreset(ws, m)?, 1));
    }
    let plan = match method {
        PruneMethod::Coreset => sampling_plan(ws, phi, ball)?,
        PruneMethod::Uniform => SamplingPlan::uniform(ws.len())?,
        PruneMethod::Percentile => unreachable!(),
    };
    // A sample of m draws can never hit more distinct points than have
    // positive probability.
    let target = m.min(plan.support_capacity());
    let mut widest: Option<Coreset> = None;
    let mut attempts = 0;
    for attempt in 0..MAX_REDRAWS {
        let attempt_seed = if attempt == 0 {
            seed
        } else {
            substream(seed, &[attempt as u64])
        };
        let mut rng = rng_from_seed(attempt_seed);
        let draws = plan.draw_indices(m, &mut rng);
        let cs = Coreset::from_draws(ws, &plan, &draws, Some(attempt_seed))?;
        attempts = attempt + 1;
        if !exact_width || cs.support_size() == target {
            return Ok((cs, attempts));
        }
        if widest
            .as_ref()
            .is_none_or(|w| cs.support_size() > w.support_size())
        {
            widest = Some(cs);
        }
    }
    // All redraws fell short; accept the widest support and report attempts.
    Ok((widest.expect("at least one attempt ran"), attempts))
}

struct PrunedPair {
    net: Network,
    coreset: Coreset,
    attempts: u32,
    point_dim: usize,
    original_width: usize,
}

fn prune_dense_pair(
    net: &Network,
    i: usize,
    m: usize,
    method: PruneMethod,
    beta: f64,
    seed: u64,
    exact_width: bool,
) -> Result<PrunedPair> {
    let ws = dense_layer_to_weighted_set(net, i)?;
    let producer = net.layer(i)?.as_dense(i)?;
    let width = producer.out_features();
    check_budget(m, width)?;
    let ball = QueryBall::new(beta)?;
    let (coreset, attempts) = select_coreset(
        &ws,
        producer.activation,
        &ball,
        m,
        method,
        seed,
        exact_width,
    )?;

    let consumer_idx = i + 1;
    let consumer = net.layer(consumer_idx)?.as_dense(consumer_idx)?;
    let support = coreset.support();
    let new_producer = DenseLayer::new(
        Matrix::from_rows(
            support
                .iter()
                .map(|&j| producer.weights.row(j).to_vec())
                .collect(),
        )?,
        support.iter().map(|&j| producer.bias[j]).collect(),
        producer.activation,
    )?;
    let new_consumer = DenseLayer::new(
        Matrix::from_rows(
            (0..consumer.out_features())
                .map(|f| coreset.new_weights(f).to_vec())
                .collect(),
        )?,
        consumer.bias.clone(),
        consumer.activation,
    )?;
    let mut layers = net.layers().to_vec();
    layers[i] = Layer::Dense(new_producer);
    layers[consumer_idx] = Layer::Dense(new_consumer);
    let rebuilt = Network::new(
        layers,
        net.input_shape().to_vec(),
        net.per_layer_beta().map(|b| b.to_vec()),
    )?;
    Ok(PrunedPair {
        net: rebuilt,
        coreset,
        attempts,
        point_dim: ws.dim(),
        original_width: width,
    })
}

fn prune_conv_pair(
    net: &Network,
    l: usize,
    m: usize,
    method: PruneMethod,
    beta: f64,
    seed: u64,
    exact_width: bool,
) -> Result<PrunedPair> {
    let next = l + 1;
    let producer = net.layer(l)?.as_conv(l)?;
    let consumer = net.layer(next)?.as_conv(next)?;
    for (idx, layer) in [(l, producer), (next, consumer)] {
        if layer.stride != (1, 1) || layer.padding != Padding::Valid {
            return Err(Error::Unsupported(format!(
                "channel pruning requires stride (1, 1) and valid padding; layer {idx} has stride \
                 {:?} and padding {:?}",
                layer.stride, layer.padding
            )));
        }
    }
    let ws = conv_layer_to_weighted_set(net, l)?;
    let width = producer.kernels.out_channels();
    check_budget(m, width)?;
    let ball = QueryBall::new(beta)?;
    let (coreset, attempts) = select_coreset(
        &ws,
        producer.activation,
        &ball,
        m,
        method,
        seed,
        exact_width,
    )?;

    let support = coreset.support();
    let (pkh, pkw) = producer.kernels.spatial();
    let in_c = producer.kernels.in_channels();
    let mut new_producer_kernels = Kernels::zeros(support.len(), in_c, pkh, pkw);
    for (s, &j) in support.iter().enumerate() {
        for ic in 0..in_c {
            for r in 0..pkh {
                for c in 0..pkw {
                    new_producer_kernels.set(s, ic, r, c, producer.kernels.get(j, ic, r, c));
                }
            }
        }
    }
    let new_producer = ConvLayer::new(
        new_producer_kernels,
        support.iter().map(|&j| producer.bias[j]).collect(),
        producer.activation,
        producer.stride,
        producer.padding,
    )?;

    let (kh, kw) = consumer.kernels.spatial();
    let q = consumer.kernels.out_channels();
    let mut new_consumer_kernels = Kernels::zeros(q, support.len(), kh, kw);
    for i in 0..q {
        for r in 0..kh {
            for c in 0..kw {
                let f = (i * kh + r) * kw + c;
                let u = coreset.new_weights(f);
                for (s, &w) in u.iter().enumerate() {
                    new_consumer_kernels.set(i, s, r, c, w);
                }
            }
        }
    }
    let new_consumer = ConvLayer::new(
        new_consumer_kernels,
        consumer.bias.clone(),
        consumer.activation,
        consumer.stride,
        consumer.padding,
    )?;

    let mut layers = net.layers().to_vec();
    layers[l] = Layer::Conv2d(new_producer);
    layers[next] = Layer::Conv2d(new_consumer);
    let rebuilt = Network::new(
        layers,
        net.input_shape().to_vec(),
        net.per_layer_beta().map(|b| b.to_vec()),
    )?;
    Ok(PrunedPair {
        net: rebuilt,
        coreset,
        attempts,
        point_dim: ws.dim(),
        original_width: width,
    })
}

fn check_budget(m: usize, width: usize) -> Result<()> {
    if m == 0 {
        return Err(invalid("budget", "must be at least 1"));
    }
    if m > width {
        return Err(Error::BudgetExceedsWidth { budget: m, width });
    }
    Ok(())
}

/// Prunes dense pair `(i, i+1)` to budget `m`. Deterministic given `seed`.
pub fn prune_dense(
    net: &Network,
    i: usize,
    m: usize,
    method: PruneMethod,
    beta: f64,
    seed: u64,
) -> Result<(Network, Coreset)> {
    let pair = prune_dense_pair(net, i, m, method, beta, seed, false)?;
    Ok((pair.net, pair.coreset))
}

/// Prunes conv pair `(l, l+1)` to `m` output channels. Only stride-(1, 1),
/// valid-padding pairs are supported. Deterministic given `seed`.
pub fn prune_conv(
    net: &Network,
    l: usize,
    m: usize,
    method: PruneMethod,
    beta: f64,
    seed: u64,
) -> Result<(Network, Coreset)> {
    let pair = prune_conv_pair(net, l, m, method, beta, seed, false)?;
    Ok((pair.net, pair.coreset))
}

// --- whole-network pruning -----------------------------------------------------

/// Whole-network pruning request.
#[derive(Debug, Clone)]
pub struct PruneSpec {
    /// One budget per prunable layer, in layer order.
    pub budgets: Vec<usize>,
    pub method: PruneMethod,
    /// Ball radius on the network input, used when no explicit per-layer
    /// beta is available (propagated through the layers).
    pub input_beta: f64,
    /// Explicit per-layer input-norm bounds (one entry per layer); overrides
    /// both the model's stored bounds and propagation.
    pub per_layer_beta: Option<Vec<f64>>,
    /// Report the certified additive accuracy at this failure probability.
    pub delta: Option<f64>,
    /// Constant in the sample-size bound.
    pub c: f64,
    pub seed: u64,
    /// Redraw (up to 64 times per layer) until the support reaches the
    /// budget (or the number of selectable points, whichever is smaller).
    pub exact_width: bool,
}

impl PruneSpec {
    pub fn new(budgets: Vec<usize>, method: PruneMethod, seed: u64) -> Self {
        PruneSpec {
            budgets,
            method,
            input_beta: 1.0,
            per_layer_beta: None,
            delta: None,
            c: 1.0,
            seed,
            exact_width: false,
        }
    }
}

/// Per-layer outcome of a pruning run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerReport {
    /// Index of the pruned (producer) layer.
    pub layer: usize,
    pub original_width: usize,
    /// Width of the rebuilt layer (= distinct support size).
    pub new_width: usize,
    /// Requested sample budget `m`.
    pub budget: usize,
    /// Ball radius used for this layer's sensitivities.
    pub beta: f64,
    /// Substream seed the layer was sampled with (attempt 0).
    pub seed: Option<u64>,
    /// Sampling attempts consumed (> 1 only under exact-width redraws).
    pub attempts: u32,
    /// Total sensitivity `t` (sensitivity method only).
    pub total_sensitivity: Option<f64>,
    /// Additive accuracy certified by the sample-size bound at `m`, when a
    /// failure probability was supplied (sensitivity method only).
    pub certified_epsilon: Option<f64>,
}

/// Outcome of [`prune_network`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneReport {
    pub method: PruneMethod,
    pub seed: u64,
    pub exact_width: bool,
    pub layers: Vec<LayerReport>,
}

/// Indices `i` such that layers `i` and `i+1` form a prunable pair (both
/// dense or both conv).
pub fn prunable_layers(net: &Network) -> Vec<usize> {
    let layers = net.layers();
    (0..layers.len().saturating_sub(1))
        .filter(|&i| {
            matches!(
                (&layers[i], &layers[i + 1]),
                (Layer::Dense(_), Layer::Dense(_)) | (Layer::Conv2d(_), Layer::Conv2d(_))
            )
        })
        .collect()
}

/// Resolves the per-layer beta list: explicit spec override, else the
/// model's stored bounds, else propagation from the input-ball radius.
fn resolve_betas(net: &Network, spec: &PruneSpec) -> Result<Vec<f64>> {
    if let Some(betas) = &spec.per_layer_beta {
        if betas.len() != net.num_layers() {
            return Err(invalid(
                "per_layer_beta",
                format!("{} entries for {} layers", betas.len(), net.num_layers()),
            ));
        }
        if let Some(b) = betas.iter().find(|b| !b.is_finite() || **b <= 0.0) {
            return Err(invalid(
                "per_layer_beta",
                format!("entries must be positive, got {b}"),
            ));
        }
        return Ok(betas.clone());
    }
    if let Some(betas) = net.per_layer_beta() {
        return Ok(betas.to_vec());
    }
    propagate_beta(net, spec.input_beta)
}

/// Prunes every prunable layer bottom-to-top, each against the
/// already-pruned predecessor stack. Layer `i` samples from substream
/// `(seed, layer i)`, so results are reproducible from the single spec seed.
pub fn prune_network(net: &Network, spec: &PruneSpec) -> Result<(Network, PruneReport)> {
    let pairs = prunable_layers(net);
    if spec.budgets.len() != pairs.len() {
        return Err(invalid(
            "budgets",
            format!(
                "{} budgets for {} prunable layers",
                spec.budgets.len(),
                pairs.len()
            ),
        ));
    }
    if !(spec.c.is_finite() && spec.c > 0.0) {
        return Err(invalid("c", format!("must be positive, got {}", spec.c)));
    }
    if let Some(d) = spec.delta {
        if !(d.is_finite() && d > 0.0 && d < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {d}")));
        }
    }
    let betas = resolve_betas(net, spec)?;
    let mut current = net.clone();
    let mut reports = Vec::with_capacity(pairs.len());
    for (slot, &i) in pairs.iter().enumerate() {
        let m = spec.budgets[slot];
        let beta = betas[i];
        let layer_seed = substream(spec.seed, &[STREAM_LAYER, i as u64]);
        let pair = match current.layers()[i] {
            Layer::Dense(_) => prune_dense_pair(
                &current,
                i,
                m,
                spec.method,
                beta,
                layer_seed,
                spec.exact_width,
            ),
            Layer::Conv2d(_) => prune_conv_pair(
                &current,
                i,
                m,
                spec.method,
                beta,
                layer_seed,
                spec.exact_width,
            ),
            Layer::Flatten => unreachable!("flatten layers are never prunable"),
        }
        .map_err(|e| e.at_layer(i))?;

        let sampled = spec.method != PruneMethod::Percentile;
        let total_sensitivity = if spec.method == PruneMethod::Coreset {
            pair.coreset.plan().map(|p| p.total_sensitivity())
        } else {
            None
        };
        let certified = match (spec.method, spec.delta, total_sensitivity) {
            (PruneMethod::Coreset, Some(delta), Some(t)) => Some(certified_epsilon(
                t,
                pair.point_dim,
                m as u64,
                delta,
                spec.c,
            )?),
            _ => None,
        };
        reports.push(LayerReport {
            layer: i,
            original_width: pair.original_width,
            new_width: pair.coreset.support_size(),
            budget: m,
            beta,
            seed: sampled.then_some(layer_seed),
            attempts: pair.attempts,
            total_sensitivity,
            certified_epsilon: certified,
        });
        current = pair.net;
    }
    Ok((
        current,
        PruneReport {
            method: spec.method,
            seed: spec.seed,
            exact_width: spec.exact_width,
            layers: reports,
        },
    ))
}

// --- beta propagation ------------------------------------------------------------

/// Propagates an input-ball radius through the network: entry `i` bounds the
/// Euclidean norm of layer `i`'s input, and the final entry bounds the
/// network output (`len = num_layers + 1`).
///
/// For a layer with `n` scalar outputs, point-norm bound `alpha`, and
/// activation `phi`, every output lies in `[0, sup |phi| on [-alpha*beta,
/// alpha*beta]]`, so the output norm is at most `sqrt(n)` times that bound.
/// Flatten preserves norms. Biases are outside the bound's scope and are
/// ignored here, matching the sensitivity analysis.
pub fn propagate_beta(net: &Network, input_beta: f64) -> Result<Vec<f64>> {
    if !input_beta.is_finite() || input_beta <= 0.0 {
        return Err(invalid(
            "input_beta",
            format!("must be positive and finite, got {input_beta}"),
        ));
    }
    let shapes = net.shape_chain()?;
    let mut betas = Vec::with_capacity(net.num_layers() + 1);
    let mut beta = input_beta;
    betas.push(beta);
    for (i, layer) in net.layers().iter().enumerate() {
        beta = match layer {
            Layer::Dense(d) => {
                let alpha = (0..d.out_features())
                    .map(|r| d.weights.row_norm(r))
                    .fold(0.0f64, f64::max);
                let reach = alpha * beta;
                let sup = d.activation.sup_abs_on_interval(-reach, reach)?;
                (d.out_features() as f64).sqrt() * sup
            }
            Layer::Conv2d(c) => {
                let alpha = (0..c.kernels.out_channels())
                    .map(|o| c.kernels.kernel_norm(o))
                    .fold(0.0f64, f64::max);
                let reach = alpha * beta;
                let sup = c.activation.sup_abs_on_interval(-reach, reach)?;
                let scalar_outputs: usize = shapes[i + 1].iter().product();
                (scalar_outputs as f64).sqrt() * sup
            }
            Layer::Flatten => beta,
        };
        if !beta.is_finite() {
            return Err(invalid(
                "beta",
                format!("propagated bound overflowed at layer {i}"),
            ));
        }
        if beta > 0.0 && beta < f64::MIN_POSITIVE {
            beta = 0.0;
        }
        betas.push(beta);
    }
    Ok(betas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_vec, uniform_in_ball};
    use crate::tensor::Tensor;

    fn dense_net(dims: &[usize], acts: &[ActivationKind], seed: u64) -> Network {
        assert_eq!(dims.len(), acts.len() + 1);
        let mut rng = rng_from_seed(seed);
        let mut layers = Vec::new();
        for (w, &act) in dims.windows(2).zip(acts) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weights: Vec<f64> = normal_vec(&mut rng, fan_out * fan_in)
                .iter()
                .map(|v| v * scale)
                .collect();
            let bias: Vec<f64> = normal_vec(&mut rng, fan_out)
                .iter()
                .map(|v| v * 0.1)
                .collect();
            layers.push(Layer::Dense(
                DenseLayer::new(
                    Matrix::from_flat(fan_out, fan_in, weights).unwrap(),
                    bias,
                    act,
                )
                .unwrap(),
            ));
        }
        Network::new(layers, vec![dims[0]], None).unwrap()
    }

    fn conv_net(seed: u64) -> Network {
        let mut rng = rng_from_seed(seed);
        let mut kernels0 = Kernels::zeros(5, 2, 3, 3);
        for (slot, v) in normal_vec(&mut rng, 5 * 2 * 3 * 3).into_iter().enumerate() {
            kernels0.data_mut()[slot] = v * 0.3;
        }
        let mut kernels1 = Kernels::zeros(3, 5, 2, 2);
        for (slot, v) in normal_vec(&mut rng, 3 * 5 * 2 * 2).into_iter().enumerate() {
            kernels1.data_mut()[slot] = v * 0.3;
        }
        let bias0: Vec<f64> = normal_vec(&mut rng, 5).iter().map(|v| v * 0.1).collect();
        let bias1: Vec<f64> = normal_vec(&mut rng, 3).iter().map(|v| v * 0.1).collect();
        Network::new(
            vec![
                Layer::Conv2d(
                    ConvLayer::new(
                        kernels0,
                        bias0,
                        ActivationKind::Relu,
                        (1, 1),
                        Padding::Valid,
                    )
                    .unwrap(),
                ),
                Layer::Conv2d(
                    ConvLayer::new(
                        kernels1,
                        bias1,
                        ActivationKind::Sigmoid,
                        (1, 1),
                        Padding::Valid,
                    )
                    .unwrap(),
                ),
            ],
            vec![2, 6, 6],
            None,
        )
        .unwrap()
    }

    #[test]
    fn dense_extraction_shapes() {
        let net = dense_net(
            &[3, 7, 2],
            &[ActivationKind::Relu, ActivationKind::Sigmoid],
            11,
        );
        let ws = dense_layer_to_weighted_set(&net, 0).unwrap();
        assert_eq!(ws.len(), 7);
        assert_eq!(ws.dim(), 3);
        assert_eq!(ws.num_functions(), 2);
        let d0 = net.layer(0).unwrap().as_dense(0).unwrap();
        let d1 = net.layer(1).unwrap().as_dense(1).unwrap();
        assert_eq!(ws.point(4), d0.weights.row(4));
        assert_eq!(ws.weight_function(1), d1.weights.row(1));
    }

    #[test]
    fn dense_extraction_rejects_wrong_types() {
        let net = conv_net(3);
        let err = dense_layer_to_weighted_set(&net, 0).unwrap_err();
        assert!(matches!(err, Error::LayerTypeMismatch { .. }), "{err}");
        let net = dense_net(&[3, 4, 2], &[ActivationKind::Relu, ActivationKind::Relu], 5);
        let err = dense_layer_to_weighted_set(&net, 1).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { .. }), "{err}");
    }

    #[test]
    fn conv_extraction_indexing() {
        let net = conv_net(7);
        let ws = conv_layer_to_weighted_set(&net, 0).unwrap();
        assert_eq!(ws.len(), 5);
        assert_eq!(ws.dim(), 2 * 3 * 3);
        assert_eq!(ws.num_functions(), 3 * 2 * 2);
        let consumer = net.layer(1).unwrap().as_conv(1).unwrap();
        // Function (i, r, c) at flat index (i*kh + r)*kw + c reads channel k.
        for (i, r, c, k) in [(0, 0, 0, 0), (1, 1, 0, 3), (2, 1, 1, 4)] {
            let f = (i * 2 + r) * 2 + c;
            assert_eq!(ws.weight_function(f)[k], consumer.kernels.get(i, k, r, c));
        }
        let producer = net.layer(0).unwrap().as_conv(0).unwrap();
        assert_eq!(ws.point(2), producer.kernels.kernel_flat(2));
    }

    #[test]
    fn frozen_two_neuron_example() {
        // Producer I2 with relu, consumer row (1, 1), beta 1: both
        // sensitivities are relu(1) = 1, so pr = (1/2, 1/2) and a single
        // draw rebuilds the consumer weight as w / pr / 1 = 2.
        let layers = vec![
            Layer::Dense(
                DenseLayer::new(
                    Matrix::from_rows(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
                    vec![0.0, 0.0],
                    ActivationKind::Relu,
                )
                .unwrap(),
            ),
            Layer::Dense(
                DenseLayer::new(
                    Matrix::from_rows(vec![vec![1.0, 1.0]]).unwrap(),
                    vec![0.0],
                    ActivationKind::Relu,
                )
                .unwrap(),
            ),
        ];
        let net = Network::new(layers, vec![2], None).unwrap();
        let ws = dense_layer_to_weighted_set(&net, 0).unwrap();
        let plan = sampling_plan(&ws, ActivationKind::Relu, &QueryBall::new(1.0).unwrap()).unwrap();
        assert_eq!(plan.probabilities(), &[0.5, 0.5]);
        let (pruned, coreset) = prune_dense(&net, 0, 1, PruneMethod::Coreset, 1.0, 99).unwrap();
        assert_eq!(coreset.support_size(), 1);
        let consumer = pruned.layer(1).unwrap().as_dense(1).unwrap();
        assert_eq!(consumer.weights.row(0), &[2.0]);
        let producer = pruned.layer(0).unwrap().as_dense(0).unwrap();
        assert_eq!(producer.out_features(), 1);
    }

    #[test]
    fn support_is_shared_across_consumers() {
        let net = dense_net(
            &[2, 7, 2],
            &[ActivationKind::Relu, ActivationKind::Sigmoid],
            21,
        );
        let (pruned, coreset) = prune_dense(&net, 0, 4, PruneMethod::Coreset, 1.0, 5).unwrap();
        let s = coreset.support_size();
        assert!((1..=4).contains(&s));
        let producer = pruned.layer(0).unwrap().as_dense(0).unwrap();
        let consumer = pruned.layer(1).unwrap().as_dense(1).unwrap();
        assert_eq!(producer.out_features(), s);
        assert_eq!(consumer.in_features(), s);
        // Support indices must be strictly increasing positions of the
        // original producer.
        let support = coreset.support();
        assert!(support.windows(2).all(|w| w[0] < w[1]));
        assert!(support.iter().all(|&j| j < 7));
    }

    #[test]
    fn pruned_dense_matches_estimator_oracle() {
        let net = dense_net(
            &[3, 8, 4],
            &[ActivationKind::Sigmoid, ActivationKind::Relu],
            31,
        );
        for (method, seed) in [
            (PruneMethod::Coreset, 1u64),
            (PruneMethod::Uniform, 2),
            (PruneMethod::Percentile, 3),
        ] {
            let beta = 1.5;
            let (pruned, coreset) = prune_dense(&net, 0, 5, method, beta, seed).unwrap();
            let original_first = net.layer(0).unwrap().as_dense(0).unwrap();
            let consumer_bias = net.layer(1).unwrap().as_dense(1).unwrap().bias.clone();
            let mut rng = rng_from_seed(seed ^ 0xabcd);
            for _ in 0..20 {
                let x = Tensor::vector(uniform_in_ball(&mut rng, 3, beta)).unwrap();
                // Original neuron outputs, biases included.
                let pre = net.forward_linear_part(0, &x).unwrap();
                let a: Vec<f64> = pre
                    .data()
                    .iter()
                    .map(|&z| original_first.activation.eval(z))
                    .collect();
                let got = pruned.forward_linear_part(1, &x).unwrap();
                for (f, &bias) in consumer_bias.iter().enumerate() {
                    let est: f64 = coreset
                        .support()
                        .iter()
                        .enumerate()
                        .map(|(s, &j)| coreset.new_weights(f)[s] * a[j])
                        .sum::<f64>()
                        + bias;
                    assert!(
                        (got.data()[f] - est).abs() <= 1e-10,
                        "{method}: got {} want {est}",
                        got.data()[f]
                    );
                }
            }
        }
    }

    #[test]
    fn pruned_conv_matches_estimator_oracle() {
        let net = conv_net(41);
        let beta = 2.0;
        let (pruned, coreset) = prune_conv(&net, 0, 3, PruneMethod::Coreset, beta, 17).unwrap();
        let producer = net.layer(0).unwrap().as_conv(0).unwrap();
        let consumer = net.layer(1).unwrap().as_conv(1).unwrap();
        let mut rng = rng_from_seed(900);
        for _ in 0..5 {
            let x = Tensor::new(vec![2, 6, 6], uniform_in_ball(&mut rng, 72, beta)).unwrap();
            // Original layer-0 activation map, shape [5, 4, 4].
            let pre = net.forward_linear_part(0, &x).unwrap();
            let act: Vec<f64> = pre
                .data()
                .iter()
                .map(|&z| producer.activation.eval(z))
                .collect();
            let amap = Tensor::new(vec![5, 4, 4], act).unwrap();
            let got = pruned.forward_linear_part(1, &x).unwrap();
            assert_eq!(got.shape(), &[3, 3, 3]);
            for i in 0..3 {
                for y in 0..3 {
                    for xx in 0..3 {
                        let mut acc = consumer.bias[i];
                        for r in 0..2 {
                            for c in 0..2 {
                                let f = (i * 2 + r) * 2 + c;
                                let u = coreset.new_weights(f);
                                for (s, &j) in coreset.support().iter().enumerate() {
                                    acc += u[s] * amap.get3(j, y + r, xx + c);
                                }
                            }
                        }
                        let have = got.get3(i, y, xx);
                        assert!(
                            (have - acc).abs() <= 1e-10,
                            "channel {i} at ({y},{xx}): got {have} want {acc}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn percentile_full_budget_is_identity() {
        let net = dense_net(
            &[4, 9, 3],
            &[ActivationKind::Softplus, ActivationKind::Relu],
            55,
        );
        let (pruned, coreset) = prune_dense(&net, 0, 9, PruneMethod::Percentile, 1.0, 0).unwrap();
        assert_eq!(coreset.support(), (0..9).collect::<Vec<_>>().as_slice());
        let mut rng = rng_from_seed(77);
        for _ in 0..10 {
            let x = Tensor::vector(uniform_in_ball(&mut rng, 4, 1.0)).unwrap();
            let a = net.forward(&x).unwrap();
            let b = pruned.forward(&x).unwrap();
            assert_eq!(a.data(), b.data());
        }
    }

    #[test]
    fn budget_bounds_are_enforced() {
        let net = dense_net(&[3, 6, 2], &[ActivationKind::Relu, ActivationKind::Relu], 1);
        let err = prune_dense(&net, 0, 0, PruneMethod::Coreset, 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { .. }), "{err}");
        let err = prune_dense(&net, 0, 7, PruneMethod::Coreset, 1.0, 0).unwrap_err();
        assert!(
            matches!(
                err,
                Error::BudgetExceedsWidth {
                    budget: 7,
                    width: 6
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn conv_geometry_restrictions() {
        let mut rng = rng_from_seed(13);
        let mut k0 = Kernels::zeros(2, 1, 3, 3);
        for (slot, v) in normal_vec(&mut rng, 2 * 9).into_iter().enumerate() {
            k0.data_mut()[slot] = v;
        }
        let mut k1 = Kernels::zeros(1, 2, 2, 2);
        for (slot, v) in normal_vec(&mut rng, 8).into_iter().enumerate() {
            k1.data_mut()[slot] = v;
        }
        let net = Network::new(
            vec![
                Layer::Conv2d(
                    ConvLayer::new(
                        k0,
                        vec![0.0; 2],
                        ActivationKind::Relu,
                        (2, 2),
                        Padding::Valid,
                    )
                    .unwrap(),
                ),
                Layer::Conv2d(
                    ConvLayer::new(k1, vec![0.0], ActivationKind::Relu, (1, 1), Padding::Valid)
                        .unwrap(),
                ),
            ],
            vec![1, 5, 5],
            None,
        )
        .unwrap();
        let err = prune_conv(&net, 0, 1, PruneMethod::Coreset, 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)), "{err}");
    }

    #[test]
    fn network_pruning_shapes_and_report() {
        // LeNet-300-100 style stack, scaled down only in the input so the
        // test stays fast: 64 -> 300 -> 100 -> 10.
        let net = dense_net(
            &[64, 300, 100, 10],
            &[
                ActivationKind::Relu,
                ActivationKind::Relu,
                ActivationKind::Sigmoid,
            ],
            2024,
        );
        assert_eq!(prunable_layers(&net), vec![0, 1]);
        let mut spec = PruneSpec::new(vec![30, 10], PruneMethod::Coreset, 7);
        spec.exact_width = true;
        spec.delta = Some(0.1);
        let (pruned, report) = prune_network(&net, &spec).unwrap();
        assert_eq!(report.layers.len(), 2);
        assert_eq!(report.layers[0].new_width, 30);
        assert_eq!(report.layers[1].new_width, 10);
        assert_eq!(report.layers[0].original_width, 300);
        assert_eq!(report.layers[1].original_width, 100);
        assert!(report
            .layers
            .iter()
            .all(|l| l.total_sensitivity.unwrap() > 0.0));
        assert!(report
            .layers
            .iter()
            .all(|l| l.certified_epsilon.unwrap() > 0.0));
        let dims: Vec<usize> = (0..3)
            .map(|i| pruned.layer(i).unwrap().as_dense(i).unwrap().out_features())
            .collect();
        assert_eq!(dims, vec![30, 10, 10]);
        // Forward pass through the pruned stack works on a ball input.
        let mut rng = rng_from_seed(5);
        let x = Tensor::vector(uniform_in_ball(&mut rng, 64, 1.0)).unwrap();
        let out = pruned.forward(&x).unwrap();
        assert_eq!(out.len(), 10);
        // Round-trip the report through JSON.
        let text = serde_json::to_string(&report).unwrap();
        let back: PruneReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.layers[0].new_width, 30);
        assert_eq!(back.method, PruneMethod::Coreset);
        assert_eq!(back.layers[0].seed, report.layers[0].seed);
    }

    #[test]
    fn network_pruning_is_deterministic() {
        let net = dense_net(
            &[8, 40, 20, 5],
            &[
                ActivationKind::Relu,
                ActivationKind::Sigmoid,
                ActivationKind::Relu,
            ],
            3,
        );
        let spec = PruneSpec::new(vec![12, 6], PruneMethod::Coreset, 42);
        let (a, ra) = prune_network(&net, &spec).unwrap();
        let (b, rb) = prune_network(&net, &spec).unwrap();
        assert_eq!(model_bits(&a), model_bits(&b));
        assert_eq!(ra.layers[0].new_width, rb.layers[0].new_width);
        // A different seed changes the substream fed to layer sampling.
        let spec2 = PruneSpec::new(vec![12, 6], PruneMethod::Coreset, 43);
        let (_, r2) = prune_network(&net, &spec2).unwrap();
        assert_ne!(ra.layers[0].seed, r2.layers[0].seed);
    }

    fn model_bits(net: &Network) -> Vec<u64> {
        let mut bits = Vec::new();
        for layer in net.layers() {
            match layer {
                Layer::Dense(d) => {
                    bits.extend(d.weights.data().iter().map(|v| v.to_bits()));
                    bits.extend(d.bias.iter().map(|v| v.to_bits()));
                }
                Layer::Conv2d(c) => {
                    bits.extend(c.kernels.data().iter().map(|v| v.to_bits()));
                    bits.extend(c.bias.iter().map(|v| v.to_bits()));
                }
                Layer::Flatten => {}
            }
        }
        bits
    }

    #[test]
    fn budgets_must_match_prunable_pairs() {
        let net = dense_net(
            &[4, 10, 5],
            &[ActivationKind::Relu, ActivationKind::Relu],
            9,
        );
        let spec = PruneSpec::new(vec![3, 3], PruneMethod::Coreset, 0);
        let err = prune_network(&net, &spec).unwrap_err();
        assert!(
            matches!(
                err,
                Error::InvalidParameter {
                    name: "budgets",
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn layer_errors_carry_layer_index() {
        // Second pair gets an impossible budget; the error must name layer 1.
        let net = dense_net(
            &[4, 10, 5, 2],
            &[
                ActivationKind::Relu,
                ActivationKind::Relu,
                ActivationKind::Relu,
            ],
            9,
        );
        let spec = PruneSpec::new(vec![3, 9], PruneMethod::Coreset, 0);
        let err = prune_network(&net, &spec).unwrap_err();
        match err {
            Error::AtLayer { layer, source } => {
                assert_eq!(layer, 1);
                assert!(matches!(*source, Error::BudgetExceedsWidth { .. }));
            }
            other => panic!("expected AtLayer, got {other}"),
        }
    }

    #[test]
    fn exact_width_redraws_until_full_support() {
        let net = dense_net(
            &[3, 4, 2],
            &[ActivationKind::Relu, ActivationKind::Relu],
            77,
        );
        let mut spec = PruneSpec::new(vec![3], PruneMethod::Uniform, 123);
        spec.exact_width = true;
        let (_, report) = prune_network(&net, &spec).unwrap();
        assert_eq!(report.layers[0].new_width, 3);
        assert!(report.layers[0].attempts >= 1);
    }

    #[test]
    fn propagate_beta_frozen_values() {
        // Four unit-norm relu rows: alpha = 1, sup relu on [-1, 1] is 1,
        // so the next bound is sqrt(4) = 2.
        let net = dense_net(&[4, 4, 2], &[ActivationKind::Relu, ActivationKind::Relu], 0);
        let mut layers = net.layers().to_vec();
        layers[0] = Layer::Dense(
            DenseLayer::new(
                Matrix::from_rows(vec![
                    vec![1.0, 0.0, 0.0, 0.0],
                    vec![0.0, 1.0, 0.0, 0.0],
                    vec![0.0, 0.0, 1.0, 0.0],
                    vec![0.0, 0.0, 0.0, 1.0],
                ])
                .unwrap(),
                vec![0.0; 4],
                ActivationKind::Relu,
            )
            .unwrap(),
        );
        let net = Network::new(layers, vec![4], None).unwrap();
        let betas = propagate_beta(&net, 1.0).unwrap();
        assert_eq!(betas.len(), 3);
        assert_eq!(betas[0], 1.0);
        assert_eq!(betas[1], 2.0);

        // One gauss unit with unit weight: sup of e^{-x} on [-1, 1] is e.
        let g = Network::new(
            vec![Layer::Dense(
                DenseLayer::new(
                    Matrix::from_rows(vec![vec![1.0]]).unwrap(),
                    vec![0.0],
                    ActivationKind::Gauss,
                )
                .unwrap(),
            )],
            vec![1],
            None,
        )
        .unwrap();
        let betas = propagate_beta(&g, 1.0).unwrap();
        assert_eq!(betas[1], std::f64::consts::E);
    }

    #[test]
    fn propagate_beta_passes_through_flatten() {
        let mut rng = rng_from_seed(6);
        let mut k = Kernels::zeros(2, 1, 2, 2);
        for (slot, v) in normal_vec(&mut rng, 8).into_iter().enumerate() {
            k.data_mut()[slot] = v;
        }
        let net = Network::new(
            vec![
                Layer::Conv2d(
                    ConvLayer::new(
                        k,
                        vec![0.0; 2],
                        ActivationKind::Sigmoid,
                        (1, 1),
                        Padding::Valid,
                    )
                    .unwrap(),
                ),
                Layer::Flatten,
                Layer::Dense(
                    DenseLayer::new(
                        Matrix::from_flat(1, 18, vec![0.1; 18]).unwrap(),
                        vec![0.0],
                        ActivationKind::Relu,
                    )
                    .unwrap(),
                ),
            ],
            vec![1, 4, 4],
            None,
        )
        .unwrap();
        let betas = propagate_beta(&net, 2.0).unwrap();
        assert_eq!(betas.len(), 4);
        assert_eq!(betas[1], betas[2]);
        // Conv output is [2, 3, 3]: 18 scalars, each bounded by sup sigmoid.
        let producer = net.layer(0).unwrap().as_conv(0).unwrap();
        let alpha = (0..2)
            .map(|o| producer.kernels.kernel_norm(o))
            .fold(0.0f64, f64::max);
        let sup = ActivationKind::Sigmoid
            .sup_abs_on_interval(-alpha * 2.0, alpha * 2.0)
            .unwrap();
        assert_eq!(betas[1], 18f64.sqrt() * sup);
    }

    #[test]
    fn spec_beta_resolution_order() {
        let net = dense_net(
            &[3, 5, 2],
            &[ActivationKind::Relu, ActivationKind::Relu],
            88,
        );
        // Explicit per-layer list wins over propagation.
        let mut spec = PruneSpec::new(vec![2], PruneMethod::Coreset, 1);
        spec.per_layer_beta = Some(vec![0.5, 0.5]);
        let (_, report) = prune_network(&net, &spec).unwrap();
        assert_eq!(report.layers[0].beta, 0.5);
        // Model-stored bounds win over propagation when present.
        let stored = Network::new(net.layers().to_vec(), vec![3], Some(vec![0.25, 4.0])).unwrap();
        let spec = PruneSpec::new(vec![2], PruneMethod::Coreset, 1);
        let (_, report) = prune_network(&stored, &spec).unwrap();
        assert_eq!(report.layers[0].beta, 0.25);
        // Wrong override length is rejected.
        let mut bad = PruneSpec::new(vec![2], PruneMethod::Coreset, 1);
        bad.per_layer_beta = Some(vec![1.0]);
        assert!(prune_network(&net, &bad).is_err());
    }

    #[test]
    fn method_parsing_and_serde() {
        use std::str::FromStr;
        assert_eq!(
            PruneMethod::from_str("coreset").unwrap(),
            PruneMethod::Coreset
        );
        assert_eq!(
            PruneMethod::from_str("uniform").unwrap(),
            PruneMethod::Uniform
        );
        assert_eq!(
            PruneMethod::from_str("percentile").unwrap(),
            PruneMethod::Percentile
        );
        assert!(PruneMethod::from_str("topk").is_err());
        assert_eq!(
            serde_json::to_string(&PruneMethod::Coreset).unwrap(),
            "\"coreset\""
        );
        let m: PruneMethod = serde_json::from_str("\"percentile\"").unwrap();
        assert_eq!(m, PruneMethod::Percentile);
        assert_eq!(PruneMethod::Coreset.stream_id(), 0);
        assert_eq!(PruneMethod::Uniform.stream_id(), 1);
        assert_eq!(PruneMethod::Percentile.stream_id(), 2);
    }
}
