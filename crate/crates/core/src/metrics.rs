//! Approximation-error metrics, at the single-neuron level (weighted-set
//! estimators) and at the whole-network level (L1 output deviation).

use crate::activations::ActivationKind;
use crate::coreset::Coreset;
use crate::error::{invalid, Error, Result};
use crate::network::Network;
use crate::par;
use crate::tensor::Tensor;
use crate::weighted_set::WeightedSet;

/// The exact target quantity `sum_p w_i(p) phi(p . x)`.
pub fn exact_neuron_sum(ws: &WeightedSet, phi: ActivationKind, x: &[f64], i: usize) -> f64 {
    (0..ws.len())
        .map(|j| ws.weight(i, j) * phi.eval(ws.point_dot(j, x)))
        .sum()
}

/// Mean absolute deviation between the exact sums and the coreset estimates,
/// averaged over all queries and all `k` weight functions.
pub fn neuron_additive_error(
    ws: &WeightedSet,
    coreset: &Coreset,
    phi: ActivationKind,
    queries: &[Vec<f64>],
) -> Result<f64> {
    if queries.is_empty() {
        return Err(invalid("queries", "need at least one query"));
    }
    if coreset.num_functions() != ws.num_functions() {
        return Err(Error::ShapeMismatch(format!(
            "coreset carries {} weight functions, set has {}",
            coreset.num_functions(),
            ws.num_functions()
        )));
    }
    for (qi, q) in queries.iter().enumerate() {
        if q.len() != ws.dim() {
            return Err(Error::ShapeMismatch(format!(
                "query {qi} has dimension {}, points have {}",
                q.len(),
                ws.dim()
            )));
        }
    }
    let k = ws.num_functions();
    // Parallel over queries; the outer mean is a sequential fold for
    // bit-stable results.
    let per_query: Vec<f64> = par::map_indexed(queries.len(), |qi| {
        let x = &queries[qi];
        (0..k)
            .map(|i| (exact_neuron_sum(ws, phi, x, i) - coreset.estimate(ws, phi, x, i)).abs())
            .sum::<f64>()
            / k as f64
    });
    Ok(per_query.iter().sum::<f64>() / queries.len() as f64)
}

/// Mean L1 distance between the outputs of two networks over a query batch.
pub fn network_l1_error(original: &Network, pruned: &Network, queries: &[Tensor]) -> Result<f64> {
    if queries.is_empty() {
        return Err(invalid("queries", "need at least one query"));
    }
    if original.input_shape() != pruned.input_shape() {
        return Err(Error::ShapeMismatch(format!(
            "input shapes differ: {:?} vs {:?}",
            original.input_shape(),
            pruned.input_shape()
        )));
    }
    let per_query: Vec<Result<f64>> = par::map_indexed(queries.len(), |qi| {
        let a = original.forward(&queries[qi])?;
        let b = pruned.forward(&queries[qi])?;
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch(format!(
                "output shapes differ: {:?} vs {:?}",
                a.shape(),
                b.shape()
            )));
        }
        Ok(a.data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y).abs())
            .sum())
    });
    let mut total = 0.0;
    for r in per_query {
        total += r?;
    }
    Ok(total / queries.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::percentile_coreset;
    use crate::coreset::coreset_layer;
    use crate::weighted_set::QueryBall;

    #[test]
    fn identity_coreset_has_zero_error() {
        let points = vec![vec![0.8, 0.1], vec![-0.3, 0.5], vec![0.0, -0.9]];
        let ws = WeightedSet::new(points, vec![vec![1.0, -2.0, 0.5]]).unwrap();
        // Keeping all points with original weights reproduces the sum exactly.
        let cs = percentile_coreset(&ws, 3).unwrap();
        let queries = vec![vec![0.1, 0.2], vec![-0.5, 0.3]];
        let err = neuron_additive_error(&ws, &cs, ActivationKind::Sigmoid, &queries).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn error_decreases_with_budget_on_average() {
        let mut rng = crate::rng::rng_from_seed(42);
        let n = 64;
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| crate::rng::uniform_in_ball(&mut rng, 3, 1.0))
            .collect();
        let weights = crate::rng::normal_vec(&mut rng, n);
        let ws = WeightedSet::new(points, vec![weights]).unwrap();
        let ball = QueryBall::new(1.0).unwrap();
        let queries: Vec<Vec<f64>> = (0..40)
            .map(|_| crate::rng::uniform_in_ball(&mut rng, 3, 1.0))
            .collect();
        let avg_err = |m: usize| -> f64 {
            (0..20)
                .map(|s| {
                    let cs = coreset_layer(&ws, ActivationKind::Relu, &ball, m, s).unwrap();
                    neuron_additive_error(&ws, &cs, ActivationKind::Relu, &queries).unwrap()
                })
                .sum::<f64>()
                / 20.0
        };
        let coarse = avg_err(8);
        let fine = avg_err(256);
        assert!(fine < coarse, "fine {fine} vs coarse {coarse}");
    }

    #[test]
    fn rejects_empty_queries_and_dimension_mismatch() {
        let ws = WeightedSet::new(vec![vec![1.0, 0.0]], vec![vec![1.0]]).unwrap();
        let cs = percentile_coreset(&ws, 1).unwrap();
        assert!(neuron_additive_error(&ws, &cs, ActivationKind::Relu, &[]).is_err());
        assert!(
            neuron_additive_error(&ws, &cs, ActivationKind::Relu, &[vec![1.0, 2.0, 3.0]]).is_err()
        );
    }
}
