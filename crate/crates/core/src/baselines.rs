//! Baseline selection methods the sensitivity sampler is compared against.
//!
//! Both produce the same [`Coreset`] type as the sampler so downstream
//! rebuilds and error metrics are method-agnostic.

use crate::coreset::{Coreset, SamplingPlan};
use crate::error::{invalid, Result};
use crate::rng::rng_from_seed;
use crate::weighted_set::WeightedSet;

/// Uniform sampling baseline: `m` iid draws with `pr = 1/n` each, merged and
/// reweighted exactly like the sensitivity sampler (each draw contributes
/// `n * w_i(q) / m`), so the estimator stays unbiased, just with worse
/// variance on concentrated instances.
pub fn uniform_coreset(ws: &WeightedSet, m: usize, seed: u64) -> Result<Coreset> {
    if m == 0 {
        return Err(invalid("m", "sample budget must be at least 1"));
    }
    let plan = SamplingPlan::uniform(ws.len())?;
    let mut rng = rng_from_seed(seed);
    let draws = plan.draw_indices(m, &mut rng);
    Coreset::from_draws(ws, &plan, &draws, Some(seed))
}

/// Percentile (top-norm) baseline: deterministically keeps the `m` points
/// with the largest Euclidean norm, ties broken by lower index. Selected
/// points keep their original weights; nothing is reweighted, so dropped
/// mass is simply lost (the method is intentionally biased).
pub fn percentile_coreset(ws: &WeightedSet, m: usize) -> Result<Coreset> {
    let n = ws.len();
    if m == 0 {
        return Err(invalid("m", "selection budget must be at least 1"));
    }
    if m > n {
        return Err(invalid("m", format!("cannot keep {m} of {n} points")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort by descending norm keeps equal-norm points in index order.
    order.sort_by(|&a, &b| ws.norm(b).partial_cmp(&ws.norm(a)).unwrap());
    order.truncate(m);
    Ok(Coreset::from_selection(ws, order, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activations::ActivationKind;
    use crate::coreset::coreset_layer;
    use crate::weighted_set::QueryBall;

    fn simple_set(norms: &[f64], weights: Vec<f64>) -> WeightedSet {
        let points = norms.iter().map(|&r| vec![r, 0.0]).collect();
        WeightedSet::new(points, vec![weights]).unwrap()
    }

    #[test]
    fn uniform_reweights_each_draw_by_n_over_m() {
        let ws = simple_set(&[1.0, 1.0], vec![0.7, -0.4]);
        let cs = uniform_coreset(&ws, 1, 3).unwrap();
        assert_eq!(cs.support_size(), 1);
        let j = cs.entries()[0].index;
        // n = 2, m = 1: the single survivor carries u = 2 * w(j).
        assert!((cs.new_weights(0)[0] - 2.0 * ws.weight(0, j)).abs() < 1e-15);
        assert_eq!(cs.seed(), Some(3));
        assert!(cs.plan().is_some());
    }

    #[test]
    fn percentile_keeps_top_norms_with_index_tiebreak() {
        let ws = simple_set(&[3.0, 1.0, 2.0], vec![0.5, 0.6, 0.7]);
        let cs = percentile_coreset(&ws, 2).unwrap();
        assert_eq!(cs.support(), vec![0, 2]);
        // Original weights, multiplicity 1, no plan, no seed.
        assert_eq!(cs.new_weights(0), &[0.5, 0.7]);
        assert!(cs.entries().iter().all(|e| e.multiplicity == 1));
        assert!(cs.plan().is_none());
        assert_eq!(cs.seed(), None);

        let tied = simple_set(&[1.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]);
        let cs = percentile_coreset(&tied, 2).unwrap();
        assert_eq!(cs.support(), vec![0, 1]);
    }

    #[test]
    fn percentile_rejects_overlarge_and_zero_budgets() {
        let ws = simple_set(&[1.0, 2.0], vec![1.0, 1.0]);
        assert!(percentile_coreset(&ws, 0).is_err());
        assert!(percentile_coreset(&ws, 3).is_err());
        // Budget = n keeps everything in index order.
        let cs = percentile_coreset(&ws, 2).unwrap();
        assert_eq!(cs.support(), vec![0, 1]);
    }

    /// On an equal-sensitivity instance the sensitivity sampler and the
    /// uniform baseline draw from the same distribution. Chi-square on the
    /// selection counts of both, against the uniform expectation, at
    /// significance 0.01.
    #[test]
    fn equal_sensitivities_match_uniform_distribution() {
        let n = 8;
        // Equal norms, equal weights: pr = 1/n under either method.
        let points = (0..n)
            .map(|j| {
                let theta = j as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect();
        let ws = WeightedSet::new(points, vec![vec![1.0; n]]).unwrap();
        let ball = QueryBall::new(1.0).unwrap();
        let m = 10_000;

        // 0.99 quantile of chi-square with n - 1 = 7 degrees of freedom.
        let critical = 18.475;
        let expected = m as f64 / n as f64;

        let chi2_of = |counts: Vec<u64>| -> f64 {
            counts
                .iter()
                .map(|&c| {
                    let d = c as f64 - expected;
                    d * d / expected
                })
                .sum()
        };

        let sens = coreset_layer(&ws, ActivationKind::Relu, &ball, m, 51).unwrap();
        let mut counts = vec![0u64; n];
        for e in sens.entries() {
            counts[e.index] = e.multiplicity;
        }
        let chi2 = chi2_of(counts);
        assert!(chi2 < critical, "sensitivity sampler chi2 {chi2}");

        let unif = uniform_coreset(&ws, m, 52).unwrap();
        let mut counts = vec![0u64; n];
        for e in unif.entries() {
            counts[e.index] = e.multiplicity;
        }
        let chi2 = chi2_of(counts);
        assert!(chi2 < critical, "uniform sampler chi2 {chi2}");
    }
}
