//! Minimal end-to-end use of the library: build a weighted set, sample a
//! coreset, and compare the estimate against the exact neuron sum.

use neural_coreset::error::Result;
use neural_coreset::metrics::exact_neuron_sum;
use neural_coreset::{coreset_layer, ActivationKind, QueryBall, WeightedSet};

fn main() -> Result<()> {
    // 3 points in the plane, two weight functions over them.
    let ws = WeightedSet::new(
        vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]],
        vec![vec![0.5, 1.5, 1.0], vec![2.0, -1.0, 0.3]],
    )?;
    let ball = QueryBall::new(1.0)?;
    let coreset = coreset_layer(&ws, ActivationKind::Relu, &ball, 2, 7)?;

    let x = [0.3, -0.4];
    for i in 0..ws.num_functions() {
        let exact = exact_neuron_sum(&ws, ActivationKind::Relu, &x, i);
        let approx = coreset.estimate(&ws, ActivationKind::Relu, &x, i);
        println!("function {i}: exact {exact:.6}, coreset estimate {approx:.6}");
    }
    Ok(())
}
