use rand::Rng;
use rand_distr::StandardNormal;

use crate::nn::{Blocks, DirectionPair, Network};
use crate::seeding::rng_for;

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Two random directions, orthogonal within every parameter block and scaled
/// block-wise to the norm of the corresponding parameters.
///
/// The Gaussian draws depend only on `gen_seed` and the block shapes, so the
/// same seed applied to a later checkpoint of the same network yields the same
/// underlying draws rescaled to the new parameter norms.
pub fn gen_perpendicular_directions(net: &Network, gen_seed: u64) -> DirectionPair {
    let mut rng = rng_for(gen_seed, "directions", 0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for block in net.param_slices() {
        let n = block.len();
        let mut r: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let r2: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let dot: f64 = r.iter().zip(&r2).map(|(a, b)| a * b).sum();
        let r2_sq: f64 = r2.iter().map(|v| v * v).sum();
        let coef = dot / r2_sq;
        for (a, b) in r.iter_mut().zip(&r2) {
            *a -= coef * b;
        }
        let theta = block.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rn = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r2n = r2_sq.sqrt();
        xs.push(r.iter().map(|v| finite_or_zero(v / rn * theta)).collect());
        ys.push(r2.iter().map(|v| finite_or_zero(v / r2n * theta)).collect());
    }
    DirectionPair { x: Blocks(xs), y: Blocks(ys), gen_seed }
}
