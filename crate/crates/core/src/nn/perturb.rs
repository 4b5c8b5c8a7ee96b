use serde::{Deserialize, Serialize};

use super::{Blocks, Network};
use crate::error::{Error, Result};

/// Two perturbation directions spanning a 2D slice of parameter space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectionPair {
    pub x: Blocks,
    pub y: Blocks,
    pub gen_seed: u64,
}

impl DirectionPair {
    pub fn swapped(&self) -> DirectionPair {
        DirectionPair { x: self.y.clone(), y: self.x.clone(), gen_seed: self.gen_seed }
    }
}

/// Returns a fresh network with parameters `theta + alpha * x + beta * y`.
pub fn perturb(net: &Network, dirs: &DirectionPair, alpha: f64, beta: f64) -> Result<Network> {
    let lens = net.block_lens();
    if dirs.x.lens() != lens || dirs.y.lens() != lens {
        return Err(Error::ShapeMismatch(format!(
            "directions {:?}/{:?} do not match network blocks {:?}",
            dirs.x.lens(),
            dirs.y.lens(),
            lens
        )));
    }
    let mut out = net.clone();
    for ((p, x), y) in out.param_slices_mut().into_iter().zip(&dirs.x.0).zip(&dirs.y.0) {
        for i in 0..p.len() {
            p[i] = p[i] + alpha * x[i] + beta * y[i];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp_init;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_dirs(net: &Network, seed: u64) -> DirectionPair {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut mk = || {
            Blocks(net.block_lens().iter().map(|&n| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect())
        };
        let x = mk();
        let y = mk();
        DirectionPair { x, y, gen_seed: seed }
    }

    #[test]
    fn zero_offsets_clone() {
        let net = mlp_init(&[3, 6, 2], 0).unwrap();
        let d = random_dirs(&net, 1);
        assert_eq!(perturb(&net, &d, 0.0, 0.0).unwrap(), net);
    }

    #[test]
    fn doubling_along_own_params() {
        let net = mlp_init(&[3, 6, 2], 0).unwrap();
        let d = DirectionPair { x: net.params(), y: Blocks::zeros_like(&net.params()), gen_seed: 0 };
        let p = perturb(&net, &d, 1.0, 0.0).unwrap();
        for (a, b) in p.params().flatten().iter().zip(net.params().flatten()) {
            assert_eq!(*a, 2.0 * b);
        }
    }

    #[test]
    fn round_trip() {
        let net = mlp_init(&[3, 6, 2], 0).unwrap();
        let d = random_dirs(&net, 2);
        let there = perturb(&net, &d, 2.0, 3.0).unwrap();
        let back = perturb(&there, &d, -2.0, -3.0).unwrap();
        for (a, b) in back.params().flatten().iter().zip(net.params().flatten()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let net = mlp_init(&[3, 6, 2], 0).unwrap();
        let other = mlp_init(&[3, 5, 2], 0).unwrap();
        let d = random_dirs(&other, 0);
        assert!(matches!(perturb(&net, &d, 1.0, 1.0), Err(Error::ShapeMismatch(_))));
    }

    proptest! {
        #[test]
        fn perturbation_is_additive(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, e in -5.0..5.0f64, seed in 0u64..1000) {
            let net = mlp_init(&[2, 5, 3], seed).unwrap();
            let d = random_dirs(&net, seed + 1);
            let two_step = perturb(&perturb(&net, &d, a, b).unwrap(), &d, c, e).unwrap();
            let one_step = perturb(&net, &d, a + c, b + e).unwrap();
            for (x, y) in two_step.params().flatten().iter().zip(one_step.params().flatten()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
