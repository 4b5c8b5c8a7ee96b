//! Action distributions shared by the agents.

use rand::Rng;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
pub(crate) const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;
/// Keeps `log(1 - tanh(u)^2)` finite at saturation.
pub const SQUASH_EPS: f64 = 1e-6;

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn entropy(probs: &[f64], logp: &[f64]) -> f64 {
    -probs.iter().zip(logp).map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 }).sum::<f64>()
}

/// Index of the first maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub fn sample_categorical<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

pub fn clamp_log_std(ls: f64) -> f64 {
    ls.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

/// Squashed Gaussian sample `tanh(mean + std * noise)` and its log-density.
pub fn squashed_sample(mean: &[f64], log_std: &[f64], noise: &[f64]) -> (Vec<f64>, f64) {
    let mut action = Vec::with_capacity(mean.len());
    let mut logp = 0.0;
    for ((m, ls), xi) in mean.iter().zip(log_std).zip(noise) {
        let ls = clamp_log_std(*ls);
        let u = m + ls.exp() * xi;
        let a = u.tanh();
        logp += -0.5 * xi * xi - ls - HALF_LN_2PI - (1.0 - a * a + SQUASH_EPS).ln();
        action.push(a);
    }
    (action, logp)
}
