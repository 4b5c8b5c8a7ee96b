use serde::{Deserialize, Serialize};

/// Distance-to-goal potential `psi(s) = diam - ||s - g||_2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub diam: f64,
    pub goal: [f64; 2],
}

impl PotentialSpec {
    pub fn new(diam: f64, goal: [f64; 2]) -> Self {
        PotentialSpec { diam, goal }
    }
}

pub fn potential(s: [f64; 2], pot: &PotentialSpec) -> f64 {
    let d = ((s[0] - pot.goal[0]).powi(2) + (s[1] - pot.goal[1]).powi(2)).sqrt();
    pot.diam - d
}

/// Shaping term `gamma * psi(s_next) - psi(s)` for a deterministic transition.
pub fn shaping(s: [f64; 2], s_next: [f64; 2], gamma: f64, pot: &PotentialSpec) -> f64 {
    gamma * potential(s_next, pot) - potential(s, pot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const D4: f64 = 4.242_640_687_119_285;

    #[test]
    fn potential_values() {
        let pot = PotentialSpec::new(18f64.sqrt(), [3.0, 3.0]);
        assert!((potential([3.0, 3.0], &pot) - D4).abs() < 1e-9);
        assert!(potential([0.0, 0.0], &pot).abs() < 1e-12);
        assert!((potential([3.0, 0.0], &pot) - 1.242_640_687).abs() < 1e-9);
    }

    #[test]
    fn shaping_values() {
        let pot = PotentialSpec::new(18f64.sqrt(), [3.0, 3.0]);
        assert_eq!(shaping([1.0, 2.0], [1.0, 2.0], 1.0, &pot), 0.0);
        // psi(s) = sqrt(18) - 3 at (3,0); psi(s') = 2 needs ||s'-g|| = sqrt(18) - 2.
        let f = 0.99 * 2.0 - (18f64.sqrt() - 3.0);
        assert!((f - 0.737_359_313).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn telescoping(path in proptest::collection::vec((0i64..10, 0i64..10), 2..60), gamma in 0.5..1.0f64) {
            let pot = PotentialSpec::new(162f64.sqrt(), [4.0, 7.0]);
            let pts: Vec<[f64; 2]> = path.iter().map(|&(x, y)| [x as f64, y as f64]).collect();
            let mut sum = 0.0;
            let mut disc = 1.0;
            for w in pts.windows(2) {
                sum += disc * shaping(w[0], w[1], gamma, &pot);
                disc *= gamma;
            }
            let t = (pts.len() - 1) as i32;
            let expect = gamma.powi(t) * potential(pts[pts.len() - 1], &pot) - potential(pts[0], &pot);
            prop_assert!((sum - expect).abs() < 1e-9);
        }

        #[test]
        fn potential_is_bounded(x in 0i64..10, y in 0i64..10, gx in 0i64..10, gy in 0i64..10) {
            let pot = PotentialSpec::new(162f64.sqrt(), [gx as f64, gy as f64]);
            let v = potential([x as f64, y as f64], &pot);
            prop_assert!(v >= -1e-12 && v <= pot.diam + 1e-12);
        }
    }
}
