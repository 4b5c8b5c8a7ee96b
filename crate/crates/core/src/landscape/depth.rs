use serde::{Deserialize, Serialize};

const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Interior cells strictly below (`want_min`) or above all eight neighbours,
/// in row-major order.
fn strict_extrema(z: &[Vec<f64>], want_min: bool) -> Vec<(usize, usize)> {
    let rows = z.len();
    let cols = z.first().map_or(0, Vec::len);
    let mut out = Vec::new();
    for i in 1..rows.saturating_sub(1) {
        for j in 1..cols.saturating_sub(1) {
            let v = z[i][j];
            let is_ext = NEIGHBOURS.iter().all(|&(di, dj)| {
                let n = z[(i as isize + di) as usize][(j as isize + dj) as usize];
                if want_min {
                    v < n
                } else {
                    v > n
                }
            });
            if is_ext {
                out.push((i, j));
            }
        }
    }
    out
}

/// Mean gap between each strict interior local minimum and its nearest strict
/// interior local maximum (Euclidean grid distance, ties to the lowest
/// row-major index). Without interior maxima the gap is the global range;
/// without interior minima the depth is 0.
pub fn local_minima_depth(z: &[Vec<f64>]) -> f64 {
    let minima = strict_extrema(z, true);
    if minima.is_empty() {
        return 0.0;
    }
    let maxima = strict_extrema(z, false);
    if maxima.is_empty() {
        let all = z.iter().flatten();
        let hi = all.clone().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = all.copied().fold(f64::INFINITY, f64::min);
        return hi - lo;
    }
    let total: f64 = minima
        .iter()
        .map(|&(mi, mj)| {
            // maxima are in row-major order, so the first strictly closer one wins ties.
            let mut best = maxima[0];
            let mut best_d = usize::MAX;
            for &(xi, xj) in &maxima {
                let d = xi.abs_diff(mi).pow(2) + xj.abs_diff(mj).pow(2);
                if d < best_d {
                    best_d = d;
                    best = (xi, xj);
                }
            }
            z[best.0][best.1] - z[mi][mj]
        })
        .sum();
    total / minima.len() as f64
}

/// Depth series over post-transition checkpoints with successive differences.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthReport {
    pub schedule: String,
    /// Gradient updates since the transition.
    pub checkpoints: Vec<u64>,
    pub phases: Vec<String>,
    pub depths: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl DepthReport {
    pub fn new(schedule: impl Into<String>, checkpoints: Vec<u64>, depths: Vec<f64>) -> Self {
        let phases = (1..=depths.len()).map(|i| format!("P{i}")).collect();
        let deltas = depths.windows(2).map(|w| w[1] - w[0]).collect();
        DepthReport { schedule: schedule.into(), checkpoints, phases, depths, deltas }
    }

    pub fn mean_depth(&self) -> f64 {
        if self.depths.is_empty() {
            return 0.0;
        }
        self.depths.iter().sum::<f64>() / self.depths.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(f: impl Fn(usize, usize) -> f64, n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect()
    }

    #[test]
    fn constant_and_plane_have_zero_depth() {
        assert_eq!(local_minima_depth(&grid(|_, _| 2.5, 6)), 0.0);
        assert_eq!(local_minima_depth(&grid(|i, j| i as f64 + 2.0 * j as f64, 6)), 0.0);
    }

    #[test]
    fn one_min_one_max() {
        let mut z = grid(|_, _| 3.0, 5);
        z[1][1] = 1.0;
        z[3][3] = 5.0;
        assert_eq!(local_minima_depth(&z), 4.0);
    }

    #[test]
    fn no_interior_max_uses_global_range() {
        let mut z = grid(|i, j| (i + j) as f64, 5);
        z[2][2] = -1.0;
        assert_eq!(local_minima_depth(&z), 8.0 - -1.0);
    }

    #[test]
    fn nearest_max_with_tie_break() {
        let mut z = grid(|_, _| 0.0, 7);
        z[3][3] = -1.0;
        // Equidistant maxima above and below; the row-major first one wins.
        z[1][3] = 4.0;
        z[5][3] = 9.0;
        z[5][5] = 20.0;
        assert_eq!(local_minima_depth(&z), 5.0);
    }

    #[test]
    fn table_style_deltas() {
        let r = DepthReport::new("S2D", vec![50, 400, 800, 1200, 1600], vec![0.031, 0.027, 0.030, 0.022, 0.021]);
        let expect = [-0.004, 0.003, -0.008, -0.001];
        for (d, e) in r.deltas.iter().zip(expect) {
            assert!((d - e).abs() < 1e-12);
        }
        assert_eq!(r.phases, ["P1", "P2", "P3", "P4", "P5"]);
    }

    proptest! {
        #[test]
        fn translation_and_scale(vals in prop::collection::vec(-5.0f64..5.0, 64), c in -10.0f64..10.0, k in 0.1f64..10.0) {
            let z: Vec<Vec<f64>> = vals.chunks(8).map(|r| r.to_vec()).collect();
            let base = local_minima_depth(&z);
            let shifted: Vec<Vec<f64>> = z.iter().map(|r| r.iter().map(|v| v + c).collect()).collect();
            let scaled: Vec<Vec<f64>> = z.iter().map(|r| r.iter().map(|v| v * k).collect()).collect();
            prop_assert!((local_minima_depth(&shifted) - base).abs() < 1e-9);
            prop_assert!((local_minima_depth(&scaled) - k * base).abs() < 1e-9 * (1.0 + k * base.abs()));
        }
    }
}
