//! Self-contained SVG rendering of a landscape grid: heatmap plus contours.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::landscape::LandscapeGrid;

pub const CONTOUR_LEVELS: usize = 10;
const CELL: f64 = 8.0;
const LEFT: f64 = 70.0;
const TOP: f64 = 50.0;
const RIGHT: f64 = 90.0;
const BOTTOM: f64 = 60.0;

// Viridis sampled at five points.
const RAMP: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

fn color(t: f64) -> String {
    let t = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let k = (t.floor() as usize).min(RAMP.len() - 2);
    let f = t - k as f64;
    let c: Vec<u8> = (0..3).map(|i| (RAMP[k][i] + f * (RAMP[k + 1][i] - RAMP[k][i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Evenly spaced levels strictly between the minimum and maximum; none for a
/// constant grid.
pub fn contour_levels(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if hi <= lo {
        return Vec::new();
    }
    (1..=n).map(|k| lo + (hi - lo) * k as f64 / (n + 1) as f64).collect()
}

/// Marching-squares segments of `z = level` with grid points at integer
/// coordinates `(i, j)`.
pub fn contour_segments(z: &[Vec<f64>], level: f64) -> Vec<[(f64, f64); 2]> {
    let mut segs = Vec::new();
    let na = z.len();
    let nb = z.first().map_or(0, Vec::len);
    let lerp = |p: (f64, f64), q: (f64, f64), zp: f64, zq: f64| {
        let t = (level - zp) / (zq - zp);
        (p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1))
    };
    for i in 0..na.saturating_sub(1) {
        for j in 0..nb.saturating_sub(1) {
            // Corners counter-clockwise from (i, j).
            let pts = [(i as f64, j as f64), ((i + 1) as f64, j as f64), ((i + 1) as f64, (j + 1) as f64), (i as f64, (j + 1) as f64)];
            let v = [z[i][j], z[i + 1][j], z[i + 1][j + 1], z[i][j + 1]];
            let above: Vec<bool> = v.iter().map(|&x| x > level).collect();
            let mut crossings = Vec::new();
            for e in 0..4 {
                let f = (e + 1) % 4;
                if above[e] != above[f] {
                    crossings.push((e, lerp(pts[e], pts[f], v[e], v[f])));
                }
            }
            match crossings.len() {
                2 => segs.push([crossings[0].1, crossings[1].1]),
                4 => {
                    // Saddle: resolve with the cell-centre average.
                    let centre = v.iter().sum::<f64>() / 4.0 > level;
                    let (a, b, c, d) = (crossings[0].1, crossings[1].1, crossings[2].1, crossings[3].1);
                    if centre == above[0] {
                        segs.push([a, d]);
                        segs.push([b, c]);
                    } else {
                        segs.push([a, b]);
                        segs.push([c, d]);
                    }
                }
                _ => {}
            }
        }
    }
    segs
}

pub fn render_svg(grid: &LandscapeGrid) -> Result<String> {
    let (na, nb) = grid.steps();
    if grid.z.len() != na || grid.z.iter().any(|r| r.len() != nb) {
        return Err(Error::Malformed("grid values do not match its axes".into()));
    }
    if let Some((i, j)) = (0..na).flat_map(|i| (0..nb).map(move |j| (i, j))).find(|&(i, j)| !grid.z[i][j].is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite loss at alpha={}, beta={}",
            grid.alphas[i], grid.betas[j]
        )));
    }
    let lo = grid.z.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.z.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let w = LEFT + na as f64 * CELL + RIGHT;
    let h = TOP + nb as f64 * CELL + BOTTOM;
    let px = |i: f64| LEFT + (i + 0.5) * CELL;
    let py = |j: f64| TOP + (nb as f64 - j - 0.5) * CELL;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}" font-family="sans-serif" font-size="12">"#
    );
    let m = &grid.metadata;
    let title = format!("{} {} {} checkpoint {}", m.run_id, m.algorithm, m.schedule, m.checkpoint);
    let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle">{}</text>"#, w / 2.0, escape(title.trim()));

    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for i in 0..na {
        for j in 0..nb {
            let t = if hi > lo { (grid.z[i][j] - lo) / (hi - lo) } else { 0.5 };
            let _ = writeln!(
                s,
                r#"<rect class="cell" x="{:.1}" y="{:.1}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                LEFT + i as f64 * CELL,
                TOP + (nb - 1 - j) as f64 * CELL,
                color(t)
            );
        }
    }
    let _ = writeln!(s, "</g>");

    for level in contour_levels(lo, hi, CONTOUR_LEVELS) {
        let segs = contour_segments(&grid.z, level);
        if segs.is_empty() {
            continue;
        }
        let mut d = String::new();
        for [a, b] in segs {
            let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}", px(a.0), py(a.1), px(b.0), py(b.1));
        }
        let _ = writeln!(
            s,
            r#"<path class="contour" data-level="{level}" d="{d}" fill="none" stroke="white" stroke-width="0.8"/>"#
        );
    }

    let (x0, x1) = (LEFT, LEFT + na as f64 * CELL);
    let (y0, y1) = (TOP, TOP + nb as f64 * CELL);
    let _ = writeln!(s, r#"<polyline points="{x0},{y0} {x0},{y1} {x1},{y1}" fill="none" stroke="black"/>"#);
    let (a_lo, a_hi) = (grid.alphas[0], grid.alphas[na - 1]);
    let (b_lo, b_hi) = (grid.betas[0], grid.betas[nb - 1]);
    let _ = writeln!(s, r#"<text x="{x0}" y="{:.1}" text-anchor="start">{a_lo}</text>"#, y1 + 16.0);
    let _ = writeln!(s, r#"<text x="{x1}" y="{:.1}" text-anchor="end">{a_hi}</text>"#, y1 + 16.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">α</text>"#, (x0 + x1) / 2.0, y1 + 36.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{y1}" text-anchor="end">{b_lo}</text>"#, x0 - 6.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{b_hi}</text>"#, x0 - 6.0, y0 + 10.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">β</text>"#, x0 - 40.0, (y0 + y1) / 2.0);

    // Colour bar.
    let bx = x1 + 20.0;
    for k in 0..20 {
        let t = 1.0 - k as f64 / 19.0;
        let _ = writeln!(
            s,
            r#"<rect class="legend" x="{bx}" y="{:.1}" width="14" height="{:.1}" fill="{}"/>"#,
            y0 + k as f64 * (y1 - y0) / 20.0,
            (y1 - y0) / 20.0,
            color(t)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{hi:.4}</text>"#, bx + 18.0, y0 + 10.0);
    let _ = writeln!(s, r#"<text x="{:.1}" y="{y1}">{lo:.4}</text>"#, bx + 18.0);
    s.push_str("</svg>\n");
    Ok(s)
}

/// Parse a landscape CSV and render it.
pub fn emit_plot(csv: &str) -> Result<String> {
    render_svg(&LandscapeGrid::from_csv(csv)?)
}
