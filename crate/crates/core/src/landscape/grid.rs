use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{Agent, Transition};
use crate::error::{Error, Result};
use crate::nn::{perturb, DirectionPair, Network, Objective};

pub const DEFAULT_STEPS: usize = 50;
pub const DEFAULT_HALF_RANGE: f64 = 10.0;

/// `steps` evenly spaced values in `[-half_range, half_range]`, symmetric
/// about zero by construction (the middle value is exactly 0 when `steps` is odd).
pub fn axis(half_range: f64, steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![0.0];
    }
    let n1 = (steps - 1) as f64;
    (0..steps).map(|i| half_range * (2.0 * i as f64 - n1) / n1).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridMetadata {
    pub run_id: String,
    pub checkpoint: u64,
    pub schedule: String,
    pub algorithm: String,
    pub batch_fingerprint: String,
    pub gen_seed: u64,
}

impl GridMetadata {
    fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("run_id", self.run_id.clone()),
            ("checkpoint", self.checkpoint.to_string()),
            ("schedule", self.schedule.clone()),
            ("algorithm", self.algorithm.clone()),
            ("batch_fingerprint", self.batch_fingerprint.clone()),
            ("gen_seed", self.gen_seed.to_string()),
        ]
    }
}

/// Loss values `z[i][j] = L(theta + alphas[i] x + betas[j] y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub metadata: GridMetadata,
}

pub fn batch_fingerprint(batch: &[Transition]) -> Result<String> {
    let json = serde_json::to_vec(batch)?;
    Ok(hex::encode(Sha256::digest(&json)))
}

/// Evaluate `objective` over the plane through `net` spanned by `dirs`.
/// The result does not depend on `parallel`.
pub fn grid_values(
    objective: &dyn Objective,
    net: &Network,
    dirs: &DirectionPair,
    half_range: f64,
    steps: usize,
    parallel: bool,
) -> Result<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    if steps == 0 {
        return Err(Error::Precondition("grid needs at least one step".into()));
    }
    let alphas = axis(half_range, steps);
    let betas = alphas.clone();
    let cell = |k: usize| -> Result<f64> {
        let (a, b) = (alphas[k / steps], betas[k % steps]);
        let value = match objective.loss(&perturb(net, dirs, a, b)?) {
            Ok(v) => v,
            Err(e) if e.is_numeric() => f64::NAN,
            Err(e) => return Err(e),
        };
        if !value.is_finite() {
            return Err(Error::GridRejected { alpha: a, beta: b, value });
        }
        Ok(value)
    };
    let flat: Vec<f64> = if parallel {
        (0..steps * steps).into_par_iter().map(cell).collect::<Result<_>>()?
    } else {
        (0..steps * steps).map(cell).collect::<Result<_>>()?
    };
    let z = flat.chunks(steps).map(<[f64]>::to_vec).collect();
    Ok((alphas, betas, z))
}

/// Policy-loss landscape of an agent snapshot around its probe network.
pub fn loss_grid(
    agent: &Agent,
    dirs: &DirectionPair,
    batch: &[Transition],
    half_range: f64,
    steps: usize,
    parallel: bool,
) -> Result<LandscapeGrid> {
    if batch.is_empty() {
        return Err(Error::Precondition("landscape batch is empty".into()));
    }
    let objective = agent.objective(batch)?;
    let (alphas, betas, z) = grid_values(objective.as_ref(), agent.probe_net(), dirs, half_range, steps, parallel)?;
    let metadata = GridMetadata {
        algorithm: agent.algorithm().name().to_string(),
        batch_fingerprint: batch_fingerprint(batch)?,
        gen_seed: dirs.gen_seed,
        ..Default::default()
    };
    Ok(LandscapeGrid { alphas, betas, z, metadata })
}

impl LandscapeGrid {
    pub fn steps(&self) -> (usize, usize) {
        (self.alphas.len(), self.betas.len())
    }

    /// `# key=value` metadata lines, a header, then `alpha,beta,loss` rows with
    /// alpha as the outer index.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.metadata.pairs() {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("alpha,beta,loss\n");
        for (i, a) in self.alphas.iter().enumerate() {
            for (j, b) in self.betas.iter().enumerate() {
                let _ = writeln!(out, "{a},{b},{}", self.z[i][j]);
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut rows = Vec::new();
        let mut header_seen = false;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(kv) = line.strip_prefix('#') {
                if let Some((k, v)) = kv.trim().split_once('=') {
                    meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !header_seen {
                if line.replace(' ', "") != "alpha,beta,loss" {
                    return Err(Error::Malformed(format!("line {}: expected header alpha,beta,loss", lineno + 1)));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Malformed(format!("line {}: expected 3 fields", lineno + 1)));
            }
            let mut vals = [0.0; 3];
            for (v, f) in vals.iter_mut().zip(&fields) {
                *v = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Malformed(format!("line {}: bad number {f:?}", lineno + 1)))?;
            }
            rows.push(vals);
        }
        if rows.is_empty() {
            return Err(Error::Malformed("grid has no rows".into()));
        }
        let mut alphas: Vec<f64> = Vec::new();
        for r in &rows {
            if alphas.last() != Some(&r[0]) {
                alphas.push(r[0]);
            }
        }
        let nb = rows.len() / alphas.len();
        if nb * alphas.len() != rows.len() {
            return Err(Error::Malformed("rows do not form a rectangular grid".into()));
        }
        let betas: Vec<f64> = rows[..nb].iter().map(|r| r[1]).collect();
        let mut z = vec![vec![0.0; nb]; alphas.len()];
        for (k, r) in rows.iter().enumerate() {
            let (i, j) = (k / nb, k % nb);
            if r[0] != alphas[i] || r[1] != betas[j] {
                return Err(Error::Malformed(format!("row {} is out of grid order", k + 1)));
            }
            z[i][j] = r[2];
        }
        let get = |k: &str| meta.get(k).cloned().unwrap_or_default();
        let metadata = GridMetadata {
            run_id: get("run_id"),
            checkpoint: get("checkpoint").parse().unwrap_or(0),
            schedule: get("schedule"),
            algorithm: get("algorithm"),
            batch_fingerprint: get("batch_fingerprint"),
            gen_seed: get("gen_seed").parse().unwrap_or(0),
        };
        Ok(LandscapeGrid { alphas, betas, z, metadata })
    }
}
