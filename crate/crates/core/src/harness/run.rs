//! Multi-seed experiment execution and artifact persistence.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ExperimentConfig;
use super::train::{EpisodeRecord, Trainer};
use crate::agents::{Agent, Transition};
use crate::error::{Error, Result};
use crate::landscape::{probe_checkpoints, BranchProbe, DepthReport};
use crate::seeding::derive_seed;
use crate::sharpness::{agent_sharpness, Sharpness};

pub const METRICS_HEADER: &str = "run_id,seed,episode,env_step,stage,return,success,loss_main,epsilon_or_entropy";
pub const SHARPNESS_HEADER: &str = "run_id,seed,env,schedule,rho,p,sharpness,degenerate_flag";

/// Everything one seed produced, before it is written to disk.
pub struct SeedRun {
    pub seed: u64,
    pub records: Vec<EpisodeRecord>,
    pub agent: Option<Agent>,
    pub eval_batch: Vec<Transition>,
    pub probe: Option<BranchProbe>,
    pub sharpness: Option<Sharpness>,
    pub error: Option<Error>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub episodes: usize,
    /// Mean base-reward return over the last `final_window` episodes.
    pub final_return: f64,
    pub success_rate: f64,
    pub sharpness: Option<f64>,
    pub degenerate: bool,
    pub depth: Option<DepthReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub env: String,
    pub algorithm: String,
    pub schedule: String,
    pub transitions: Vec<u64>,
    pub seeds: Vec<SeedSummary>,
}

impl RunSummary {
    pub fn load(run_dir: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(run_dir.join("summary.json"))?)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub code_version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    /// Relative artifact path to its SHA-256.
    pub artifacts: BTreeMap<String, String>,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub struct RunArtifacts {
    pub dir: PathBuf,
    pub summary: RunSummary,
    pub manifest: Manifest,
    /// Per-seed errors, kept so callers can pick an exit status.
    pub failures: Vec<(u64, Error)>,
}

/// Train one seed to the end of its budget, probing the landscape and
/// measuring sharpness on the way. Failures are captured, not propagated.
pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> SeedRun {
    let mut out =
        SeedRun { seed, records: Vec::new(), agent: None, eval_batch: Vec::new(), probe: None, sharpness: None, error: None };
    let result = (|| -> Result<()> {
        let mut trainer = Trainer::new(&cfg.env, &cfg.agent, cfg.curriculum.clone(), cfg.budget, seed)?;
        let records = &mut out.records;
        if let Some(l) = &cfg.landscape {
            let unit = cfg.curriculum.unit;
            trainer.run_while(|t| t.time(unit) < l.anchor, |r| records.push(r.clone()))?;
            let gen_seed = derive_seed(seed, "directions", 0);
            let run_id = format!("{}-seed{seed}", cfg.run_id);
            out.probe = Some(probe_checkpoints(&mut trainer, &l.probe, gen_seed, &run_id, |r| records.push(r.clone()))?);
        }
        trainer.run(|r| records.push(r.clone()))?;
        let batch = trainer.eval_batch(cfg.sharpness.batch_size)?;
        out.sharpness = Some(agent_sharpness(&trainer.agent, &batch, &cfg.sharpness)?);
        out.eval_batch = batch;
        out.agent = Some(trainer.agent);
        Ok(())
    })();
    if let Err(e) = result {
        log::error!("{} seed {seed} failed: {e}", cfg.run_id);
        out.error = Some(e);
    }
    out
}

pub fn metrics_csv(run_id: &str, seed: u64, records: &[EpisodeRecord]) -> String {
    let mut s = String::from(METRICS_HEADER);
    s.push('\n');
    for r in records {
        let loss = r.loss_main.map(|l| l.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{run_id},{seed},{},{},{},{},{},{loss},{}",
            r.episode,
            r.env_step,
            r.stage,
            r.ret,
            u8::from(r.success),
            r.epsilon_or_entropy
        );
    }
    s
}

/// Mean return and success rate over the last `window` episodes.
pub fn final_stats(records: &[EpisodeRecord], window: usize) -> (f64, f64) {
    let tail = &records[records.len().saturating_sub(window)..];
    if tail.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = tail.len() as f64;
    let ret = tail.iter().map(|r| r.ret).sum::<f64>() / n;
    let succ = tail.iter().filter(|r| r.success).count() as f64 / n;
    (ret, succ)
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

struct ArtifactWriter {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl ArtifactWriter {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.hashes.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }
}

/// Run every seed (in parallel) and write the artifact tree under
/// `output_dir/run_id`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let runs: Vec<SeedRun> = cfg.seeds.par_iter().map(|&s| run_seed(cfg, s)).collect();
    write_artifacts(cfg, runs)
}

pub fn write_artifacts(cfg: &ExperimentConfig, runs: Vec<SeedRun>) -> Result<RunArtifacts> {
    let dir = cfg.run_dir();
    std::fs::create_dir_all(&dir)?;
    let mut w = ArtifactWriter { root: dir.clone(), hashes: BTreeMap::new() };
    let env_label = cfg.env.label();
    let schedule = cfg.curriculum.schedule.name();
    let mut sharp_csv = String::from(SHARPNESS_HEADER);
    sharp_csv.push('\n');
    let mut seeds = Vec::new();
    let mut failures = Vec::new();

    for run in runs {
        let sd = format!("seed_{}", run.seed);
        w.write(&format!("{sd}/metrics.csv"), metrics_csv(&cfg.run_id, run.seed, &run.records).as_bytes())?;
        if let Some(agent) = &run.agent {
            let snap = crate::agents::SnapshotFile {
                version: crate::nn::SNAPSHOT_VERSION,
                agent: agent.clone(),
                eval_batch: run.eval_batch.clone(),
            };
            w.write(&format!("{sd}/final_snapshot.json"), serde_json::to_string(&snap)?.as_bytes())?;
        }
        if let Some(probe) = &run.probe {
            for g in &probe.grids {
                w.write(&format!("{sd}/landscape_{}.csv", g.metadata.checkpoint), g.to_csv().as_bytes())?;
            }
            w.write(&format!("{sd}/depth.json"), serde_json::to_string_pretty(&probe.depth)?.as_bytes())?;
        }
        if let Some(s) = &run.sharpness {
            let _ = writeln!(
                sharp_csv,
                "{},{},{env_label},{schedule},{},{},{},{}",
                cfg.run_id,
                run.seed,
                cfg.sharpness.rho,
                cfg.sharpness.p,
                s.value,
                u8::from(s.degenerate)
            );
        }
        let (final_return, success_rate) = final_stats(&run.records, cfg.final_window);
        seeds.push(SeedSummary {
            seed: run.seed,
            episodes: run.records.len(),
            final_return,
            success_rate,
            sharpness: run.sharpness.map(|s| s.value),
            degenerate: run.sharpness.is_some_and(|s| s.degenerate),
            depth: run.probe.as_ref().map(|p| p.depth.clone()),
            error: run.error.as_ref().map(|e| e.to_string()),
        });
        if let Some(e) = run.error {
            failures.push((run.seed, e));
        }
    }
    w.write("sharpness.csv", sharp_csv.as_bytes())?;
    let summary = RunSummary {
        run_id: cfg.run_id.clone(),
        env: env_label,
        algorithm: cfg.agent.algorithm.name().to_string(),
        schedule: schedule.to_string(),
        transitions: cfg.curriculum.transitions.clone(),
        seeds,
    };
    w.write("summary.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    let manifest = Manifest {
        run_id: cfg.run_id.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        seeds: cfg.seeds.clone(),
        artifacts: w.hashes.clone(),
        config: cfg.clone(),
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunArtifacts { dir, summary, manifest, failures })
}

/// SHA-256 of a file, for checking artifacts against a manifest.
pub fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}
