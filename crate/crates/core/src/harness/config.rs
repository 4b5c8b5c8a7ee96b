//! TOML experiment configuration (format version 1).
//!
//! ```toml
//! version = 1
//! run_id = "grid4-dqn-s2d"
//! output_dir = "runs"
//! seeds = [0, 1, 2, 3, 4]
//!
//! [env]
//! preset = "gridworld-4x4"      # or gridworld-10x10, point-reacher
//!
//! [agent]
//! algorithm = "dqn"             # dqn | ppo | sac; other keys override defaults
//!
//! [schedule]
//! kind = "S2D"                  # S2D | D2S | OnlySparse | OnlyDense
//! preset = "C2"                 # C1 | C2 | C3, or: transitions = [200]
//! unit = "episodes"             # episodes | env_steps
//!
//! [budget]
//! total = 1000
//! unit = "episodes"
//!
//! [landscape]                   # optional
//! checkpoints = [50, 400, 800]  # gradient updates after the anchor
//!
//! [sharpness]                   # optional
//! rho = 0.02
//! p = 2.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::train::Budget;
use crate::agents::{AgentConfig, Algorithm};
use crate::envs::{EnvSpec, GridworldSpec, PointReacherSpec};
use crate::error::{Error, Result};
use crate::landscape::ProbeSettings;
use crate::reward::{CurriculumSpec, Schedule, TimeUnit};
use crate::sharpness::SharpnessConfig;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    run_id: String,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    seeds: Vec<u64>,
    #[serde(default = "default_final_window")]
    final_window: usize,
    env: RawEnv,
    agent: toml::Table,
    schedule: RawSchedule,
    budget: Budget,
    landscape: Option<RawLandscape>,
    #[serde(default)]
    sharpness: SharpnessConfig,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_final_window() -> usize {
    100
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnv {
    preset: Option<String>,
    spec: Option<EnvSpec>,
    max_steps: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    kind: String,
    preset: Option<String>,
    transitions: Option<Vec<u64>>,
    unit: Option<TimeUnit>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLandscape {
    #[serde(default = "yes")]
    enabled: bool,
    anchor: Option<u64>,
    checkpoints: Option<Vec<u64>>,
    steps: Option<usize>,
    half_range: Option<f64>,
    batch: Option<usize>,
    parallel: Option<bool>,
}

fn yes() -> bool {
    true
}

/// Landscape capture: grids are taken at `probe.checkpoints` gradient updates
/// after the training time `anchor` (in the schedule's unit).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandscapeConfig {
    pub anchor: u64,
    pub probe: ProbeSettings,
}

/// A fully resolved, validated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub version: u32,
    pub run_id: String,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub final_window: usize,
    pub env: EnvSpec,
    pub agent: AgentConfig,
    pub curriculum: CurriculumSpec,
    pub budget: Budget,
    pub landscape: Option<LandscapeConfig>,
    pub sharpness: SharpnessConfig,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

pub fn env_preset(name: &str) -> Option<EnvSpec> {
    match name {
        "gridworld-4x4" => Some(EnvSpec::Gridworld(GridworldSpec::fixed_4x4())),
        "gridworld-10x10" => Some(EnvSpec::Gridworld(GridworldSpec::random_10x10())),
        "point-reacher" => Some(EnvSpec::PointReacher(PointReacherSpec::default())),
        _ => None,
    }
}

pub fn agent_preset(algorithm: Algorithm) -> AgentConfig {
    match algorithm {
        Algorithm::Dqn => AgentConfig::dqn(),
        Algorithm::Ppo => AgentConfig::ppo(),
        Algorithm::Sac => AgentConfig::sac(),
    }
}

/// Transition timing `C_k = k * N`. `N` is half the default transition: one
/// tenth of the budget for DQN (T = 200 of 1000 episodes at `C2`) and one
/// fortieth otherwise (T = 5000 of 100000 steps at `C2`).
pub fn transition_preset(name: &str, algorithm: Algorithm, budget_total: u64) -> Option<u64> {
    let k = match name.to_ascii_uppercase().as_str() {
        "C1" => 1,
        "C2" => 2,
        "C3" => 3,
        _ => return None,
    };
    let n = match algorithm {
        Algorithm::Dqn => budget_total / 10,
        _ => budget_total / 40,
    };
    Some(k * n)
}

fn merge_agent(table: &toml::Table, errs: &mut Vec<String>) -> AgentConfig {
    let algorithm = match table.get("algorithm").and_then(|v| v.as_str()) {
        Some(s) => match s.to_ascii_lowercase().as_str() {
            "dqn" => Algorithm::Dqn,
            "ppo" => Algorithm::Ppo,
            "sac" => Algorithm::Sac,
            other => {
                errs.push(format!("agent.algorithm: unknown algorithm {other:?}"));
                Algorithm::Dqn
            }
        },
        None => {
            errs.push("agent.algorithm: missing (dqn, ppo or sac)".into());
            Algorithm::Dqn
        }
    };
    let base = agent_preset(algorithm);
    let mut merged = match toml::Value::try_from(&base) {
        Ok(toml::Value::Table(t)) => t,
        _ => unreachable!("agent config serializes to a table"),
    };
    for (k, v) in table {
        if k == "algorithm" {
            continue;
        }
        if !merged.contains_key(k) {
            errs.push(format!("agent.{k}: unknown key"));
            continue;
        }
        merged.insert(k.clone(), v.clone());
    }
    match toml::Value::Table(merged).try_into::<AgentConfig>() {
        Ok(cfg) => cfg,
        Err(e) => {
            errs.push(format!("agent: {e}"));
            base
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        Self::resolve(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    fn resolve(raw: RawConfig) -> Result<Self> {
        let mut errs = Vec::new();
        let mut warnings = Vec::new();

        if raw.version != CONFIG_VERSION {
            errs.push(format!("version: unsupported config version {} (expected {CONFIG_VERSION})", raw.version));
        }
        if raw.run_id.is_empty() || raw.run_id.contains(['/', '\\']) {
            errs.push("run_id: must be a nonempty name without path separators".into());
        }
        if raw.seeds.is_empty() {
            errs.push("seeds: at least one seed is required".into());
        }
        let mut sorted = raw.seeds.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            errs.push(format!("seeds: duplicate seed {}", w[0]));
        }
        if raw.final_window == 0 {
            errs.push("final_window: must be positive".into());
        }

        let mut env = match (&raw.env.preset, &raw.env.spec) {
            (Some(p), None) => env_preset(p).unwrap_or_else(|| {
                errs.push(format!("env.preset: unknown preset {p:?}"));
                EnvSpec::Gridworld(GridworldSpec::fixed_4x4())
            }),
            (None, Some(spec)) => spec.clone(),
            _ => {
                errs.push("env: give exactly one of preset or spec".into());
                EnvSpec::Gridworld(GridworldSpec::fixed_4x4())
            }
        };
        if let Some(m) = raw.env.max_steps {
            match &mut env {
                EnvSpec::Gridworld(s) => s.max_steps = m,
                EnvSpec::PointReacher(s) => s.max_steps = m,
            }
        }
        if let Err(e) = env.validate() {
            errs.push(format!("env: {e}"));
        }

        let agent = merge_agent(&raw.agent, &mut errs);
        errs.extend(agent.validate());
        let compatible = matches!(
            (agent.algorithm, &env),
            (Algorithm::Dqn | Algorithm::Ppo, EnvSpec::Gridworld(_)) | (Algorithm::Sac, EnvSpec::PointReacher(_))
        );
        if !compatible {
            errs.push(format!("agent.algorithm: {} is not applicable to {}", agent.algorithm, env.label()));
        }

        if raw.budget.total == 0 {
            errs.push("budget.total: must be positive".into());
        }

        let schedule: Schedule = raw.schedule.kind.parse().unwrap_or_else(|e| {
            errs.push(format!("schedule.kind: {e}"));
            Schedule::OnlySparse
        });
        let unit = raw.schedule.unit.unwrap_or(raw.budget.unit);
        let mut transitions = match (&raw.schedule.preset, &raw.schedule.transitions) {
            (Some(p), None) => match transition_preset(p, agent.algorithm, raw.budget.total) {
                Some(t) => vec![t],
                None => {
                    errs.push(format!("schedule.preset: unknown preset {p:?} (C1, C2 or C3)"));
                    vec![]
                }
            },
            (None, Some(t)) => t.clone(),
            (None, None) => vec![],
            (Some(_), Some(_)) => {
                errs.push("schedule: give either preset or transitions, not both".into());
                vec![]
            }
        };
        let declared = transitions.clone();
        if schedule.uses_transitions() {
            if transitions.is_empty() {
                errs.push(format!("schedule: {schedule} needs a transition (preset or transitions)"));
            }
            if unit == raw.budget.unit {
                if let Some(&t) = transitions.iter().find(|&&t| t >= raw.budget.total) {
                    errs.push(format!("schedule.transitions: {t} is not inside the budget of {}", raw.budget.total));
                }
            }
        } else if !transitions.is_empty() {
            warnings.push(format!("schedule: {schedule} has a single stage; transitions {transitions:?} ignored"));
            transitions.clear();
        }
        let curriculum = CurriculumSpec { schedule, transitions, unit, gamma: agent.gamma };
        if let Err(e) = curriculum.validate() {
            errs.push(format!("schedule: {e}"));
        }

        let landscape = match raw.landscape {
            Some(l) if l.enabled => {
                let d = ProbeSettings::default();
                let probe = ProbeSettings {
                    checkpoints: l.checkpoints.unwrap_or(d.checkpoints),
                    steps: l.steps.unwrap_or(d.steps),
                    half_range: l.half_range.unwrap_or(d.half_range),
                    batch: l.batch.unwrap_or(d.batch),
                    parallel: l.parallel.unwrap_or(d.parallel),
                };
                if let Err(e) = probe.validate() {
                    errs.push(format!("landscape: {e}"));
                }
                let anchor = l.anchor.or(declared.first().copied());
                match anchor {
                    Some(anchor) => Some(LandscapeConfig { anchor, probe }),
                    None => {
                        errs.push("landscape.anchor: required when the schedule declares no transition".into());
                        None
                    }
                }
            }
            _ => None,
        };
        if let Err(e) = raw.sharpness.validate() {
            errs.push(format!("sharpness: {e}"));
        }

        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(ExperimentConfig {
            version: raw.version,
            run_id: raw.run_id,
            output_dir: raw.output_dir,
            seeds: raw.seeds,
            final_window: raw.final_window,
            env,
            agent,
            curriculum,
            budget: raw.budget,
            landscape,
            sharpness: raw.sharpness,
            warnings,
        })
    }

    /// SHA-256 over every field that influences results (the output directory excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
version = 1
run_id = "t"
seeds = [0, 1]
[env]
preset = "gridworld-4x4"
[agent]
algorithm = "dqn"
[schedule]
kind = "S2D"
preset = "C2"
[budget]
total = 1000
unit = "episodes"
"#;

    #[test]
    fn presets_expand() {
        let c = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_eq!(c.curriculum.transitions, vec![200]);
        assert_eq!(c.curriculum.unit, TimeUnit::Episodes);
        assert_eq!(c.agent, AgentConfig::dqn());
        assert_eq!(transition_preset("C2", Algorithm::Ppo, 100_000), Some(5000));
        assert_eq!(transition_preset("c1", Algorithm::Dqn, 1000), Some(100));
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let err = ExperimentConfig::from_toml_str(&BASE.replace("[0, 1]", "[3, 1, 3]")).unwrap_err();
        let Error::Config(msgs) = err else { panic!() };
        assert!(msgs.iter().any(|m| m.contains("duplicate seed 3")));
    }

    #[test]
    fn single_stage_ignores_transitions() {
        let c = ExperimentConfig::from_toml_str(&BASE.replace("\"S2D\"", "\"OnlySparse\"")).unwrap();
        assert!(c.curriculum.transitions.is_empty());
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn errors_name_their_paths() {
        let text = BASE
            .replace("algorithm = \"dqn\"", "algorithm = \"dqn\"\nlr = -1.0\nfoo = 2")
            .replace("preset = \"C2\"", "transitions = [5000]");
        let Error::Config(msgs) = ExperimentConfig::from_toml_str(&text).unwrap_err() else { panic!() };
        assert!(msgs.iter().any(|m| m.starts_with("agent.lr")));
        assert!(msgs.iter().any(|m| m.starts_with("agent.foo")));
        assert!(msgs.iter().any(|m| m.starts_with("schedule.transitions")));
    }

    #[test]
    fn overrides_and_hash() {
        let c = ExperimentConfig::from_toml_str(&BASE.replace("algorithm = \"dqn\"", "algorithm = \"dqn\"\nhidden = [16]"))
            .unwrap();
        assert_eq!(c.agent.hidden, vec![16]);
        let mut moved = c.clone();
        moved.output_dir = "elsewhere".into();
        assert_eq!(c.hash(), moved.hash());
        let base = ExperimentConfig::from_toml_str(BASE).unwrap();
        assert_ne!(c.hash(), base.hash());
    }

    #[test]
    fn incompatible_algorithm() {
        let text = BASE.replace("\"dqn\"", "\"sac\"");
        assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))));
    }
}
