use serde::{Deserialize, Serialize};

use super::shaping::{shaping, PotentialSpec};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Schedule {
    S2D,
    D2S,
    OnlySparse,
    OnlyDense,
}

impl Schedule {
    pub const ALL: [Schedule; 4] = [Schedule::S2D, Schedule::D2S, Schedule::OnlySparse, Schedule::OnlyDense];

    pub fn name(self) -> &'static str {
        match self {
            Schedule::S2D => "S2D",
            Schedule::D2S => "D2S",
            Schedule::OnlySparse => "OnlySparse",
            Schedule::OnlyDense => "OnlyDense",
        }
    }

    pub fn uses_transitions(self) -> bool {
        matches!(self, Schedule::S2D | Schedule::D2S)
    }

    /// Reward density active in 1-based `stage`.
    pub fn density(self, stage: usize) -> Density {
        match (self, stage) {
            (Schedule::OnlySparse, _) => Density::Sparse,
            (Schedule::OnlyDense, _) => Density::Dense,
            (Schedule::S2D, 1) => Density::Sparse,
            (Schedule::S2D, _) => Density::Dense,
            (Schedule::D2S, 1) => Density::Dense,
            (Schedule::D2S, _) => Density::Sparse,
        }
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Schedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "s2d" => Ok(Schedule::S2D),
            "d2s" => Ok(Schedule::D2S),
            "onlysparse" | "sparse" => Ok(Schedule::OnlySparse),
            "onlydense" | "dense" => Ok(Schedule::OnlyDense),
            _ => Err(Error::InvalidSpec(format!("unknown schedule {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Density {
    Sparse,
    Dense,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    Episodes,
    EnvSteps,
}

/// Reward schedule plus stage transitions `T_1 < ... < T_{N-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumSpec {
    pub schedule: Schedule,
    pub transitions: Vec<u64>,
    pub unit: TimeUnit,
    pub gamma: f64,
}

impl CurriculumSpec {
    pub fn new(schedule: Schedule, transitions: Vec<u64>, unit: TimeUnit, gamma: f64) -> Result<Self> {
        let spec = CurriculumSpec { schedule, transitions, unit, gamma };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidSpec(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if self.transitions.first() == Some(&0) {
            return Err(Error::InvalidSpec("first transition must be positive".into()));
        }
        if self.transitions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(format!(
                "transitions must be strictly increasing, got {:?}",
                self.transitions
            )));
        }
        Ok(())
    }

    pub fn num_stages(&self) -> usize {
        self.transitions.len() + 1
    }

    pub fn density_at(&self, t: u64) -> Density {
        self.schedule.density(stage_index(t, self))
    }
}

/// 1-based stage containing `t`, with half-open intervals `[T_{i-1}, T_i)`.
pub fn stage_index(t: u64, spec: &CurriculumSpec) -> usize {
    1 + spec.transitions.iter().take_while(|&&boundary| t >= boundary).count()
}

/// Reward actually paid at time `t`: the base reward, plus the shaping term when
/// the active stage is dense.
pub fn schedule_reward(
    spec: &CurriculumSpec,
    pot: &PotentialSpec,
    t: u64,
    base_r: f64,
    s: [f64; 2],
    s_next: [f64; 2],
) -> f64 {
    match spec.density_at(t) {
        Density::Sparse => base_r,
        Density::Dense => base_r + shaping(s, s_next, spec.gamma, pot),
    }
}
