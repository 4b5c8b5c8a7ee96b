use serde::{Deserialize, Serialize};

use super::{gen_perpendicular_directions, local_minima_depth, loss_grid, DepthReport, LandscapeGrid};
use crate::agents::AgentConfig;
use crate::envs::EnvSpec;
use crate::error::{Error, Result};
use crate::harness::train::{Budget, EpisodeRecord, Trainer};
use crate::reward::{CurriculumSpec, Density, Schedule, TimeUnit};
use crate::seeding::derive_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    /// Gradient updates after the transition at which grids are taken.
    pub checkpoints: Vec<u64>,
    pub steps: usize,
    pub half_range: f64,
    pub batch: usize,
    pub parallel: bool,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings { checkpoints: vec![50, 400, 800], steps: 50, half_range: 10.0, batch: 128, parallel: true }
    }
}

impl ProbeSettings {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch == 0 {
            return Err(Error::InvalidSpec("landscape steps and batch must be positive".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("checkpoints must be strictly increasing".into()));
        }
        if !(self.half_range >= 0.0 && self.half_range.is_finite()) {
            return Err(Error::InvalidSpec("half_range must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Landscapes of one training branch at its post-transition checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchProbe {
    pub schedule: Schedule,
    pub grids: Vec<LandscapeGrid>,
    pub depth: DepthReport,
    /// Agent update count when the transition took place.
    pub updates_at_transition: u64,
}

/// Continue `trainer` to each checkpoint (counted in gradient updates from the
/// current state) and take a landscape there. Training stops after the last
/// checkpoint; callers wanting the full budget keep stepping the trainer.
pub fn probe_checkpoints(
    trainer: &mut Trainer,
    probe: &ProbeSettings,
    gen_seed: u64,
    run_id: &str,
    mut on_episode: impl FnMut(&EpisodeRecord),
) -> Result<BranchProbe> {
    probe.validate()?;
    let start = trainer.agent.updates();
    let mut grids = Vec::new();
    let mut reached = Vec::new();
    for &c in &probe.checkpoints {
        trainer.run_while(|t| t.agent.updates() < start + c, &mut on_episode)?;
        if trainer.agent.updates() < start + c {
            log::warn!(
                "{run_id}: budget ended {} updates after the transition, before checkpoint {c}",
                trainer.agent.updates() - start
            );
            break;
        }
        let batch = trainer.eval_batch(probe.batch)?;
        let dirs = gen_perpendicular_directions(trainer.agent.probe_net(), gen_seed);
        let mut grid = loss_grid(&trainer.agent, &dirs, &batch, probe.half_range, probe.steps, probe.parallel)?;
        grid.metadata.run_id = run_id.to_string();
        grid.metadata.checkpoint = c;
        grid.metadata.schedule = trainer.curriculum.schedule.name().to_string();
        grids.push(grid);
        reached.push(c);
    }
    let depths = grids.iter().map(|g| local_minima_depth(&g.z)).collect();
    Ok(BranchProbe {
        schedule: trainer.curriculum.schedule,
        depth: DepthReport::new(trainer.curriculum.schedule.name(), reached, depths),
        grids,
        updates_at_transition: start,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossDensitySpec {
    pub env: EnvSpec,
    pub agent: AgentConfig,
    pub initial: Density,
    pub transition: u64,
    pub unit: TimeUnit,
    pub budget: Budget,
    pub probe: ProbeSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossDensityResult {
    pub seed: u64,
    /// Branch A keeps the initial density; branch B switches at the transition.
    pub keep: BranchProbe,
    pub switch: BranchProbe,
}

/// Train under the initial density up to the transition, clone the trainer,
/// and probe both continuations. Both branches reset their environments with
/// the same per-episode seeds and share the direction seed, so their grids
/// coincide at checkpoint 0.
pub fn cross_density_run(spec: &CrossDensitySpec, seed: u64, run_id: &str) -> Result<CrossDensityResult> {
    if spec.budget.unit != spec.unit {
        return Err(Error::InvalidSpec("transition and budget must use the same unit".into()));
    }
    if spec.transition >= spec.budget.total {
        return Err(Error::InvalidSpec(format!(
            "transition {} must precede the budget end {}",
            spec.transition, spec.budget.total
        )));
    }
    let (keep_schedule, switch_schedule) = match spec.initial {
        Density::Sparse => (Schedule::OnlySparse, Schedule::S2D),
        Density::Dense => (Schedule::OnlyDense, Schedule::D2S),
    };
    let gamma = spec.agent.gamma;
    let keep_cur = CurriculumSpec::new(keep_schedule, vec![], spec.unit, gamma)?;
    let switch_cur = CurriculumSpec::new(switch_schedule, vec![spec.transition], spec.unit, gamma)?;

    let mut pre = Trainer::new(&spec.env, &spec.agent, keep_cur, spec.budget, seed)?;
    pre.run_while(|t| t.time(spec.unit) < spec.transition, |_| {})?;
    let mut switch = pre.clone();
    switch.curriculum = switch_cur;
    let mut keep = pre;

    let gen_seed = derive_seed(seed, "directions", 0);
    let keep_probe = probe_checkpoints(&mut keep, &spec.probe, gen_seed, &format!("{run_id}-{keep_schedule}"), |_| {})?;
    let switch_probe =
        probe_checkpoints(&mut switch, &spec.probe, gen_seed, &format!("{run_id}-{switch_schedule}"), |_| {})?;
    Ok(CrossDensityResult { seed, keep: keep_probe, switch: switch_probe })
}
