use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{StepInfo, StepOutcome};
use crate::error::{Error, Result};
use crate::seeding::rng_for;

/// Continuous 2D point that must reach a goal in the unit square.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReacherSpec {
    pub max_action: f64,
    pub success_radius: f64,
    pub time_penalty: f64,
    pub success_reward: f64,
    pub max_steps: u32,
    /// Minimum start-to-goal distance when sampling an episode.
    pub min_goal_distance: f64,
}

impl Default for PointReacherSpec {
    fn default() -> Self {
        PointReacherSpec {
            max_action: 0.1,
            success_radius: 0.02,
            time_penalty: -0.01,
            success_reward: 1.0,
            max_steps: 50,
            min_goal_distance: 0.2,
        }
    }
}

impl PointReacherSpec {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.max_action > 0.0) {
            errs.push("max_action must be positive");
        }
        if !(self.success_radius > 0.0) {
            errs.push("success_radius must be positive");
        }
        if self.max_steps == 0 {
            errs.push("max_steps must be positive");
        }
        if !(0.0..2f64.sqrt()).contains(&self.min_goal_distance) {
            errs.push("min_goal_distance must lie in [0, sqrt(2))");
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(errs.join("; ")))
        }
    }

    pub fn diameter(&self) -> f64 {
        2f64.sqrt()
    }
}

pub(crate) fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Clone, Debug)]
pub struct PointReacher {
    spec: PointReacherSpec,
    pos: [f64; 2],
    goal: [f64; 2],
    step_index: u32,
    done: bool,
}

impl PointReacher {
    pub fn new(spec: PointReacherSpec) -> Result<Self> {
        spec.validate()?;
        Ok(PointReacher { spec, pos: [0.0; 2], goal: [1.0; 2], step_index: 0, done: true })
    }

    pub fn spec(&self) -> &PointReacherSpec {
        &self.spec
    }

    pub fn position(&self) -> [f64; 2] {
        self.pos
    }

    pub fn goal(&self) -> [f64; 2] {
        self.goal
    }

    fn observe(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.goal[0], self.goal[1]]
    }

    pub fn reset(&mut self, seed: u64, episode: u64) -> Vec<f64> {
        let mut rng = rng_for(seed, "reacher-reset", episode);
        loop {
            let s = [rng.gen::<f64>(), rng.gen::<f64>()];
            let g = [rng.gen::<f64>(), rng.gen::<f64>()];
            if dist(s, g) > self.spec.min_goal_distance {
                self.pos = s;
                self.goal = g;
                break;
            }
        }
        self.step_index = 0;
        self.done = false;
        self.observe()
    }

    pub fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::ContractViolation("step called on a finished episode".into()));
        }
        if action.len() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: action.len() });
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(Error::Numeric("non-finite action".into()));
        }
        let m = self.spec.max_action;
        for (p, a) in self.pos.iter_mut().zip(action) {
            *p = (*p + a.clamp(-m, m)).clamp(0.0, 1.0);
        }
        self.step_index += 1;
        let success = dist(self.pos, self.goal) < self.spec.success_radius;
        let mut base_reward = self.spec.time_penalty;
        if success {
            base_reward += self.spec.success_reward;
        }
        self.done = success || self.step_index >= self.spec.max_steps;
        Ok(StepOutcome {
            next_obs: self.observe(),
            base_reward,
            done: self.done,
            success,
            info: StepInfo { agent_pos: self.pos, goal_pos: self.goal, step_index: self.step_index },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reset_respects_goal_distance() {
        let mut env = PointReacher::new(PointReacherSpec::default()).unwrap();
        for ep in 0..500 {
            env.reset(3, ep);
            assert!(dist(env.position(), env.goal()) > 0.2);
        }
        let a = env.reset(3, 7);
        assert_eq!(a, env.reset(3, 7));
    }

    #[test]
    fn actions_are_clipped_and_state_bounded() {
        let mut env = PointReacher::new(PointReacherSpec::default()).unwrap();
        env.reset(0, 0);
        let before = env.position();
        let out = env.step(&[5.0, -5.0]).unwrap();
        assert!((out.info.agent_pos[0] - (before[0] + 0.1).min(1.0)).abs() < 1e-15);
        assert!((out.info.agent_pos[1] - (before[1] - 0.1).max(0.0)).abs() < 1e-15);
        for _ in 0..30 {
            if env.step(&[1.0, 1.0]).unwrap().done {
                break;
            }
        }
        let p = env.position();
        assert!(p[0] <= 1.0 && p[1] <= 1.0);
    }

    #[test]
    fn success_inside_radius() {
        let mut env = PointReacher::new(PointReacherSpec::default()).unwrap();
        env.reset(1, 0);
        let mut out = None;
        for _ in 0..50 {
            let d = [env.goal()[0] - env.position()[0], env.goal()[1] - env.position()[1]];
            let o = env.step(&d).unwrap();
            let done = o.done;
            out = Some(o);
            if done {
                break;
            }
        }
        let out = out.unwrap();
        assert!(out.success);
        assert!((out.base_reward - 0.99).abs() < 1e-12);
    }

    #[test]
    fn timeout() {
        let mut env = PointReacher::new(PointReacherSpec::default()).unwrap();
        env.reset(0, 0);
        let mut steps = 0;
        loop {
            steps += 1;
            let o = env.step(&[0.0, 0.0]).unwrap();
            assert_eq!(o.base_reward, -0.01);
            if o.done {
                break;
            }
        }
        assert_eq!(steps, 50);
        assert!(env.step(&[0.0, 0.0]).is_err());
    }
}
