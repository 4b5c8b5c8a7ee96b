use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envs::{EnvSpec, GridAction, GridState, GridworldSpec};
use crate::error::{Error, Result};

/// Reward of the deterministic transition `(s, a) -> s'` on a gridworld.
pub type GridReward = Arc<dyn Fn(&GridState, GridAction, &GridState) -> f64 + Send + Sync>;

type GridPotential = Arc<dyn Fn(&GridState) -> f64 + Send + Sync>;

/// Tolerance below the row maximum under which two actions count as tied.
pub const ARGMAX_TIE_TOL: f64 = 1e-9;

/// One stage of a reward curriculum for certification.
///
/// `reward` is the full stage reward (it drives value iteration). `support_reward`
/// is the component used for the support-inclusion check; the living penalty is
/// paid in every state and would make every support trivially full, so the stock
/// constructors use the success-only component there. `potential` is set when the
/// stage equals the first stage's reward plus potential-based shaping.
#[derive(Clone)]
pub struct StageReward {
    pub label: String,
    pub reward: GridReward,
    pub support_reward: GridReward,
    pub potential: Option<GridPotential>,
}

impl std::fmt::Debug for StageReward {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StageReward")
            .field("label", &self.label)
            .field("shaped", &self.potential.is_some())
            .finish()
    }
}

impl StageReward {
    /// Success bonus only; zero from absorbing terminal states.
    pub fn success_only(spec: &GridworldSpec) -> GridReward {
        let bonus = spec.success_reward;
        Arc::new(move |s: &GridState, _a, sn: &GridState| {
            if !s.is_terminal() && sn.is_terminal() {
                bonus
            } else {
                0.0
            }
        })
    }

    /// The environment's base reward: living penalty every live step plus the success bonus.
    pub fn base(spec: &GridworldSpec) -> GridReward {
        let (living, bonus) = (spec.living_penalty, spec.success_reward);
        Arc::new(move |s: &GridState, _a, sn: &GridState| {
            if s.is_terminal() {
                0.0
            } else if sn.is_terminal() {
                living + bonus
            } else {
                living
            }
        })
    }

    pub fn goal_potential(spec: &GridworldSpec) -> GridPotential {
        let diam = spec.diameter();
        Arc::new(move |s: &GridState| {
            let dx = (s.agent.x - s.goal.x) as f64;
            let dy = (s.agent.y - s.goal.y) as f64;
            diam - (dx * dx + dy * dy).sqrt()
        })
    }

    /// `gamma * psi(s') - psi(s)`. Applied on absorbing self-loops too, so the
    /// terminal state carries value `-psi(g)` under shaping.
    pub fn shaping_term(spec: &GridworldSpec, gamma: f64) -> GridReward {
        let psi = Self::goal_potential(spec);
        Arc::new(move |s: &GridState, _a, sn: &GridState| gamma * psi(sn) - psi(s))
    }

    pub fn sparse(spec: &GridworldSpec) -> Self {
        StageReward {
            label: "sparse".into(),
            reward: Self::base(spec),
            support_reward: Self::success_only(spec),
            potential: None,
        }
    }

    pub fn shaped(spec: &GridworldSpec, gamma: f64) -> Self {
        let base = Self::base(spec);
        let success = Self::success_only(spec);
        let f1 = Self::shaping_term(spec, gamma);
        let f2 = f1.clone();
        StageReward {
            label: "sparse+pbrs".into(),
            reward: Arc::new(move |s, a, sn| base(s, a, sn) + f1(s, a, sn)),
            support_reward: Arc::new(move |s, a, sn| success(s, a, sn) + f2(s, a, sn)),
            potential: Some(Self::goal_potential(spec)),
        }
    }

    pub fn custom(label: impl Into<String>, reward: GridReward, support_reward: GridReward) -> Self {
        StageReward { label: label.into(), reward, support_reward, potential: None }
    }
}

/// Enumerated deterministic MDP.
struct TabularModel {
    states: Vec<GridState>,
    next: Vec<[usize; 4]>,
}

impl TabularModel {
    fn build(env: &EnvSpec) -> Result<Self> {
        let spec = env.as_gridworld()?;
        let listed = env.enumerate_states()?;
        let states: Vec<GridState> = listed.into_iter().map(|(s, _)| s).collect();
        let index: HashMap<GridState, usize> = states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        let next = states
            .iter()
            .map(|s| {
                let mut row = [0usize; 4];
                for a in GridAction::ALL {
                    row[a.index()] = index[&spec.transition(s, a)];
                }
                row
            })
            .collect();
        Ok(TabularModel { states, next })
    }

    fn rewards(&self, reward: &dyn Fn(&GridState, GridAction, &GridState) -> f64) -> Vec<[f64; 4]> {
        self.states
            .iter()
            .zip(&self.next)
            .map(|(s, nx)| {
                let mut row = [0.0; 4];
                for a in GridAction::ALL {
                    row[a.index()] = reward(s, a, &self.states[nx[a.index()]]);
                }
                row
            })
            .collect()
    }
}

/// States where some action earns a nonzero reward.
pub fn support(
    env: &EnvSpec,
    reward: &dyn Fn(&GridState, GridAction, &GridState) -> f64,
) -> Result<BTreeSet<GridState>> {
    let model = TabularModel::build(env)?;
    let r = model.rewards(reward);
    Ok(model
        .states
        .iter()
        .zip(&r)
        .filter(|(_, row)| row.iter().any(|&v| v != 0.0))
        .map(|(s, _)| *s)
        .collect())
}

/// Optimal action values of an enumerable environment.
#[derive(Clone, Debug)]
pub struct QTable {
    pub states: Vec<GridState>,
    pub q: Vec<[f64; 4]>,
    pub v: Vec<f64>,
    pub greedy: Vec<Vec<GridAction>>,
    pub residual: f64,
    pub iterations: usize,
    index: HashMap<GridState, usize>,
}

impl QTable {
    pub fn index_of(&self, s: &GridState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn q_value(&self, s: &GridState, a: GridAction) -> Option<f64> {
        self.index_of(s).map(|i| self.q[i][a.index()])
    }

    pub fn value(&self, s: &GridState) -> Option<f64> {
        self.index_of(s).map(|i| self.v[i])
    }

    pub fn greedy_set(&self, s: &GridState) -> Option<&[GridAction]> {
        self.index_of(s).map(|i| self.greedy[i].as_slice())
    }
}

const MAX_SWEEPS: usize = 5_000_000;

/// Value iteration until the sup-norm Bellman residual is at most `tol`.
pub fn value_iteration(
    env: &EnvSpec,
    reward: &dyn Fn(&GridState, GridAction, &GridState) -> f64,
    gamma: f64,
    tol: f64,
) -> Result<QTable> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Unsupported(format!(
            "value iteration oracle needs 0 < gamma < 1, got {gamma}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition(format!("tolerance must be positive, got {tol}")));
    }
    let model = TabularModel::build(env)?;
    let r = model.rewards(reward);
    let n = model.states.len();
    let backup = |v: &[f64], i: usize| -> [f64; 4] {
        let mut q = [0.0; 4];
        for a in 0..4 {
            q[a] = r[i][a] + gamma * v[model.next[i][a]];
        }
        q
    };
    let mut v = vec![0.0; n];
    let mut iterations = 0;
    let residual = loop {
        let fresh: Vec<f64> = (0..n).map(|i| backup(&v, i).into_iter().fold(f64::NEG_INFINITY, f64::max)).collect();
        let delta = fresh.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = fresh;
        iterations += 1;
        if !delta.is_finite() {
            return Err(Error::Numeric("value iteration diverged".into()));
        }
        if delta <= tol {
            break delta;
        }
        if iterations >= MAX_SWEEPS {
            return Err(Error::Numeric(format!("value iteration did not reach {tol} in {MAX_SWEEPS} sweeps")));
        }
    };
    let q: Vec<[f64; 4]> = (0..n).map(|i| backup(&v, i)).collect();
    let v: Vec<f64> = q.iter().map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let greedy = q
        .iter()
        .zip(&v)
        .map(|(row, &best)| {
            GridAction::ALL
                .into_iter()
                .filter(|a| row[a.index()] >= best - ARGMAX_TIE_TOL)
                .collect()
        })
        .collect();
    let index = model.states.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    Ok(QTable { states: model.states, q, v, greedy, residual, iterations, index })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageEvidence {
    pub label: String,
    pub supp_size: usize,
    pub sparsity_ratio: f64,
    /// States whose greedy set is not contained in the previous stage's greedy set.
    pub eq2_violations: Vec<GridState>,
    /// Max over (s, a) of |Q_i - Q_1 + (Phi_i - Phi_1)(s)|, for shaped stages.
    pub q_shift_residual: Option<f64>,
    pub vi_residual: f64,
}

/// Machine-checked sparse-to-dense certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub eq1_ok: bool,
    pub eq2_ok: bool,
    pub q_shift_ok: bool,
    pub q_shift_max_residual: Option<f64>,
    pub supp_sizes: Vec<usize>,
    pub num_states: usize,
    pub gamma: f64,
    pub tol: f64,
    /// Which reward component the support chain was checked on.
    pub support_component: String,
    pub stages: Vec<StageEvidence>,
}

/// Check support inclusion along the stages and nesting of optimal-policy sets
/// (greedy-set inclusion from exact value iteration), plus the potential-shaping
/// Q-shift identity for shaped stages.
pub fn check_s2d_conditions(env: &EnvSpec, stages: &[StageReward], gamma: f64, tol: f64) -> Result<Certificate> {
    if stages.len() < 2 {
        return Err(Error::Precondition("certificate needs at least two stages".into()));
    }
    let supports: Vec<BTreeSet<GridState>> = stages
        .iter()
        .map(|st| support(env, st.support_reward.as_ref()))
        .collect::<Result<_>>()?;
    let tables: Vec<QTable> = stages
        .iter()
        .map(|st| value_iteration(env, st.reward.as_ref(), gamma, tol))
        .collect::<Result<_>>()?;
    let num_states = tables[0].states.len();
    let eq1_ok = supports.windows(2).all(|w| w[0].is_subset(&w[1]));

    let first_potential = stages[0].potential.clone();
    let phi0 = |s: &GridState| first_potential.as_ref().map_or(0.0, |p| p(s));

    let mut evidence = Vec::with_capacity(stages.len());
    for (i, st) in stages.iter().enumerate() {
        let table = &tables[i];
        let eq2_violations = if i == 0 {
            Vec::new()
        } else {
            let prev = &tables[i - 1];
            table
                .states
                .iter()
                .enumerate()
                .filter(|(k, _)| !table.greedy[*k].iter().all(|a| prev.greedy[*k].contains(a)))
                .map(|(_, s)| *s)
                .collect()
        };
        let q_shift_residual = match (&st.potential, i) {
            (Some(phi), i) if i > 0 => {
                let mut worst = 0.0f64;
                for (k, s) in table.states.iter().enumerate() {
                    let shift = phi(s) - phi0(s);
                    for a in 0..4 {
                        worst = worst.max((table.q[k][a] - tables[0].q[k][a] + shift).abs());
                    }
                }
                Some(worst)
            }
            _ => None,
        };
        evidence.push(StageEvidence {
            label: st.label.clone(),
            supp_size: supports[i].len(),
            sparsity_ratio: supports[i].len() as f64 / num_states as f64,
            eq2_violations,
            q_shift_residual,
            vi_residual: table.residual,
        });
    }
    let eq2_ok = evidence.iter().all(|e| e.eq2_violations.is_empty());
    let q_shift_max_residual = evidence
        .iter()
        .filter_map(|e| e.q_shift_residual)
        .reduce(f64::max);
    let q_shift_ok = q_shift_max_residual.map_or(true, |r| r <= q_shift_bound(gamma, tol));
    Ok(Certificate {
        eq1_ok,
        eq2_ok,
        q_shift_ok,
        q_shift_max_residual,
        supp_sizes: supports.iter().map(BTreeSet::len).collect(),
        num_states,
        gamma,
        tol,
        support_component: "success-only reward (+ shaping term for shaped stages)".into(),
        stages: evidence,
    })
}

/// Accepted Q-shift residual. Each value-iteration table sits within
/// `gamma * tol / (1 - gamma)` of its fixed point.
fn q_shift_bound(gamma: f64, tol: f64) -> f64 {
    10.0 * tol / (1.0 - gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{Cell, GoalMode};

    fn grid(width: i64, height: i64, goal: Cell) -> GridworldSpec {
        GridworldSpec {
            width,
            height,
            start: Cell::new(0, 0),
            goal_mode: GoalMode::Fixed(goal),
            walls: BTreeSet::new(),
            living_penalty: -0.1,
            success_reward: 1.0,
            max_steps: 50,
        }
    }

    fn at(x: i64, y: i64, g: Cell) -> GridState {
        GridState { agent: Cell::new(x, y), goal: g }
    }

    #[test]
    fn two_state_hand_solution() {
        let spec = grid(2, 1, Cell::new(1, 0));
        let env = EnvSpec::Gridworld(spec.clone());
        let table = value_iteration(&env, StageReward::base(&spec).as_ref(), 0.9, 1e-12).unwrap();
        let left = at(0, 0, Cell::new(1, 0));
        assert!((table.q_value(&left, GridAction::Right).unwrap() - 0.9).abs() < 1e-9);
        // Blocked move: -0.1 + 0.9 * V(left) = -0.1 + 0.81
        assert!((table.q_value(&left, GridAction::Up).unwrap() - 0.71).abs() < 1e-9);
        assert_eq!(table.greedy_set(&left).unwrap(), &[GridAction::Right]);
        assert_eq!(table.value(&at(1, 0, Cell::new(1, 0))).unwrap(), 0.0);
    }

    #[test]
    fn zero_reward_gives_zero_q() {
        let env = EnvSpec::Gridworld(GridworldSpec::fixed_4x4());
        let table = value_iteration(&env, &|_, _, _| 0.0, 0.99, 1e-10).unwrap();
        assert!(table.q.iter().flatten().all(|&q| q == 0.0));
        assert!(table.greedy.iter().all(|g| g.len() == 4));
    }

    #[test]
    fn value_is_row_max() {
        let spec = GridworldSpec::fixed_4x4();
        let env = EnvSpec::Gridworld(spec.clone());
        let table = value_iteration(&env, StageReward::shaped(&spec, 0.95).reward.as_ref(), 0.95, 1e-10).unwrap();
        for (row, v) in table.q.iter().zip(&table.v) {
            assert_eq!(row.iter().copied().fold(f64::NEG_INFINITY, f64::max), *v);
        }
        assert!(table.residual <= 1e-10);
    }

    #[test]
    fn oracle_preconditions() {
        let env = EnvSpec::Gridworld(GridworldSpec::fixed_4x4());
        assert!(matches!(value_iteration(&env, &|_, _, _| 0.0, 1.0, 1e-6), Err(Error::Unsupported(_))));
        assert!(matches!(value_iteration(&env, &|_, _, _| 0.0, 0.9, 0.0), Err(Error::Precondition(_))));
        let reacher = EnvSpec::PointReacher(Default::default());
        assert!(matches!(support(&reacher, &|_, _, _| 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn success_support_is_goal_neighbourhood() {
        let spec = GridworldSpec::fixed_4x4();
        let env = EnvSpec::Gridworld(spec.clone());
        let g = Cell::new(3, 3);
        let supp = support(&env, StageReward::success_only(&spec).as_ref()).unwrap();
        assert_eq!(supp, BTreeSet::from([at(3, 2, g), at(2, 3, g)]));
        assert!(support(&env, &|_, _, _| 0.0).unwrap().is_empty());
    }

    #[test]
    fn shaped_support_covers_every_state() {
        let spec = GridworldSpec::fixed_4x4();
        let env = EnvSpec::Gridworld(spec.clone());
        let supp = support(&env, StageReward::shaping_term(&spec, 0.99).as_ref()).unwrap();
        // Every cell has an action that changes psi; the goal's self-loop pays (gamma-1) psi(g).
        assert_eq!(supp.len(), 16);
    }

    #[test]
    fn reflexive_certificate() {
        let spec = GridworldSpec::fixed_4x4();
        let env = EnvSpec::Gridworld(spec.clone());
        let stages = [StageReward::sparse(&spec), StageReward::sparse(&spec)];
        let cert = check_s2d_conditions(&env, &stages, 0.99, 1e-10).unwrap();
        assert!(cert.eq1_ok && cert.eq2_ok && cert.q_shift_ok);
        assert_eq!(cert.q_shift_max_residual, None);
    }

    #[test]
    fn pbrs_certificate() {
        let spec = GridworldSpec::fixed_4x4();
        let env = EnvSpec::Gridworld(spec.clone());
        let stages = [StageReward::sparse(&spec), StageReward::shaped(&spec, 0.99)];
        let cert = check_s2d_conditions(&env, &stages, 0.99, 1e-10).unwrap();
        assert!(cert.eq1_ok && cert.eq2_ok && cert.q_shift_ok, "{cert:?}");
        assert!(cert.q_shift_max_residual.unwrap() < 1e-6);
        assert_eq!(cert.supp_sizes, vec![2, 16]);
        let json = serde_json::to_value(&cert).unwrap();
        for key in ["eq1_ok", "eq2_ok", "q_shift_max_residual", "supp_sizes"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
    }

    #[test]
    fn decoy_bonus_breaks_optimality_nesting() {
        let spec = GridworldSpec::fixed_4x4();
        let env = EnvSpec::Gridworld(spec.clone());
        let base = StageReward::base(&spec);
        let success = StageReward::success_only(&spec);
        let decoy = Cell::new(0, 3);
        let lure = move |s: &GridState, a, sn: &GridState| {
            base(s, a, sn) + if !s.is_terminal() && sn.agent == decoy { 1.0 } else { 0.0 }
        };
        let lure_support = move |s: &GridState, a, sn: &GridState| {
            success(s, a, sn) + if !s.is_terminal() && sn.agent == decoy { 1.0 } else { 0.0 }
        };
        let stages = [
            StageReward::sparse(&spec),
            StageReward::custom("decoy", Arc::new(lure), Arc::new(lure_support)),
        ];
        let cert = check_s2d_conditions(&env, &stages, 0.99, 1e-10).unwrap();
        assert!(!cert.eq2_ok);
        assert!(!cert.stages[1].eq2_violations.is_empty());
    }

    #[test]
    fn needs_two_stages() {
        let spec = GridworldSpec::fixed_4x4();
        let env = EnvSpec::Gridworld(spec.clone());
        assert!(check_s2d_conditions(&env, &[StageReward::sparse(&spec)], 0.9, 1e-8).is_err());
    }
}
