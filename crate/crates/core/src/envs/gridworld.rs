use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{StepInfo, StepOutcome};
use crate::error::{Error, Result};
use crate::seeding::rng_for;

/// Grid cell; `x` is the column, `y` the row (row 0 at the top).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[i64; 2]", into = "[i64; 2]")]
pub struct Cell {
    pub x: i64,
    pub y: i64,
}

impl Cell {
    pub const fn new(x: i64, y: i64) -> Self {
        Cell { x, y }
    }

    pub fn as_point(self) -> [f64; 2] {
        [self.x as f64, self.y as f64]
    }
}

impl From<[i64; 2]> for Cell {
    fn from(v: [i64; 2]) -> Self {
        Cell { x: v[0], y: v[1] }
    }
}

impl From<Cell> for [i64; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GridAction {
    Up,
    Down,
    Left,
    Right,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [GridAction::Up, GridAction::Down, GridAction::Left, GridAction::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::Precondition(format!("gridworld action index {i} out of range")))
    }

    fn delta(self) -> (i64, i64) {
        match self {
            GridAction::Up => (0, -1),
            GridAction::Down => (0, 1),
            GridAction::Left => (-1, 0),
            GridAction::Right => (1, 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalMode {
    Fixed(Cell),
    RandomPerEpisode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridworldSpec {
    pub width: i64,
    pub height: i64,
    pub start: Cell,
    pub goal_mode: GoalMode,
    #[serde(default)]
    pub walls: BTreeSet<Cell>,
    pub living_penalty: f64,
    pub success_reward: f64,
    pub max_steps: u32,
}

/// Agent and goal positions; the state of the goal-conditioned gridworld MDP.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub agent: Cell,
    pub goal: Cell,
}

impl GridState {
    pub fn is_terminal(&self) -> bool {
        self.agent == self.goal
    }
}

impl GridworldSpec {
    /// 4x4, start (0,0), fixed goal (3,3), no walls.
    pub fn fixed_4x4() -> Self {
        GridworldSpec {
            width: 4,
            height: 4,
            start: Cell::new(0, 0),
            goal_mode: GoalMode::Fixed(Cell::new(3, 3)),
            walls: BTreeSet::new(),
            living_penalty: -0.1,
            success_reward: 1.0,
            max_steps: 50,
        }
    }

    /// 10x10, start (0,0), goal drawn each episode.
    pub fn random_10x10() -> Self {
        GridworldSpec {
            width: 10,
            height: 10,
            start: Cell::new(0, 0),
            goal_mode: GoalMode::RandomPerEpisode,
            walls: BTreeSet::new(),
            living_penalty: -0.1,
            success_reward: 1.0,
            max_steps: 50,
        }
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn is_open(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.walls.contains(&c)
    }

    /// Non-wall cells in row-major order.
    pub fn open_cells(&self) -> Vec<Cell> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| Cell::new(x, y)))
            .filter(|c| !self.walls.contains(c))
            .collect()
    }

    /// Cells a goal can occupy: the fixed goal, or every open cell except the start.
    pub fn candidate_goals(&self) -> Vec<Cell> {
        match &self.goal_mode {
            GoalMode::Fixed(g) => vec![*g],
            GoalMode::RandomPerEpisode => {
                self.open_cells().into_iter().filter(|&c| c != self.start).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.width <= 0 || self.height <= 0 {
            errs.push(format!("grid dimensions must be positive, got {}x{}", self.width, self.height));
        }
        if self.max_steps == 0 {
            errs.push("max_steps must be positive".to_string());
        }
        if !self.in_bounds(self.start) {
            errs.push(format!("start {:?} outside the grid", self.start));
        }
        if self.walls.contains(&self.start) {
            errs.push(format!("start {:?} is a wall", self.start));
        }
        for w in &self.walls {
            if !self.in_bounds(*w) {
                errs.push(format!("wall {w:?} outside the grid"));
            }
        }
        if let GoalMode::Fixed(g) = &self.goal_mode {
            if !self.in_bounds(*g) || self.walls.contains(g) {
                errs.push(format!("goal {g:?} is outside the grid or a wall"));
            }
            if *g == self.start {
                errs.push("goal coincides with start".to_string());
            }
        }
        if errs.is_empty() {
            let reach = self.reachable_from(self.start);
            let goals = self.candidate_goals();
            if goals.is_empty() {
                errs.push("no cell available for the goal".to_string());
            }
            for g in goals {
                if !reach.contains(&g) {
                    errs.push(format!("goal candidate {g:?} unreachable from start"));
                }
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(errs.join("; ")))
        }
    }

    fn reachable_from(&self, from: Cell) -> BTreeSet<Cell> {
        let mut seen = BTreeSet::from([from]);
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            for a in GridAction::ALL {
                let n = self.move_agent(c, a);
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }

    /// Deterministic movement: blocked by borders and walls.
    pub fn move_agent(&self, from: Cell, action: GridAction) -> Cell {
        let (dx, dy) = action.delta();
        let to = Cell::new(from.x + dx, from.y + dy);
        if self.is_open(to) {
            to
        } else {
            from
        }
    }

    /// Transition of the enumerable MDP; terminal states are absorbing.
    pub fn transition(&self, s: &GridState, action: GridAction) -> GridState {
        if s.is_terminal() {
            return *s;
        }
        GridState { agent: self.move_agent(s.agent, action), goal: s.goal }
    }

    /// Max pairwise L2 distance over reachable cells.
    pub fn diameter(&self) -> f64 {
        let cells: Vec<Cell> = self.reachable_from(self.start).into_iter().collect();
        let mut best = 0.0f64;
        for (i, a) in cells.iter().enumerate() {
            for b in &cells[i + 1..] {
                let d = (((a.x - b.x).pow(2) + (a.y - b.y).pow(2)) as f64).sqrt();
                best = best.max(d);
            }
        }
        best
    }

    /// Agent and goal coordinates scaled to [0, 1], concatenated.
    pub fn observe(&self, s: &GridState) -> Vec<f64> {
        let sx = (self.width - 1).max(1) as f64;
        let sy = (self.height - 1).max(1) as f64;
        vec![
            s.agent.x as f64 / sx,
            s.agent.y as f64 / sy,
            s.goal.x as f64 / sx,
            s.goal.y as f64 / sy,
        ]
    }

    /// Every MDP state with its available actions. Fixed-goal grids have one state per
    /// open cell; random-goal grids enumerate (goal, agent) pairs goal-major, each
    /// block in row-major agent order.
    pub fn enumerate_states(&self) -> Vec<(GridState, Vec<GridAction>)> {
        let cells = self.open_cells();
        self.candidate_goals()
            .into_iter()
            .flat_map(|goal| {
                cells
                    .iter()
                    .map(move |&agent| (GridState { agent, goal }, GridAction::ALL.to_vec()))
            })
            .collect()
    }
}

/// A running gridworld episode.
#[derive(Clone, Debug)]
pub struct Gridworld {
    spec: GridworldSpec,
    state: GridState,
    step_index: u32,
    done: bool,
}

impl Gridworld {
    pub fn new(spec: GridworldSpec) -> Result<Self> {
        spec.validate()?;
        let goal = spec.candidate_goals()[0];
        let state = GridState { agent: spec.start, goal };
        Ok(Gridworld { spec, state, step_index: 0, done: true })
    }

    pub fn spec(&self) -> &GridworldSpec {
        &self.spec
    }

    pub fn state(&self) -> GridState {
        self.state
    }

    pub fn reset(&mut self, seed: u64, episode: u64) -> Vec<f64> {
        let goal = match &self.spec.goal_mode {
            GoalMode::Fixed(g) => *g,
            GoalMode::RandomPerEpisode => {
                let candidates = self.spec.candidate_goals();
                let mut rng = rng_for(seed, "gridworld-goal", episode);
                candidates[rng.gen_range(0..candidates.len())]
            }
        };
        self.state = GridState { agent: self.spec.start, goal };
        self.step_index = 0;
        self.done = false;
        self.spec.observe(&self.state)
    }

    pub fn step(&mut self, action: GridAction) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::ContractViolation("step called on a finished episode".into()));
        }
        self.state.agent = self.spec.move_agent(self.state.agent, action);
        self.step_index += 1;
        let success = self.state.agent == self.state.goal;
        let mut base_reward = self.spec.living_penalty;
        if success {
            base_reward += self.spec.success_reward;
        }
        self.done = success || self.step_index >= self.spec.max_steps;
        Ok(StepOutcome {
            next_obs: self.spec.observe(&self.state),
            base_reward,
            done: self.done,
            success,
            info: StepInfo {
                agent_pos: self.state.agent.as_point(),
                goal_pos: self.state.goal.as_point(),
                step_index: self.step_index,
            },
        })
    }
}
