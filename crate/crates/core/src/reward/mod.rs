//! Sparse rewards, potential-based dense shaping, curriculum staging, and exact
//! tabular certificates that a reward sequence is sparse-to-dense and
//! optimality-preserving.

mod curriculum;
mod oracle;
mod shaping;

pub use curriculum::{schedule_reward, stage_index, CurriculumSpec, Density, Schedule, TimeUnit};
pub use oracle::{
    check_s2d_conditions, support, value_iteration, Certificate, GridReward, QTable, StageEvidence,
    StageReward, ARGMAX_TIE_TOL,
};
pub use shaping::{potential, shaping, PotentialSpec};
