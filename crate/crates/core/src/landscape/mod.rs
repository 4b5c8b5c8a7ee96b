//! Policy loss landscapes: filter-normalised perpendicular directions, loss
//! grids over the spanned plane, the local-minima depth metric, and the paired
//! cross-density branch protocol.

mod cross_density;
mod depth;
mod directions;
mod grid;

pub use cross_density::{
    cross_density_run, probe_checkpoints, BranchProbe, CrossDensityResult, CrossDensitySpec, ProbeSettings,
};
pub use depth::{local_minima_depth, DepthReport};
pub use directions::gen_perpendicular_directions;
pub use grid::{axis, batch_fingerprint, grid_values, loss_grid, GridMetadata, LandscapeGrid, DEFAULT_HALF_RANGE, DEFAULT_STEPS};
