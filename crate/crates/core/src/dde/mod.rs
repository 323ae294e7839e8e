//! Linear delay equations: model data, integration, characteristic roots and presets.

mod model;
pub mod presets;
pub mod roots;
mod solver;

pub use model::{shift_feedback, Gain, LinearDelayModel};
pub use roots::{characteristic_matrix, characteristic_roots, CharRoot, Rect};
pub use solver::{cocycle_apply, semigroup_apply, solve_linear, solve_linear_from, Trajectory};
