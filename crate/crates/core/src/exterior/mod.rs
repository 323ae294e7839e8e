//! Tensor and exterior powers of `H` stored face by face on a closed grid.

mod face;
mod generator;
mod grid;

pub use face::FaceIndex;
pub(crate) use generator::apply_generator;
pub use generator::{
    compound_generator_apply, compound_generator_apply_checked, compound_semigroup_apply,
    trace_jump, TRACE_TOL,
};
pub use grid::{
    check_antisymmetry, compound_inner, diagonal_shift, gram_oracle, permutations, tensor, wedge,
    AntisymmetryReport, CompoundGridFunction, MAX_ORDER,
};
pub(crate) use grid::{comp_coords, comp_flat, for_each_index};
