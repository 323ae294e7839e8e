//! Transfer operator `C^ (A - p)^{-1} B^` of the additive compound on finite bases.

mod basis;
mod dense;
mod embed;
mod laplace;
mod matrix;

pub use basis::{legendre_univariate, ControlBasis, MeasurementBasis, ProperBasis};
pub use dense::{
    dense_operator_matrix, dense_resolvent_extrapolated, dense_resolvent_solve, DenseDiagnostics,
    DenseSolution, MAX_DENSE_UNKNOWNS,
};
pub use embed::{control_embed, control_wedge, measurement_project, WedgeSum};
pub use laplace::{
    filon_phi, laplace_weight_pairs, laplace_weights, remainder_estimate, resolvent_laplace,
    LaplaceOptions, LaplaceResult,
};
pub use matrix::{transfer_matrix, transfer_matrix_generic, TransferKernel, TransferMatrix};
