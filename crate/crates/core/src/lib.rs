//! Compound cocycles of linear delay equations.
//!
//! The crate discretizes the delay Hilbert space `H = L2([-tau,0]; Leb + delta_0; R^n)`,
//! its exterior powers, and the transfer operator of the m-fold additive compound.
//! On top of that it sweeps `||W(-nu0 + i omega)||` over frequency and compares the
//! supremum with the inverse gain bound.

pub mod cauchy;
pub mod config;
pub mod dde;
pub mod error;
pub mod exterior;
pub mod hilbert;
pub mod pipeline;
pub mod scalar;
pub mod spectrum;
pub mod sweep;
pub mod transfer;

pub use dde::{LinearDelayModel, Trajectory};
pub use error::{Error, Result};
pub use exterior::{CompoundGridFunction, FaceIndex};
pub use hilbert::{Grid, HistoryElement, StieltjesKernel};
