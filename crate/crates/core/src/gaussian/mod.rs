//! Gaussian measures on finite-dimensional configuration spaces and the
//! factorized family of their truncated `L²` spaces.

pub mod config_space;
pub mod hermite;
pub mod model;
pub mod verify;

pub use config_space::{check_structure, CoordinateModel, StructureReport};
pub use model::{build_gaussian_family, GaussianFactorization, GaussianModel, GaussianSpec, PhiMatrix, Variant};
