//! Projective limits of quantum state spaces over directed families of
//! factorized Hilbert spaces.

pub mod algebra;
pub mod directed;
pub mod error;
pub mod factorized;
pub mod gaussian;
pub mod harness;
pub mod label;
pub mod linalg;
pub mod rng;
pub mod scalar;
pub mod state;
pub mod unitary;
pub mod vacuum;

pub use algebra::AlgebraElement;
pub use directed::{DirectedFamily, FamilyKind};
pub use error::{Error, Result};
pub use factorized::{check_coherence, partial_trace, CoherenceReport, FactorizedFamily, HilbertSpace};
pub use gaussian::{GaussianModel, GaussianSpec, Variant};
pub use label::{IndexSet, Label};
pub use state::{DensityOperator, StateNet};
pub use unitary::{Permutation, Unitary};
pub use vacuum::LatticeModelSpec;

pub type FactorizedFamily64 = FactorizedFamily<f64>;
pub type FactorizedFamily32 = FactorizedFamily<f32>;
pub type Unitary64 = Unitary<f64>;
pub type AlgebraElement64 = AlgebraElement<f64>;
pub type DensityOperator64 = DensityOperator<f64>;
pub type StateNet64 = StateNet<f64>;
pub type GaussianModel64 = GaussianModel<f64>;
