//! Quantum elliptic R-matrices attached to SL(N)-bundles with nontrivial
//! characteristic class (N = p l), as explicit finite-dimensional operators,
//! together with a residual engine that certifies numerically every property
//! they are supposed to have: the (dynamical) Yang-Baxter equations,
//! unitarity, weight zero, quasi-periodicities, classical / trigonometric /
//! rational limits, and the star-triangle relations of the associated IRF
//! models.

pub mod elliptic;
pub mod error;
pub mod heisenberg;
pub mod irf;
pub mod operator;
pub mod report;
pub mod rmatrix;
pub mod scalar;
pub mod verifier;

pub use elliptic::{Characteristics, EvalPoint, ModularParam};
pub use error::{Error, Result};
pub use heisenberg::{BasisElement, LatticeIndex};
pub use operator::DenseOperator;
pub use report::{CWire, ResidualReport};
pub use rmatrix::{ClassicalRMatrix, DynamicalVector, Family, RMatrixSpec};
pub use verifier::{QdybForm, ShiftConvention, ShiftSign};
