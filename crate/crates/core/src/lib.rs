//! L1 and Alikhanov discretizations of the Caputo time derivative on
//! graded and quasi-graded temporal meshes, with barrier-function stability
//! verifiers, pointwise error envelopes, a scalar initial-value solver, a 2D
//! finite-difference parabolic solver, and a convergence-study harness.

pub mod bounds;
pub mod caputo;
pub mod error;
pub mod exact;
pub mod ivp;
pub mod mesh;
pub mod pde;
pub mod study;

pub use caputo::{
    alikhanov_weights, analytic_caputo_monomial, apply_operator, gamma, l1_weights, mmatrix_check,
    ConvolutionWeights, DiscreteCaputo, MMatrixReport, SchemeKind,
};
pub use error::{Error, Result};
pub use exact::MonomialSum;
pub use mesh::{MeshDiagnostics, TemporalMesh};
