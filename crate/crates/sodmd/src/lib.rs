//! Second-order Liouville dynamic mode decomposition (DMD) with occupation
//! kernels.
//!
//! Given sampled trajectories of an unknown second-order system
//! `ẍ = f(x)`, this crate fits a finite-rank operator model without ever
//! differentiating the trajectories (only one velocity per trajectory, at
//! `t = 0`, is needed, and it may be estimated). The fitted model
//! reconstructs and predicts trajectories from fresh initial conditions in
//! closed form.
//!
//! The pipeline:
//!
//! 1. [`operator::gram`] — pairwise inner products of second-order
//!    occupation kernels (a doubly `(T-t)`-weighted kernel integral).
//! 2. [`operator::interaction`] — pairings of the adjoint-transported
//!    kernels, computable from trajectory endpoints, one initial velocity,
//!    and kernel gradients.
//! 3. [`operator::finite_rank`] — ridge-stabilized solve `G⁻¹A`.
//! 4. [`eig::eigendecompose`] — general real eigendecomposition.
//! 5. [`model::fit`] / [`SodmdModel::reconstruct`] — normalized
//!    eigenfunction coefficients, Liouville modes, and the two-branch
//!    `e^{±√λ t}` modal predictor.
//!
//! [`bench`] holds ground-truth simulators and the two reference
//! experiments (a planar undamped oscillator, and a mass-spring chain as a
//! desk-scale stand-in for a high-dimensional structure).

pub mod bench;
pub mod eig;
pub mod error;
pub mod kernels;
pub mod model;
pub mod operator;
pub mod quadrature;
pub mod signals;

pub use error::{Error, Result};
pub use kernels::{heuristic_shape, KernelFamily, KernelSpec};
pub use model::{
    fit, FitDiagnostics, Reconstruction, ReconstructionDiagnostics, ReconstructionRequest,
    SodmdModel,
};
pub use operator::{
    finite_rank, gram, interaction, occupation_eval, GramMatrix, InteractionMatrix,
};
pub use quadrature::{QuadMethod, QuadratureRule, TimeGrid};
pub use signals::{add_noise, segment, Dataset, Trajectory};
