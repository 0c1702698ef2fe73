//! Finite-truncation laboratory for Schatten-class trace inequalities.
//!
//! Operators are dense complex matrices standing for truncations of operators
//! on ℓ². The crate computes Schatten norms and Schmidt decompositions,
//! C-spectra and C-numerical ranges, optimizes trace functionals over unitary
//! orbits with two independent methods, and measures set convergence in the
//! Hausdorff metric. [`inequality_suite`] ties these together into reproducible scenario
//! reports.

pub mod error;
pub mod inequality_suite;
pub mod numerical_range;
pub mod operator;
pub mod orbit;
pub mod random;
pub mod set_convergence;
pub mod spectra;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use operator::{HermitianSplit, MatrixOperator, OrthonormalBasis, SchattenIndex, SchmidtForm};

/// Orthonormality tolerance for frames and bases.
pub const ORTHONORMAL_TOL: f64 = 1e-10;
/// Hermiticity tolerance, ‖A − A†‖_∞.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Normality tolerance, ‖T†T − TT†‖_∞.
pub const NORMAL_TOL: f64 = 1e-9;
/// Reconstruction tolerance for decompositions.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;
/// Unitarity tolerance for caller-supplied witnesses.
pub const UNITARY_TOL: f64 = 1e-8;
/// Singular values below this fraction of `s_1` count as zero for rank decisions.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Convergence threshold handed to the iterative decompositions. Tighter
/// values than nalgebra's own default can return inaccurate factors.
pub(crate) const DECOMPOSITION_EPS: f64 = 5.0 * f64::EPSILON;
