//! Seeded sampling: complex Gaussian matrices, Haar unitaries, random test operators.
//!
//! All randomness derives from a single `u64` seed. Independent subtasks get
//! their own stream via [`split_seed`], so results do not depend on the order
//! in which subtasks run.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operator::MatrixOperator;

pub type LabRng = ChaCha8Rng;

/// Deterministic child seed for subtask `stream` of `seed` (splitmix64 finalizer).
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, stream: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(split_seed(seed, stream))
}

/// Standard complex normal: real and imaginary parts i.i.d. N(0, 1/2).
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> MatrixOperator {
    MatrixOperator::wrap(DMatrix::from_fn(rows, cols, |_, _| complex_normal(rng)))
}

/// Haar-distributed unitary: QR of a Ginibre matrix, with the phases of
/// `diag(R)` pushed into `Q` so the law is left/right invariant.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MatrixOperator {
    assert!(n >= 1, "unitary dimension must be positive");
    let g = DMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    MatrixOperator::wrap(q)
}

/// `(G + G†)/2` for a complex Gaussian `G`.
pub fn random_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MatrixOperator {
    let g = DMatrix::from_fn(n, n, |_, _| complex_normal(rng));
    MatrixOperator::wrap((&g + g.adjoint()) * Complex64::new(0.5, 0.0))
}

/// `U diag(λ) U†` with Haar `U` and complex normal eigenvalues.
pub fn random_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MatrixOperator {
    let values: Vec<Complex64> = (0..n).map(|_| complex_normal(rng)).collect();
    let u = haar_unitary(n, rng);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values));
    MatrixOperator::wrap(u.matrix() * d * u.matrix().adjoint())
}

/// Diagonal matrix with complex normal entries.
pub fn random_complex_diagonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> MatrixOperator {
    let values: Vec<Complex64> = (0..n).map(|_| complex_normal(rng)).collect();
    MatrixOperator::wrap(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values)))
}
