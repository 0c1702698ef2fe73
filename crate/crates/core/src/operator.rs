//! Dense complex matrices standing in for truncated bounded operators.
//!
//! Every operator the laboratory touches lives on a finite truncation of ℓ².
//! Infinite-dimensional statements are exercised by sweeping the truncation
//! dimension, so this module only needs honest dense linear algebra: Schmidt
//! (singular value) decompositions, Schatten norms, traces, the positive and
//! negative parts of hermitian matrices, and block cut-outs against an
//! orthonormal system.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{HERMITIAN_TOL, ORTHONORMAL_TOL, RANK_CUTOFF};

const SVD_MAX_SWEEPS: usize = 10_000;

/// A dense `rows × cols` complex matrix with finite entries.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixFile", into = "MatrixFile")]
pub struct MatrixOperator {
    inner: DMatrix<Complex64>,
}

impl fmt::Debug for MatrixOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixOperator({}×{}) {}", self.rows(), self.cols(), self.inner)
    }
}

impl MatrixOperator {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidMatrix(format!("dimension {rows}×{cols} is empty")));
        }
        if entries.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for {rows}×{cols}, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_iterator(rows, cols, entries))
    }

    pub fn from_matrix(inner: DMatrix<Complex64>) -> Result<Self> {
        if inner.nrows() == 0 || inner.ncols() == 0 {
            return Err(Error::InvalidMatrix("empty matrix".into()));
        }
        if inner.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry".into()));
        }
        Ok(Self { inner })
    }

    /// Internal constructor for products of already validated matrices.
    pub(crate) fn wrap(inner: DMatrix<Complex64>) -> Self {
        debug_assert!(inner.nrows() > 0 && inner.ncols() > 0);
        Self { inner }
    }

    pub fn identity(n: usize) -> Self {
        Self::wrap(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::wrap(DMatrix::zeros(rows, cols))
    }

    pub fn diagonal(values: &[Complex64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidMatrix("empty diagonal".into()));
        }
        Self::from_matrix(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn real_diagonal(values: &[f64]) -> Result<Self> {
        let values: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::diagonal(&values)
    }

    /// Embeds the matrix as the top-left block of a `rows × cols` zero matrix.
    pub fn zero_padded(&self, rows: usize, cols: usize) -> Result<Self> {
        if rows < self.rows() || cols < self.cols() {
            return Err(Error::ShapeMismatch(format!(
                "cannot pad {}×{} into {rows}×{cols}",
                self.rows(),
                self.cols()
            )));
        }
        let mut out = DMatrix::zeros(rows, cols);
        out.view_mut((0, 0), (self.rows(), self.cols())).copy_from(&self.inner);
        Ok(Self::wrap(out))
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.inner
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.inner
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.inner[(row, col)]
    }

    /// Row-major copy of the entries.
    pub fn entries(&self) -> Vec<Complex64> {
        self.inner.transpose().iter().copied().collect()
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self::wrap(&self.inner * factor)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::wrap(&self.inner + &other.inner))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        Ok(Self::wrap(&self.inner - &other.inner))
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.cols() != other.rows() {
            return Err(Error::ShapeMismatch(format!(
                "cannot compose {}×{} with {}×{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )));
        }
        Ok(Self::wrap(&self.inner * &other.inner))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::wrap(self.inner.adjoint())
    }

    pub fn trace(&self) -> Result<Complex64> {
        self.require_square("trace")?;
        Ok(self.inner.trace())
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        operator_norm(&self.inner)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ‖A − A†‖_∞, or `None` when the matrix is not square.
    pub fn hermiticity_defect(&self) -> Option<f64> {
        self.is_square()
            .then(|| operator_norm(&(&self.inner - self.inner.adjoint())))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect().is_some_and(|d| d <= tol)
    }

    /// ‖A†A − AA†‖_∞, or `None` when the matrix is not square.
    pub fn normality_defect(&self) -> Option<f64> {
        self.is_square().then(|| {
            let adj = self.inner.adjoint();
            operator_norm(&(&adj * &self.inner - &self.inner * &adj))
        })
    }

    pub fn is_normal(&self, tol: f64) -> bool {
        self.normality_defect().is_some_and(|d| d <= tol)
    }

    /// ‖U†U − I‖_∞, or `None` when the matrix is not square.
    pub fn unitarity_defect(&self) -> Option<f64> {
        self.is_square().then(|| {
            let n = self.rows();
            operator_norm(&(self.inner.adjoint() * &self.inner - DMatrix::identity(n, n)))
        })
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_defect().is_some_and(|d| d <= tol)
    }

    /// Singular values, non-increasing.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let svd = SVD::try_new(self.inner.clone(), false, false, crate::DECOMPOSITION_EPS, SVD_MAX_SWEEPS)
            .ok_or_else(|| Error::DecompositionFailure("singular value iteration diverged".into()))?;
        let mut values: Vec<f64> = svd.singular_values.iter().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(values)
    }

    /// Number of singular values above `RANK_CUTOFF · s_1`.
    pub fn rank(&self) -> Result<usize> {
        let values = self.singular_values()?;
        Ok(numerical_rank(&values))
    }

    /// Schatten p-norm.
    pub fn schatten_norm(&self, p: SchattenIndex) -> Result<f64> {
        Ok(p.norm_of(&self.singular_values()?))
    }

    /// Σ s_j ⟨f_j, ·⟩ g_j with orthonormal frames.
    pub fn schmidt_decompose(&self) -> Result<SchmidtForm> {
        let Svd { u, singular_values: values, v_t } = checked_svd(&self.inner)?;
        let k = values.len();
        let mut order: Vec<usize> = (0..k).collect();
        // stable: ties keep the decomposition's own order
        order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));

        let singular_values = order.iter().map(|&i| values[i].max(0.0)).collect();
        let left_frame = order.iter().map(|&i| u.column(i).into_owned()).collect();
        let right_frame = order
            .iter()
            .map(|&i| v_t.row(i).adjoint().into_owned())
            .collect();
        Ok(SchmidtForm {
            singular_values,
            left_frame,
            right_frame,
        })
    }

    /// Split of a hermitian matrix into PSD parts with `A = A⁺ − A⁻`, `A⁺A⁻ = 0`.
    pub fn positive_negative_parts(&self) -> Result<HermitianSplit> {
        let (values, vectors) = self.hermitian_eigen()?;
        let part = |f: &dyn Fn(f64) -> f64| {
            let d = DMatrix::from_diagonal(&values.map(|l| Complex64::new(f(l), 0.0)));
            Self::wrap(&vectors * d * vectors.adjoint())
        };
        Ok(HermitianSplit {
            positive_part: part(&|l| l.max(0.0)),
            negative_part: part(&|l| (-l).max(0.0)),
        })
    }

    /// Eigenvalues (ascending) and eigenvectors of a hermitian matrix.
    pub(crate) fn hermitian_eigen(&self) -> Result<(DVector<f64>, DMatrix<Complex64>)> {
        let defect = self
            .hermiticity_defect()
            .ok_or_else(|| Error::ShapeMismatch("hermitian test needs a square matrix".into()))?;
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let sym = (&self.inner + self.inner.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::try_new(sym, crate::DECOMPOSITION_EPS, SVD_MAX_SWEEPS)
            .ok_or_else(|| Error::DecompositionFailure("hermitian eigen iteration diverged".into()))?;
        Ok((eig.eigenvalues, eig.eigenvectors))
    }

    /// Hermitian eigenvalues sorted non-increasing.
    pub fn hermitian_eigenvalues_desc(&self) -> Result<Vec<f64>> {
        let (values, _) = self.hermitian_eigen()?;
        let mut values: Vec<f64> = values.iter().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        Ok(values)
    }

    /// The `n × n` matrix `(⟨e_i, A e_j⟩)_{i,j ≤ n}`.
    pub fn cut_out_block(&self, basis: &OrthonormalBasis, n: usize) -> Result<Self> {
        let gamma = self.leading_frame(basis, n, "cut_out_block")?;
        Ok(Self::wrap(gamma.adjoint() * &self.inner * gamma))
    }

    /// `Π_k A Π_k` at full dimension, `Π_k` projecting onto the first `k` basis vectors.
    pub fn truncate_projection(&self, basis: &OrthonormalBasis, k: usize) -> Result<Self> {
        let gamma = self.leading_frame(basis, k, "truncate_projection")?;
        let projection = &gamma * gamma.adjoint();
        Ok(Self::wrap(&projection * &self.inner * &projection))
    }

    fn leading_frame(
        &self,
        basis: &OrthonormalBasis,
        n: usize,
        what: &str,
    ) -> Result<DMatrix<Complex64>> {
        self.require_square(what)?;
        if basis.dim() != self.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: basis vectors have dimension {}, operator has {}",
                basis.dim(),
                self.rows()
            )));
        }
        if n == 0 || n > basis.len() {
            return Err(Error::ShapeMismatch(format!(
                "{what}: n = {n} outside 1..={}",
                basis.len()
            )));
        }
        Ok(basis.columns().columns(0, n).into_owned())
    }

    fn require_square(&self, what: &str) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{what} needs a square matrix, got {}×{}",
                self.rows(),
                self.cols()
            )))
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows() == other.rows() && self.cols() == other.cols() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "{}×{} vs {}×{}",
                self.rows(),
                self.cols(),
                other.rows(),
                other.cols()
            )))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

/// On-disk form: `{"rows": N, "cols": M, "data": [[re, im], ...]}`, row-major.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl TryFrom<MatrixFile> for MatrixOperator {
    type Error = Error;

    fn try_from(file: MatrixFile) -> Result<Self> {
        let entries = file
            .data
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        MatrixOperator::new(file.rows, file.cols, entries)
    }
}

impl From<MatrixOperator> for MatrixFile {
    fn from(op: MatrixOperator) -> Self {
        MatrixFile {
            rows: op.rows(),
            cols: op.cols(),
            data: op.entries().iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

/// Thin SVD `M = U Σ V_t` with orthonormal factors.
pub(crate) struct Svd {
    pub u: DMatrix<Complex64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<Complex64>,
}

/// Extra attempts on rotated copies of the input.
const SVD_ROTATIONS: u64 = 4;

/// SVD with verified factors.
///
/// nalgebra occasionally returns inconsistent singular vectors for
/// rank-deficient input (reconstruction off by O(‖M‖)). A failed check is
/// redone on `M†` and then on `M Q` for seeded Haar `Q`.
pub(crate) fn checked_svd(m: &DMatrix<Complex64>) -> Result<Svd> {
    let attempt = |a: &DMatrix<Complex64>| {
        let svd = SVD::try_new(a.clone(), true, true, crate::DECOMPOSITION_EPS, SVD_MAX_SWEEPS)?;
        let (u, v_t) = (svd.u?, svd.v_t?);
        let sigma = DMatrix::from_diagonal(&svd.singular_values.map(|x| Complex64::new(x, 0.0)));
        let tol = 1e-12 * (1.0 + a.norm()) * (a.nrows().max(a.ncols()) as f64);
        let k = svd.singular_values.len();
        let eye = DMatrix::<Complex64>::identity(k, k);
        let ok = (&u * sigma * &v_t - a).norm() <= tol
            && (u.adjoint() * &u - &eye).norm() <= 1e-12 * k as f64
            && (&v_t * v_t.adjoint() - &eye).norm() <= 1e-12 * k as f64;
        ok.then_some(Svd {
            u,
            singular_values: svd.singular_values,
            v_t,
        })
    };
    if let Some(svd) = attempt(m) {
        return Ok(svd);
    }
    if let Some(svd) = attempt(&m.adjoint()) {
        return Ok(Svd {
            u: svd.v_t.adjoint(),
            singular_values: svd.singular_values,
            v_t: svd.u.adjoint(),
        });
    }
    for k in 0..SVD_ROTATIONS {
        let q = crate::random::haar_unitary(m.ncols(), &mut crate::random::rng_for(0x5bd1_e995, k)).into_matrix();
        // M Q = U Σ W_t gives M = U Σ (W_t Q†)
        if let Some(svd) = attempt(&(m * &q)) {
            return Ok(Svd {
                u: svd.u,
                singular_values: svd.singular_values,
                v_t: svd.v_t * q.adjoint(),
            });
        }
    }
    Err(Error::DecompositionFailure("SVD factors failed verification on every attempt".into()))
}

pub(crate) fn operator_norm(m: &DMatrix<Complex64>) -> f64 {
    match SVD::try_new(m.clone(), false, false, crate::DECOMPOSITION_EPS, SVD_MAX_SWEEPS) {
        Some(svd) => svd.singular_values.iter().copied().fold(0.0, f64::max),
        // Frobenius norm bounds the operator norm from above.
        None => m.norm(),
    }
}

pub(crate) fn numerical_rank(descending: &[f64]) -> usize {
    let top = descending.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    descending.iter().filter(|&&s| s > RANK_CUTOFF * top).count()
}

/// Schatten exponent `p ∈ [1, ∞]`; `∞` is a distinct variant, not a large float.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchattenIndex {
    Finite(f64),
    Infinity,
}

impl SchattenIndex {
    pub fn finite(p: f64) -> Result<Self> {
        if p.is_finite() && p >= 1.0 {
            Ok(Self::Finite(p))
        } else if p == f64::INFINITY {
            Ok(Self::Infinity)
        } else {
            Err(Error::InvalidArgument(format!("Schatten index {p} outside [1, ∞]")))
        }
    }

    /// The exponent `q` with `1/p + 1/q = 1`.
    pub fn conjugate(self) -> Self {
        match self {
            Self::Infinity => Self::Finite(1.0),
            Self::Finite(1.0) => Self::Infinity,
            Self::Finite(p) => Self::Finite(p / (p - 1.0)),
        }
    }

    /// `1/p`, zero at infinity.
    pub fn reciprocal(self) -> f64 {
        match self {
            Self::Infinity => 0.0,
            Self::Finite(p) => 1.0 / p,
        }
    }

    /// `(Σ s^p)^{1/p}`, or `max s` at infinity.
    pub fn norm_of(self, singular_values: &[f64]) -> f64 {
        match self {
            Self::Infinity => singular_values.iter().copied().fold(0.0, f64::max),
            Self::Finite(p) => {
                let top = singular_values.iter().copied().fold(0.0, f64::max);
                if top == 0.0 {
                    return 0.0;
                }
                // scale by the top value so that large p does not overflow
                let sum: f64 = singular_values.iter().map(|s| (s / top).powf(p)).sum();
                top * sum.powf(1.0 / p)
            }
        }
    }
}

impl fmt::Display for SchattenIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Infinity => write!(f, "∞"),
            Self::Finite(p) => write!(f, "{p}"),
        }
    }
}

/// Singular values with left (`g_j`, codomain) and right (`f_j`, domain) frames.
#[derive(Debug, Clone)]
pub struct SchmidtForm {
    pub singular_values: Vec<f64>,
    pub left_frame: Vec<DVector<Complex64>>,
    pub right_frame: Vec<DVector<Complex64>>,
}

impl SchmidtForm {
    /// Σ s_j ⟨f_j, ·⟩ g_j as a dense matrix.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let rows = self.left_frame.first().map_or(0, |g| g.len());
        let cols = self.right_frame.first().map_or(0, |f| f.len());
        let mut out = DMatrix::zeros(rows, cols);
        for ((s, g), f) in self
            .singular_values
            .iter()
            .zip(&self.left_frame)
            .zip(&self.right_frame)
        {
            out += g * f.adjoint() * Complex64::new(*s, 0.0);
        }
        out
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }
}

/// Positive and negative parts of a hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianSplit {
    pub positive_part: MatrixOperator,
    pub negative_part: MatrixOperator,
}

/// An orthonormal system stored as the columns of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    columns: DMatrix<Complex64>,
}

impl OrthonormalBasis {
    pub fn standard(n: usize) -> Self {
        Self {
            columns: DMatrix::identity(n, n),
        }
    }

    /// Columns of `columns` must be orthonormal to `ORTHONORMAL_TOL`.
    pub fn from_columns(columns: DMatrix<Complex64>) -> Result<Self> {
        if columns.ncols() == 0 || columns.nrows() < columns.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} vectors of dimension {} cannot be orthonormal",
                columns.ncols(),
                columns.nrows()
            )));
        }
        let gram = columns.adjoint() * &columns - DMatrix::identity(columns.ncols(), columns.ncols());
        let deviation = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(deviation));
        }
        Ok(Self { columns })
    }

    pub fn from_vectors(vectors: &[DVector<Complex64>]) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::EmptyInput("no basis vectors".into()));
        }
        Self::from_columns(DMatrix::from_columns(vectors))
    }

    /// The columns of a unitary matrix.
    pub fn from_unitary(u: &MatrixOperator) -> Result<Self> {
        Self::from_columns(u.matrix().clone())
    }

    /// Dimension of the ambient space.
    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    /// Number of vectors in the system.
    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector(&self, i: usize) -> DVector<Complex64> {
        self.columns.column(i).into_owned()
    }

    pub fn columns(&self) -> &DMatrix<Complex64> {
        &self.columns
    }

    /// The square matrix whose columns are the basis, when the system is complete.
    pub fn as_unitary(&self) -> Option<MatrixOperator> {
        (self.dim() == self.len()).then(|| MatrixOperator::wrap(self.columns.clone()))
    }
}
