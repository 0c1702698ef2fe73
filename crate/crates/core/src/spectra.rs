//! Eigenvalue machinery for normal truncations: diagonalization, modified
//! eigenvalue sequences, C-spectra, and the rearrangement extremes of the
//! similarity orbit of a hermitian pair.

use std::collections::HashMap;
use std::fmt;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{operator_norm, MatrixOperator, OrthonormalBasis, SchattenIndex};
use crate::random::rng_for;
use crate::{NORMAL_TOL, RANK_CUTOFF};

/// Largest `n` for which all `n!` pairings are enumerated.
pub const EXHAUSTIVE_MAX: usize = 8;

/// Points closer than this are merged in sampled C-spectra.
pub const DEDUP_TOL: f64 = 1e-12;

/// How zeros are placed in a modified eigenvalue sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaddingRule {
    /// Finite-dimensional range: nonzero eigenvalues first, then zeros.
    FiniteRank,
    /// Infinite range, kernel of the given dimension: that many zeros lead.
    FiniteKernel(usize),
    /// Infinite range and kernel: one zero before each eigenvalue, surplus zeros appended.
    Interleave,
}

impl fmt::Display for PaddingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::FiniteRank => write!(f, "finite_rank"),
            Self::FiniteKernel(k) => write!(f, "finite_kernel:{k}"),
            Self::Interleave => write!(f, "interleave"),
        }
    }
}

impl std::str::FromStr for PaddingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finite_rank" => Ok(Self::FiniteRank),
            "interleave" => Ok(Self::Interleave),
            _ => s
                .strip_prefix("finite_kernel:")
                .and_then(|k| k.parse().ok())
                .map(Self::FiniteKernel)
                .ok_or_else(|| Error::Parse(format!("unknown padding rule {s:?}"))),
        }
    }
}

impl Serialize for PaddingRule {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PaddingRule {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Kernel dimension of the modeled (untruncated) operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelDim {
    Finite(usize),
    Infinite,
}

/// Modified eigenvalue sequence on a truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EigenSequenceFile", into = "EigenSequenceFile")]
pub struct EigenSequence {
    values: Vec<Complex64>,
    rule: PaddingRule,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EigenSequenceFile {
    values: Vec<[f64; 2]>,
    rule: PaddingRule,
}

impl From<EigenSequence> for EigenSequenceFile {
    fn from(seq: EigenSequence) -> Self {
        Self {
            values: seq.values.iter().map(|z| [z.re, z.im]).collect(),
            rule: seq.rule,
        }
    }
}

impl TryFrom<EigenSequenceFile> for EigenSequence {
    type Error = Error;

    fn try_from(file: EigenSequenceFile) -> Result<Self> {
        let values: Vec<Complex64> = file.values.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
        let nonzero: Vec<Complex64> = values.iter().copied().filter(|z| *z != Complex64::new(0.0, 0.0)).collect();
        let rebuilt = modified_sequence(&nonzero, file.rule, values.len())?;
        if rebuilt.values != values {
            return Err(Error::Parse(format!(
                "eigenvalue list is not laid out per rule {}",
                file.rule
            )));
        }
        Ok(rebuilt)
    }
}

impl EigenSequence {
    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn rule(&self) -> PaddingRule {
        self.rule
    }

    pub fn declared_kernel_dim(&self) -> KernelDim {
        match self.rule {
            PaddingRule::FiniteKernel(k) => KernelDim::Finite(k),
            PaddingRule::FiniteRank | PaddingRule::Interleave => KernelDim::Infinite,
        }
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|z| z.norm() > 0.0).count()
    }
}

fn principal_arg(z: Complex64) -> f64 {
    let a = z.arg();
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

/// Orders complex eigenvalues by non-increasing modulus, equal moduli by
/// ascending argument in (−π, π]. Moduli agreeing to ~1e-12 relative count as equal.
fn spectral_order(values: &[Complex64]) -> Vec<usize> {
    let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let key = |z: &Complex64| -> i64 {
        if scale == 0.0 {
            0
        } else {
            (z.norm() / scale * 1e12).round() as i64
        }
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| {
        key(&values[j])
            .cmp(&key(&values[i]))
            .then_with(|| principal_arg(values[i]).total_cmp(&principal_arg(values[j])))
    });
    order
}

/// Zeroes values below `RANK_CUTOFF` relative to the largest modulus.
fn clamp_small(values: &mut [Complex64]) {
    let top = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for z in values.iter_mut() {
        if z.norm() <= RANK_CUTOFF * top {
            *z = Complex64::new(0.0, 0.0);
        }
    }
}

/// Diagonalizes a normal matrix: `T = Σ λ_j ⟨e_j, ·⟩ e_j`.
///
/// Values follow the spectral order (zeros last, finite-rank layout); the
/// returned basis columns are the matching eigenvectors.
pub fn eigen_decompose_normal(t: &MatrixOperator) -> Result<(EigenSequence, OrthonormalBasis)> {
    let defect = t
        .normality_defect()
        .ok_or_else(|| Error::ShapeMismatch("normal diagonalization needs a square matrix".into()))?;
    if defect > NORMAL_TOL {
        return Err(Error::NotNormal(defect));
    }
    let n = t.rows();
    let (mut values, vectors): (Vec<Complex64>, DMatrix<Complex64>) =
        if t.is_hermitian(crate::HERMITIAN_TOL) {
            let (vals, vecs) = t.hermitian_eigen()?;
            (vals.iter().map(|&l| Complex64::new(l, 0.0)).collect(), vecs)
        } else {
            // For a normal matrix the Schur form is diagonal up to rounding.
            let schur = Schur::try_new(t.matrix().clone(), crate::DECOMPOSITION_EPS, 10_000)
                .ok_or_else(|| Error::DecompositionFailure("Schur iteration diverged".into()))?;
            let (q, tri) = schur.unpack();
            ((0..n).map(|i| tri[(i, i)]).collect(), q)
        };
    clamp_small(&mut values);

    let order = spectral_order(&values);
    let sorted: Vec<Complex64> = order.iter().map(|&i| values[i]).collect();
    let columns: Vec<DVector<Complex64>> = order.iter().map(|&i| vectors.column(i).into_owned()).collect();
    let basis = DMatrix::from_columns(&columns);

    let rebuilt = &basis * DMatrix::from_diagonal(&DVector::from_column_slice(&sorted)) * basis.adjoint();
    let err = operator_norm(&(rebuilt - t.matrix()));
    if err > 1e-8 * t.operator_norm().max(1.0) {
        return Err(Error::DecompositionFailure(format!(
            "normal diagonalization reconstructs only to {err:e}"
        )));
    }
    Ok((
        EigenSequence {
            values: sorted,
            rule: PaddingRule::FiniteRank,
        },
        OrthonormalBasis::from_columns(basis)?,
    ))
}

/// Lays out nonzero eigenvalues with zeros according to `rule`.
///
/// Exact zeros in `values` are dropped; their placement is decided by the rule.
pub fn modified_sequence(values: &[Complex64], rule: PaddingRule, length: usize) -> Result<EigenSequence> {
    let nonzero: Vec<Complex64> = values.iter().copied().filter(|z| z.norm() > 0.0).collect();
    let order = spectral_order(&nonzero);
    let nonzero: Vec<Complex64> = order.into_iter().map(|i| nonzero[i]).collect();
    let zero = Complex64::new(0.0, 0.0);

    let required = match rule {
        PaddingRule::FiniteKernel(k) => nonzero.len() + k,
        PaddingRule::FiniteRank | PaddingRule::Interleave => nonzero.len(),
    };
    if length < required {
        return Err(Error::LengthTooSmall { length, required });
    }

    let mut out = Vec::with_capacity(length);
    match rule {
        PaddingRule::FiniteRank => out.extend_from_slice(&nonzero),
        PaddingRule::FiniteKernel(k) => {
            out.extend(std::iter::repeat_n(zero, k));
            out.extend_from_slice(&nonzero);
        }
        PaddingRule::Interleave => {
            let mut spare = length - nonzero.len();
            for &v in &nonzero {
                if spare > 0 {
                    out.push(zero);
                    spare -= 1;
                }
                out.push(v);
            }
        }
    }
    out.resize(length, zero);
    Ok(EigenSequence { values: out, rule })
}

/// How to explore the permutations of a C-spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMode {
    Exhaustive,
    Sampled { budget: usize, seed: u64 },
}

/// Pairing sums `Σ λ_n(C) λ_σ(n)(T)` together with one permutation per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CSpectrumSample {
    pub points: Vec<Complex64>,
    /// `pairings[k][i] = σ(i)` for `points[k]`.
    pub pairings: Vec<Vec<usize>>,
    pub exhaustive: bool,
}

pub fn pairing_sum(c: &[Complex64], t: &[Complex64], sigma: &[usize]) -> Complex64 {
    c.iter().zip(sigma).map(|(a, &j)| a * t[j]).sum()
}

pub fn c_spectrum(c: &EigenSequence, t: &EigenSequence, mode: SpectrumMode) -> Result<CSpectrumSample> {
    let (cv, tv) = (c.values(), t.values());
    if cv.len() != tv.len() {
        return Err(Error::ShapeMismatch(format!(
            "eigenvalue sequences of lengths {} and {}",
            cv.len(),
            tv.len()
        )));
    }
    let n = cv.len();
    if n == 0 {
        return Err(Error::EmptyInput("empty eigenvalue sequences".into()));
    }
    match mode {
        SpectrumMode::Exhaustive => {
            if n > EXHAUSTIVE_MAX {
                return Err(Error::TooLargeForExhaustive { n, max: EXHAUSTIVE_MAX });
            }
            // lexicographic order, one block per leading index
            let pairings: Vec<Vec<usize>> = (0..n)
                .into_par_iter()
                .flat_map_iter(|first| {
                    let rest: Vec<usize> = (0..n).filter(|&j| j != first).collect();
                    let k = rest.len();
                    rest.into_iter().permutations(k).map(move |tail| {
                        let mut sigma = Vec::with_capacity(n);
                        sigma.push(first);
                        sigma.extend(tail);
                        sigma
                    })
                })
                .collect();
            let points = pairings.iter().map(|s| pairing_sum(cv, tv, s)).collect();
            Ok(CSpectrumSample {
                points,
                pairings,
                exhaustive: true,
            })
        }
        SpectrumMode::Sampled { budget, seed } => {
            if budget == 0 {
                return Err(Error::InvalidArgument("sample budget must be positive".into()));
            }
            let mut rng = rng_for(seed, 0);
            let mut dedup = PointSet::new(DEDUP_TOL);
            let mut pairings = Vec::new();
            let mut points = Vec::new();
            let mut sigma: Vec<usize> = (0..n).collect();
            for _ in 0..budget {
                sigma.shuffle(&mut rng);
                let z = pairing_sum(cv, tv, &sigma);
                if dedup.insert(z) {
                    points.push(z);
                    pairings.push(sigma.clone());
                }
            }
            Ok(CSpectrumSample {
                points,
                pairings,
                exhaustive: false,
            })
        }
    }
}

/// Grid-bucketed set of complex points merging anything within `tol`.
struct PointSet {
    tol: f64,
    cells: HashMap<(i64, i64), Vec<Complex64>>,
}

impl PointSet {
    fn new(tol: f64) -> Self {
        Self {
            tol,
            cells: HashMap::new(),
        }
    }

    fn cell(&self, z: Complex64) -> (i64, i64) {
        ((z.re / self.tol).floor() as i64, (z.im / self.tol).floor() as i64)
    }

    /// Returns false if a point within `tol` is already present.
    fn insert(&mut self, z: Complex64) -> bool {
        let (cx, cy) = self.cell(z);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = self.cells.get(&(cx.saturating_add(dx), cy.saturating_add(dy))) {
                    if bucket.iter().any(|w| (w - z).norm() <= self.tol) {
                        return false;
                    }
                }
            }
        }
        self.cells.entry((cx, cy)).or_default().push(z);
        true
    }
}

/// Supremum and infimum of `tr(C U† T U)` over unitaries, for hermitian `C`, `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitExtremes {
    pub max: f64,
    pub min: f64,
}

/// Closed-form extremes from the positive and negative parts:
/// `max = Σ λ↓(C⁺)λ↓(T⁺) + Σ λ↓(C⁻)λ↓(T⁻)`, `min = −Σ λ↓(C⁺)λ↓(T⁻) − Σ λ↓(C⁻)λ↓(T⁺)`.
pub fn hermitian_orbit_extremes(c: &MatrixOperator, t: &MatrixOperator) -> Result<OrbitExtremes> {
    let lc = c.hermitian_eigenvalues_desc()?;
    let lt = t.hermitian_eigenvalues_desc()?;
    let len = lc.len().max(lt.len());
    let parts = |lam: &[f64]| {
        let mut pos: Vec<f64> = lam.iter().map(|l| l.max(0.0)).collect();
        let mut neg: Vec<f64> = lam.iter().map(|l| (-l).max(0.0)).collect();
        pos.resize(len, 0.0);
        neg.resize(len, 0.0);
        pos.sort_by(|a, b| b.total_cmp(a));
        neg.sort_by(|a, b| b.total_cmp(a));
        (pos, neg)
    };
    let (cp, cn) = parts(&lc);
    let (tp, tn) = parts(&lt);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    Ok(OrbitExtremes {
        max: dot(&cp, &tp) + dot(&cn, &tn),
        min: -dot(&cp, &tn) - dot(&cn, &tp),
    })
}

/// `n^{−1/q} Σ_{k ≤ n} ⟨e_k, C e_k⟩`.
pub fn scaled_diagonal_sum(
    c: &MatrixOperator,
    basis: &OrthonormalBasis,
    n: usize,
    q: SchattenIndex,
) -> Result<Complex64> {
    if !c.is_square() || basis.dim() != c.rows() {
        return Err(Error::ShapeMismatch(format!(
            "operator {}×{} against basis of dimension {}",
            c.rows(),
            c.cols(),
            basis.dim()
        )));
    }
    if n == 0 || n > basis.len() {
        return Err(Error::ShapeMismatch(format!("n = {n} outside 1..={}", basis.len())));
    }
    let sum: Complex64 = (0..n)
        .map(|k| {
            let e = basis.vector(k);
            e.dotc(&(c.matrix() * &e))
        })
        .sum();
    Ok(sum * (n as f64).powf(-q.reciprocal()))
}
