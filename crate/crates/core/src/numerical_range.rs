//! Computable surrogates for the C-numerical range `W_C(T)` and the
//! equivalence-orbit set `S_C(T)`.
//!
//! A range is represented by seeded Haar samples and by a support profile
//! `h(θ) = max Re(e^{−iθ} tr(C U† T U))` obtained from directional ascent.
//! Membership claims are certified by witness unitaries.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::MatrixOperator;
use crate::orbit::{chase_target, orbit_value, similarity_orbit_ascent, OrbitParams};
use crate::random::{haar_unitary, rng_for};
use crate::set_convergence::{points_to_csv, CompactSet};
use crate::spectra::{eigen_decompose_normal, pairing_sum, CSpectrumSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrbitKind {
    /// Values `tr(C U† T U)`.
    SimilarityOrbit,
    /// Values `tr(C U T V)`.
    EquivalenceOrbit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeSample {
    pub points: Vec<Complex64>,
    pub kind: OrbitKind,
    pub sample_count: usize,
    pub seed: u64,
}

impl RangeSample {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("samples serialize")
    }

    /// `re,im` rows.
    pub fn to_csv(&self) -> String {
        points_to_csv(&self.points)
    }

    pub fn to_set(&self) -> Result<CompactSet> {
        CompactSet::point_cloud(self.points.clone())
    }
}

fn check_square_pair(c: &MatrixOperator, t: &MatrixOperator) -> Result<()> {
    if !c.is_square() || !t.is_square() || c.rows() != t.rows() {
        return Err(Error::ShapeMismatch(format!(
            "similarity orbit needs square matrices of equal size, got {}×{} and {}×{}",
            c.rows(),
            c.cols(),
            t.rows(),
            t.cols()
        )));
    }
    Ok(())
}

fn trace_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    a.iter()
        .zip(b.transpose().iter())
        .map(|(x, y)| x * y)
        .sum()
}

/// `tr(C U_k† T U_k)` at `count` Haar unitaries, sample `k` drawn from stream `k` of `seed`.
pub fn sample_similarity_range(c: &MatrixOperator, t: &MatrixOperator, count: usize, seed: u64) -> Result<RangeSample> {
    check_square_pair(c, t)?;
    let n = c.rows();
    let points = (0..count)
        .into_par_iter()
        .map(|k| {
            let u = haar_unitary(n, &mut rng_for(seed, k as u64)).into_matrix();
            trace_product(&(c.matrix() * u.adjoint()), &(t.matrix() * &u))
        })
        .collect();
    Ok(RangeSample {
        points,
        kind: OrbitKind::SimilarityOrbit,
        sample_count: count,
        seed,
    })
}

/// `tr(C U_k T V_k)` at independent Haar pairs; `C` is `m × k`, `T` is `k × m`.
pub fn sample_equivalence_range(c: &MatrixOperator, t: &MatrixOperator, count: usize, seed: u64) -> Result<RangeSample> {
    check_composable(c, t)?;
    let (m, k) = (c.rows(), c.cols());
    let points = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(seed, i as u64);
            let u = haar_unitary(k, &mut rng).into_matrix();
            let v = haar_unitary(m, &mut rng).into_matrix();
            trace_product(&(c.matrix() * u), &(t.matrix() * v))
        })
        .collect();
    Ok(RangeSample {
        points,
        kind: OrbitKind::EquivalenceOrbit,
        sample_count: count,
        seed,
    })
}

fn check_composable(c: &MatrixOperator, t: &MatrixOperator) -> Result<()> {
    if c.cols() != t.rows() || t.cols() != c.rows() {
        return Err(Error::ShapeMismatch(format!(
            "C U T V is not square for C {}×{} and T {}×{}",
            c.rows(),
            c.cols(),
            t.rows(),
            t.cols()
        )));
    }
    Ok(())
}

/// Radius of the disc `S_C(T)`: `Σ_j s_j(C) s_j(T)`.
pub fn s_range_radius(c: &MatrixOperator, t: &MatrixOperator) -> Result<f64> {
    check_composable(c, t)?;
    let sc = c.singular_values()?;
    let st = t.singular_values()?;
    // zip stops at the shorter list, i.e. pads it with zeros
    Ok(sc.iter().zip(&st).map(|(a, b)| a * b).sum())
}

/// Closed disc of radius `radius` centred at the origin.
pub fn disc(radius: f64) -> Result<CompactSet> {
    CompactSet::disc(radius)
}

/// `count` equally spaced angles starting at 0.
pub fn uniform_directions(count: usize) -> Vec<f64> {
    (0..count).map(|k| TAU * k as f64 / count as f64).collect()
}

/// Support values `h(θ)` of a range along a set of directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportProfile {
    pub directions: Vec<f64>,
    pub support_values: Vec<f64>,
}

impl SupportProfile {
    /// `max_θ (Re(e^{−iθ} z) − h(θ))`: positive iff `z` lies outside the dual polygon.
    pub fn margin(&self, z: Complex64) -> f64 {
        self.directions
            .iter()
            .zip(&self.support_values)
            .map(|(&theta, &h)| (Complex64::from_polar(1.0, -theta) * z).re - h)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether `z` satisfies every half-plane `Re(e^{−iθ} z) ≤ h(θ) + slack`.
    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        self.margin(z) <= slack
    }

    /// The polygon `∩_θ {Re(e^{−iθ} z) ≤ h(θ)}`; needs direction gaps below π.
    pub fn dual_polygon(&self) -> Result<CompactSet> {
        if self.directions.is_empty() {
            return Err(Error::EmptyInput("support profile has no directions".into()));
        }
        let mut angles: Vec<f64> = self.directions.iter().map(|t| t.rem_euclid(TAU)).collect();
        angles.sort_by(f64::total_cmp);
        let widest = angles
            .windows(2)
            .map(|w| w[1] - w[0])
            .chain(std::iter::once(angles[0] + TAU - angles[angles.len() - 1]))
            .fold(0.0, f64::max);
        if widest >= std::f64::consts::PI {
            return Err(Error::InvalidArgument(
                "support directions leave a gap of π or more; the dual polygon is unbounded".into(),
            ));
        }
        let bound = self.support_values.iter().map(|h| h.abs()).fold(0.0, f64::max);
        let r = 2.0 * (bound / (widest / 2.0).cos() + 1.0);
        let mut poly = vec![
            Complex64::new(-r, -r),
            Complex64::new(r, -r),
            Complex64::new(r, r),
            Complex64::new(-r, r),
        ];
        for (&theta, &h) in self.directions.iter().zip(&self.support_values) {
            poly = clip_half_plane(&poly, Complex64::from_polar(1.0, theta), h);
            if poly.is_empty() {
                return Err(Error::InvalidArgument("support values are inconsistent".into()));
            }
        }
        CompactSet::convex_hull(&poly)
    }

    /// Dual polygon vertices as `re,im` rows.
    pub fn to_csv(&self) -> Result<String> {
        self.dual_polygon()?.to_csv()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("profiles serialize")
    }
}

/// Sutherland–Hodgman step keeping `Re(conj(n) z) ≤ h`.
fn clip_half_plane(poly: &[Complex64], normal: Complex64, h: f64) -> Vec<Complex64> {
    let side = |z: Complex64| (normal.conj() * z).re - h;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sa, sb) = (side(a), side(b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            out.push(a + (b - a) * (sa / (sa - sb)));
        }
    }
    out
}

/// `h(θ)` for each direction via [`similarity_orbit_ascent`].
pub fn support_profile(
    c: &MatrixOperator,
    t: &MatrixOperator,
    directions: &[f64],
    params: &OrbitParams,
) -> Result<SupportProfile> {
    check_square_pair(c, t)?;
    let support_values = directions
        .par_iter()
        .map(|&theta| similarity_orbit_ascent(c, t, theta, params).map(|r| r.objective))
        .collect::<Result<Vec<_>>>()?;
    Ok(SupportProfile {
        directions: directions.to_vec(),
        support_values,
    })
}

/// Residuals `min_U |tr(C U† T U) − z|` for each target.
///
/// Targets are chased in the given order, each warm-started from the best
/// witness of the previous one, so a grid `s·w` walked from `s = 1` towards 0
/// is a continuation path.
pub fn star_center_probe(
    c: &MatrixOperator,
    t: &MatrixOperator,
    targets: &[Complex64],
    params: &OrbitParams,
) -> Result<Vec<f64>> {
    check_square_pair(c, t)?;
    let scale = c.schatten_norm(crate::SchattenIndex::Finite(1.0))?.max(1.0) * t.operator_norm().max(1.0);
    let accept = 1e-9 * scale;
    let mut warm: Option<MatrixOperator> = None;
    let mut residuals = Vec::with_capacity(targets.len());
    for &z in targets {
        let run = chase_target(c, t, z, warm.as_ref(), params, accept)?;
        residuals.push(-run.objective);
        warm = run.witnesses.into_iter().next();
    }
    Ok(residuals)
}

/// Per-point outcome of [`hull_inclusion_check`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullReport {
    /// `|tr(C U_σ† T U_σ) − Σ λ_i(C) λ_σ(i)(T)|` for the permutation witness of each spectrum point.
    pub witness_gaps: Vec<f64>,
    /// Distance of each range point from the convex hull of the spectrum.
    pub hull_margins: Vec<f64>,
    pub max_witness_gap: f64,
    pub max_hull_margin: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Checks `P_C(T) ⊆ W_C(T) ⊆ conv P_C(T)` on samples, for normal `C`, `T`.
///
/// `spectrum` must be built from the sequences of [`eigen_decompose_normal`]
/// applied to `c` and `t`. Each pairing `σ` is realized by the witness
/// `U = E_T P_σ E_C†`, where `E_C`, `E_T` are the eigenbases and `P_σ e_i = e_σ(i)`.
pub fn hull_inclusion_check(
    c: &MatrixOperator,
    t: &MatrixOperator,
    range: &RangeSample,
    spectrum: &CSpectrumSample,
    slack: f64,
) -> Result<HullReport> {
    check_square_pair(c, t)?;
    if range.points.is_empty() {
        return Err(Error::EmptyInput("range sample has no points".into()));
    }
    if spectrum.points.is_empty() {
        return Err(Error::EmptyInput("C-spectrum sample has no points".into()));
    }
    let n = c.rows();
    let (seq_c, basis_c) = eigen_decompose_normal(c)?;
    let (seq_t, basis_t) = eigen_decompose_normal(t)?;
    let scale = c.operator_norm().max(1.0) * t.operator_norm().max(1.0) * n as f64;

    let witness_gaps = spectrum
        .points
        .par_iter()
        .zip(&spectrum.pairings)
        .map(|(&point, sigma)| {
            if sigma.len() != n {
                return Err(Error::ShapeMismatch(format!("pairing of length {} for n = {n}", sigma.len())));
            }
            let expected = pairing_sum(seq_c.values(), seq_t.values(), sigma);
            if (expected - point).norm() > 1e-9 * scale {
                return Err(Error::InvalidArgument(
                    "spectrum point does not match its pairing for these operators".into(),
                ));
            }
            let mut p = DMatrix::<Complex64>::zeros(n, n);
            for (i, &j) in sigma.iter().enumerate() {
                p[(j, i)] = Complex64::new(1.0, 0.0);
            }
            let u = MatrixOperator::wrap(basis_t.columns() * p * basis_c.columns().adjoint());
            Ok((orbit_value(c, t, &u, None)? - point).norm())
        })
        .collect::<Result<Vec<_>>>()?;

    let hull = CompactSet::convex_hull(&spectrum.points)?;
    let hull_margins: Vec<f64> = range.points.par_iter().map(|&z| hull.distance_to(z)).collect();

    let max_witness_gap = witness_gaps.iter().copied().fold(0.0, f64::max);
    let max_hull_margin = hull_margins.iter().copied().fold(0.0, f64::max);
    Ok(HullReport {
        pass: max_witness_gap <= slack && max_hull_margin <= slack,
        witness_gaps,
        hull_margins,
        max_witness_gap,
        max_hull_margin,
        slack,
    })
}
