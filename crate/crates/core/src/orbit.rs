//! Optimization of trace functionals over the unitary group.
//!
//! Two unrelated methods are provided so that each can police the other:
//!
//! * [`alternating_bilinear_max`] maximizes `|tr(C U T V)|` by alternating
//!   exact half-steps. With `U` frozen, `tr(C U T V) = tr(V M)` for
//!   `M = C U T`, which is maximized in modulus by `V = W†` where `W` is the
//!   unitary polar factor of `M`; the value is then `‖M‖_1`. The objective
//!   can never decrease, and it is bounded above by `Σ s_j(C) s_j(T)`.
//! * [`similarity_orbit_ascent`] is a Riemannian gradient ascent of a real
//!   functional of `g(U) = tr(C U† T U)`. The tangent direction at `U` is the
//!   skew-hermitian part of the Euclidean derivative, and the retraction is
//!   right multiplication by a matrix exponential, computed exactly from the
//!   eigendecomposition of the hermitian matrix `i·G`.

use nalgebra::{DMatrix, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{checked_svd, MatrixOperator};
use crate::random::{self, rng_for};
use crate::UNITARY_TOL;

const MONOTONE_SLACK: f64 = 1e-12;
const MAX_HALVINGS: usize = 60;
const ARMIJO: f64 = 1e-4;
const REORTHONORMALIZE_EVERY: usize = 50;

/// Optimizer knobs shared by both methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitParams {
    pub restarts: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for OrbitParams {
    fn default() -> Self {
        Self {
            restarts: 8,
            tol: 1e-10,
            max_iter: 500,
            seed: 42,
        }
    }
}

impl OrbitParams {
    fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Outcome of an orbit optimization, best over restarts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrbitResult {
    /// Trace value at the optimum.
    pub value: Complex64,
    /// The optimized real functional.
    pub objective: f64,
    /// `[U]` for similarity orbits, `[U, V]` for equivalence orbits.
    pub witnesses: Vec<MatrixOperator>,
    pub iterations: usize,
    pub history: Vec<f64>,
    pub restarts_used: usize,
}

/// Seeded Haar unitary of dimension `n`.
pub fn haar_unitary(n: usize, seed: u64) -> MatrixOperator {
    random::haar_unitary(n, &mut rng_for(seed, 0))
}

fn initial_unitary(n: usize, seed: u64, restart: usize) -> DMatrix<Complex64> {
    if restart == 0 {
        DMatrix::identity(n, n)
    } else {
        random::haar_unitary(n, &mut rng_for(seed, restart as u64)).into_matrix()
    }
}

/// Unitary polar factor `W` of `M = W |M|`.
fn polar_factor(m: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let svd = checked_svd(m)?;
    Ok(svd.u * svd.v_t)
}

fn check_monotone(prev: f64, next: f64, what: &str) -> Result<()> {
    if next < prev - MONOTONE_SLACK * prev.abs().max(1.0) {
        Err(Error::NonConvergence(format!(
            "{what}: objective fell from {prev} to {next}"
        )))
    } else {
        Ok(())
    }
}

/// Keeps the best run; ties go to the earlier restart.
fn merge_best(runs: Vec<OrbitResult>) -> OrbitResult {
    let restarts_used = runs.len();
    let mut best: Option<OrbitResult> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.objective > b.objective) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    best.restarts_used = restarts_used;
    best
}

/// `tr(C U T)`-style product trace without forming the full product.
fn trace_of_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    // tr(AB) = Σ_ij A_ij B_ji
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Maximizes `|tr(C U T V)|` over unitary pairs by alternating polar half-steps.
///
/// `C` is `m × k` and `T` is `k × m`, so `U` is `k × k` and `V` is `m × m`.
pub fn alternating_bilinear_max(
    c: &MatrixOperator,
    t: &MatrixOperator,
    params: &OrbitParams,
) -> Result<OrbitResult> {
    params.validate()?;
    if c.cols() != t.rows() || t.cols() != c.rows() {
        return Err(Error::ShapeMismatch(format!(
            "C U T V is not square for C {}×{} and T {}×{}",
            c.rows(),
            c.cols(),
            t.rows(),
            t.cols()
        )));
    }
    let runs = (0..params.restarts)
        .into_par_iter()
        .map(|r| alternating_run(c.matrix(), t.matrix(), params, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_best(runs))
}

fn alternating_run(
    c: &DMatrix<Complex64>,
    t: &DMatrix<Complex64>,
    params: &OrbitParams,
    restart: usize,
) -> Result<OrbitResult> {
    let (m, k) = (c.nrows(), c.ncols());
    let mut u = initial_unitary(k, params.seed, restart);
    let mut v = DMatrix::identity(m, m);
    let value_at = |u: &DMatrix<Complex64>, v: &DMatrix<Complex64>| trace_of_product(&(c * u * t), v);

    let mut prev = value_at(&u, &v).norm();
    let mut history = Vec::new();
    let mut iterations = 0;
    for _ in 0..params.max_iter {
        iterations += 1;
        // V-step: V = W† for the polar factor W of C U T
        v = polar_factor(&(c * &u * t))?.adjoint();
        let half = value_at(&u, &v).norm();
        check_monotone(prev, half, "alternating V-step")?;
        // U-step: tr(C U T V) = tr(U · T V C)
        let u_prev = std::mem::replace(&mut u, polar_factor(&(t * &v * c))?.adjoint());
        let mut next = value_at(&u, &v).norm();
        check_monotone(half, next, "alternating U-step")?;
        // the half-steps converge only linearly, so try longer steps along the same geodesic
        (u, next) = extrapolate(c, t, &u_prev, u, next)?;
        history.push(next);
        let gain = next - prev;
        prev = next;
        if gain < params.tol {
            break;
        }
    }
    v = polar_factor(&(c * &u * t))?.adjoint();
    let value = value_at(&u, &v);
    Ok(OrbitResult {
        value,
        objective: value.norm(),
        witnesses: vec![MatrixOperator::wrap(u), MatrixOperator::wrap(v)],
        iterations,
        history,
        restarts_used: 1,
    })
}

/// `max_V |tr(C U T V)| = ‖C U T‖_1`.
fn best_v_value(c: &DMatrix<Complex64>, t: &DMatrix<Complex64>, u: &DMatrix<Complex64>) -> Result<f64> {
    let m = c * u * t;
    let svd = SVD::try_new(m, false, false, crate::DECOMPOSITION_EPS, 10_000)
        .ok_or_else(|| Error::DecompositionFailure("trace norm SVD diverged".into()))?;
    Ok(svd.singular_values.sum())
}

/// Walks `U_s = D^s U` for `D = U U_prev†` and `s = 1, 2, 4, …` while `‖C U_s T‖_1` grows.
fn extrapolate(
    c: &DMatrix<Complex64>,
    t: &DMatrix<Complex64>,
    u_prev: &DMatrix<Complex64>,
    u: DMatrix<Complex64>,
    value: f64,
) -> Result<(DMatrix<Complex64>, f64)> {
    let d = &u * u_prev.adjoint();
    // D is normal, so (D − D†)/2i shares its eigenvectors; its eigenvalues sin φ
    // separate the eigenvalues e^{iφ} of D as long as every |φ| < π/2; only small steps are extended
    let h = (&d - d.adjoint()) * Complex64::new(0.0, -0.5);
    let q = SymmetricEigen::try_new(h, crate::DECOMPOSITION_EPS, 10_000)
        .ok_or_else(|| Error::DecompositionFailure("eigendecomposition of the U-step diverged".into()))?
        .eigenvectors;
    let rotated = q.adjoint() * &d * &q;
    let angles: Vec<f64> = rotated.diagonal().iter().map(|z| z.arg()).collect();
    if angles.iter().any(|a| a.abs() >= std::f64::consts::FRAC_PI_4) {
        return Ok((u, value));
    }
    let power = |s: f64| {
        let phases = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            angles.len(),
            angles.iter().map(|a| Complex64::from_polar(1.0, s * a)),
        ));
        &q * phases * q.adjoint()
    };
    let (mut best, mut best_value) = (u, value);
    let mut s = 1.0;
    while s <= 1024.0 {
        let candidate = power(s) * &best;
        let candidate_value = best_v_value(c, t, &candidate)?;
        if candidate_value <= best_value {
            break;
        }
        (best, best_value) = (candidate, candidate_value);
        s *= 2.0;
    }
    Ok((best, best_value))
}

/// Real functional of `g = tr(C U† T U)` driven by [`ascend`].
#[derive(Debug, Clone, Copy)]
pub(crate) enum SimilarityObjective {
    /// `Re(e^{−iθ} g)`.
    Direction(f64),
    /// `−|g − z|`.
    Target(Complex64),
}

impl SimilarityObjective {
    fn value(&self, g: Complex64) -> f64 {
        match *self {
            Self::Direction(theta) => (Complex64::from_polar(1.0, -theta) * g).re,
            Self::Target(z) => -(g - z).norm(),
        }
    }

    /// `α` with `dF = Re(α · dg)`; `None` where `F` is not differentiable.
    fn cogradient(&self, g: Complex64) -> Option<Complex64> {
        match *self {
            Self::Direction(theta) => Some(Complex64::from_polar(1.0, -theta)),
            Self::Target(z) => {
                let r = (g - z).norm();
                (r > 0.0).then(|| -(g - z).conj() / r)
            }
        }
    }
}

fn similarity_value(c: &DMatrix<Complex64>, t: &DMatrix<Complex64>, u: &DMatrix<Complex64>) -> Complex64 {
    trace_of_product(c, &(u.adjoint() * t * u))
}

/// Real inner product `Re tr(A† B)` on the Lie algebra.
fn lie_inner(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

fn commutator(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a * b - b * a
}

/// The skew-hermitian `Ω` representing `Ω' ↦ Re tr(Ω' X)`, i.e. `(X† − X)/2`.
fn skew_representer(x: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (x.adjoint() - x) * Complex64::new(0.5, 0.0)
}

/// Second derivative of `Ω ↦ Re(α tr(C A(Ω)))`, `A(Ω) = e^{−Ω} A e^{Ω}`, applied to `Ω`.
///
/// The quadratic term of `A(Ω)` is `½[[A, Ω], Ω]`; polarizing gives the
/// symmetric form whose representer is returned.
fn hessian_apply(
    c: &DMatrix<Complex64>,
    a: &DMatrix<Complex64>,
    alpha: Complex64,
    omega: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let y = (commutator(c, &commutator(a, omega)) + commutator(&commutator(omega, c), a)) * (alpha * 0.5);
    skew_representer(&y)
}

/// Entrywise curvature estimate `|Re(α (c_i − c_j)(a_i − a_j))|` of the
/// Hessian, exact when `C` and `A` are diagonal. Used as a CG preconditioner.
fn curvature_weights(c: &DMatrix<Complex64>, a: &DMatrix<Complex64>, alpha: Complex64) -> DMatrix<f64> {
    let n = c.nrows();
    let mut w = DMatrix::from_fn(n, n, |i, j| (alpha * (c[(i, i)] - c[(j, j)]) * (a[(i, i)] - a[(j, j)])).re.abs());
    // a larger floor keeps rounding noise in flat directions from dominating the step
    let floor = 1e-3 * w.max() + f64::MIN_POSITIVE;
    w.apply(|x| *x += floor);
    w
}

/// Approximate maximizer of the local quadratic model: preconditioned
/// conjugate gradients on `−H Ω = G`, stopped at the forcing tolerance or at
/// non-negative curvature.
fn newton_direction(
    c: &DMatrix<Complex64>,
    a: &DMatrix<Complex64>,
    alpha: Complex64,
    gradient: &DMatrix<Complex64>,
) -> DMatrix<Complex64> {
    let n = c.nrows();
    let weights = curvature_weights(c, a, alpha);
    let precondition = |r: &DMatrix<Complex64>| r.zip_map(&weights, |z, w| z / w);
    let grad_norm = gradient.norm();
    let forcing = grad_norm * grad_norm.sqrt().min(0.5);
    let mut x = DMatrix::<Complex64>::zeros(n, n);
    let mut r = gradient.clone();
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = lie_inner(&r, &z);
    for k in 0..(2 * n * n).max(4) {
        let hp = -hessian_apply(c, a, alpha, &p);
        let curvature = lie_inner(&p, &hp);
        if curvature <= 1e-14 * p.norm_squared() {
            if k == 0 {
                return gradient.clone();
            }
            break;
        }
        let step = rz / curvature;
        x += &p * Complex64::new(step, 0.0);
        r -= hp * Complex64::new(step, 0.0);
        if r.norm() <= forcing {
            break;
        }
        z = precondition(&r);
        let rz_new = lie_inner(&r, &z);
        p = &z + &p * Complex64::new(rz_new / rz, 0.0);
        rz = rz_new;
    }
    x
}

/// One Riemannian ascent run from `u0`.
///
/// Tangent vectors at `U` are written `U·Ω` with `Ω` skew-hermitian. For a
/// directional objective the search generator is a truncated Newton step of
/// the pulled-back objective; for target chasing (not smooth at the solution)
/// it is a Polak–Ribière combination of successive projected gradients. Both
/// fall back to the projected gradient when they fail to ascend.
pub(crate) fn ascend(
    c: &DMatrix<Complex64>,
    t: &DMatrix<Complex64>,
    objective: SimilarityObjective,
    u0: DMatrix<Complex64>,
    params: &OrbitParams,
) -> Result<OrbitResult> {
    // C = Q S Q† with S triangular, and tr(C U†TU) = tr(S (UQ)† T (UQ)); iterating
    // on UQ makes the diagonal curvature estimate meaningful
    let (q, s) = Schur::try_new(c.clone(), crate::DECOMPOSITION_EPS, 10_000)
        .ok_or_else(|| Error::DecompositionFailure("Schur iteration for C diverged".into()))?
        .unpack();
    let c = &s;
    let mut u = u0 * &q;
    let mut g = similarity_value(c, t, &u);
    let mut f = objective.value(g);
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut previous: Option<(DMatrix<Complex64>, DMatrix<Complex64>)> = None;

    for step in 1..=params.max_iter {
        iterations = step;
        let Some(alpha) = objective.cogradient(g) else {
            history.push(f);
            break;
        };
        // dg along U ↦ U exp(εΩ) is tr(Ω K) with K = [C, U†TU]
        let a = u.adjoint() * t * &u;
        let gradient = skew_representer(&(commutator(c, &a) * alpha));
        let grad_sq = gradient.norm_squared();
        if grad_sq == 0.0 {
            history.push(f);
            break;
        }
        let mut direction = match objective {
            SimilarityObjective::Direction(_) => newton_direction(c, &a, alpha, &gradient),
            SimilarityObjective::Target(_) => {
                let mut d = gradient.clone();
                if let Some((prev_grad, prev_dir)) = &previous {
                    let beta = lie_inner(&gradient, &(&gradient - prev_grad)) / prev_grad.norm_squared();
                    d += prev_dir * Complex64::new(beta.max(0.0), 0.0);
                }
                d
            }
        };
        let mut slope = lie_inner(&gradient, &direction);
        if !(slope > 0.0) {
            direction = gradient.clone();
            slope = grad_sq;
        }

        // exp(sD) = W diag(e^{−isμ}) W† with i·D = W diag(μ) W†
        let h = &direction * Complex64::new(0.0, 1.0);
        let h = (&h + h.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::try_new(h, crate::DECOMPOSITION_EPS, 10_000)
            .ok_or_else(|| Error::DecompositionFailure("generator eigen iteration diverged".into()))?;
        let w = &eig.eigenvectors;

        let mut accepted = None;
        let mut s = 1.0;
        for _ in 0..MAX_HALVINGS {
            let phases = eig.eigenvalues.map(|mu| Complex64::from_polar(1.0, -s * mu));
            let candidate = &u * (w * DMatrix::from_diagonal(&phases) * w.adjoint());
            let g_new = similarity_value(c, t, &candidate);
            let f_new = objective.value(g_new);
            if f_new > f && f_new >= f + ARMIJO * s * slope {
                accepted = Some((candidate, g_new, f_new));
                break;
            }
            s *= 0.5;
        }
        let Some((candidate, g_new, f_new)) = accepted else {
            history.push(f);
            break;
        };
        check_monotone(f, f_new, "similarity ascent")?;
        let gain = f_new - f;
        u = candidate;
        g = g_new;
        f = f_new;
        if step % REORTHONORMALIZE_EVERY == 0 {
            u = polar_factor(&u)?;
            g = similarity_value(c, t, &u);
            f = objective.value(g);
        }
        history.push(f);
        previous = Some((gradient, direction));
        let stop = match objective {
            SimilarityObjective::Direction(_) => params.tol,
            // residuals shrink geometrically near an attained target; keep going while the gain is relatively large
            SimilarityObjective::Target(_) => params.tol * (-f).min(1.0),
        };
        if gain < stop {
            break;
        }
    }
    Ok(OrbitResult {
        value: g,
        objective: f,
        witnesses: vec![MatrixOperator::wrap(u * q.adjoint())],
        iterations,
        history,
        restarts_used: 1,
    })
}

fn check_similarity_shapes(c: &MatrixOperator, t: &MatrixOperator) -> Result<()> {
    if !c.is_square() || !t.is_square() || c.rows() != t.rows() {
        return Err(Error::ShapeMismatch(format!(
            "similarity orbit needs square C, T of equal size, got {}×{} and {}×{}",
            c.rows(),
            c.cols(),
            t.rows(),
            t.cols()
        )));
    }
    Ok(())
}

/// Locally maximizes `Re(e^{−iθ} tr(C U† T U))` over unitaries `U`.
pub fn similarity_orbit_ascent(
    c: &MatrixOperator,
    t: &MatrixOperator,
    theta: f64,
    params: &OrbitParams,
) -> Result<OrbitResult> {
    params.validate()?;
    check_similarity_shapes(c, t)?;
    let n = c.rows();
    let objective = SimilarityObjective::Direction(theta);
    let runs = (0..params.restarts)
        .into_par_iter()
        .map(|r| {
            ascend(
                c.matrix(),
                t.matrix(),
                objective,
                initial_unitary(n, params.seed, r),
                params,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_best(runs))
}

/// Single ascent run of `Re(e^{−iθ} tr(C U† T U))` from a given unitary.
pub fn similarity_orbit_ascent_from(
    c: &MatrixOperator,
    t: &MatrixOperator,
    theta: f64,
    start: &MatrixOperator,
    params: &OrbitParams,
) -> Result<OrbitResult> {
    params.validate()?;
    check_similarity_shapes(c, t)?;
    if start.rows() != c.rows() || !start.is_unitary(UNITARY_TOL) {
        return Err(Error::NotUnitary(start.unitarity_defect().unwrap_or(f64::INFINITY)));
    }
    ascend(
        c.matrix(),
        t.matrix(),
        SimilarityObjective::Direction(theta),
        start.matrix().clone(),
        params,
    )
}

/// Minimizes `|tr(C U† T U) − target|`, trying `warm_start` first when given.
///
/// The returned objective is the negated residual.
pub(crate) fn chase_target(
    c: &MatrixOperator,
    t: &MatrixOperator,
    target: Complex64,
    warm_start: Option<&MatrixOperator>,
    params: &OrbitParams,
    accept: f64,
) -> Result<OrbitResult> {
    params.validate()?;
    check_similarity_shapes(c, t)?;
    let n = c.rows();
    let objective = SimilarityObjective::Target(target);
    let mut runs = Vec::new();
    let starts = warm_start.into_iter().count() + params.restarts;
    for r in 0..starts {
        let u0 = match (warm_start, r) {
            (Some(w), 0) => w.matrix().clone(),
            (Some(_), r) => initial_unitary(n, params.seed, r - 1),
            (None, r) => initial_unitary(n, params.seed, r),
        };
        let run = ascend(c.matrix(), t.matrix(), objective, u0, params)?;
        let done = -run.objective <= accept;
        runs.push(run);
        if done {
            break;
        }
    }
    Ok(merge_best(runs))
}

/// `tr(C U† T U)`, or `tr(C U T V)` when `v` is given.
pub fn orbit_value(
    c: &MatrixOperator,
    t: &MatrixOperator,
    u: &MatrixOperator,
    v: Option<&MatrixOperator>,
) -> Result<Complex64> {
    for w in std::iter::once(u).chain(v) {
        let defect = w
            .unitarity_defect()
            .ok_or_else(|| Error::ShapeMismatch("witness must be square".into()))?;
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
    }
    let product = match v {
        None => c.compose(&u.adjoint())?.compose(t)?.compose(u)?,
        Some(v) => c.compose(u)?.compose(t)?.compose(v)?,
    };
    product.trace()
}
