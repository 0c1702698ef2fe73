mod common;

use common::{gaussian, hermitian, real, schatten, unitary};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use schatten_core::inequality_suite::remark_pair;
use schatten_core::numerical_range::{
    disc, hull_inclusion_check, s_range_radius, sample_equivalence_range, sample_similarity_range, star_center_probe,
    support_profile, uniform_directions, OrbitKind, SupportProfile,
};
use schatten_core::orbit::{alternating_bilinear_max, orbit_value, OrbitParams};
use schatten_core::random::{random_complex_diagonal, rng_for};
use schatten_core::set_convergence::{hausdorff_distance, CompactSet};
use schatten_core::spectra::{c_spectrum, eigen_decompose_normal, hermitian_orbit_extremes, SpectrumMode};
use schatten_core::{Complex64, Error, MatrixOperator};
use std::f64::consts::{PI, TAU};

fn diag(v: &[f64]) -> MatrixOperator {
    MatrixOperator::real_diagonal(v).unwrap()
}

fn padded(m: &MatrixOperator) -> MatrixOperator {
    m.zero_padded(2 * m.rows(), 2 * m.cols()).unwrap()
}

/// Support function of the classical numerical range: λ_max of the hermitian part of e^{−iθ}T.
fn classical_support(t: &DMatrix<Complex64>, theta: f64) -> f64 {
    let rot = t * Complex64::from_polar(1.0, -theta);
    let h = (&rot + rot.adjoint()) * real(0.5);
    SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn unit_vector(n: usize, seed: u64) -> nalgebra::DVector<Complex64> {
    unitary(n, seed).matrix().column(0).into_owned()
}

#[test]
fn scalar_c_gives_one_point() {
    let n = 3;
    let scalar = MatrixOperator::identity(n).scale(real(1.0 / n as f64));
    let t = gaussian(n, n, 1);
    let want = t.trace().unwrap() / n as f64;
    let sample = sample_similarity_range(&scalar, &t, 100, 2).unwrap();
    assert_eq!(sample.kind, OrbitKind::SimilarityOrbit);
    assert_eq!(sample.sample_count, 100);
    assert!(sample.points.iter().all(|z| (z - want).norm() < 1e-12));

    let profile = support_profile(&scalar, &t, &uniform_directions(6), &OrbitParams::default()).unwrap();
    for (theta, h) in profile.directions.iter().zip(&profile.support_values) {
        assert!((h - (Complex64::from_polar(1.0, -theta) * want).re).abs() < 1e-12);
    }
}

#[test]
fn rank_one_projection_stays_in_classical_range() {
    let n = 4;
    let mut e = vec![0.0; n];
    e[0] = 1.0;
    let projection = diag(&e);
    let t = gaussian(n, n, 3);
    let sample = sample_similarity_range(&projection, &t, 2000, 4).unwrap();
    let directions = uniform_directions(128);
    let h: Vec<f64> = directions.iter().map(|&th| classical_support(t.matrix(), th)).collect();
    let classical = SupportProfile { directions: directions.clone(), support_values: h.clone() };
    assert!(sample.points.iter().all(|&z| classical.contains(z, 1e-9)));

    // Rayleigh quotients fill the same support values from inside
    let rayleigh: Vec<Complex64> = (0..20_000)
        .map(|k| {
            let x = unit_vector(n, 100 + k);
            x.dotc(&(t.matrix() * &x))
        })
        .collect();
    for (&th, &hv) in directions.iter().zip(&h) {
        let best = rayleigh
            .iter()
            .map(|z| (Complex64::from_polar(1.0, -th) * z).re)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(best <= hv + 1e-9 && best > hv - 0.2 * (1.0 + hv.abs()));
    }
}

#[test]
fn hermitian_pairs_give_real_samples_in_the_interval() {
    let (cm, t) = (hermitian(5, 5), hermitian(5, 6));
    let e = hermitian_orbit_extremes(&cm, &t).unwrap();
    let sample = sample_similarity_range(&cm, &t, 3000, 7).unwrap();
    for z in &sample.points {
        assert!(z.im.abs() < 1e-10);
        assert!(z.re <= e.max + 1e-9 && z.re >= e.min - 1e-9);
    }
}

#[test]
fn s_range_radius_examples() {
    assert!((s_range_radius(&diag(&[2.0, 1.0]), &diag(&[3.0, 1.0])).unwrap() - 7.0).abs() < 1e-12);
    assert_eq!(s_range_radius(&MatrixOperator::zeros(3, 3), &gaussian(3, 3, 1)).unwrap(), 0.0);
    for n in [3, 8, 20] {
        let (cm, t) = remark_pair(n).unwrap();
        let want: f64 = (1..n).map(|j| 4f64.powi(-(j as i32))).sum();
        assert!((s_range_radius(&cm, &t).unwrap() - want).abs() < 1e-14);
    }
    let (cm, t) = remark_pair(30).unwrap();
    assert!((s_range_radius(&cm, &t).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    assert!(matches!(s_range_radius(&gaussian(2, 3, 0), &gaussian(2, 3, 0)), Err(Error::ShapeMismatch(_))));
}

#[test]
fn disc_examples() {
    let zero = disc(0.0).unwrap();
    assert_eq!(hausdorff_distance(&zero, &CompactSet::point_cloud(vec![real(0.0)]).unwrap()).unwrap(), 0.0);
    let unit = disc(1.0).unwrap();
    assert_eq!(unit.distance_to(Complex64::new(0.5, 0.5)), 0.0);
    assert!(unit.distance_to(Complex64::new(1.0, 1.0)) > 0.0);
    assert!((hausdorff_distance(&disc(0.7).unwrap(), &disc(2.2).unwrap()).unwrap() - 1.5).abs() < 1e-15);
    assert!(matches!(disc(-1.0), Err(Error::NegativeRadius(_))));
}

#[test]
fn disc_law_on_rectangular_pair() {
    let (a, b) = (gaussian(3, 5, 8), gaussian(5, 3, 9));
    let r = s_range_radius(&a, &b).unwrap();
    let sample = sample_equivalence_range(&a, &b, 5000, 10).unwrap();
    assert_eq!(sample.kind, OrbitKind::EquivalenceOrbit);
    assert!(sample.points.iter().all(|z| z.norm() <= r + 1e-9));
    let best = alternating_bilinear_max(&a, &b, &OrbitParams::default()).unwrap();
    assert!((best.objective - r).abs() < 1e-8 * r.max(1.0));
}

#[test]
fn support_profile_of_hermitian_pair() {
    let (cm, t) = (padded(&hermitian(3, 11)), padded(&hermitian(3, 12)));
    let e = hermitian_orbit_extremes(&cm, &t).unwrap();
    let profile = support_profile(&cm, &t, &[0.0, PI], &OrbitParams::default()).unwrap();
    assert!((profile.support_values[0] - e.max).abs() < 1e-6);
    assert!((profile.support_values[1] + e.min).abs() < 1e-6);
}

#[test]
fn support_polygon_contains_samples() {
    let mut rng = rng_for(13, 0);
    let cm = random_complex_diagonal(4, &mut rng);
    let t = random_complex_diagonal(4, &mut rng);
    let profile = support_profile(&cm, &t, &uniform_directions(64), &OrbitParams::default()).unwrap();
    let sample = sample_similarity_range(&cm, &t, 10_000, 14).unwrap();
    assert!(sample.points.iter().all(|&z| profile.contains(z, 1e-6)));
    let polygon = profile.dual_polygon().unwrap();
    assert_eq!(polygon.kind(), "convex-polygon");
    let worst = sample.points.iter().map(|&z| polygon.distance_to(z)).fold(0.0, f64::max);
    assert!(worst <= 1e-6);

    let csv = profile.to_csv().unwrap();
    assert!(csv.starts_with("re,im\n"));
    let back: SupportProfile = serde_json::from_str(&profile.to_json()).unwrap();
    assert_eq!(back, profile);

    let half = SupportProfile { directions: vec![0.0, PI], support_values: vec![1.0, 1.0] };
    assert!(half.dual_polygon().is_err());
}

#[test]
fn star_probe_examples() {
    let params = OrbitParams::default();
    // tr C = 0, and T repeats values so that some pairing sum vanishes
    let cm = diag(&[1.0, -1.0, 0.5, -0.5]);
    let a = Complex64::new(1.0, 2.0);
    let t = MatrixOperator::diagonal(&[a, real(3.0), a, real(3.0)]).unwrap();
    let (cs, _) = eigen_decompose_normal(&cm).unwrap();
    let (ts, _) = eigen_decompose_normal(&t).unwrap();
    let spectrum = c_spectrum(&cs, &ts, SpectrumMode::Exhaustive).unwrap();
    assert!(spectrum.points.iter().any(|z| z.norm() < 1e-12));
    let zero = star_center_probe(&cm, &t, &[real(0.0)], &params).unwrap();
    assert!(zero[0] < 1e-6, "residual {}", zero[0]);

    let w = sample_similarity_range(&cm, &t, 1, 15).unwrap().points[0];
    let exact = star_center_probe(&cm, &t, &[w], &params).unwrap();
    assert!(exact[0] < 1e-10, "residual {}", exact[0]);

    let (hc, ht) = (hermitian(3, 16), hermitian(3, 17));
    let up = schatten_core::orbit::similarity_orbit_ascent(&hc, &ht, 0.0, &params).unwrap().objective;
    let down = -schatten_core::orbit::similarity_orbit_ascent(&hc, &ht, PI, &params).unwrap().objective;
    let grid: Vec<Complex64> = (0..=10).map(|k| real(down + (up - down) * k as f64 / 10.0)).collect();
    let residuals = star_center_probe(&hc, &ht, &grid, &params).unwrap();
    assert!(residuals.iter().all(|r| *r < 1e-6), "{residuals:?}");
}

#[test]
fn hull_inclusion_examples() {
    let mut rng = rng_for(18, 0);
    let cm = random_complex_diagonal(4, &mut rng);
    let t = random_complex_diagonal(4, &mut rng);
    let range = sample_similarity_range(&cm, &t, 1000, 19).unwrap();
    let (cs, _) = eigen_decompose_normal(&cm).unwrap();
    let (ts, _) = eigen_decompose_normal(&t).unwrap();
    let spectrum = c_spectrum(&cs, &ts, SpectrumMode::Exhaustive).unwrap();
    let report = hull_inclusion_check(&cm, &t, &range, &spectrum, 1e-9).unwrap();
    assert!(report.pass, "{} {}", report.max_witness_gap, report.max_hull_margin);
    assert_eq!(report.witness_gaps.len(), 24);

    let (hc, ht) = (hermitian(4, 20), hermitian(4, 21));
    let range = sample_similarity_range(&hc, &ht, 1000, 22).unwrap();
    let (cs, _) = eigen_decompose_normal(&hc).unwrap();
    let (ts, _) = eigen_decompose_normal(&ht).unwrap();
    let spectrum = c_spectrum(&cs, &ts, SpectrumMode::Exhaustive).unwrap();
    let report = hull_inclusion_check(&hc, &ht, &range, &spectrum, 1e-9).unwrap();
    assert!(report.pass);
    let lo = spectrum.points.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let hi = spectrum.points.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    assert!(range.points.iter().all(|z| z.im.abs() < 1e-10 && z.re >= lo - 1e-9 && z.re <= hi + 1e-9));

    let lambda = Complex64::new(2.0, -1.0);
    let one = diag(&[1.0, 0.0, 0.0]);
    let t = MatrixOperator::diagonal(&[lambda, real(0.0), real(0.0)]).unwrap();
    let (cs, _) = eigen_decompose_normal(&one).unwrap();
    let (ts, _) = eigen_decompose_normal(&t).unwrap();
    let spectrum = c_spectrum(&cs, &ts, SpectrumMode::Exhaustive).unwrap();
    let distinct: Vec<Complex64> = spectrum.points.iter().fold(Vec::new(), |mut acc, z| {
        if acc.iter().all(|y: &Complex64| (y - z).norm() > 1e-12) {
            acc.push(*z);
        }
        acc
    });
    assert_eq!(distinct.len(), 2);
    assert!(distinct.iter().any(|z| (z - lambda).norm() < 1e-12) && distinct.iter().any(|z| z.norm() < 1e-12));
    let range = sample_similarity_range(&one, &t, 500, 23).unwrap();
    let report = hull_inclusion_check(&one, &t, &range, &spectrum, 1e-9).unwrap();
    assert!(report.pass);
    // on the segment: z = s λ with s ∈ [0, 1]
    for z in &range.points {
        let s = (z / lambda).re;
        assert!((z - lambda * s).norm() < 1e-9 && (-1e-9..=1.0 + 1e-9).contains(&s));
    }

    let empty = schatten_core::numerical_range::RangeSample { points: vec![], ..range };
    assert!(matches!(hull_inclusion_check(&one, &t, &empty, &spectrum, 1e-9), Err(Error::EmptyInput(_))));
}

#[test]
fn sample_exports() {
    let (cm, t) = (gaussian(2, 2, 24), gaussian(2, 2, 25));
    let sample = sample_similarity_range(&cm, &t, 3, 26).unwrap();
    let csv = sample.to_csv();
    assert_eq!(csv.lines().count(), 4);
    assert_eq!(csv.lines().next(), Some("re,im"));
    let v: serde_json::Value = serde_json::from_str(&sample.to_json()).unwrap();
    assert_eq!(v["kind"], "similarity-orbit");
    assert_eq!(v["seed"], 26);
    assert_eq!(sample.to_set().unwrap().points().len(), 3);
    assert_eq!(sample_similarity_range(&cm, &t, 3, 26).unwrap(), sample);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn equivalence_samples_are_circular(seed: u64, n in 1usize..5, phi in 0.0f64..TAU) {
        let (a, b) = (gaussian(n, n, seed), gaussian(n, n, seed ^ 1));
        let (u, v) = (unitary(n, seed ^ 2), unitary(n, seed ^ 3));
        let z = orbit_value(&a, &b, &u, Some(&v)).unwrap();
        let rot = Complex64::from_polar(1.0, phi);
        let w = orbit_value(&a, &b, &u.scale(rot), Some(&v)).unwrap();
        prop_assert!((w - rot * z).norm() <= 1e-12 * z.norm().max(1.0));
    }

    #[test]
    fn disc_law(seed: u64, n in 1usize..6, k in 1usize..6) {
        let (a, b) = (gaussian(n, k, seed), gaussian(k, n, seed ^ 4));
        let r = s_range_radius(&a, &b).unwrap();
        let sample = sample_equivalence_range(&a, &b, 200, seed).unwrap();
        prop_assert!(sample.points.iter().all(|z| z.norm() <= r + 1e-9));
        let best = alternating_bilinear_max(&a, &b, &OrbitParams { restarts: 3, seed, ..Default::default() }).unwrap();
        prop_assert!((best.objective - r).abs() <= 1e-8 * r.max(1.0));
    }

    #[test]
    fn collinear_samples_stay_in_interval(seed: u64, n in 1usize..6) {
        let (cm, t) = (hermitian(n, seed), hermitian(n, seed ^ 5));
        let e = hermitian_orbit_extremes(&cm, &t).unwrap();
        let sample = sample_similarity_range(&cm, &t, 200, seed).unwrap();
        prop_assert!(sample.points.iter().all(|z| z.re <= e.max + 1e-9 && z.re >= e.min - 1e-9 && z.im.abs() < 1e-10));
    }

    #[test]
    fn holder_envelope(seed: u64, n in 1usize..6, p in 1.0f64..6.0) {
        let (cm, t) = (gaussian(n, n, seed), gaussian(n, n, seed ^ 6));
        let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
        let bound = schatten(cm.matrix(), p) * schatten(t.matrix(), q);
        let sim = sample_similarity_range(&cm, &t, 200, seed).unwrap();
        let eqv = sample_equivalence_range(&cm, &t, 200, seed).unwrap();
        prop_assert!(sim.points.iter().chain(&eqv.points).all(|z| z.norm() <= bound + 1e-9));
    }
}
