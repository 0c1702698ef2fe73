mod common;

use common::{gaussian, hermitian, real, unitary};
use proptest::prelude::*;
use schatten_core::inequality_suite::{
    file_digest, run_hermitian_bounds, run_range_geometry, run_truncation_convergence, run_von_neumann, write_jsonl,
    Claim, ExampleId, GapKind, ScenarioReport, SuiteParams, TruncationSource,
};
use schatten_core::orbit::OrbitParams;
use schatten_core::random::{random_complex_diagonal, rng_for};
use schatten_core::{Complex64, Error, MatrixOperator};

fn quick() -> SuiteParams {
    SuiteParams {
        samples: 200,
        ..SuiteParams::default()
    }
}

fn interval(c: &Claim) -> (f64, f64) {
    match c {
        Claim::Interval { min, max } => (*min, *max),
        Claim::Scalar(x) => panic!("expected an interval, got {x}"),
    }
}

fn scalar(c: &Claim) -> f64 {
    match c {
        Claim::Scalar(x) => *x,
        Claim::Interval { .. } => panic!("expected a scalar"),
    }
}

fn conjugate(m: &MatrixOperator, u: &MatrixOperator) -> MatrixOperator {
    u.compose(m).unwrap().compose(&u.adjoint()).unwrap()
}

#[test]
fn von_neumann_on_random_pair() {
    let (a, b) = (gaussian(6, 6, 1), gaussian(6, 6, 2));
    let r = run_von_neumann(&a, &b, &quick()).unwrap();
    let oracle: f64 = common::singular_values(a.matrix())
        .iter()
        .zip(common::singular_values(b.matrix()))
        .map(|(x, y)| x * y)
        .sum();
    assert!((scalar(&r.claimed) - oracle).abs() < 1e-10 * oracle);
    assert!(r.pass && r.rel_gap < 1e-8);
    assert_eq!(r.tolerance.kind, GapKind::Relative);
    assert_eq!(r.inputs.dimensions, vec![[6, 6], [6, 6]]);
    assert!(matches!(run_von_neumann(&a, &gaussian(5, 5, 3), &quick()), Err(Error::ShapeMismatch(_))));
}

#[test]
fn hermitian_bounds_examples() {
    let (c, t) = ExampleId::DiagHermitian.pair(0).unwrap();
    let r = run_hermitian_bounds(&c, &t, &quick()).unwrap();
    assert_eq!(interval(&r.claimed), (-13.0, 11.0));
    assert_eq!(c.compose(&t).unwrap().trace().unwrap(), real(11.0));
    assert!(r.pass);

    let (c, t) = (hermitian(8, 4), hermitian(8, 5));
    let r = run_hermitian_bounds(&c, &t, &quick()).unwrap();
    let (lo, hi) = interval(&r.claimed);
    let tr = common::trace(&(c.matrix() * t.matrix())).re;
    assert!(lo <= tr && tr <= hi);
    assert!(r.pass && r.abs_gap < 1e-6, "{}", r.abs_gap);
    assert!(r.checks.iter().all(|c| c.pass));
}

#[test]
fn truncation_examples() {
    let sweep: Vec<usize> = (4..=12).collect();
    let r = run_truncation_convergence(&TruncationSource::Example(ExampleId::Remark), &sweep, &quick()).unwrap();
    assert!(r.pass);
    for row in &r.table {
        let tail = (1.0 / 3.0) * 4f64.powi(-(row.n as i32 - 1));
        assert!((row.delta - tail).abs() < 1e-12);
    }
    assert!(r.table.windows(2).all(|w| w[1].delta < w[0].delta));

    let constant = run_truncation_convergence(&TruncationSource::Example(ExampleId::Remark), &[6, 6, 6], &quick()).unwrap();
    assert!(constant.table.iter().all(|row| row.delta == constant.table[0].delta));

    let ns = [4, 8, 16, 32, 64];
    let perturbed = run_truncation_convergence(&TruncationSource::Example(ExampleId::Perturbed), &ns, &quick()).unwrap();
    let deltas: Vec<f64> = perturbed.table.iter().map(|r| r.delta).collect();
    assert!(deltas.windows(2).all(|w| w[1] < w[0]));
    // radius exceeds the unperturbed one by about s_1(T)/n = 1/(2n)
    let last = perturbed.table.last().unwrap();
    assert!((last.delta * last.n as f64 - 0.5).abs() < 0.05, "{}", last.delta);

    assert!(run_truncation_convergence(&TruncationSource::Example(ExampleId::Remark), &[8, 4], &quick()).is_err());
    assert!(matches!(
        run_truncation_convergence(&TruncationSource::Example(ExampleId::Remark), &[8], &quick()),
        Err(Error::EmptySequence)
    ));
    assert!(run_truncation_convergence(&TruncationSource::Example(ExampleId::SignPair), &[2, 3], &quick()).is_err());
}

#[test]
fn range_geometry_examples() {
    let mut rng = rng_for(6, 0);
    let c = random_complex_diagonal(4, &mut rng);
    let t = random_complex_diagonal(4, &mut rng);
    let r = run_range_geometry(&c, &t, &quick()).unwrap();
    assert!(r.pass, "{:?}", r.checks);

    let (hc, ht) = (hermitian(4, 7), hermitian(4, 8));
    assert!(run_range_geometry(&hc, &ht, &quick()).unwrap().pass);

    // traceless C: the star probe walks every sample down to 0
    let c = MatrixOperator::diagonal(&[real(1.0), Complex64::new(0.0, 1.0), real(-1.0), Complex64::new(0.0, -1.0)]).unwrap();
    let t = common::conjugated_diagonal(&[real(2.0), Complex64::new(1.0, 1.0), real(-0.5), real(0.3)], 9);
    let r = run_range_geometry(&c, &t, &quick()).unwrap();
    let star = r.checks.iter().find(|c| c.name == "star_probe_residual").unwrap();
    assert!(star.pass && star.value < 1e-6);

    let jordan = MatrixOperator::new(2, 2, vec![real(0.0), real(1.0), real(0.0), real(0.0)]).unwrap();
    assert!(matches!(run_range_geometry(&jordan, &jordan, &quick()), Err(Error::NotNormal(_))));
}

#[test]
fn reports_are_reproducible() {
    let params = quick();
    let (c, t) = (hermitian(4, 10), hermitian(4, 11));
    let strip = |mut r: ScenarioReport| {
        assert!(r.wall_time_secs.is_some());
        r.wall_time_secs = None;
        r.to_json_line()
    };
    let first = strip(run_hermitian_bounds(&c, &t, &params).unwrap());
    let second = strip(run_hermitian_bounds(&c, &t, &params).unwrap());
    assert_eq!(first, second);
    assert!(!first.contains("wall_time"));
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["inputs"]["seed"], 42);
    assert_eq!(v["claimed"]["min"].as_f64().unwrap(), interval(&run_hermitian_bounds(&c, &t, &params).unwrap().claimed).0);

    let r = run_range_geometry(&ExampleId::SignPair.pair(0).unwrap().0, &ExampleId::SignPair.pair(0).unwrap().1, &params).unwrap();
    let mut out = Vec::new();
    write_jsonl(&[r.clone(), r], &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert_eq!(text.lines().count(), 2);
    let back: ScenarioReport = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(back.scenario, "range-geometry");
}

#[test]
fn file_digests() {
    let path = std::env::temp_dir().join(format!("schatten-digest-{}.json", std::process::id()));
    std::fs::write(&path, b"abc").unwrap();
    let d = file_digest(&path).unwrap();
    assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    std::fs::remove_file(&path).unwrap();
    assert!(matches!(file_digest(&path), Err(Error::Io(_))));
}

#[test]
fn example_registry() {
    for id in ExampleId::ALL {
        assert_eq!(id.as_str().parse::<ExampleId>().unwrap(), id);
        assert!(id.pair(3).is_ok());
    }
    assert!("nope".parse::<ExampleId>().is_err());
    assert!(ExampleId::Remark.pair(0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn von_neumann_claim_is_unitarily_invariant(seed: u64, n in 1usize..6) {
        let (a, b) = (gaussian(n, n, seed), gaussian(n, n, seed ^ 1));
        let (u, v) = (unitary(n, seed ^ 2), unitary(n, seed ^ 3));
        let moved = u.compose(&a).unwrap().compose(&v).unwrap();
        let params = SuiteParams { orbit: OrbitParams { restarts: 2, ..Default::default() }, ..quick() };
        let before = scalar(&run_von_neumann(&a, &b, &params).unwrap().claimed);
        let after = scalar(&run_von_neumann(&moved, &b, &params).unwrap().claimed);
        prop_assert!((before - after).abs() < 1e-10 * before.max(1.0));
    }

    #[test]
    fn hermitian_interval_is_conjugation_invariant(seed: u64, n in 1usize..5) {
        let (c, t) = (hermitian(n, seed), hermitian(n, seed ^ 4));
        let (uc, ut) = (unitary(n, seed ^ 5), unitary(n, seed ^ 6));
        let params = SuiteParams { orbit: OrbitParams { restarts: 3, ..Default::default() }, ..quick() };
        let before = run_hermitian_bounds(&c, &t, &params).unwrap();
        let after = run_hermitian_bounds(&conjugate(&c, &uc), &conjugate(&t, &ut), &params).unwrap();
        let ((l0, h0), (l1, h1)) = (interval(&before.claimed), interval(&after.claimed));
        prop_assert!((l0 - l1).abs() < 1e-9 && (h0 - h1).abs() < 1e-9);
        prop_assert!(before.pass && after.pass);
    }
}
