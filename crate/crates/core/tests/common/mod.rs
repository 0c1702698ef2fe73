//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use schatten_core::random::{gaussian_matrix, haar_unitary, random_hermitian, rng_for};
use schatten_core::{Complex64, MatrixOperator};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

pub fn gaussian(rows: usize, cols: usize, seed: u64) -> MatrixOperator {
    gaussian_matrix(rows, cols, &mut rng_for(seed, 7))
}

pub fn hermitian(n: usize, seed: u64) -> MatrixOperator {
    random_hermitian(n, &mut rng_for(seed, 11))
}

pub fn unitary(n: usize, seed: u64) -> MatrixOperator {
    haar_unitary(n, &mut rng_for(seed, 13))
}

/// Singular values as square roots of the eigenvalues of `A†A` (or `AA†`), descending.
pub fn singular_values(a: &DMatrix<Complex64>) -> Vec<f64> {
    let gram = if a.nrows() >= a.ncols() {
        a.adjoint() * a
    } else {
        a * a.adjoint()
    };
    let mut s: Vec<f64> = SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn schatten(a: &DMatrix<Complex64>, p: f64) -> f64 {
    let s = singular_values(a);
    if p.is_infinite() {
        s[0]
    } else {
        s.iter().map(|x| x.powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

pub fn eigenvalues_desc(a: &DMatrix<Complex64>) -> Vec<f64> {
    let mut l: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    l.sort_by(|x, y| y.total_cmp(x));
    l
}

pub fn trace(a: &DMatrix<Complex64>) -> Complex64 {
    (0..a.nrows()).map(|i| a[(i, i)]).sum()
}

pub fn max_entry(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(p.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, p, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            p.swap(j, k - 1);
        }
    }
    let mut out = Vec::new();
    heap(n, &mut (0..n).collect(), &mut out);
    out
}

/// Real pairing sums `Σ a_i b_σ(i)` over every σ, as (max, min).
pub fn brute_pairing_extremes(a: &[f64], b: &[f64]) -> (f64, f64) {
    permutations(a.len())
        .iter()
        .map(|s| a.iter().zip(s).map(|(x, &j)| x * b[j]).sum::<f64>())
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), v| (hi.max(v), lo.min(v)))
}

/// Max and min of `tr(C U† T U)` over partial injections of the two eigenbases,
/// i.e. over all pairings of the eigenvalue lists each padded with `n` zeros.
pub fn brute_hermitian_extremes(c: &MatrixOperator, t: &MatrixOperator) -> (f64, f64) {
    let n = c.rows();
    let mut lc = eigenvalues_desc(c.matrix());
    let mut lt = eigenvalues_desc(t.matrix());
    lc.resize(2 * n, 0.0);
    lt.resize(2 * n, 0.0);
    // σ maps C-slots to T-slots; only the first n entries of each list are nonzero,
    // so it is enough to choose where each nonzero C-eigenvalue goes.
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    let mut used = vec![false; 2 * n];
    fn walk(i: usize, n: usize, acc: f64, lc: &[f64], lt: &[f64], used: &mut [bool], best: &mut (f64, f64)) {
        if i == n {
            best.0 = best.0.max(acc);
            best.1 = best.1.min(acc);
            return;
        }
        for j in 0..=n {
            // slot n stands for any zero slot of T; those are interchangeable
            if j < n && used[j] {
                continue;
            }
            if j < n {
                used[j] = true;
            }
            let gain = if j < n { lc[i] * lt[j] } else { 0.0 };
            walk(i + 1, n, acc + gain, lc, lt, used, best);
            if j < n {
                used[j] = false;
            }
        }
    }
    walk(0, n, 0.0, &lc, &lt, &mut used, &mut best);
    best
}

/// Random complex-diagonal normal matrix wrapped in a Haar change of basis.
pub fn conjugated_diagonal(values: &[Complex64], seed: u64) -> MatrixOperator {
    let u = unitary(values.len(), seed);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values.to_vec()));
    MatrixOperator::from_matrix(u.matrix() * d * u.matrix().adjoint()).unwrap()
}
