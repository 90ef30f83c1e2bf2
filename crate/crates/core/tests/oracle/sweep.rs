//! Brute-force wave-cone membership in two dimensions by sweeping the unit
//! circle, and the catalog test vectors it is compared on.

use std::f64::consts::PI;

use afree::catalog::{self, CatalogEntry, ConeClosedForm};
use afree::linalg;
use afree::PdeOperator;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub const SWEEP: usize = 1_000_000;

/// `r(theta) = (2 pi)^k |sum_alpha xi^alpha A_alpha v| / |v|_inf` for unit `xi`
/// at angle `theta`, with a Lipschitz bound in `theta`.
struct CircleResidual {
    scale: f64,
    n: usize,
    terms: Vec<(Vec<u32>, Vec<f64>)>,
    lip: f64,
}

impl CircleResidual {
    fn new(op: &PdeOperator, v: &[f64]) -> Self {
        let k = op.order().unwrap();
        let scale = (2.0 * PI).powi(k as i32) / linalg::norm_inf(v);
        let terms: Vec<(Vec<u32>, Vec<f64>)> = op
            .terms()
            .filter(|(alpha, _)| alpha.order() == k)
            .map(|(alpha, a)| (alpha.entries().to_vec(), (a * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec()))
            .collect();
        let lip = scale * k as f64 * terms.iter().map(|(_, w)| linalg::norm2(w)).sum::<f64>();
        CircleResidual { scale, n: op.target_dim(), terms, lip }
    }

    fn eval(&self, theta: f64) -> f64 {
        let xi = [theta.cos(), theta.sin()];
        let mut acc = vec![0.0; self.n];
        for (alpha, w) in &self.terms {
            let mono = xi[0].powi(alpha[0] as i32) * xi[1].powi(alpha[1] as i32);
            acc.iter_mut().zip(w).for_each(|(a, x)| *a += mono * x);
        }
        self.scale * linalg::norm2(&acc)
    }
}

/// Brute-force membership: a uniform sweep of `SWEEP` angles, then
/// sub-sweeps of every cell whose Lipschitz lower bound is still at or below
/// `tol`. Returns `(member, smallest sampled residual)`.
pub fn sweep(op: &PdeOperator, v: &[f64], tol: f64) -> (bool, f64) {
    let r = CircleResidual::new(op, v);
    let mut width = 2.0 * PI / SWEEP as f64;
    let mut cells: Vec<f64> = (0..SWEEP).map(|i| i as f64 * width).collect();
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let values: Vec<(f64, f64)> = cells.par_iter().map(|&t| (t, r.eval(t))).collect();
        best = values.iter().map(|p| p.1).fold(best, f64::min);
        if best <= tol {
            return (true, best);
        }
        let slack = r.lip * width / 2.0;
        let open: Vec<f64> = values.iter().filter(|p| p.1 - slack <= tol).map(|p| p.0).collect();
        if open.is_empty() {
            return (false, best);
        }
        assert!(open.len() <= 100_000, "sweep does not resolve");
        let sub = 1000;
        let fine = width / sub as f64;
        cells = open.iter().flat_map(|&t| (0..=sub).map(move |j| t - width / 2.0 + j as f64 * fine)).collect();
        width = fine;
    }
    panic!("sweep did not resolve within 8 levels");
}

fn rvec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn cone_member(cone: &ConeClosedForm, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match cone {
        ConeClosedForm::RankOne { ell, d } | ConeClosedForm::HigherRankOne { ell, d, r: 1 } => {
            let (a, b) = (rvec(rng, *ell), rvec(rng, *d));
            (0..ell * d).map(|i| a[i / d] * b[i % d]).collect()
        }
        ConeClosedForm::RankAtMost { d, .. } => {
            let (a, b) = (rvec(rng, *d), rvec(rng, *d));
            (0..d * d).map(|i| a[i / d] * b[i % d]).collect()
        }
        ConeClosedForm::SymmetricRankOne { d } => catalog::sym_product(&rvec(rng, *d), &rvec(rng, *d)),
        ConeClosedForm::HigherRankOne { ell, d, r } => {
            assert_eq!(*ell, 1);
            catalog::rank_one_sym_tensor(&rvec(rng, 1), &rvec(rng, *d), *r)
        }
        ConeClosedForm::CurrentAnnihilator { d, degrees } => {
            assert!(degrees.iter().all(|&k| k == 1));
            let t = rvec(rng, *d);
            degrees.iter().flat_map(|_| t.iter().map(|x| x * rng.random_range(-1.0..1.0)).collect::<Vec<_>>()).collect()
        }
    }
}

fn identity_like(len: usize) -> Vec<f64> {
    let d = (len as f64).sqrt().round() as usize;
    if d * d == len {
        (0..len).map(|i| if i % (d + 1) == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        // symmetric 2x2: identity in the (11, 12, 22) basis
        vec![1.0, 0.0, 1.0]
    }
}

/// The identity, six closed-form cone members and six uniform random vectors.
pub fn catalog_vectors(entry: &CatalogEntry, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let len = entry.operator.source_dim();
    let mut vectors = vec![identity_like(len)];
    for _ in 0..6 {
        vectors.push(cone_member(&entry.cone, rng));
        vectors.push(rvec(rng, len));
    }
    vectors
}
