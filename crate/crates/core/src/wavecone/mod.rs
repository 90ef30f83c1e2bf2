//! Kernels of the principal symbol, wave-cone membership and the
//! constant-rank check.
//!
//! Membership of `v` is decided by minimizing
//! `r(xi) = |A^k(xi) v| / |v|_inf` over unit frequencies: a sweep over a
//! deterministic sample set, then a derivative-free pattern search on the
//! sphere around the best sample and a few Gauss-Newton steps. A positive answer comes with a witness
//! frequency; a negative one only with the smallest residual found, which is
//! a sampled estimate and not a rigorous lower bound.

mod sampling;

use std::cmp::Ordering;
use std::io::Write;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, norm2, norm_inf};
use crate::operator::PdeOperator;

pub use sampling::SphereSampling;

pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Outcome of a membership query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConeVerdict {
    pub member: bool,
    /// Unit frequency with `|A^k(xi) v| <= tol |v|`; present iff `member`.
    pub witness_xi: Option<Vec<f64>>,
    /// Smallest normalized residual found.
    pub residual: f64,
    /// Frequency attaining `residual` (whether or not it certifies membership).
    pub argmin_xi: Vec<f64>,
    pub samples_used: usize,
    pub refined: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankProfile {
    pub min_rank: usize,
    pub max_rank: usize,
    /// `(xi at min_rank, xi at max_rank)` when the ranks differ.
    pub violation_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub samples: usize,
    /// Absolute singular-value cutoff used for every sample.
    pub cutoff: f64,
}

impl RankProfile {
    pub fn is_constant(&self) -> bool {
        self.min_rank == self.max_rank
    }
}

/// Orthonormal basis (over the reals) of `Ker A^k(xi)`. Singular values of
/// `[Re A^k; Im A^k]` at or below `rel_tol * sigma_max` count as zero.
pub fn kernel_basis(op: &PdeOperator, xi: &[f64], rel_tol: f64) -> Result<Vec<Vec<f64>>> {
    if xi.len() == op.dim() && norm2(xi) == 0.0 {
        return Err(Error::DegenerateFrequency);
    }
    let symbol = linalg::realify(&op.principal_symbol(xi)?);
    let (values, v) = linalg::right_svd(&symbol);
    let smax = values.first().copied().unwrap_or(0.0);
    let cutoff = rel_tol * smax;
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cutoff)
        .map(|(i, _)| v.column(i).iter().copied().collect())
        .collect())
}

/// Evaluates `r(xi) = (2 pi)^k |sum_{|alpha|=k} xi^alpha A_alpha v| / |v|_inf`
/// from the precomputed vectors `A_alpha v`.
pub(crate) struct Residual {
    parts: Vec<(crate::operator::MultiIndex, Vec<f64>)>,
    scale: f64,
    n: usize,
}

impl Residual {
    pub(crate) fn new(op: &PdeOperator, v: &[f64]) -> Result<Self> {
        if v.len() != op.source_dim() {
            return Err(Error::dim(format!(
                "vector has length {}, operator source dimension is {}",
                v.len(),
                op.source_dim()
            )));
        }
        let vnorm = norm_inf(v);
        if vnorm == 0.0 {
            return Err(Error::DegenerateVector);
        }
        let k = op.order()?;
        let unit: Vec<f64> = v.iter().map(|x| x / vnorm).collect();
        let parts = op
            .terms()
            .filter(|(alpha, _)| alpha.order() == k)
            .map(|(alpha, a)| {
                let w: Vec<f64> = (0..a.nrows())
                    .map(|r| (0..a.ncols()).map(|c| a[(r, c)] * unit[c]).sum())
                    .collect();
                (alpha.clone(), w)
            })
            .collect();
        Ok(Residual {
            parts,
            scale: (2.0 * std::f64::consts::PI).powi(k as i32),
            n: op.target_dim(),
        })
    }

    pub(crate) fn eval(&self, xi: &[f64]) -> f64 {
        let mut acc = vec![0.0; self.n];
        for (alpha, w) in &self.parts {
            let c = alpha.monomial(xi);
            if c != 0.0 {
                for (a, x) in acc.iter_mut().zip(w) {
                    *a += c * x;
                }
            }
        }
        self.scale * norm2(&acc)
    }

    /// Unscaled `sum xi^alpha A_alpha v` and its Jacobian in `xi`.
    fn value_and_jacobian(&self, xi: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let d = xi.len();
        let mut value = vec![0.0; self.n];
        let mut jac = DMatrix::zeros(self.n, d);
        for (alpha, w) in &self.parts {
            let c = alpha.monomial(xi);
            value.iter_mut().zip(w).for_each(|(a, x)| *a += c * x);
            let e = alpha.entries();
            for i in 0..d {
                if e[i] == 0 {
                    continue;
                }
                let di: f64 = (0..d)
                    .map(|j| if j == i { e[j] as f64 * xi[j].powi(e[j] as i32 - 1) } else { xi[j].powi(e[j] as i32) })
                    .product();
                for (r, x) in w.iter().enumerate() {
                    jac[(r, i)] += di * x;
                }
            }
        }
        (value, jac)
    }
}

fn cmp_candidates(a: &(f64, &[f64]), b: &(f64, &[f64])) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| {
        for (x, y) in a.1.iter().zip(b.1) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    })
}

/// `xi` and `-xi` have the same kernel; pick the one whose first nonzero
/// component is positive.
fn canonical_sign(xi: &mut [f64]) {
    if let Some(first) = xi.iter().find(|x| **x != 0.0) {
        if *first < 0.0 {
            xi.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    v.iter_mut().for_each(|x| *x /= n);
}

/// `d - 1` orthonormal vectors orthogonal to the unit vector `xi`.
fn random_tangent_frame(xi: &[f64], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let d = xi.len();
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    while frame.len() < d - 1 {
        let mut g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for b in std::iter::once(xi).chain(frame.iter().map(|f| f.as_slice())) {
            let p = linalg::dot(&g, b);
            g.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = norm2(&g);
        if n > 1e-8 {
            g.iter_mut().for_each(|x| *x /= n);
            frame.push(g);
        }
    }
    frame
}

fn sampled_minimum(residual: &Residual, points: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let values: Vec<f64> = points.par_iter().map(|p| residual.eval(p)).collect();
    let (i, _) = values
        .iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| {
            cmp_candidates(&(**a, points[*i].as_slice()), &(**b, points[*j].as_slice()))
        })
        .expect("non-empty sample set");
    (values[i], points[i].clone())
}

/// Pattern search on the sphere: at each level poll `+-step` along a fresh
/// random tangent frame, move while a poll improves, then shrink the step.
fn refine(residual: &Residual, start: Vec<f64>, f0: f64, sampling: &SphereSampling) -> (f64, Vec<f64>) {
    let d = start.len();
    if d < 2 || sampling.refine_steps == 0 {
        return (f0, start);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampling.seed ^ 0x9e37_79b9_7f4a_7c15);
    let (mut best, mut fbest) = (start, f0);
    let mut step = sampling.initial_step(d);
    let max_moves = 2 * d;
    for _ in 0..sampling.refine_steps {
        if fbest == 0.0 {
            break;
        }
        let frame = random_tangent_frame(&best, &mut rng);
        for _ in 0..max_moves {
            let mut improved: Option<(f64, Vec<f64>)> = None;
            for t in &frame {
                for sign in [1.0, -1.0] {
                    let mut cand: Vec<f64> = best.iter().zip(t).map(|(x, y)| x + sign * step * y).collect();
                    normalize(&mut cand);
                    let f = residual.eval(&cand);
                    let current = improved.as_ref().map_or(fbest, |(g, _)| *g);
                    if f < current {
                        improved = Some((f, cand));
                    }
                }
            }
            match improved {
                Some((f, cand)) => {
                    fbest = f;
                    best = cand;
                }
                None => break,
            }
        }
        step *= sampling.refine_shrink;
    }
    polish(residual, best, fbest)
}

/// Gauss-Newton steps in the tangent space, kept only while they lower the
/// residual. Pattern search stalls in narrow valleys (nearly degenerate `v`);
/// near an exact zero this converges quadratically.
fn polish(residual: &Residual, mut best: Vec<f64>, mut fbest: f64) -> (f64, Vec<f64>) {
    let d = best.len();
    for _ in 0..30 {
        if fbest == 0.0 {
            break;
        }
        let (value, jac) = residual.value_and_jacobian(&best);
        let xi = nalgebra::DVector::from_column_slice(&best);
        let proj = DMatrix::identity(d, d) - &xi * xi.transpose();
        let jt = jac * proj;
        let rhs = -nalgebra::DVector::from_vec(value);
        let Ok(step) = jt.svd(true, true).solve(&rhs, 1e-12) else { break };
        let mut cand: Vec<f64> = best.iter().zip(step.iter()).map(|(x, s)| x + s).collect();
        normalize(&mut cand);
        let f = residual.eval(&cand);
        if !(f < fbest) {
            break;
        }
        fbest = f;
        best = cand;
    }
    (fbest, best)
}

/// Decides whether `v` lies in the wave cone of `op` up to `tol`.
pub fn in_wave_cone(op: &PdeOperator, v: &[f64], tol: f64, sampling: &SphereSampling) -> Result<ConeVerdict> {
    let residual = Residual::new(op, v)?;
    let points = sampling.points(op.dim());
    let (f0, xi0) = sampled_minimum(&residual, &points);
    let refined = sampling.refine_steps > 0 && op.dim() >= 2;
    let (f, mut xi) = refine(&residual, xi0, f0, sampling);
    canonical_sign(&mut xi);
    let member = f <= tol;
    Ok(ConeVerdict {
        member,
        witness_xi: member.then(|| xi.clone()),
        residual: f,
        argmin_xi: xi,
        samples_used: points.len(),
        refined,
    })
}

/// Sampled residual landscape `(xi, r(xi))`, ascending in residual with ties
/// broken by the lexicographic order of `xi`.
pub fn cone_distance_profile(op: &PdeOperator, v: &[f64], sampling: &SphereSampling) -> Result<Vec<(Vec<f64>, f64)>> {
    let residual = Residual::new(op, v)?;
    let points = sampling.points(op.dim());
    let mut rows: Vec<(Vec<f64>, f64)> = points
        .into_par_iter()
        .map(|p| {
            let r = residual.eval(&p);
            (p, r)
        })
        .collect();
    rows.sort_by(|a, b| cmp_candidates(&(a.1, &a.0), &(b.1, &b.0)));
    Ok(rows)
}

pub fn write_landscape_csv<W: Write>(rows: &[(Vec<f64>, f64)], mut out: W) -> std::io::Result<()> {
    let d = rows.first().map_or(0, |r| r.0.len());
    let header: Vec<String> = (1..=d).map(|i| format!("xi_{i}")).chain(["residual".to_string()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for (xi, r) in rows {
        let fields: Vec<String> = xi.iter().chain(std::iter::once(r)).map(|x| format!("{x:e}")).collect();
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Numerical rank of `A^k(xi)` over the sample set. The cutoff is
/// `rel_tol` times the largest singular value seen over all samples, so a
/// symbol that degenerates at some frequency registers as a rank drop.
pub fn constant_rank_check(op: &PdeOperator, sampling: &SphereSampling, rel_tol: f64) -> Result<RankProfile> {
    if op.order()? == 0 {
        return Err(Error::dim("constant-rank check needs an operator of order at least 1"));
    }
    let points = sampling.points(op.dim());
    let spectra: Vec<Vec<f64>> = points
        .par_iter()
        .map(|p| -> Result<Vec<f64>> {
            let s: DMatrix<f64> = linalg::realify(&op.principal_symbol(p)?);
            Ok(linalg::singular_values(&s))
        })
        .collect::<Result<_>>()?;
    let global = spectra.iter().filter_map(|s| s.first().copied()).fold(0.0, f64::max);
    let cutoff = rel_tol * global;
    let ranks: Vec<usize> = spectra.iter().map(|s| s.iter().filter(|&&x| x > cutoff).count()).collect();
    let (imin, &min_rank) = ranks.iter().enumerate().min_by_key(|(_, r)| **r).expect("non-empty");
    let (imax, &max_rank) = ranks.iter().enumerate().max_by_key(|(_, r)| **r).expect("non-empty");
    Ok(RankProfile {
        min_rank,
        max_rank,
        violation_pair: (min_rank < max_rank).then(|| (points[imin].clone(), points[imax].clone())),
        samples: points.len(),
        cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::operator::MultiIndex;
    use rand::Rng;
    use std::f64::consts::PI;

    fn dx1_on_scalars() -> PdeOperator {
        PdeOperator::new("d1", 2, 1, 1)
            .with_term(MultiIndex::unit(2, 0), DMatrix::from_element(1, 1, 1.0))
            .unwrap()
    }

    #[test]
    fn scalar_curl_kernel_is_parallel_to_xi() {
        let op = catalog::curl_annihilator(2, 1).unwrap().operator;
        let ker = kernel_basis(&op, &[0.0, 1.0], 1e-8).unwrap();
        assert_eq!(ker.len(), 1);
        assert!(ker[0][0].abs() < 1e-14 && (ker[0][1].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn saint_venant_kernel_at_e1() {
        let op = catalog::saint_venant(2).unwrap().operator;
        let ker = kernel_basis(&op, &[1.0, 0.0], 1e-8).unwrap();
        assert_eq!(ker.len(), 2);
        // flattened basis (11, 12*sqrt2, 22): kernel = span{(1,0,0), (0,1,0)}
        for v in &ker {
            assert!(v[2].abs() < 1e-12);
        }
    }

    #[test]
    fn identity_symbol_has_trivial_kernel() {
        let op = PdeOperator::new("id", 2, 3, 3)
            .with_term(MultiIndex::zero(2), DMatrix::identity(3, 3))
            .unwrap();
        assert!(kernel_basis(&op, &[0.6, 0.8], 1e-8).unwrap().is_empty());
        let aug = catalog::divergence_operator(2).unwrap().operator.augment_with_rhs().unwrap();
        // the sigma block is free in the principal part
        let ker = kernel_basis(&aug, &[0.6, 0.8], 1e-8).unwrap();
        assert_eq!(ker.len(), 2 + 2);
    }

    #[test]
    fn zero_frequency_is_rejected() {
        let op = dx1_on_scalars();
        assert!(matches!(kernel_basis(&op, &[0.0, 0.0], 1e-8), Err(Error::DegenerateFrequency)));
        assert!(matches!(
            in_wave_cone(&op, &[0.0], 1e-6, &SphereSampling::default()),
            Err(Error::DegenerateVector)
        ));
    }

    #[test]
    fn rank_one_matrix_is_curl_member_with_parallel_witness() {
        let op = catalog::curl_annihilator(3, 3).unwrap().operator;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m: Vec<f64> = (0..9).map(|i| a[i / 3] * b[i % 3]).collect();
            let verdict = in_wave_cone(&op, &m, 1e-6, &SphereSampling::default()).unwrap();
            assert!(verdict.member);
            assert!(verdict.residual <= 1e-8, "{}", verdict.residual);
            let w = verdict.witness_xi.unwrap();
            let cos = linalg::dot(&w, &b).abs() / norm2(&b);
            assert!((cos - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_is_not_in_divergence_cone() {
        let op = catalog::divergence_operator(2).unwrap().operator;
        let verdict = in_wave_cone(&op, &[1.0, 0.0, 0.0, 1.0], 1e-6, &SphereSampling::default()).unwrap();
        assert!(!verdict.member);
        assert!(verdict.witness_xi.is_none());
        assert!((verdict.residual - 2.0 * PI).abs() < 1e-6);
        let profile = cone_distance_profile(&op, &[1.0, 0.0, 0.0, 1.0], &SphereSampling::default()).unwrap();
        assert!(profile.iter().all(|(_, r)| (r - 2.0 * PI).abs() < 1e-9));
    }

    #[test]
    fn kernel_vectors_are_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for entry in [
            catalog::saint_venant(3).unwrap(),
            catalog::divergence_operator(3).unwrap(),
            catalog::higher_gradient_annihilator(2, 2, 2).unwrap(),
        ] {
            let op = &entry.operator;
            let mut xi: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            normalize(&mut xi);
            for v in kernel_basis(op, &xi, 1e-8).unwrap() {
                let verdict = in_wave_cone(op, &v, 1e-6, &SphereSampling::default()).unwrap();
                assert!(verdict.member && verdict.residual <= 1e-9, "{}: {}", op.label(), verdict.residual);
            }
        }
    }

    #[test]
    fn curl_landscape_for_identity_is_bounded_away_from_zero() {
        let op = catalog::curl_annihilator(2, 2).unwrap().operator;
        let rows = cone_distance_profile(&op, &[1.0, 0.0, 0.0, 1.0], &SphereSampling::with_count(512)).unwrap();
        assert!(rows[0].1 > 1.0);
        assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1));
        let mut csv = Vec::new();
        write_landscape_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("xi_1,xi_2,residual\n"));
        assert_eq!(text.lines().count(), 513);
    }

    #[test]
    fn constant_rank_examples() {
        let s = SphereSampling::default();
        let curl = constant_rank_check(&catalog::curl_annihilator(2, 1).unwrap().operator, &s, 1e-8).unwrap();
        assert_eq!((curl.min_rank, curl.max_rank), (1, 1));
        assert!(curl.violation_pair.is_none());
        for d in 2..=3 {
            let div = constant_rank_check(&catalog::divergence_operator(d).unwrap().operator, &s, 1e-8).unwrap();
            assert_eq!((div.min_rank, div.max_rank), (d, d));
        }
        let p = constant_rank_check(&dx1_on_scalars(), &s, 1e-8).unwrap();
        assert_eq!((p.min_rank, p.max_rank), (0, 1));
        let (low, high) = p.violation_pair.unwrap();
        assert!(low[0].abs() < 1e-8 && high[0].abs() > 1e-3);
    }

    #[test]
    fn verdicts_are_reproducible_and_scale_invariant() {
        let op = catalog::saint_venant(3).unwrap().operator;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| 0.5 * (a[i] * b[j] + a[j] * b[i]));
        let v = catalog::sym_flatten(&m);
        let s = SphereSampling::default().with_seed(4);
        let base = in_wave_cone(&op, &v, 1e-6, &s).unwrap();
        assert_eq!(base, in_wave_cone(&op, &v, 1e-6, &s).unwrap());
        for t in [2.0, -1.0, 0.25, -8.0] {
            let scaled: Vec<f64> = v.iter().map(|x| t * x).collect();
            let other = in_wave_cone(&op, &scaled, 1e-6, &s).unwrap();
            assert_eq!(other.member, base.member);
            assert!((other.residual - base.residual).abs() <= 1e-12);
            for (x, y) in other.witness_xi.unwrap().iter().zip(base.witness_xi.as_ref().unwrap()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn witness_is_sound_and_augmentation_preserves_membership() {
        let op = catalog::curl_annihilator(2, 2).unwrap().operator;
        let aug = op.augment_with_rhs().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let v: Vec<f64> = (0..4).map(|i| a[i / 2] * b[i % 2]).collect();
            let verdict = in_wave_cone(&op, &v, 1e-6, &SphereSampling::default()).unwrap();
            assert!(verdict.member);
            let w = verdict.witness_xi.unwrap();
            assert!((norm2(&w) - 1.0).abs() < 1e-12);
            let image = op.principal_symbol(&w).unwrap()
                * nalgebra::DVector::from_iterator(4, v.iter().map(|&x| num_complex::Complex64::new(x, 0.0)));
            assert!(image.norm() <= 1e-6 * norm_inf(&v));
            let mut extended = v.clone();
            extended.extend((0..2).map(|_| rng.random_range(-1.0..1.0)));
            assert!(in_wave_cone(&aug, &extended, 1e-6, &SphereSampling::default()).unwrap().member);
        }
    }
}
