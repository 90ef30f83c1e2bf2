use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::spec::MultiplierSpec;
use crate::error::{Error, Result};
use crate::operator::{two_pi_i_pow, ComplexMatrix, MultiIndex, PdeOperator};
use crate::wavecone::{self, SphereSampling};

/// Principal coefficients `A_alpha`, `|alpha| = k`, detached from the operator.
#[derive(Clone)]
struct Principal {
    k: usize,
    m: usize,
    n: usize,
    terms: Vec<(MultiIndex, DMatrix<f64>)>,
}

impl Principal {
    fn new(op: &PdeOperator) -> Result<Self> {
        let k = op.order()?;
        let terms = op.terms().filter(|(a, _)| a.order() == k).map(|(a, m)| (a.clone(), m.clone())).collect();
        Ok(Principal { k, m: op.source_dim(), n: op.target_dim(), terms })
    }

    /// `A^k(xi)`.
    fn symbol(&self, xi: &[f64]) -> ComplexMatrix {
        let mut real = DMatrix::<f64>::zeros(self.n, self.m);
        for (alpha, a) in &self.terms {
            real += a * alpha.monomial(xi);
        }
        real.map(|x| two_pi_i_pow(self.k) * x)
    }
}

fn weight(xi: &[f64]) -> f64 {
    1.0 + 4.0 * PI * PI * xi.iter().map(|x| x * x).sum::<f64>()
}

/// The symbols of the regularizing decomposition
/// `chi u = T0[chi V] + T1[chi u] + T2[R]` for the scalar density `u`, the
/// `m`-vector defect `V` and the `n`-vector remainder `R`, where
/// `a(xi) = A^k(xi) P0` and `D(xi) = 1 + |a(xi)|^2`:
///
/// * `T0 = a^* A^k(xi) / D` (`m -> 1`),
/// * `T1 = 1 / D` (`1 -> 1`), `m1 = (1 + 4 pi^2 |xi|^2)^k / D`,
/// * `T2 = a^* / D` (`n -> 1`), `m2 = (1 + 4 pi^2 |xi|^2)^(k/2) a^* / D`,
/// * `Q = (1 + 4 pi^2 |xi|^2)^(k/2) a^* / D` (`n -> 1`).
#[derive(Clone, Debug)]
pub struct Regularizer {
    pub t0: MultiplierSpec,
    pub t1: MultiplierSpec,
    pub t2: MultiplierSpec,
    pub m1: MultiplierSpec,
    pub m2: MultiplierSpec,
    pub q: MultiplierSpec,
    pub order: usize,
    pub p0: Vec<f64>,
    /// `P0` passed the wave-cone test, so `D` does not grow like `|xi|^(2k)`
    /// in every direction and the Mihlin bounds fail.
    pub cone_degenerate: bool,
    /// Smallest sampled `|A^k(xi) P0| / |P0|_inf` over unit `xi`.
    pub cone_residual: f64,
}

impl Regularizer {
    /// `P_alpha` with constant coefficient `b_alpha = 1`:
    /// `(2 pi i)^|alpha| xi^alpha (1 + 4 pi^2 |xi|^2)^((k - |alpha|)/2)` on `c` channels.
    pub fn p_alpha(&self, alpha: &MultiIndex, c: usize) -> MultiplierSpec {
        let k = self.order as f64;
        let alpha = alpha.clone();
        let d = alpha.dim();
        MultiplierSpec::diagonal(format!("P[{alpha}]"), c, move |xi| {
            let a = alpha.order() as f64;
            two_pi_i_pow(alpha.order()) * alpha.monomial(xi) * weight(xi).powf(0.5 * (k - a))
        })
        .for_dim(d)
    }
}

/// `A^k(xi)` as an `m -> n` multiplier.
pub fn principal_multiplier(op: &PdeOperator) -> Result<MultiplierSpec> {
    let p = Principal::new(op)?;
    let (m, n) = (p.m, p.n);
    Ok(MultiplierSpec::new(format!("A^k[{}]", op.label()), m, n, move |xi| p.symbol(xi)).for_dim(op.dim()))
}

/// Orthogonal projection onto `Ker A^k(xi)` (the identity at `xi = 0`).
/// Fields filtered by it are exactly `A^k`-free on the grid.
pub fn afree_projection(op: &PdeOperator, rel_tol: f64) -> Result<MultiplierSpec> {
    op.order()?;
    let (label, d) = (format!("ker[{}]", op.label()), op.dim());
    let op = op.clone();
    let m = op.source_dim();
    Ok(MultiplierSpec::new(label, m, m, move |xi| {
        if xi.iter().all(|x| *x == 0.0) {
            return DMatrix::identity(m, m);
        }
        let basis = wavecone::kernel_basis(&op, xi, rel_tol).expect("frequency has the operator's dimension");
        let mut p = DMatrix::<Complex64>::zeros(m, m);
        for v in basis {
            for i in 0..m {
                for j in 0..m {
                    p[(i, j)] += Complex64::new(v[i] * v[j], 0.0);
                }
            }
        }
        p
    })
    .for_dim(d))
}

/// Builds the decomposition multipliers. A `P0` inside the wave cone is not
/// an error here; it is flagged through `cone_degenerate`.
pub fn build_regularizer(op: &PdeOperator, p0: &[f64]) -> Result<Regularizer> {
    let verdict = wavecone::in_wave_cone(op, p0, wavecone::DEFAULT_TOL, &SphereSampling::default())?;
    let p = Principal::new(op)?;
    let d = op.dim();
    let k = p.k;
    let (m, n) = (p.m, p.n);
    let p0v = nalgebra::DVector::from_iterator(m, p0.iter().map(|x| Complex64::new(*x, 0.0)));
    // a(xi)^* / D(xi) as a 1 x n row, together with A^k(xi)
    let parts = {
        let p = p.clone();
        move |xi: &[f64]| {
            let s = p.symbol(xi);
            let a = &s * &p0v;
            let denom = 1.0 + a.norm_squared();
            let row: ComplexMatrix = DMatrix::from_iterator(1, a.len(), a.iter().map(|z| z.conj() / denom));
            (row, s, denom)
        }
    };
    let label = op.label().to_string();
    let t0 = {
        let parts = parts.clone();
        MultiplierSpec::new(format!("T0[{label}]"), m, 1, move |xi| {
            let (row, s, _) = parts(xi);
            row * s
        })
    };
    let t1 = {
        let parts = parts.clone();
        MultiplierSpec::new(format!("T1[{label}]"), 1, 1, move |xi| {
            DMatrix::from_element(1, 1, Complex64::new(1.0 / parts(xi).2, 0.0))
        })
    };
    let m1 = {
        let parts = parts.clone();
        MultiplierSpec::new(format!("m1[{label}]"), 1, 1, move |xi| {
            DMatrix::from_element(1, 1, Complex64::new(weight(xi).powi(k as i32) / parts(xi).2, 0.0))
        })
    };
    let t2 = {
        let parts = parts.clone();
        MultiplierSpec::new(format!("T2[{label}]"), n, 1, move |xi| parts(xi).0)
    };
    let m2 = {
        let parts = parts.clone();
        MultiplierSpec::new(format!("m2[{label}]"), n, 1, move |xi| parts(xi).0 * Complex64::new(weight(xi).powf(0.5 * k as f64), 0.0))
    };
    let q = MultiplierSpec::new(format!("Q[{label}]"), n, 1, move |xi| {
        parts(xi).0 * Complex64::new(weight(xi).powf(0.5 * k as f64), 0.0)
    });
    Ok(Regularizer {
        t0: t0.for_dim(d),
        t1: t1.for_dim(d),
        t2: t2.for_dim(d),
        m1: m1.for_dim(d),
        m2: m2.for_dim(d),
        q: q.for_dim(d),
        order: k,
        p0: p0.to_vec(),
        cone_degenerate: verdict.member,
        cone_residual: verdict.residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MihlinParams {
    /// Shells `|xi| = 2^j` for `j` in this inclusive range.
    pub shells: (i32, i32),
    pub directions: usize,
    /// Finite-difference step relative to `|xi|`.
    pub rel_step: f64,
}

impl Default for MihlinParams {
    fn default() -> Self {
        MihlinParams { shells: (-3, 8), directions: 64, rel_step: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MihlinReport {
    /// Largest sampled `|xi|^|beta| |d^beta m(xi)|` (Frobenius norm).
    pub constant: f64,
    /// `(shell radius, sup over that shell)`.
    pub per_shell: Vec<(f64, f64)>,
    pub worst_xi: Vec<f64>,
    pub worst_beta: Vec<u32>,
    pub max_order: usize,
    /// The largest shell value is at most twice the smallest over the upper
    /// half of the shells, i.e. no growth was observed at high frequency.
    pub bounded: bool,
}

fn central_stencil(order: u32) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        _ => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    }
}

/// Samples the Mihlin quantities `|xi|^|beta| |d^beta m(xi)|` for
/// `|beta| <= floor(d/2) + 1` (capped at 3) on dyadic shells, with
/// derivatives from tensor-product central differences.
pub fn mihlin_constant(m: &MultiplierSpec, d: usize, params: &MihlinParams) -> Result<MihlinReport> {
    if d == 0 || m.dim().is_some_and(|md| md != d) {
        return Err(Error::dim(format!("multiplier {} cannot be sampled in dimension {d}", m.label())));
    }
    let max_order = (d / 2 + 1).min(3);
    let mut betas: Vec<Vec<u32>> = Vec::new();
    let mut beta = vec![0u32; d];
    'outer: loop {
        let s: u32 = beta.iter().sum();
        if s as usize <= max_order {
            betas.push(beta.clone());
        }
        let mut a = d;
        loop {
            if a == 0 {
                break 'outer;
            }
            a -= 1;
            if (beta[a] as usize) < max_order {
                beta[a] += 1;
                break;
            }
            beta[a] = 0;
        }
    }
    let dirs = SphereSampling::with_count(params.directions).points(d);
    let mut report = MihlinReport { constant: 0.0, per_shell: Vec::new(), worst_xi: vec![0.0; d], worst_beta: vec![0; d], max_order, bounded: true };
    for j in params.shells.0..=params.shells.1 {
        let radius = 2f64.powi(j);
        let delta = params.rel_step * radius;
        let mut shell_sup: f64 = 0.0;
        for dir in &dirs {
            let xi: Vec<f64> = dir.iter().map(|x| x * radius).collect();
            for beta in &betas {
                // tensor product of the per-axis stencils
                let mut acc: Option<ComplexMatrix> = None;
                let mut offsets = vec![0usize; d];
                'stencil: loop {
                    let mut point = xi.clone();
                    let mut coef = 1.0;
                    for a in 0..d {
                        let (o, c) = central_stencil(beta[a])[offsets[a]];
                        point[a] += o as f64 * delta;
                        coef *= c / delta.powi(beta[a] as i32);
                    }
                    let v = m.eval(&point) * Complex64::new(coef, 0.0);
                    acc = Some(match acc {
                        Some(x) => x + v,
                        None => v,
                    });
                    let mut a = d;
                    loop {
                        if a == 0 {
                            break 'stencil;
                        }
                        a -= 1;
                        if offsets[a] + 1 < central_stencil(beta[a]).len() {
                            offsets[a] += 1;
                            break;
                        }
                        offsets[a] = 0;
                    }
                }
                let order: u32 = beta.iter().sum();
                let value = radius.powi(order as i32) * acc.expect("non-empty stencil").norm();
                shell_sup = shell_sup.max(value);
                if value > report.constant {
                    report.constant = value;
                    report.worst_xi = xi.clone();
                    report.worst_beta = beta.clone();
                }
            }
        }
        report.per_shell.push((radius, shell_sup));
    }
    let upper = &report.per_shell[report.per_shell.len() / 2..];
    let lo = upper.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    let hi = upper.iter().map(|s| s.1).fold(0.0, f64::max);
    report.bounded = report.constant.is_finite() && hi <= 2.0 * lo.max(f64::MIN_POSITIVE);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;

    fn eye(d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d * d];
        for i in 0..d {
            v[i * d + i] = 1.0;
        }
        v
    }

    #[test]
    fn denominators_and_scaling() {
        let op = catalog::curl_annihilator(2, 2).unwrap().operator;
        let p0 = eye(2);
        let r1 = build_regularizer(&op, &p0).unwrap();
        let r2 = build_regularizer(&op, &p0.iter().map(|x| 2.0 * x).collect::<Vec<_>>()).unwrap();
        assert!(!r1.cone_degenerate);
        for xi in [[0.0, 0.0], [0.3, -0.1], [5.0, 2.0], [-40.0, 17.0]] {
            let t1 = r1.t1.eval(&xi)[(0, 0)];
            let t1b = r2.t1.eval(&xi)[(0, 0)];
            assert!(t1.re > 0.0 && t1.re <= 1.0 && t1.im == 0.0);
            assert!(t1b.re <= t1.re);
            // m1 = (1 + 4 pi^2 |xi|^2) T1 for first-order operators
            let m1 = r1.m1.eval(&xi)[(0, 0)];
            assert!((m1 - t1 * weight(&xi)).norm() < 1e-12 * m1.norm());
        }
        // T1 + T2 A^k P0 = 1 at every frequency
        let a = principal_multiplier(&op).unwrap();
        for xi in [[0.7, 0.2], [-3.0, 1.0]] {
            let ap0 = a.eval(&xi) * nalgebra::DVector::from_iterator(4, p0.iter().map(|x| Complex64::new(*x, 0.0)));
            let total = r1.t1.eval(&xi)[(0, 0)] + (r1.t2.eval(&xi) * ap0)[(0, 0)];
            assert!((total - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn cone_members_are_flagged() {
        let op = catalog::curl_annihilator(2, 2).unwrap().operator;
        let r = build_regularizer(&op, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(r.cone_degenerate);
        assert!(r.cone_residual <= 1e-6);
    }

    #[test]
    fn q_and_p_alpha_compose_to_t2_times_derivative() {
        let op = catalog::saint_venant(2).unwrap().operator;
        let r = build_regularizer(&op, &[1.0, 0.0, 1.0]).unwrap();
        assert!(!r.cone_degenerate);
        let alpha = MultiIndex::unit(2, 1);
        let n = op.target_dim();
        let lhs = r
            .q
            .after(&super::super::bessel_multiplier(n, 2.0).unwrap())
            .unwrap()
            .after(&r.p_alpha(&alpha, n))
            .unwrap()
            .after(&super::super::bessel_multiplier(n, 1.0).unwrap())
            .unwrap();
        for xi in [[0.2, 0.9], [4.0, -1.5]] {
            let expected = r.t2.eval(&xi) * (two_pi_i_pow(1) * xi[1]);
            assert!((lhs.eval(&xi) - &expected).norm() < 1e-12 * expected.norm().max(1e-300));
        }
    }

    #[test]
    fn projection_is_an_orthogonal_projector_onto_the_kernel() {
        let op = catalog::divergence_operator(2).unwrap().operator;
        let p = afree_projection(&op, 1e-8).unwrap();
        let a = principal_multiplier(&op).unwrap();
        assert_eq!(p.eval(&[0.0, 0.0]), DMatrix::identity(4, 4));
        for xi in [[0.5, 0.25], [-1.0, 3.0]] {
            let pm = p.eval(&xi);
            assert!((&pm * &pm - &pm).norm() < 1e-12);
            assert!((pm.adjoint() - &pm).norm() < 1e-12);
            assert!((a.eval(&xi) * &pm).norm() < 1e-10);
            assert!((pm.trace().re - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mihlin_constant_is_finite_off_the_cone() {
        let op = catalog::curl_annihilator(2, 2).unwrap().operator;
        let r = build_regularizer(&op, &eye(2)).unwrap();
        let report = mihlin_constant(&r.t0, 2, &MihlinParams::default()).unwrap();
        assert_eq!(report.max_order, 2);
        assert!(report.constant.is_finite() && report.constant < 50.0, "{}", report.constant);
        assert!(report.bounded, "{:?}", report.per_shell);
        // on the cone the high-frequency shells keep growing
        let bad = build_regularizer(&op, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let report = mihlin_constant(&bad.t0, 2, &MihlinParams::default()).unwrap();
        assert!(!report.bounded, "{:?}", report.per_shell);
        assert!(mihlin_constant(&r.t0, 3, &MihlinParams::default()).is_err());
    }
}
