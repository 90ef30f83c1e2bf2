//! Weak-form residual of `A mu = 0` against smooth bumps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GridMeasure;
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::PdeOperator;

/// Random test functions `phi(x) = prod_a b((x_a - c_a) / w_a)` with
/// `b(t) = (1 - t^2)^{k+2}` on `|t| < 1`, fully inside the box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    pub count: usize,
    pub seed: u64,
    /// Support half-widths as fractions of the box side.
    pub min_width: f64,
    pub max_width: f64,
}

impl Default for TestFunctionSpec {
    fn default() -> Self {
        TestFunctionSpec { count: 64, seed: 0, min_width: 0.15, max_width: 0.35 }
    }
}

/// Coefficients (ascending powers) of `(1 - t^2)^p`.
fn bump_poly(p: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * p + 1];
    for i in 0..=p {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        out[2 * i] = sign * linalg::binomial(p, i) as f64;
    }
    out
}

fn differentiate(poly: &[f64]) -> Vec<f64> {
    poly.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect()
}

fn eval(poly: &[f64], t: f64) -> f64 {
    poly.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

/// `max_{test functions} |<A mu, phi>| / |phi|_{C^k}` where
/// `<A mu, phi> = sum_cells sum_alpha (-1)^|alpha| d^alpha phi(center) A_alpha mu(cell)`
/// (Euclidean norm over the target components) and `|phi|_{C^k}` is the
/// largest sup norm of a derivative of order at most `k`.
pub fn afree_residual(op: &PdeOperator, mu: &GridMeasure, spec: &TestFunctionSpec) -> Result<f64> {
    if op.dim() != mu.dim() || op.source_dim() != mu.channels() {
        return Err(Error::dim(format!(
            "operator acts on R^{} in dimension {}, measure has {} channels in dimension {}",
            op.source_dim(),
            op.dim(),
            mu.channels(),
            mu.dim()
        )));
    }
    if !(0.0 < spec.min_width && spec.min_width <= spec.max_width && spec.max_width < 0.5) {
        return Err(Error::dim("test function widths must satisfy 0 < min <= max < 0.5"));
    }
    let k = op.order()?;
    let d = mu.dim();
    let m = mu.channels();
    let n = mu.cells_per_axis();
    // derivatives of the profile and their sup norms on [-1, 1]
    let mut polys = vec![bump_poly(k + 2)];
    for j in 0..k {
        polys.push(differentiate(&polys[j]));
    }
    let sups: Vec<f64> = polys
        .iter()
        .map(|p| (0..=4000).map(|i| eval(p, -1.0 + i as f64 / 2000.0).abs()).fold(0.0, f64::max))
        .collect();
    let terms: Vec<_> = op.terms().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..spec.count {
        let mut center = vec![0.0; d];
        let mut width = vec![0.0; d];
        for a in 0..d {
            let side = mu.upper()[a] - mu.lower()[a];
            width[a] = side * rng.random_range(spec.min_width..=spec.max_width);
            center[a] = rng.random_range(mu.lower()[a] + width[a]..=mu.upper()[a] - width[a]);
        }
        // per axis: support index range and scaled derivatives at cell centers
        let mut ranges = Vec::with_capacity(d);
        let mut table: Vec<Vec<Vec<f64>>> = Vec::with_capacity(d);
        for a in 0..d {
            let h = mu.cell_size(a);
            let lo = (((center[a] - width[a] - mu.lower()[a]) / h - 0.5).floor().max(0.0)) as usize;
            let hi = ((((center[a] + width[a] - mu.lower()[a]) / h - 0.5).ceil()) as usize).min(n - 1);
            ranges.push((lo, hi));
            table.push(
                (0..=k)
                    .map(|j| {
                        (lo..=hi)
                            .map(|i| {
                                let x = mu.lower()[a] + (i as f64 + 0.5) * h;
                                let t = (x - center[a]) / width[a];
                                if t.abs() >= 1.0 { 0.0 } else { eval(&polys[j], t) / width[a].powi(j as i32) }
                            })
                            .collect()
                    })
                    .collect(),
            );
        }
        let mut sums = vec![vec![0.0; m]; terms.len()];
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        'cells: loop {
            let v = mu.cell_value(mu.cell_index(&idx));
            if v.iter().any(|x| *x != 0.0) {
                for (t, (alpha, _)) in terms.iter().enumerate() {
                    let mut c = if alpha.order() % 2 == 0 { 1.0 } else { -1.0 };
                    for a in 0..d {
                        c *= table[a][alpha.entries()[a] as usize][idx[a] - ranges[a].0];
                    }
                    if c != 0.0 {
                        sums[t].iter_mut().zip(v).for_each(|(s, x)| *s += c * x);
                    }
                }
            }
            let mut a = d;
            loop {
                if a == 0 {
                    break 'cells;
                }
                a -= 1;
                if idx[a] < ranges[a].1 {
                    idx[a] += 1;
                    break;
                }
                idx[a] = ranges[a].0;
            }
        }
        let mut pairing = vec![0.0; op.target_dim()];
        for ((_, a), s) in terms.iter().zip(&sums) {
            for (r, slot) in pairing.iter_mut().enumerate() {
                *slot += (0..m).map(|c| a[(r, c)] * s[c]).sum::<f64>();
            }
        }
        // C^k norm: the largest product of per-axis sups over |beta| <= k
        let mut ck: f64 = 0.0;
        let mut beta = vec![0usize; d];
        'betas: loop {
            if beta.iter().sum::<usize>() <= k {
                let p: f64 = (0..d).map(|a| sups[beta[a]] / width[a].powi(beta[a] as i32)).product();
                ck = ck.max(p);
            }
            let mut a = d;
            loop {
                if a == 0 {
                    break 'betas;
                }
                a -= 1;
                if beta[a] < k {
                    beta[a] += 1;
                    break;
                }
                beta[a] = 0;
            }
        }
        worst = worst.max(linalg::norm2(&pairing) / ck);
    }
    Ok(worst)
}
