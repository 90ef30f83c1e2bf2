//! Direct DFT sums and convolutions, `O(N^(2d))`, for comparing against the
//! FFT-based routines on small grids.

use std::f64::consts::PI;

use afree::multiplier::{MollifierShape, MollifierSpec, PeriodicField};
use afree::ComplexMatrix;
use num_complex::Complex64;

pub fn unflatten(mut cell: usize, d: usize, n: usize) -> Vec<usize> {
    let mut idx = vec![0; d];
    for a in (0..d).rev() {
        idx[a] = cell % n;
        cell /= n;
    }
    idx
}

pub fn signed(k: usize, n: usize) -> i64 {
    if 2 * k >= n {
        k as i64 - n as i64
    } else {
        k as i64
    }
}

/// `sum_j f(j) exp(sign 2 pi i k.j / N)` for every `k`, one channel at a time.
pub fn direct_dft(data: &[Complex64], d: usize, n: usize, sign: f64) -> Vec<Complex64> {
    let cells = n.pow(d as u32);
    (0..cells)
        .map(|k| {
            let kk = unflatten(k, d, n);
            (0..cells)
                .map(|j| {
                    let jj = unflatten(j, d, n);
                    let phase: usize = kk.iter().zip(&jj).map(|(a, b)| a * b).sum::<usize>() % n;
                    data[j] * Complex64::from_polar(1.0, sign * 2.0 * PI * phase as f64 / n as f64)
                })
                .sum()
        })
        .collect()
}

pub fn oracle_apply(f: &PeriodicField, c_out: usize, symbol: impl Fn(&[f64]) -> ComplexMatrix) -> Vec<Complex64> {
    let (d, n, c_in) = (f.dim(), f.cells_per_axis(), f.channels());
    let cells = n.pow(d as u32);
    let hats: Vec<Vec<Complex64>> = (0..c_in).map(|c| direct_dft(f.channel(c), d, n, -1.0)).collect();
    let mut out = Vec::with_capacity(c_out * cells);
    for r in 0..c_out {
        let mut hat = vec![Complex64::new(0.0, 0.0); cells];
        for (k, z) in hat.iter_mut().enumerate() {
            let xi: Vec<f64> = unflatten(k, d, n).iter().map(|&i| signed(i, n) as f64 / f.period()).collect();
            let m = symbol(&xi);
            *z = (0..c_in).map(|c| m[(r, c)] * hats[c][k]).sum();
        }
        let back = direct_dft(&hat, d, n, 1.0);
        out.extend(back.into_iter().map(|z| z / cells as f64));
    }
    out
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `sum_j f(x_j) phi(x_i - x_j) h^d` with the kernel normalized to unit
/// discrete mass.
pub fn direct_mollify(f: &PeriodicField, spec: &MollifierSpec) -> Vec<Complex64> {
    let (d, n) = (f.dim(), f.cells_per_axis());
    let h = f.h();
    let profile = |r: f64| {
        let t = r / spec.epsilon;
        match spec.shape {
            _ if t >= 1.0 => 0.0,
            MollifierShape::Bump => (1.0 - t * t).powi(3),
            MollifierShape::Gaussian => (-8.0 * t * t).exp(),
        }
    };
    let cells = f.cell_count();
    let kernel = |i: usize, j: usize| {
        let (a, b) = (unflatten(i, d, n), unflatten(j, d, n));
        let r2: f64 = a.iter().zip(&b).map(|(x, y)| (signed((x + n - y) % n, n) as f64 * h).powi(2)).sum();
        profile(r2.sqrt())
    };
    let vol = f.cell_volume();
    let total: f64 = (0..cells).map(|j| kernel(0, j)).sum::<f64>() * vol;
    let mut out = Vec::with_capacity(f.channels() * cells);
    for c in 0..f.channels() {
        let ch = f.channel(c);
        for i in 0..cells {
            let v: Complex64 = (0..cells).map(|j| ch[j] * kernel(i, j)).sum();
            out.push(v * vol / total);
        }
    }
    out
}
