//! Small dense helpers shared by the symbol, cone and exterior-algebra code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// Singular values (descending) and the matching right singular vectors of
/// `a`, with the full set of `a.ncols()` right vectors even when `a` is wide.
pub fn right_svd(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let cols = a.ncols();
    if cols == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    // zero rows do not change the right singular structure
    let rows = a.nrows().max(cols);
    let mut padded = DMatrix::zeros(rows, cols);
    padded.view_mut((0, 0), (a.nrows(), cols)).copy_from(a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut v = DMatrix::zeros(cols, cols);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..cols {
            v[(r, dst)] = v_t[(src, r)];
        }
    }
    (values, v)
}

/// Real matrix `[Re C; Im C]`; its kernel is the set of real vectors killed by `C`.
pub fn realify(c: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (n, m) = c.shape();
    DMatrix::from_fn(2 * n, m, |r, k| if r < n { c[(r, k)].re } else { c[(r - n, k)].im })
}

/// Orthonormal basis of `{x : |a x| <= cutoff}` spanned by right singular vectors.
pub fn null_space(a: &DMatrix<f64>, cutoff: f64) -> Vec<DVector<f64>> {
    let (values, v) = right_svd(a);
    values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cutoff)
        .map(|(i, _)| v.column(i).into_owned())
        .collect()
}

/// Count of singular values strictly above `cutoff`.
pub fn rank_above(a: &DMatrix<f64>, cutoff: f64) -> usize {
    singular_values(a).into_iter().filter(|&s| s > cutoff).count()
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Eigenvalues of a symmetric matrix sorted by decreasing magnitude.
pub fn symmetric_eigenvalues_by_magnitude(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
    ev
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}
