//! Operators whose wave cones are known in closed form.
//!
//! Coordinates of the source spaces:
//!
//! * `R^{l x d}` matrices are flattened row-major, `(k, j) -> k*d + j`; a
//!   gradient `Du` has row `k` equal to `D u^k`.
//! * Symmetric matrices and symmetric `r`-tensors use the basis of
//!   non-decreasing index tuples in lexicographic order, each coordinate
//!   scaled by the square root of the number of index permutations it
//!   stands for (`sqrt 2` for off-diagonal matrix entries). This keeps the
//!   Frobenius inner product.
//! * Tuples of k-vectors are concatenated blocks in the lexicographic basis
//!   of [`crate::exterior`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{self, KVector};
use crate::linalg::{self, binomial};
use crate::operator::{MultiIndex, PdeOperator};

/// Closed-form description of a wave cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConeClosedForm {
    /// `{a (x) xi}` in `R^{l x d}`.
    RankOne { ell: usize, d: usize },
    /// `{a (.) xi}` in symmetric `d x d` matrices.
    SymmetricRankOne { d: usize },
    /// `{M in R^{d x d} : rank M <= max_rank}`.
    RankAtMost { d: usize, max_rank: usize },
    /// `{a (x) xi (x) ... (x) xi}` (`r` factors of `xi`) in symmetric r-linear maps.
    HigherRankOne { ell: usize, d: usize, r: usize },
    /// Tuples `(v_1, ..., v_r)` of `k_i`-vectors annihilated by a common 1-covector.
    CurrentAnnihilator { d: usize, degrees: Vec<usize> },
}

impl ConeClosedForm {
    /// Membership predicate; `rel_tol` is the relative cutoff for ranks and
    /// eigenvalue signs.
    pub fn contains(&self, v: &[f64], rel_tol: f64) -> Result<bool> {
        match self {
            ConeClosedForm::RankOne { ell, d } => {
                check_len(v, ell * d)?;
                Ok(matrix_rank(&DMatrix::from_row_slice(*ell, *d, v), rel_tol) <= 1)
            }
            ConeClosedForm::RankAtMost { d, max_rank } => {
                check_len(v, d * d)?;
                Ok(matrix_rank(&DMatrix::from_row_slice(*d, *d, v), rel_tol) <= *max_rank)
            }
            ConeClosedForm::SymmetricRankOne { d } => {
                check_len(v, d * (d + 1) / 2)?;
                let ev = linalg::symmetric_eigenvalues_by_magnitude(&sym_unflatten(v, *d));
                let top = ev[0].abs();
                if top == 0.0 {
                    return Ok(true);
                }
                let rank = ev.iter().filter(|x| x.abs() > rel_tol * top).count();
                let product = ev[0] * ev.get(1).copied().unwrap_or(0.0);
                Ok(rank <= 2 && product <= rel_tol * top * top)
            }
            ConeClosedForm::HigherRankOne { ell, d, r } => {
                let basis = multiset_basis(*d, *r);
                check_len(v, ell * basis.len())?;
                // unfold each component along the last slot: rows (k, i_1..i_{r-1}), cols i_r
                let rows = ell * d.pow((*r - 1) as u32);
                let mut unfolding = DMatrix::zeros(rows, *d);
                for k in 0..*ell {
                    let block = &v[k * basis.len()..(k + 1) * basis.len()];
                    for (row, head) in tuples(*d, *r - 1).into_iter().enumerate() {
                        for j in 0..*d {
                            let mut full = head.clone();
                            full.push(j);
                            unfolding[(k * rows / ell + row, j)] = sym_tensor_entry(block, &basis, &full);
                        }
                    }
                }
                Ok(matrix_rank(&unfolding, rel_tol) <= 1)
            }
            ConeClosedForm::CurrentAnnihilator { d, degrees } => {
                check_len(v, degrees.iter().map(|&k| binomial(*d, k)).sum())?;
                let mut offset = 0;
                let mut family = Vec::new();
                for &k in degrees {
                    let len = binomial(*d, k);
                    let block = KVector::new(*d, k, v[offset..offset + len].to_vec())?;
                    offset += len;
                    if linalg::norm2(block.coeffs()) > 0.0 {
                        family.push(block);
                    }
                }
                if family.is_empty() {
                    return Ok(true);
                }
                Ok(exterior::annihilator_covector(&family, rel_tol)?.is_some())
            }
        }
    }
}

fn check_len(v: &[f64], expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::dim(format!("vector has length {}, expected {expected}", v.len())));
    }
    Ok(())
}

fn matrix_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = linalg::singular_values(a);
    let top = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&x| x > rel_tol * top).count()
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub operator: PdeOperator,
    pub cone: ConeClosedForm,
    pub citation: &'static str,
}

impl CatalogEntry {
    /// File name used when the catalog is written to disk.
    pub fn file_name(&self) -> String {
        format!("{}{}.json", self.name, self.operator.dim())
    }
}

fn require_dim(d: usize, min: usize) -> Result<()> {
    if d < min {
        return Err(Error::dim(format!("dimension {d} is below the minimum {min}")));
    }
    Ok(())
}

/// Non-decreasing index tuples of length `r` over `0..d`, lexicographic.
pub fn multiset_basis(d: usize, r: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, r: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == r {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(d, r, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(d, r, 0, &mut Vec::new(), &mut out);
    out
}

/// All index tuples of length `r` over `0..d`, lexicographic.
fn tuples(d: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..r {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..d).map(move |i| {
                    let mut t = t.clone();
                    t.push(i);
                    t
                })
            })
            .collect();
    }
    out
}

/// Number of distinct orderings of a sorted tuple.
fn permutation_count(sorted: &[usize]) -> f64 {
    let mut count = (1..=sorted.len()).map(|x| x as f64).product::<f64>();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        count /= (1..=(j - i)).map(|x| x as f64).product::<f64>();
        i = j;
    }
    count
}

fn multiset_position(basis: &[Vec<usize>], tuple: &[usize]) -> (usize, f64) {
    let mut sorted = tuple.to_vec();
    sorted.sort_unstable();
    let pos = basis.binary_search(&sorted).expect("tuple indices within range");
    (pos, permutation_count(&sorted).sqrt())
}

/// Entry `T_{i_1..i_r}` of the symmetric tensor with flattened coordinates `block`.
fn sym_tensor_entry(block: &[f64], basis: &[Vec<usize>], full: &[usize]) -> f64 {
    let (pos, w) = multiset_position(basis, full);
    block[pos] / w
}

/// Flattened coordinates of `a (x) xi (x) ... (x) xi` (`r` factors of `xi`).
pub fn rank_one_sym_tensor(a: &[f64], xi: &[f64], r: usize) -> Vec<f64> {
    let basis = multiset_basis(xi.len(), r);
    let mut out = Vec::with_capacity(a.len() * basis.len());
    for &ak in a {
        for s in &basis {
            let w = permutation_count(s).sqrt();
            out.push(w * ak * s.iter().map(|&i| xi[i]).product::<f64>());
        }
    }
    out
}

/// Symmetric matrix to flattened coordinates (`sqrt 2` on off-diagonals).
pub fn sym_flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        for j in i..d {
            let w = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
            out.push(w * 0.5 * (m[(i, j)] + m[(j, i)]));
        }
    }
    out
}

pub fn sym_unflatten(v: &[f64], d: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        for j in i..d {
            let x = if i == j { v[idx] } else { v[idx] / std::f64::consts::SQRT_2 };
            m[(i, j)] = x;
            m[(j, i)] = x;
            idx += 1;
        }
    }
    m
}

/// `a (.) b = (a (x) b + b (x) a) / 2`, flattened.
pub fn sym_product(a: &[f64], b: &[f64]) -> Vec<f64> {
    let d = a.len();
    sym_flatten(&DMatrix::from_fn(d, d, |i, j| 0.5 * (a[i] * b[j] + a[j] * b[i])))
}

/// Annihilator of gradients of `R^l`-valued maps: `d_i mu^k_j - d_j mu^k_i`
/// for every `k` and every pair `i < j`.
pub fn curl_annihilator(d: usize, ell: usize) -> Result<CatalogEntry> {
    require_dim(d, 2)?;
    if ell == 0 {
        return Err(Error::dim("curl annihilator needs at least one component"));
    }
    let n = ell * d * (d - 1) / 2;
    let mut op = PdeOperator::new(format!("curl(d={d},l={ell})"), d, ell * d, n);
    let mut row = 0;
    for k in 0..ell {
        for i in 0..d {
            for j in i + 1..d {
                op.add_entry(MultiIndex::unit(d, i), row, k * d + j, 1.0);
                op.add_entry(MultiIndex::unit(d, j), row, k * d + i, -1.0);
                row += 1;
            }
        }
    }
    Ok(CatalogEntry {
        name: "curl",
        operator: op,
        cone: ConeClosedForm::RankOne { ell, d },
        citation: "gradients of BV maps: singular part has rank-one polar a (x) b (Alberti's rank-one theorem)",
    })
}

/// Annihilator of `r`-th derivatives, acting on symmetric `r`-linear maps.
/// For every component, slot, index tuple filling the other slots and pair
/// `i < j`: `d_i T_{..j..} - d_j T_{..i..}`. The system is redundant (all
/// slots give the same equations); its symbol kernel is `{a (x) xi^r}`.
pub fn higher_gradient_annihilator(d: usize, ell: usize, r: usize) -> Result<CatalogEntry> {
    require_dim(d, 2)?;
    if ell == 0 || r == 0 {
        return Err(Error::dim("higher-gradient annihilator needs l >= 1 and r >= 1"));
    }
    let basis = multiset_basis(d, r);
    let m = ell * basis.len();
    let heads = tuples(d, r - 1);
    let n = ell * r * heads.len() * d * (d - 1) / 2;
    let mut op = PdeOperator::new(format!("higher-gradient(d={d},l={ell},r={r})"), d, m, n);
    let mut row = 0;
    for k in 0..ell {
        for slot in 0..r {
            for head in &heads {
                for i in 0..d {
                    for j in i + 1..d {
                        let mut with_j = head.clone();
                        with_j.insert(slot, j);
                        let mut with_i = head.clone();
                        with_i.insert(slot, i);
                        let (pj, wj) = multiset_position(&basis, &with_j);
                        let (pi, wi) = multiset_position(&basis, &with_i);
                        op.add_entry(MultiIndex::unit(d, i), row, k * basis.len() + pj, 1.0 / wj);
                        op.add_entry(MultiIndex::unit(d, j), row, k * basis.len() + pi, -1.0 / wi);
                        row += 1;
                    }
                }
            }
        }
    }
    Ok(CatalogEntry {
        name: "higher_gradient",
        operator: op,
        cone: ConeClosedForm::HigherRankOne { ell, d, r },
        citation: "r-th derivatives of BV^r maps: singular polar a (x) b (x) ... (x) b",
    })
}

/// Saint-Venant compatibility conditions on symmetric matrices: for `j <= k`,
/// `sum_i d_ik mu_ij + d_ij mu_ik - d_jk mu_ii - d_ii mu_jk`.
pub fn saint_venant(d: usize) -> Result<CatalogEntry> {
    require_dim(d, 2)?;
    let m = d * (d + 1) / 2;
    let basis = multiset_basis(d, 2);
    let coord = |p: usize, q: usize| multiset_position(&basis, &[p, q]);
    let mut op = PdeOperator::new(format!("saint-venant(d={d})"), d, m, m);
    let mut row = 0;
    for j in 0..d {
        for k in j..d {
            for i in 0..d {
                let mut put = |alpha: MultiIndex, p: usize, q: usize, sign: f64| {
                    let (c, w) = coord(p, q);
                    op.add_entry(alpha, row, c, sign / w);
                };
                put(MultiIndex::pair(d, i, k), i, j, 1.0);
                put(MultiIndex::pair(d, i, j), i, k, 1.0);
                put(MultiIndex::pair(d, j, k), i, i, -1.0);
                put(MultiIndex::pair(d, i, i), j, k, -1.0);
            }
            row += 1;
        }
    }
    Ok(CatalogEntry {
        name: "saint_venant",
        operator: op,
        cone: ConeClosedForm::SymmetricRankOne { d },
        citation: "symmetrized gradients of BD maps, Saint-Venant compatibility: singular polar a (.) b",
    })
}

/// Row-wise divergence of `R^{d x d}`-valued measures, `(sum_j d_j mu^k_j)_k`.
pub fn divergence_operator(d: usize) -> Result<CatalogEntry> {
    require_dim(d, 2)?;
    let mut op = PdeOperator::new(format!("divergence(d={d})"), d, d * d, d);
    for k in 0..d {
        for j in 0..d {
            op.add_entry(MultiIndex::unit(d, j), k, k * d + j, 1.0);
        }
    }
    Ok(CatalogEntry {
        name: "divergence",
        operator: op,
        cone: ConeClosedForm::RankAtMost { d, max_rank: d - 1 },
        citation: "divergence-measure matrix fields: singular polar has rank at most d-1",
    })
}

/// `T = (T_1, ..., T_r) -> (dT_1, ..., dT_r)` with `dT = -sum_i d_i T -| dx^i`.
/// Its symbol at `xi` is `-2 pi i (v_1 -| w_xi, ..., v_r -| w_xi)`.
pub fn current_boundary_operator(d: usize, degrees: &[usize]) -> Result<CatalogEntry> {
    require_dim(d, 1)?;
    if degrees.is_empty() {
        return Err(Error::dim("current boundary operator needs at least one degree"));
    }
    if let Some(&bad) = degrees.iter().find(|&&k| k == 0 || k > d) {
        return Err(Error::dim(format!("current degree {bad} outside 1..={d}")));
    }
    let m: usize = degrees.iter().map(|&k| binomial(d, k)).sum();
    let n: usize = degrees.iter().map(|&k| binomial(d, k - 1)).sum();
    let list: Vec<String> = degrees.iter().map(|k| k.to_string()).collect();
    let mut op = PdeOperator::new(format!("current-boundary(d={d},k=[{}])", list.join(",")), d, m, n);
    for axis in 0..d {
        let mut dx = vec![0.0; d];
        dx[axis] = 1.0;
        let mut block = DMatrix::zeros(n, m);
        let (mut row, mut col) = (0, 0);
        for &k in degrees {
            let contraction = exterior::interior_matrix(d, k, &dx);
            block
                .view_mut((row, col), contraction.shape())
                .copy_from(&(-contraction.clone()));
            row += contraction.nrows();
            col += contraction.ncols();
        }
        op.add_term(MultiIndex::unit(d, axis), block)?;
    }
    Ok(CatalogEntry {
        name: "current_boundary",
        operator: op,
        cone: ConeClosedForm::CurrentAnnihilator { d, degrees: degrees.to_vec() },
        citation: "normal currents: singular orientations share an annihilating 1-covector",
    })
}

/// The five catalog operators in dimension `d` with default parameters:
/// `R^{d x d}` gradients, second derivatives of scalars, symmetric
/// gradients, matrix divergence and `d` one-dimensional currents.
pub fn default_entries(d: usize) -> Result<Vec<CatalogEntry>> {
    Ok(vec![
        curl_annihilator(d, d)?,
        higher_gradient_annihilator(d, 1, 2)?,
        saint_venant(d)?,
        divergence_operator(d)?,
        current_boundary_operator(d, &vec![1; d])?,
    ])
}
