//! Constant-coefficient linear operators `A u = sum_{|alpha| <= k} A_alpha d^alpha u`
//! and their Fourier symbols.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex `n x m` matrix; symbols are returned in this form.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Multi-index `alpha = (alpha_1, ..., alpha_d)`. Ordering is lexicographic on
/// the entries, which fixes the canonical order of operator terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    /// `e_i`, the first-order derivative in direction `i`.
    pub fn unit(d: usize, i: usize) -> Self {
        let mut e = vec![0; d];
        e[i] = 1;
        MultiIndex(e)
    }

    /// `e_i + e_j`.
    pub fn pair(d: usize, i: usize, j: usize) -> Self {
        let mut e = vec![0; d];
        e[i] += 1;
        e[j] += 1;
        MultiIndex(e)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|alpha|`.
    pub fn order(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    /// `xi^alpha` by repeated multiplication, exact at zero and negative entries.
    pub fn monomial(&self, xi: &[f64]) -> f64 {
        let mut acc = 1.0;
        for (&a, &x) in self.0.iter().zip(xi) {
            for _ in 0..a {
                acc *= x;
            }
        }
        acc
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// `(2 pi i)^p`, with the power of `i` taken exactly.
pub fn two_pi_i_pow(p: usize) -> Complex64 {
    let r = (2.0 * PI).powi(p as i32);
    match p % 4 {
        0 => Complex64::new(r, 0.0),
        1 => Complex64::new(0.0, r),
        2 => Complex64::new(-r, 0.0),
        _ => Complex64::new(0.0, -r),
    }
}

/// A constant-coefficient operator from `R^m`-valued fields on `R^d` to
/// `R^n`-valued ones. Terms are kept in a `BTreeMap`, so iteration and
/// serialization follow the lexicographic multi-index order.
#[derive(Clone, Debug, PartialEq)]
pub struct PdeOperator {
    label: String,
    d: usize,
    m: usize,
    n: usize,
    terms: BTreeMap<MultiIndex, DMatrix<f64>>,
}

impl PdeOperator {
    pub fn new(label: impl Into<String>, d: usize, m: usize, n: usize) -> Self {
        PdeOperator {
            label: label.into(),
            d,
            m,
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn set_label(&mut self, label: impl Into<String>) {
        self.label = label.into();
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn source_dim(&self) -> usize {
        self.m
    }

    pub fn target_dim(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &DMatrix<f64>)> {
        self.terms.iter()
    }

    pub fn term(&self, alpha: &MultiIndex) -> Option<&DMatrix<f64>> {
        self.terms.get(alpha)
    }

    /// Adds `matrix` to the coefficient of `alpha` (creating it if absent).
    pub fn add_term(&mut self, alpha: MultiIndex, matrix: DMatrix<f64>) -> Result<()> {
        if alpha.dim() != self.d {
            return Err(Error::dim(format!(
                "multi-index {alpha} has length {}, operator dimension is {}",
                alpha.dim(),
                self.d
            )));
        }
        if matrix.shape() != (self.n, self.m) {
            return Err(Error::dim(format!(
                "coefficient of {alpha} is {}x{}, expected {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                self.n,
                self.m
            )));
        }
        match self.terms.get_mut(&alpha) {
            Some(existing) => *existing += matrix,
            None => {
                self.terms.insert(alpha, matrix);
            }
        }
        Ok(())
    }

    pub fn with_term(mut self, alpha: MultiIndex, matrix: DMatrix<f64>) -> Result<Self> {
        self.add_term(alpha, matrix)?;
        Ok(self)
    }

    /// Adds `value` to entry `(row, col)` of the coefficient of `alpha`.
    pub fn add_entry(&mut self, alpha: MultiIndex, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.m && alpha.dim() == self.d);
        let (n, m) = (self.n, self.m);
        let entry = self.terms.entry(alpha).or_insert_with(|| DMatrix::zeros(n, m));
        entry[(row, col)] += value;
    }

    fn nonzero_terms(&self) -> impl Iterator<Item = (&MultiIndex, &DMatrix<f64>)> {
        self.terms.iter().filter(|(_, a)| a.iter().any(|&x| x != 0.0))
    }

    /// `k = max{|alpha| : A_alpha != 0}`.
    pub fn order(&self) -> Result<usize> {
        self.nonzero_terms()
            .map(|(alpha, _)| alpha.order())
            .max()
            .ok_or(Error::OperatorIsZero)
    }

    fn check_xi(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.d {
            return Err(Error::dim(format!(
                "frequency has length {}, operator dimension is {}",
                xi.len(),
                self.d
            )));
        }
        Ok(())
    }

    fn symbol_filtered(&self, xi: &[f64], keep: impl Fn(usize) -> bool) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.n, self.m);
        for (alpha, a) in &self.terms {
            let p = alpha.order();
            if !keep(p) {
                continue;
            }
            let factor = two_pi_i_pow(p) * alpha.monomial(xi);
            out.zip_apply(a, |o, x| *o += factor * x);
        }
        out
    }

    /// `A(xi) = sum_{|alpha| <= k} (2 pi i)^|alpha| A_alpha xi^alpha`.
    pub fn full_symbol(&self, xi: &[f64]) -> Result<ComplexMatrix> {
        self.check_xi(xi)?;
        Ok(self.symbol_filtered(xi, |_| true))
    }

    /// `A^k(xi) = (2 pi i)^k sum_{|alpha| = k} A_alpha xi^alpha`.
    pub fn principal_symbol(&self, xi: &[f64]) -> Result<ComplexMatrix> {
        self.check_xi(xi)?;
        let k = self.order()?;
        Ok(self.symbol_filtered(xi, |p| p == k))
    }

    /// The `h`-homogeneous part `sum_{|alpha| = h} A_alpha d^alpha`.
    pub fn homogeneous_part(&self, h: usize) -> PdeOperator {
        let mut out = PdeOperator::new(format!("{}[h={h}]", self.label), self.d, self.m, self.n);
        for (alpha, a) in &self.terms {
            if alpha.order() == h {
                out.terms.insert(alpha.clone(), a.clone());
            }
        }
        out
    }

    /// Operator acting on `(mu, sigma)` with values in `R^{m+n}` and encoding
    /// `A mu = sigma` as `A~ (mu, sigma) = 0`: every coefficient gets a zero
    /// `n x n` block, and the zeroth-order one a `-Id` block.
    pub fn augment_with_rhs(&self) -> Result<PdeOperator> {
        if self.order()? == 0 {
            return Err(Error::UnsupportedOrderZero);
        }
        let (n, m) = (self.n, self.m);
        let mut out = PdeOperator::new(format!("{}+rhs", self.label), self.d, m + n, n);
        for (alpha, a) in &self.terms {
            let mut wide = DMatrix::zeros(n, m + n);
            wide.view_mut((0, 0), (n, m)).copy_from(a);
            out.terms.insert(alpha.clone(), wide);
        }
        let zero = MultiIndex::zero(self.d);
        let block = out.terms.entry(zero).or_insert_with(|| DMatrix::zeros(n, m + n));
        for i in 0..n {
            block[(i, m + i)] -= 1.0;
        }
        Ok(out)
    }

    /// Termwise sum of two operators with equal dimensions.
    pub fn sum(&self, other: &PdeOperator) -> Result<PdeOperator> {
        if (self.d, self.m, self.n) != (other.d, other.m, other.n) {
            return Err(Error::dim(format!(
                "cannot add operators with (d,m,n) = {:?} and {:?}",
                (self.d, self.m, self.n),
                (other.d, other.m, other.n)
            )));
        }
        let mut out = self.clone();
        out.label = format!("{}+{}", self.label, other.label);
        for (alpha, a) in &other.terms {
            out.add_term(alpha.clone(), a.clone())?;
        }
        Ok(out)
    }

    /// Canonical JSON operator spec.
    pub fn to_json(&self) -> String {
        let spec = OperatorSpec {
            label: self.label.clone(),
            d: self.d,
            m: self.m,
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(alpha, a)| TermSpec {
                    alpha: alpha.entries().to_vec(),
                    matrix: (0..a.nrows()).map(|r| a.row(r).iter().copied().collect()).collect(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&spec).expect("operator spec is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<PdeOperator> {
        let spec: OperatorSpec = serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?;
        let mut op = PdeOperator::new(spec.label, spec.d, spec.m, spec.n);
        for (t, term) in spec.terms.into_iter().enumerate() {
            if term.alpha.len() != op.d {
                return Err(Error::parse(
                    format!("terms[{t}].alpha"),
                    format!("length {} but d = {}", term.alpha.len(), op.d),
                ));
            }
            if term.matrix.len() != op.n {
                return Err(Error::parse(
                    format!("terms[{t}].matrix"),
                    format!("{} rows but n = {}", term.matrix.len(), op.n),
                ));
            }
            let mut a = DMatrix::zeros(op.n, op.m);
            for (r, row) in term.matrix.iter().enumerate() {
                if row.len() != op.m {
                    return Err(Error::parse(
                        format!("terms[{t}].matrix[{r}]"),
                        format!("{} columns but m = {}", row.len(), op.m),
                    ));
                }
                for (c, &x) in row.iter().enumerate() {
                    if !x.is_finite() {
                        return Err(Error::parse(
                            format!("terms[{t}].matrix[{r}][{c}]"),
                            "non-finite coefficient",
                        ));
                    }
                    a[(r, c)] = x;
                }
            }
            let alpha = MultiIndex::new(term.alpha);
            if op.terms.contains_key(&alpha) {
                return Err(Error::parse(
                    format!("terms[{t}].alpha"),
                    format!("duplicate multi-index {alpha}"),
                ));
            }
            op.terms.insert(alpha, a);
        }
        Ok(op)
    }
}

#[derive(Serialize, Deserialize)]
struct OperatorSpec {
    label: String,
    d: usize,
    m: usize,
    n: usize,
    terms: Vec<TermSpec>,
}

#[derive(Serialize, Deserialize)]
struct TermSpec {
    alpha: Vec<u32>,
    matrix: Vec<Vec<f64>>,
}
