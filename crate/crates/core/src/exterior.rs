//! k-vectors and k-covectors on `R^d` in the basis of strictly increasing
//! index tuples, ordered lexicographically. Indices are 0-based in code; the
//! text format and docs use the same order.
//!
//! Coefficient norms are Euclidean in this basis (not the mass norm). Only
//! scalar normalizations depend on that choice.

use std::fmt;
use std::marker::PhantomData;
use std::ops::Neg;

use nalgebra::DMatrix;
use num_traits::Num;

use crate::error::{Error, Result};
use crate::grid::GridMeasure;
use crate::linalg::{self, binomial};

/// Strictly increasing `k`-tuples over `0..d` in lexicographic order.
pub fn combinations(d: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(d, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::with_capacity(binomial(d, k));
    rec(d, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Position of a strictly increasing tuple in [`combinations`]`(d, k)`.
pub fn basis_index(d: usize, tuple: &[usize]) -> usize {
    let k = tuple.len();
    let mut index = 0;
    let mut next = 0;
    for (t, &i) in tuple.iter().enumerate() {
        for x in next..i {
            index += binomial(d - 1 - x, k - 1 - t);
        }
        next = i + 1;
    }
    index
}

#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Vectors;
#[doc(hidden)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Covectors;

/// Homogeneous element of the exterior algebra. Use the aliases
/// [`KVector`] and [`KCovector`].
#[derive(Clone, Debug, PartialEq)]
pub struct Graded<T, K> {
    d: usize,
    k: usize,
    coeffs: Vec<T>,
    kind: PhantomData<K>,
}

/// Element of `Lambda_k(R^d)`.
pub type KVector<T = f64> = Graded<T, Vectors>;
/// Element of `Lambda^k(R^d)` in the dual basis `dx^{i_1} ^ ... ^ dx^{i_k}`.
pub type KCovector<T = f64> = Graded<T, Covectors>;

impl<T: Clone + Num, K> Graded<T, K> {
    pub fn new(d: usize, k: usize, coeffs: Vec<T>) -> Result<Self> {
        if k > d {
            return Err(Error::dim(format!("degree {k} exceeds dimension {d}")));
        }
        let expected = binomial(d, k);
        if coeffs.len() != expected {
            return Err(Error::dim(format!(
                "degree-{k} element of dimension {d} needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Graded { d, k, coeffs, kind: PhantomData })
    }

    pub fn zero(d: usize, k: usize) -> Self {
        Graded { d, k, coeffs: vec![T::zero(); binomial(d, k)], kind: PhantomData }
    }

    pub fn scalar(d: usize, c: T) -> Self {
        Graded { d, k: 0, coeffs: vec![c], kind: PhantomData }
    }

    /// Basis element for a strictly increasing tuple.
    pub fn basis(d: usize, tuple: &[usize]) -> Self {
        let mut out = Self::zero(d, tuple.len());
        out.coeffs[basis_index(d, tuple)] = T::one();
        out
    }

    /// Degree-one element with the given components.
    pub fn from_vector(v: &[T]) -> Self {
        Graded { d: v.len(), k: 1, coeffs: v.to_vec(), kind: PhantomData }
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn get(&self, tuple: &[usize]) -> T {
        self.coeffs[basis_index(self.d, tuple)].clone()
    }

    pub fn set(&mut self, tuple: &[usize], value: T) {
        let i = basis_index(self.d, tuple);
        self.coeffs[i] = value;
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if (self.d, self.k) != (other.d, other.k) {
            return Err(Error::dim("adding elements of different dimension or degree"));
        }
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.clone() + b.clone()).collect();
        Ok(Graded { d: self.d, k: self.k, coeffs, kind: PhantomData })
    }

    pub fn scale(&self, c: T) -> Self {
        let coeffs = self.coeffs.iter().map(|a| a.clone() * c.clone()).collect();
        Graded { d: self.d, k: self.k, coeffs, kind: PhantomData }
    }
}

impl<K> Graded<f64, K> {
    pub fn norm(&self) -> f64 {
        linalg::norm2(&self.coeffs)
    }

    /// `d k c_1 ... c_N` on one line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}", self.d, self.k);
        for c in &self.coeffs {
            out.push(' ');
            out.push_str(&c.to_string());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let int = |i: usize, name: &str| -> Result<usize> {
            let tok = tokens.get(i).ok_or_else(|| Error::parse(format!("token {}", i + 1), format!("missing {name}")))?;
            tok.parse().map_err(|_| Error::parse(format!("token {}", i + 1), format!("{name} must be a non-negative integer, got '{tok}'")))
        };
        let d = int(0, "dimension")?;
        let k = int(1, "degree")?;
        if k > d {
            return Err(Error::parse("token 2", format!("degree {k} exceeds dimension {d}")));
        }
        let expected = binomial(d, k);
        if tokens.len() - 2 != expected {
            return Err(Error::parse(
                format!("token {}", tokens.len().min(expected + 2) + 1),
                format!("expected {expected} coefficients, found {}", tokens.len() - 2),
            ));
        }
        let coeffs = tokens[2..]
            .iter()
            .enumerate()
            .map(|(i, t)| match t.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(Error::parse(format!("token {}", i + 3), format!("invalid coefficient '{t}'"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        Graded::new(d, k, coeffs)
    }
}

impl<K> fmt::Display for Graded<f64, K>
where
    Graded<f64, K>: Named,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (t, c) in combinations(self.d, self.k).iter().zip(&self.coeffs) {
            if *c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let names: Vec<String> = t.iter().map(|i| Self::basis_name(*i)).collect();
            let name = if names.is_empty() { "1".to_string() } else { names.join("^") };
            write!(f, "{c}*{name}")?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[doc(hidden)]
pub trait Named {
    fn basis_name(i: usize) -> String;
}

impl Named for KVector<f64> {
    fn basis_name(i: usize) -> String {
        format!("e{}", i + 1)
    }
}

impl Named for KCovector<f64> {
    fn basis_name(i: usize) -> String {
        format!("dx{}", i + 1)
    }
}

/// `(merged tuple, sign)` for `e_I ^ e_J`, or `None` when `I` and `J` meet.
fn shuffle(a: &[usize], b: &[usize]) -> Option<(Vec<usize>, bool)> {
    let mut inversions = 0;
    for &x in a {
        for &y in b {
            if x == y {
                return None;
            }
            if x > y {
                inversions += 1;
            }
        }
    }
    let mut merged: Vec<usize> = a.iter().chain(b).copied().collect();
    merged.sort_unstable();
    Some((merged, inversions % 2 == 1))
}

/// Exterior product. Works for vectors and covectors alike.
pub fn wedge<T, K>(a: &Graded<T, K>, b: &Graded<T, K>) -> Result<Graded<T, K>>
where
    T: Clone + Num + Neg<Output = T>,
{
    if a.d != b.d {
        return Err(Error::dim(format!("wedge of elements in dimensions {} and {}", a.d, b.d)));
    }
    let d = a.d;
    if a.k + b.k > d {
        return Err(Error::DegreeOverflow { p: a.k, q: b.k, d });
    }
    let mut out = Graded::<T, K>::zero(d, a.k + b.k);
    let ta = combinations(d, a.k);
    let tb = combinations(d, b.k);
    for (i, x) in a.coeffs.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.coeffs.iter().enumerate() {
            if y.is_zero() {
                continue;
            }
            if let Some((merged, negative)) = shuffle(&ta[i], &tb[j]) {
                let term = x.clone() * y.clone();
                let slot = &mut out.coeffs[basis_index(d, &merged)];
                *slot = if negative { slot.clone() - term } else { slot.clone() + term };
            }
        }
    }
    Ok(out)
}

/// `v -| eta`, defined by `<v -| eta, omega> = <v, eta ^ omega>`.
pub fn interior_product<T>(v: &KVector<T>, eta: &KCovector<T>) -> Result<KVector<T>>
where
    T: Clone + Num + Neg<Output = T>,
{
    if eta.k != 1 {
        return Err(Error::dim(format!("interior product needs a 1-covector, got degree {}", eta.k)));
    }
    if v.d != eta.d {
        return Err(Error::dim(format!("interior product of dimensions {} and {}", v.d, eta.d)));
    }
    if v.k == 0 {
        return Err(Error::DegreeUnderflow);
    }
    let d = v.d;
    let mut out = KVector::<T>::zero(d, v.k - 1);
    for (tuple, c) in combinations(d, v.k).iter().zip(&v.coeffs) {
        if c.is_zero() {
            continue;
        }
        // e_I -| dx^i = (-1)^{pos of i in I} e_{I \ i}
        for (pos, &i) in tuple.iter().enumerate() {
            let e = &eta.coeffs[i];
            if e.is_zero() {
                continue;
            }
            let mut rest = tuple.clone();
            rest.remove(pos);
            let term = c.clone() * e.clone();
            let slot = &mut out.coeffs[basis_index(d, &rest)];
            *slot = if pos % 2 == 1 { slot.clone() - term } else { slot.clone() + term };
        }
    }
    Ok(out)
}

/// `<v, omega>`: Euclidean pairing of coefficient arrays.
pub fn pairing<T: Clone + Num>(v: &KVector<T>, omega: &KCovector<T>) -> Result<T> {
    if (v.d, v.k) != (omega.d, omega.k) {
        return Err(Error::dim("pairing elements of different dimension or degree"));
    }
    Ok(v.coeffs.iter().zip(&omega.coeffs).fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone()))
}

/// Matrix of `v -> v -| eta` from `Lambda_k` to `Lambda_{k-1}`.
pub fn interior_matrix(d: usize, k: usize, eta: &[f64]) -> DMatrix<f64> {
    let eta = KCovector::from_vector(eta);
    let mut m = DMatrix::zeros(binomial(d, k - 1), binomial(d, k));
    for (col, tuple) in combinations(d, k).iter().enumerate() {
        let image = interior_product(&KVector::basis(d, tuple), &eta).expect("degree >= 1");
        for (row, c) in image.coeffs.iter().enumerate() {
            m[(row, col)] = *c;
        }
    }
    m
}

/// Matrix of `omega -> v -| omega` on 1-covectors.
pub fn contraction_matrix(v: &KVector) -> Result<DMatrix<f64>> {
    if v.k == 0 {
        return Err(Error::DegreeUnderflow);
    }
    let d = v.d;
    let mut m = DMatrix::zeros(binomial(d, v.k - 1), d);
    for i in 0..d {
        let image = interior_product(v, &KCovector::basis(d, &[i]))?;
        for (row, c) in image.coeffs.iter().enumerate() {
            m[(row, i)] = *c;
        }
    }
    Ok(m)
}

/// A nonzero `v` is simple iff `{x : x ^ v = 0}` has dimension `k`.
pub fn is_simple(v: &KVector, rel_tol: f64) -> Result<bool> {
    if v.is_zero() {
        return Err(Error::DegenerateVector);
    }
    let d = v.d;
    if v.k == d {
        return Ok(true);
    }
    let mut m = DMatrix::zeros(binomial(d, v.k + 1), d);
    for i in 0..d {
        let image = wedge(&KVector::basis(d, &[i]), v)?;
        for (row, c) in image.coeffs.iter().enumerate() {
            m[(row, i)] = *c;
        }
    }
    let s = linalg::singular_values(&m);
    let top = s.first().copied().unwrap_or(0.0);
    let rank = s.iter().filter(|&&x| x > rel_tol * top).count();
    Ok(d - rank == v.k)
}

/// Unit 1-covector `omega` with `v_i -| omega = 0` for every `v_i`, if one
/// exists. The stacked contraction matrix counts as singular when its
/// smallest singular value is at most `rel_tol * max_i |v_i|`; the sign is
/// fixed so that the first significant component is positive.
pub fn annihilator_covector(vs: &[KVector], rel_tol: f64) -> Result<Option<KCovector>> {
    let first = vs.first().ok_or(Error::EmptyFamily)?;
    let d = first.d;
    let mut blocks = Vec::with_capacity(vs.len());
    let mut scale: f64 = 0.0;
    for v in vs {
        if v.d != d {
            return Err(Error::dim("annihilator family mixes dimensions"));
        }
        if v.is_zero() {
            return Err(Error::DegenerateVector);
        }
        scale = scale.max(v.norm());
        blocks.push(contraction_matrix(v)?);
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut stacked = DMatrix::zeros(rows, d);
    let mut r = 0;
    for b in &blocks {
        stacked.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    let (values, basis) = linalg::right_svd(&stacked);
    let last = d - 1;
    if values[last] > rel_tol * scale {
        return Ok(None);
    }
    let mut omega: Vec<f64> = basis.column(last).iter().copied().collect();
    let n = linalg::norm2(&omega);
    omega.iter_mut().for_each(|x| *x /= n);
    if let Some(lead) = omega.iter().find(|x| x.abs() > 1e-12).copied() {
        if lead < 0.0 {
            omega.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(Some(KCovector::from_vector(&omega)))
}

/// A `k`-current discretized on a grid: one `Lambda_k` coefficient vector
/// (the current's value on the cell) per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteCurrent {
    degree: usize,
    measure: GridMeasure,
}

impl DiscreteCurrent {
    pub fn new(degree: usize, measure: GridMeasure) -> Result<Self> {
        let d = measure.dim();
        if degree > d || measure.channels() != binomial(d, degree) {
            return Err(Error::dim(format!(
                "a degree-{degree} current in dimension {d} needs {} channels, measure has {}",
                binomial(d, degree.min(d)),
                measure.channels()
            )));
        }
        Ok(DiscreteCurrent { degree, measure })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn measure(&self) -> &GridMeasure {
        &self.measure
    }

    pub fn into_measure(self) -> GridMeasure {
        self.measure
    }

    /// Total mass `sum_cells |T(cell)|` with the Euclidean coefficient norm.
    pub fn mass(&self) -> f64 {
        self.measure.total_variation()
    }

    /// Orientation `T(cell) / |T(cell)|` of one cell, if nonzero.
    pub fn orientation(&self, cell: usize) -> Option<KVector> {
        let v = self.measure.cell_value(cell);
        let n = linalg::norm2(v);
        (n > 0.0).then(|| KVector::new(self.measure.dim(), self.degree, v.iter().map(|x| x / n).collect()).unwrap())
    }
}

/// `dT = -sum_i d_i T -| dx^i` with second-order finite differences: central
/// in the interior, one-sided at the faces of a non-periodic box and
/// wrapped on a periodic one.
pub fn boundary(t: &DiscreteCurrent) -> Result<DiscreteCurrent> {
    if t.degree == 0 {
        return Err(Error::DegreeUnderflow);
    }
    let mu = &t.measure;
    let (d, k) = (mu.dim(), t.degree);
    if mu.cells_per_axis() < 3 {
        return Err(Error::dim("boundary needs at least 3 cells per axis"));
    }
    let contractions: Vec<DMatrix<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            interior_matrix(d, k, &e)
        })
        .collect();
    let out_channels = binomial(d, k - 1);
    let mut out = GridMeasure::zeros(d, out_channels, mu.lower().to_vec(), mu.upper().to_vec(), mu.cells_per_axis())?
        .with_periodic(mu.is_periodic());
    for (axis, contraction) in contractions.iter().enumerate() {
        let derivative = mu.axis_derivative(axis);
        let values = out.values_mut();
        for cell in 0..derivative.len() / mu.channels() {
            let src = &derivative[cell * mu.channels()..(cell + 1) * mu.channels()];
            for r in 0..out_channels {
                let s: f64 = (0..mu.channels()).map(|c| contraction[(r, c)] * src[c]).sum();
                values[cell * out_channels + r] -= s;
            }
        }
    }
    DiscreteCurrent::new(k - 1, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn e(d: usize, t: &[usize]) -> KVector {
        KVector::basis(d, t)
    }

    fn dx(d: usize, i: usize) -> KCovector {
        KCovector::basis(d, &[i])
    }

    #[test]
    fn combination_ranks_match_enumeration() {
        for d in 0..=7 {
            for k in 0..=d {
                for (i, t) in combinations(d, k).iter().enumerate() {
                    assert_eq!(basis_index(d, t), i);
                }
                assert_eq!(combinations(d, k).len(), binomial(d, k));
            }
        }
    }

    #[test]
    fn basis_wedges() {
        let w = wedge(&e(3, &[0]), &e(3, &[1])).unwrap();
        assert_eq!(w, e(3, &[0, 1]));
        let w = wedge(&e(3, &[1]), &e(3, &[0])).unwrap();
        assert_eq!(w.get(&[0, 1]), -1.0);
        let v = KVector::from_vector(&[1.0, -2.0, 0.5]);
        assert!(wedge(&v, &v).unwrap().is_zero());
        assert!(matches!(
            wedge(&e(3, &[0, 1]), &e(3, &[1, 2])),
            Err(Error::DegreeOverflow { p: 2, q: 2, d: 3 })
        ));
    }

    fn remark_current() -> KVector<Rational64> {
        let one = Rational64::from_integer(1);
        let mut v = KVector::<Rational64>::zero(5, 2);
        v.set(&[0, 1], one);
        v.set(&[2, 3], one);
        v
    }

    #[test]
    fn wedge_square_of_non_simple_two_vector_is_exact() {
        let v = remark_current();
        let sq = wedge(&v, &v).unwrap();
        let mut expected = KVector::<Rational64>::zero(5, 4);
        expected.set(&[0, 1, 2, 3], Rational64::from_integer(2));
        assert_eq!(sq, expected);
    }

    #[test]
    fn interior_product_examples() {
        assert_eq!(interior_product(&e(2, &[0, 1]), &dx(2, 0)).unwrap(), e(2, &[1]));
        assert_eq!(interior_product(&e(2, &[0, 1]), &dx(2, 1)).unwrap().get(&[0]), -1.0);
        let v = e(5, &[0, 1]).add(&e(5, &[2, 3])).unwrap();
        assert!(interior_product(&v, &dx(5, 4)).unwrap().is_zero());
        assert!(interior_product(&v, &KCovector::zero(5, 1)).unwrap().is_zero());
        assert!(interior_product(&e(3, &[0, 1]), &dx(3, 2)).unwrap().is_zero());
        assert!(matches!(interior_product(&KVector::scalar(3, 1.0), &dx(3, 0)), Err(Error::DegreeUnderflow)));
    }

    #[test]
    fn interior_product_by_exhaustive_pairing() {
        // (e1^e2) -| dx1 paired with every basis 1-covector
        let v = e(3, &[0, 1]);
        let r = interior_product(&v, &dx(3, 0)).unwrap();
        for j in 0..3 {
            let omega = dx(3, j);
            let lhs = pairing(&r, &omega).unwrap();
            let rhs = pairing(&v, &wedge(&dx(3, 0), &omega).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn simplicity() {
        assert!(is_simple(&e(4, &[0, 1]), 1e-10).unwrap());
        let v = e(5, &[0, 1]).add(&e(5, &[2, 3])).unwrap();
        assert!(!is_simple(&v, 1e-10).unwrap());
        assert!(is_simple(&KVector::scalar(3, 2.0), 1e-10).unwrap());
        assert!(matches!(is_simple(&KVector::zero(3, 1), 1e-10), Err(Error::DegenerateVector)));
    }

    #[test]
    fn annihilator_examples() {
        let v = e(5, &[0, 1]).add(&e(5, &[2, 3])).unwrap();
        let omega = annihilator_covector(&[v], 1e-10).unwrap().unwrap();
        let mut expected = vec![0.0; 5];
        expected[4] = 1.0;
        for (a, b) in omega.coeffs().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-10);
        }
        let spanning: Vec<KVector> = (0..4).map(|i| e(4, &[i])).collect();
        assert!(annihilator_covector(&spanning, 1e-10).unwrap().is_none());
        let omega = annihilator_covector(&[e(2, &[0])], 1e-10).unwrap().unwrap();
        assert!(omega.coeffs()[0].abs() < 1e-12 && (omega.coeffs()[1] - 1.0).abs() < 1e-12);
        assert!(matches!(annihilator_covector(&[], 1e-10), Err(Error::EmptyFamily)));
    }

    #[test]
    fn text_round_trip_and_diagnostics() {
        let v = KVector::new(4, 2, vec![1.0, -0.5, 0.0, 2.25, 1e-30, 3.0]).unwrap();
        let text = v.to_text();
        assert_eq!(text, "4 2 1 -0.5 0 2.25 0.000000000000000000000000000001 3");
        assert_eq!(KVector::from_text(&text).unwrap(), v);
        assert!(matches!(KVector::from_text("3 1 1 2"), Err(Error::Parse { .. })));
        assert!(matches!(KVector::from_text("3 4"), Err(Error::Parse { .. })));
        match KVector::from_text("3 1 1 x 2") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "token 4"),
            other => panic!("{other:?}"),
        }
        assert_eq!(e(3, &[0, 2]).to_string(), "1*e1^e3");
    }

    fn random_graded<K>(d: usize, k: usize, seed: &[f64]) -> Graded<f64, K> {
        let n = binomial(d, k);
        Graded::new(d, k, (0..n).map(|i| seed[i % seed.len()] * (1.0 + i as f64).sin()).collect()).unwrap()
    }

    proptest! {
        #[test]
        fn duality_identity(d in 1usize..=6, k in 1usize..=6, seed in prop::collection::vec(-1.0f64..1.0, 1..40)) {
            prop_assume!(k <= d);
            let v: KVector = random_graded(d, k, &seed);
            let rev: Vec<f64> = seed.iter().rev().copied().collect();
            let eta: KCovector = random_graded(d, 1, &rev);
            let omega: KCovector = random_graded(d, k - 1, &seed[seed.len() / 2..].to_vec().into_iter().chain([0.3]).collect::<Vec<_>>());
            let lhs = pairing(&interior_product(&v, &eta).unwrap(), &omega).unwrap();
            let rhs = pairing(&v, &wedge(&eta, &omega).unwrap()).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + v.norm() * eta.norm() * omega.norm()));
        }

        #[test]
        fn interior_product_is_an_antiderivation(
            d in 2usize..=6, p in 1usize..=3, q in 1usize..=3,
            seed in prop::collection::vec(-1.0f64..1.0, 1..30)
        ) {
            prop_assume!(p + q <= d);
            let a: KVector = random_graded(d, p, &seed);
            let b: KVector = random_graded(d, q, &seed.iter().map(|x| x * 0.7 - 0.1).collect::<Vec<_>>());
            let eta: KCovector = random_graded(d, 1, &seed.iter().rev().copied().collect::<Vec<_>>());
            let lhs = interior_product(&wedge(&a, &b).unwrap(), &eta).unwrap();
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = wedge(&interior_product(&a, &eta).unwrap(), &b).unwrap()
                .add(&wedge(&a, &interior_product(&b, &eta).unwrap()).unwrap().scale(sign)).unwrap();
            let scale = 1.0 + a.norm() * b.norm() * eta.norm();
            for (x, y) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn graded_commutativity(d in 2usize..=6, p in 0usize..=3, q in 0usize..=3, seed in prop::collection::vec(-1.0f64..1.0, 1..30)) {
            prop_assume!(p + q <= d);
            let a: KVector = random_graded(d, p, &seed);
            let b: KVector = random_graded(d, q, &seed.iter().map(|x| 1.0 - x).collect::<Vec<_>>());
            let ab = wedge(&a, &b).unwrap();
            let ba = wedge(&b, &a).unwrap().scale(if (p * q) % 2 == 0 { 1.0 } else { -1.0 });
            for (x, y) in ab.coeffs().iter().zip(ba.coeffs()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }

        #[test]
        fn products_of_vectors_are_simple(d in 2usize..=6, k in 1usize..=6, seed in prop::collection::vec(-1.0f64..1.0, 36)) {
            prop_assume!(k <= d);
            let mut v = KVector::scalar(d, 1.0);
            for i in 0..k {
                let w: Vec<f64> = (0..d).map(|j| seed[(i * d + j) % 36] + if i == j { 2.0 } else { 0.0 }).collect();
                v = wedge(&v, &KVector::from_vector(&w)).unwrap();
            }
            prop_assert!(is_simple(&v, 1e-8).unwrap());
        }

        #[test]
        fn codegree_one_vectors_are_simple(d in 2usize..=6, seed in prop::collection::vec(-1.0f64..1.0, 1..10)) {
            let v: KVector = random_graded(d, d - 1, &seed);
            prop_assume!(v.norm() > 1e-3);
            prop_assert!(is_simple(&v, 1e-8).unwrap());
        }

        #[test]
        fn annihilator_output_annihilates(d in 2usize..=6, k in 1usize..=5, seed in prop::collection::vec(-1.0f64..1.0, 1..20)) {
            prop_assume!(k < d);
            // build v from vectors orthogonal to a fixed direction so an annihilator exists
            let xi: Vec<f64> = (0..d).map(|i| (i as f64 + seed[0]).cos()).collect();
            let n = linalg::norm2(&xi);
            let xi: Vec<f64> = xi.iter().map(|x| x / n).collect();
            let mut v = KVector::scalar(d, 1.0);
            for i in 0..k {
                let mut w: Vec<f64> = (0..d).map(|j| seed[(i + j) % seed.len()] + if i == j { 1.5 } else { 0.0 }).collect();
                let p = linalg::dot(&w, &xi);
                w.iter_mut().zip(&xi).for_each(|(a, b)| *a -= p * b);
                v = wedge(&v, &KVector::from_vector(&w)).unwrap();
            }
            prop_assume!(v.norm() > 1e-3);
            let omega = annihilator_covector(&[v.clone()], 1e-9).unwrap().unwrap();
            prop_assert!((omega.norm() - 1.0).abs() < 1e-12);
            prop_assert!(interior_product(&v, &omega).unwrap().norm() <= 1e-9 * v.norm());
        }
    }

    fn smooth_bump(x: &[f64], c: f64, r: f64) -> f64 {
        let s: f64 = x.iter().map(|t| (t - c) * (t - c)).sum::<f64>() / (r * r);
        if s >= 1.0 { 0.0 } else { (1.0 - s).powi(4) }
    }

    /// Current `v(x) dx` on the unit box with a compactly supported field.
    fn one_current(n: usize) -> DiscreteCurrent {
        let mut mu = GridMeasure::zeros(2, 2, vec![0.0, 0.0], vec![1.0, 1.0], n).unwrap();
        let vol = mu.cell_volume();
        for cell in 0..mu.cell_count() {
            let x = mu.cell_center(cell);
            let b = smooth_bump(&x, 0.5, 0.35);
            let v = [b * (1.0 + x[1]), b * (x[0] * x[0] - 0.3)];
            mu.cell_value_mut(cell).copy_from_slice(&[v[0] * vol, v[1] * vol]);
        }
        DiscreteCurrent::new(1, mu).unwrap()
    }

    #[test]
    fn boundary_of_one_current_is_minus_divergence() {
        let mut errors = Vec::new();
        for n in [32, 64, 128] {
            let t = one_current(n);
            let b = boundary(&t).unwrap();
            let mu = b.measure();
            let vol = mu.cell_volume();
            let h = 1.0 / n as f64;
            let mut err: f64 = 0.0;
            for cell in 0..mu.cell_count() {
                let x = mu.cell_center(cell);
                // analytic divergence via centered differences of tiny step
                let f = |y: &[f64]| [smooth_bump(y, 0.5, 0.35) * (1.0 + y[1]), smooth_bump(y, 0.5, 0.35) * (y[0] * y[0] - 0.3)];
                let eps = 1e-5;
                let div = (f(&[x[0] + eps, x[1]])[0] - f(&[x[0] - eps, x[1]])[0]) / (2.0 * eps)
                    + (f(&[x[0], x[1] + eps])[1] - f(&[x[0], x[1] - eps])[1]) / (2.0 * eps);
                err = err.max((mu.cell_value(cell)[0] / vol + div).abs());
            }
            errors.push((h, err));
        }
        // second-order convergence
        assert!(errors[1].1 < errors[0].1 / 3.0 && errors[2].1 < errors[1].1 / 3.0, "{errors:?}");
    }

    #[test]
    fn constant_current_on_torus_has_no_boundary() {
        let mut mu = GridMeasure::zeros(3, 3, vec![0.0; 3], vec![1.0; 3], 6).unwrap().with_periodic(true);
        for cell in 0..mu.cell_count() {
            mu.cell_value_mut(cell).copy_from_slice(&[1.0, -2.0, 0.5]);
        }
        let b = boundary(&DiscreteCurrent::new(2, mu).unwrap()).unwrap();
        assert!(b.measure().values().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn boundary_of_boundary_vanishes() {
        for periodic in [false, true] {
            let mut mu = GridMeasure::zeros(3, 3, vec![0.0; 3], vec![1.0; 3], 12).unwrap().with_periodic(periodic);
            for cell in 0..mu.cell_count() {
                let x = mu.cell_center(cell);
                let v = [x[0].sin() * x[1], (x[1] * x[2]).cos(), x[0] * x[2] * x[2]];
                mu.cell_value_mut(cell).copy_from_slice(&v);
            }
            let t = DiscreteCurrent::new(2, mu).unwrap();
            let bb = boundary(&boundary(&t).unwrap()).unwrap();
            let h = 1.0 / 12.0;
            assert!(bb.mass() <= 10.0 * h * t.mass() * 1e-10, "{}", bb.mass());
        }
        assert!(matches!(
            boundary(&DiscreteCurrent::new(0, GridMeasure::zeros(2, 1, vec![0.0; 2], vec![1.0; 2], 4).unwrap()).unwrap()),
            Err(Error::DegreeUnderflow)
        ));
    }

    #[test]
    fn boundary_is_dual_to_exterior_derivative() {
        // 2-current on the unit cube, polynomial 1-forms phi; compare
        // <dT, phi> with <T, d phi>, where d phi = sum_i dx^i ^ d_i phi
        let n = 48;
        let h = 1.0 / n as f64;
        let mut mu = GridMeasure::zeros(3, 3, vec![0.0; 3], vec![1.0; 3], n).unwrap();
        let vol = mu.cell_volume();
        for cell in 0..mu.cell_count() {
            let x = mu.cell_center(cell);
            let b = smooth_bump(&x, 0.5, 0.4);
            let v = [b * x[2], b * (1.0 - x[0]), b * x[1] * x[0]];
            mu.cell_value_mut(cell).copy_from_slice(&v.map(|c| c * vol));
        }
        let t = DiscreteCurrent::new(2, mu).unwrap();
        let bt = boundary(&t).unwrap();
        for trial in 0..20 {
            let c: Vec<f64> = (0..12).map(|i| ((trial * 12 + i) as f64 * 0.731).sin()).collect();
            // phi_j(x) = c_j0 + c_j1 x0 x1 + c_j2 x2^2 + c_j3 x0 x2
            let phi = |x: &[f64]| -> Vec<f64> {
                (0..3).map(|j| c[4 * j] + c[4 * j + 1] * x[0] * x[1] + c[4 * j + 2] * x[2] * x[2] + c[4 * j + 3] * x[0] * x[2]).collect()
            };
            let dphi = |x: &[f64], i: usize| -> Vec<f64> {
                (0..3)
                    .map(|j| match i {
                        0 => c[4 * j + 1] * x[1] + c[4 * j + 3] * x[2],
                        1 => c[4 * j + 1] * x[0],
                        _ => 2.0 * c[4 * j + 2] * x[2] + c[4 * j + 3] * x[0],
                    })
                    .collect()
            };
            let (mut lhs, mut rhs, mut scale) = (0.0, 0.0, 0.0);
            for cell in 0..bt.measure().cell_count() {
                let x = bt.measure().cell_center(cell);
                lhs += linalg::dot(bt.measure().cell_value(cell), &phi(&x));
                let mut form = KCovector::zero(3, 2);
                for i in 0..3 {
                    form = form.add(&wedge(&dx(3, i), &KCovector::from_vector(&dphi(&x, i))).unwrap()).unwrap();
                }
                let tv = t.measure().cell_value(cell);
                rhs += linalg::dot(tv, form.coeffs());
                scale += linalg::norm2(tv) * form.norm();
            }
            assert!((lhs - rhs).abs() <= 10.0 * h * h * scale, "{trial}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn current_helpers() {
        let t = one_current(16);
        assert!(t.mass() > 0.0);
        let center = t.measure().cell_index(&[8, 8]);
        let o = t.orientation(center).unwrap();
        assert!((o.norm() - 1.0).abs() < 1e-12);
        assert!(t.orientation(0).is_none());
        assert!(DiscreteCurrent::new(2, GridMeasure::zeros(2, 2, vec![0.0; 2], vec![1.0; 2], 4).unwrap()).is_err());
    }
}
