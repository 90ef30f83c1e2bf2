use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{signed, PeriodicField};
use crate::error::{Error, Result};
use crate::operator::ComplexMatrix;

pub type Evaluator = Arc<dyn Fn(&[f64]) -> ComplexMatrix + Send + Sync>;

/// A matrix-valued Fourier multiplier, evaluated at frequencies in cycles
/// per unit length.
#[derive(Clone)]
pub struct MultiplierSpec {
    label: String,
    c_in: usize,
    c_out: usize,
    dim: Option<usize>,
    eval: Evaluator,
}

impl fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiplierSpec({}: {} -> {})", self.label, self.c_in, self.c_out)
    }
}

impl MultiplierSpec {
    pub fn new(
        label: impl Into<String>,
        c_in: usize,
        c_out: usize,
        eval: impl Fn(&[f64]) -> ComplexMatrix + Send + Sync + 'static,
    ) -> Self {
        MultiplierSpec { label: label.into(), c_in, c_out, dim: None, eval: Arc::new(eval) }
    }

    /// Restricts the multiplier to fields of dimension `d`.
    pub fn for_dim(mut self, d: usize) -> Self {
        self.dim = Some(d);
        self
    }

    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// `m(xi) Id_c` for a scalar symbol.
    pub fn diagonal(label: impl Into<String>, c: usize, m: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        MultiplierSpec::new(label, c, c, move |xi| DMatrix::identity(c, c) * m(xi))
    }

    pub fn identity(c: usize) -> Self {
        MultiplierSpec::new("identity", c, c, move |_| DMatrix::identity(c, c))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn input_channels(&self) -> usize {
        self.c_in
    }

    pub fn output_channels(&self) -> usize {
        self.c_out
    }

    pub fn eval(&self, xi: &[f64]) -> ComplexMatrix {
        (self.eval)(xi)
    }

    /// The multiplier of "apply `first`, then `self`".
    pub fn after(&self, first: &MultiplierSpec) -> Result<MultiplierSpec> {
        if first.c_out != self.c_in {
            return Err(Error::dim(format!(
                "cannot compose {} ({} outputs) with {} ({} inputs)",
                first.label, first.c_out, self.label, self.c_in
            )));
        }
        let dim = match (self.dim, first.dim) {
            (Some(a), Some(b)) if a != b => return Err(Error::dim(format!("cannot compose multipliers in dimensions {a} and {b}"))),
            (a, b) => a.or(b),
        };
        let (a, b) = (self.eval.clone(), first.eval.clone());
        let mut out = MultiplierSpec::new(format!("{} o {}", self.label, first.label), first.c_in, self.c_out, move |xi| a(xi) * b(xi));
        out.dim = dim;
        Ok(out)
    }
}

/// Per-frequency matrix multiplication in Fourier space. A multiplier that
/// is exactly the identity everywhere on the grid returns the input as is.
pub fn apply_multiplier(f: &PeriodicField, m: &MultiplierSpec) -> Result<PeriodicField> {
    if f.channels() != m.c_in {
        return Err(Error::dim(format!(
            "multiplier {} takes {} channels, field has {}",
            m.label,
            m.c_in,
            f.channels()
        )));
    }
    if let Some(d) = m.dim.filter(|&d| d != f.dim()) {
        return Err(Error::dim(format!("multiplier {} is defined in dimension {d}, field has dimension {}", m.label, f.dim())));
    }
    let cells = f.cell_count();
    let symbols: Vec<ComplexMatrix> = (0..cells).into_par_iter().map(|k| m.eval(&f.frequency(k))).collect();
    if let Some(bad) = symbols.iter().find(|s| s.nrows() != m.c_out || s.ncols() != m.c_in) {
        return Err(Error::dim(format!(
            "multiplier {} evaluated to a {}x{} matrix, declared {}x{}",
            m.label,
            bad.nrows(),
            bad.ncols(),
            m.c_out,
            m.c_in
        )));
    }
    if m.c_in == m.c_out && symbols.iter().all(|s| *s == DMatrix::identity(m.c_in, m.c_in)) {
        return Ok(f.clone());
    }
    let hat = f.forward();
    let mut out_hat = f.zeros_like(m.c_out);
    let rows: Vec<Vec<Complex64>> = (0..m.c_out)
        .into_par_iter()
        .map(|r| {
            (0..cells)
                .map(|k| (0..m.c_in).map(|c| symbols[k][(r, c)] * hat.channel(c)[k]).sum())
                .collect()
        })
        .collect();
    for (r, row) in rows.into_iter().enumerate() {
        out_hat.channel_mut(r).copy_from_slice(&row);
    }
    Ok(out_hat.inverse())
}

/// `(1 + 4 pi^2 |xi|^2)^(-s/2)` on `c` channels.
pub fn bessel_multiplier(c: usize, s: f64) -> Result<MultiplierSpec> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidExponent(s));
    }
    Ok(MultiplierSpec::diagonal(format!("bessel(s={s})"), c, move |xi| {
        let r2: f64 = xi.iter().map(|x| x * x).sum();
        Complex64::new((1.0 + 4.0 * PI * PI * r2).powf(-0.5 * s), 0.0)
    }))
}

/// `(Id - Laplacian)^(-s/2) f`.
pub fn bessel_potential(f: &PeriodicField, s: f64) -> Result<PeriodicField> {
    apply_multiplier(f, &bessel_multiplier(f.channels(), s)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MollifierShape {
    /// `(1 - |x/eps|^2)^3` on the ball of radius `eps`.
    Bump,
    /// Gaussian with `sigma = eps / 4`, cut at `|x| = eps`.
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub shape: MollifierShape,
    pub epsilon: f64,
}

impl MollifierSpec {
    pub fn bump(epsilon: f64) -> Self {
        MollifierSpec { shape: MollifierShape::Bump, epsilon }
    }

    pub fn gaussian(epsilon: f64) -> Self {
        MollifierSpec { shape: MollifierShape::Gaussian, epsilon }
    }

    fn profile(&self, r: f64) -> f64 {
        let t = r / self.epsilon;
        if t >= 1.0 {
            return 0.0;
        }
        match self.shape {
            MollifierShape::Bump => (1.0 - t * t).powi(3),
            MollifierShape::Gaussian => (-8.0 * t * t).exp(),
        }
    }

    fn check(&self, like: &PeriodicField) -> Result<()> {
        if !(self.epsilon > 0.0) || self.epsilon >= 0.5 * like.period() {
            return Err(Error::dim(format!(
                "mollifier radius {} must lie in (0, L/2) = (0, {})",
                self.epsilon,
                0.5 * like.period()
            )));
        }
        Ok(())
    }

    /// Kernel values indexed by displacement (index 0 is the origin),
    /// normalized so that `sum K h^d = 1`.
    fn displacement_kernel(&self, like: &PeriodicField) -> Result<PeriodicField> {
        self.check(like)?;
        let mut k = like.zeros_like(1);
        let h = like.h();
        let n = like.cells_per_axis();
        let values: Vec<f64> = (0..like.cell_count())
            .map(|c| {
                let r2: f64 = like.multi_index(c).iter().map(|&i| (signed(i, n) as f64 * h).powi(2)).sum();
                self.profile(r2.sqrt())
            })
            .collect();
        let total: f64 = values.iter().sum::<f64>() * like.cell_volume();
        for (z, v) in k.data_mut().iter_mut().zip(values) {
            *z = Complex64::new(v / total, 0.0);
        }
        Ok(k)
    }

    /// The normalized kernel sampled at the grid points of `like`.
    pub fn kernel(&self, like: &PeriodicField) -> Result<PeriodicField> {
        let k = self.displacement_kernel(like)?;
        let n = like.cells_per_axis();
        let mut out = like.zeros_like(1);
        for c in 0..like.cell_count() {
            // grid point i sits at displacement i - N/2
            let idx = like.multi_index(c);
            let disp = idx.iter().fold(0, |acc, &i| acc * n + (i + n - n / 2) % n);
            out.data_mut()[c] = k.data()[disp];
        }
        Ok(out)
    }
}

/// Periodic convolution `sum_j f(x_j) phi(x - x_j) h^d`.
pub fn mollify(f: &PeriodicField, spec: &MollifierSpec) -> Result<PeriodicField> {
    let k = spec.displacement_kernel(f)?.forward();
    let vol = f.cell_volume();
    let mut hat = f.forward();
    for c in 0..f.channels() {
        hat.channel_mut(c).iter_mut().zip(k.data()).for_each(|(z, w)| *z *= w * vol);
    }
    Ok(hat.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(n: usize, k: [i64; 2]) -> PeriodicField {
        let l = 4.0;
        PeriodicField::from_fn(2, 1, n, l, |x| vec![(2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]) / l).cos()]).unwrap()
    }

    #[test]
    fn identity_is_exact() {
        let f = mode(16, [1, 2]);
        assert_eq!(apply_multiplier(&f, &MultiplierSpec::identity(1)).unwrap(), f);
    }

    #[test]
    fn modes_are_eigenfunctions() {
        let f = mode(32, [3, -2]);
        let xi = [3.0 / 4.0, -2.0 / 4.0];
        let expected = (1.0 + 4.0 * PI * PI * (xi[0] * xi[0] + xi[1] * xi[1])).powf(-0.75);
        let g = bessel_potential(&f, 1.5).unwrap();
        for (a, b) in g.data().iter().zip(f.data()) {
            assert!((a - b * expected).norm() < 1e-12);
        }
        let c = PeriodicField::from_fn(2, 1, 8, 4.0, |_| vec![3.0]).unwrap();
        let g = bessel_potential(&c, 2.0).unwrap();
        assert!(g.data().iter().all(|z| (z.re - 3.0).abs() < 1e-12 && z.im.abs() < 1e-12));
        assert!(matches!(bessel_potential(&c, 0.0), Err(Error::InvalidExponent(_))));
        assert!(matches!(bessel_potential(&c, -1.0), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn channel_and_shape_checks() {
        let f = mode(8, [1, 0]);
        assert!(apply_multiplier(&f, &MultiplierSpec::identity(2)).is_err());
        let wrong = MultiplierSpec::new("wrong", 1, 2, |_| DMatrix::identity(1, 1));
        assert!(apply_multiplier(&f, &wrong).is_err());
        assert!(MultiplierSpec::identity(2).after(&MultiplierSpec::identity(1)).is_err());
    }

    #[test]
    fn mollifier_kernels_are_normalized() {
        let like = PeriodicField::zeros(2, 1, 64, 4.0).unwrap();
        for spec in [MollifierSpec::bump(0.3), MollifierSpec::gaussian(0.3), MollifierSpec::bump(0.01)] {
            let k = spec.kernel(&like).unwrap();
            assert!(k.data().iter().all(|z| z.re >= 0.0 && z.im == 0.0));
            let total: f64 = k.data().iter().map(|z| z.re).sum::<f64>() * like.cell_volume();
            assert!((total - 1.0).abs() < 1e-10);
            // peak at the origin, which is grid point (N/2, N/2)
            let peak = k.data().iter().map(|z| z.re).fold(0.0, f64::max);
            assert_eq!(k.data()[32 * 64 + 32].re, peak);
        }
        assert!(MollifierSpec::bump(0.0).kernel(&like).is_err());
        assert!(MollifierSpec::bump(2.0).kernel(&like).is_err());
    }

    #[test]
    fn mollifying_preserves_mass_and_constants() {
        let f = PeriodicField::from_fn(2, 2, 32, 4.0, |x| vec![(x[0] * x[1]).exp().min(5.0), 1.0]).unwrap();
        let g = mollify(&f, &MollifierSpec::bump(0.5)).unwrap();
        let mass = |f: &PeriodicField, c: usize| f.channel(c).iter().map(|z| z.re).sum::<f64>();
        assert!((mass(&g, 0) - mass(&f, 0)).abs() < 1e-9 * mass(&f, 0));
        assert!(g.channel(1).iter().all(|z| (z.re - 1.0).abs() < 1e-12));
    }
}
