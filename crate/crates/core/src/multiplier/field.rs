use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Complex multi-channel samples on the torus `[-L/2, L/2)^d` with `N`
/// cells per axis. Sample `i` sits at `x_a = -L/2 + i_a h`; cells are
/// row-major with the last axis fastest and channels are stored one after
/// another.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicField {
    d: usize,
    channels: usize,
    n: usize,
    period: f64,
    data: Vec<Complex64>,
}

impl PeriodicField {
    pub fn zeros(d: usize, channels: usize, n: usize, period: f64) -> Result<Self> {
        if d == 0 || channels == 0 || n < 2 {
            return Err(Error::dim("periodic fields need d >= 1, at least one channel and N >= 2"));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::dim(format!("period must be positive, got {period}")));
        }
        let len = n.checked_pow(d as u32).and_then(|c| c.checked_mul(channels)).ok_or_else(|| Error::dim("grid too large"))?;
        Ok(PeriodicField { d, channels, n, period, data: vec![Complex64::new(0.0, 0.0); len] })
    }

    pub fn zeros_like(&self, channels: usize) -> Self {
        PeriodicField::zeros(self.d, channels, self.n, self.period).expect("valid shape")
    }

    /// Samples `f(x)` (one value per channel) at every grid point.
    pub fn from_fn(d: usize, channels: usize, n: usize, period: f64, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Result<Self> {
        let mut out = PeriodicField::zeros(d, channels, n, period)?;
        let cells = out.cell_count();
        let values: Vec<Vec<f64>> = (0..cells).into_par_iter().map(|c| f(&out.point(c))).collect();
        for (c, v) in values.iter().enumerate() {
            if v.len() != channels {
                return Err(Error::dim(format!("closure returned {} values for {channels} channels", v.len())));
            }
            for (ch, x) in v.iter().enumerate() {
                out.data[ch * cells + c] = Complex64::new(*x, 0.0);
            }
        }
        Ok(out)
    }

    pub fn from_real(d: usize, channels: usize, n: usize, period: f64, values: &[f64]) -> Result<Self> {
        let mut out = PeriodicField::zeros(d, channels, n, period)?;
        if values.len() != out.data.len() {
            return Err(Error::dim(format!("expected {} values, got {}", out.data.len(), values.len())));
        }
        out.data.iter_mut().zip(values).for_each(|(z, x)| *z = Complex64::new(*x, 0.0));
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn cells_per_axis(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn h(&self) -> f64 {
        self.period / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    pub fn cell_count(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let cells = self.cell_count();
        &self.data[c * cells..(c + 1) * cells]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [Complex64] {
        let cells = self.cell_count();
        &mut self.data[c * cells..(c + 1) * cells]
    }

    pub fn multi_index(&self, cell: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        let mut rest = cell;
        for a in (0..self.d).rev() {
            idx[a] = rest % self.n;
            rest /= self.n;
        }
        idx
    }

    pub fn point(&self, cell: usize) -> Vec<f64> {
        let h = self.h();
        self.multi_index(cell).iter().map(|&i| -0.5 * self.period + i as f64 * h).collect()
    }

    /// Signed frequency (cycles per unit length) of Fourier index `cell`;
    /// index `N/2` maps to `-N/(2L)`.
    pub fn frequency(&self, cell: usize) -> Vec<f64> {
        self.multi_index(cell).iter().map(|&k| signed(k, self.n) as f64 / self.period).collect()
    }

    /// Values of channel-wise Euclidean norms at every sample.
    pub fn pointwise_norm(&self) -> Vec<f64> {
        let cells = self.cell_count();
        (0..cells)
            .map(|c| (0..self.channels).map(|ch| self.data[ch * cells + c].norm_sqr()).sum::<f64>().sqrt())
            .collect()
    }

    /// `(sum |f|^p h^d)^(1/p)` with the channel-wise Euclidean norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let vol = self.cell_volume();
        if p.is_infinite() {
            return self.pointwise_norm().into_iter().fold(0.0, f64::max);
        }
        (self.pointwise_norm().iter().map(|x| x.powf(p)).sum::<f64>() * vol).powf(1.0 / p)
    }

    pub fn l1_norm(&self) -> f64 {
        self.pointwise_norm().iter().sum::<f64>() * self.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        (self.data.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.cell_volume()).sqrt()
    }

    pub fn max_abs_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    fn check_shape(&self, other: &PeriodicField) -> Result<()> {
        if self.d != other.d || self.n != other.n || self.period != other.period {
            return Err(Error::dim("fields live on different grids"));
        }
        Ok(())
    }

    pub fn add(&self, other: &PeriodicField) -> Result<PeriodicField> {
        self.check_shape(other)?;
        if self.channels != other.channels {
            return Err(Error::dim(format!("{} vs {} channels", self.channels, other.channels)));
        }
        let mut out = self.clone();
        out.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &PeriodicField) -> Result<PeriodicField> {
        self.add(&other.scaled(-1.0))
    }

    pub fn scaled(&self, s: f64) -> PeriodicField {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= s);
        out
    }

    /// Multiplies every channel by the single-channel field `w`.
    pub fn times_scalar_field(&self, w: &PeriodicField) -> Result<PeriodicField> {
        self.check_shape(w)?;
        if w.channels != 1 {
            return Err(Error::dim("weight field must have one channel"));
        }
        let cells = self.cell_count();
        let mut out = self.clone();
        for (i, z) in out.data.iter_mut().enumerate() {
            *z *= w.data[i % cells];
        }
        Ok(out)
    }

    /// Outer product of the single-channel field `self` with a constant vector.
    pub fn times_vector(&self, v: &[f64]) -> Result<PeriodicField> {
        if self.channels != 1 || v.is_empty() {
            return Err(Error::dim("times_vector needs a single-channel field and a non-empty vector"));
        }
        let cells = self.cell_count();
        let mut out = self.zeros_like(v.len());
        for (c, x) in v.iter().enumerate() {
            out.data[c * cells..(c + 1) * cells].iter_mut().zip(&self.data).for_each(|(o, z)| *o = z * x);
        }
        Ok(out)
    }

    /// Unnormalized forward DFT, `F(k) = sum_j f(j) exp(-2 pi i k.j / N)`.
    pub fn forward(&self) -> PeriodicField {
        self.transform(false)
    }

    /// Inverse of [`forward`](Self::forward), including the `1/N^d` factor.
    pub fn inverse(&self) -> PeriodicField {
        let mut out = self.transform(true);
        let s = 1.0 / self.cell_count() as f64;
        out.data.iter_mut().for_each(|z| *z *= s);
        out
    }

    fn transform(&self, inverse: bool) -> PeriodicField {
        let mut planner = FftPlanner::new();
        let fft: Arc<dyn Fft<f64>> = if inverse { planner.plan_fft_inverse(self.n) } else { planner.plan_fft_forward(self.n) };
        let mut out = self.clone();
        let n = self.n;
        let cells = self.cell_count();
        for ch in 0..self.channels {
            let data = &mut out.data[ch * cells..(ch + 1) * cells];
            for axis in 0..self.d {
                let stride = n.pow((self.d - 1 - axis) as u32);
                let block = stride * n;
                // lines along `axis` start at base = outer * block + inner
                let lines: Vec<usize> = (0..cells / block)
                    .flat_map(|outer| (0..stride).map(move |inner| outer * block + inner))
                    .collect();
                let transformed: Vec<Vec<Complex64>> = lines
                    .par_iter()
                    .map(|&base| {
                        let mut line: Vec<Complex64> = (0..n).map(|i| data[base + i * stride]).collect();
                        fft.process(&mut line);
                        line
                    })
                    .collect();
                for (base, line) in lines.iter().zip(transformed) {
                    for (i, z) in line.into_iter().enumerate() {
                        data[base + i * stride] = z;
                    }
                }
            }
        }
        out
    }
}

pub(crate) fn signed(k: usize, n: usize) -> i64 {
    if 2 * k >= n {
        k as i64 - n as i64
    } else {
        k as i64
    }
}
