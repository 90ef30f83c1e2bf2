//! Synthetic measures with known singular structure.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::GridMeasure;
use crate::catalog::sym_flatten;
use crate::error::{Error, Result};
use crate::exterior::{DiscreteCurrent, KVector};
use crate::linalg;

const MONTE_CARLO_POINTS: usize = 10_000;

/// Box and resolution of a generated measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub cells: usize,
    #[serde(default)]
    pub seed: u64,
}

impl GridSpec {
    /// `[lo, hi]^d` with `cells` cells per axis.
    pub fn cube(d: usize, lo: f64, hi: f64, cells: usize) -> Self {
        GridSpec { lower: vec![lo; d], upper: vec![hi; d], cells, seed: 0 }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn empty(&self, m: usize) -> Result<GridMeasure> {
        GridMeasure::zeros(self.dim(), m, self.lower.clone(), self.upper.clone(), self.cells)
    }
}

/// Jump of the map `x -> a 1_{n.x > offset}` across the hyperplane `n.x = offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpSpec {
    pub a: Vec<f64>,
    pub normal: Vec<f64>,
    #[serde(default)]
    pub offset: f64,
}

impl JumpSpec {
    fn check(&self, d: usize) -> Result<()> {
        if self.normal.len() != d {
            return Err(Error::dim(format!("normal has length {}, grid dimension is {d}", self.normal.len())));
        }
        if (linalg::norm2(&self.normal) - 1.0).abs() > 1e-9 {
            return Err(Error::dim("jump normal must have unit length"));
        }
        if linalg::norm2(&self.a) == 0.0 {
            return Err(Error::EmptyMeasure("jump amplitude is zero".into()));
        }
        Ok(())
    }
}

/// Fraction of the box `[lo, hi]` where `w.y > t`. Exact for boxes of
/// dimension at most 2, seeded Monte Carlo above.
fn halfspace_fraction(lo: &[f64], hi: &[f64], w: &[f64], t: f64, seed: u64) -> f64 {
    let (mut min, mut max) = (0.0, 0.0);
    for a in 0..lo.len() {
        let (p, q) = (w[a] * lo[a], w[a] * hi[a]);
        min += p.min(q);
        max += p.max(q);
    }
    if min > t {
        return 1.0;
    }
    if max <= t {
        return 0.0;
    }
    match lo.len() {
        1 => {
            let cut = t / w[0];
            let len = hi[0] - lo[0];
            if w[0] > 0.0 {
                (hi[0] - cut.clamp(lo[0], hi[0])) / len
            } else {
                (cut.clamp(lo[0], hi[0]) - lo[0]) / len
            }
        }
        2 => {
            let corners = [[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]];
            let side = |p: &[f64; 2]| w[0] * p[0] + w[1] * p[1] - t;
            let mut poly: Vec<[f64; 2]> = Vec::with_capacity(6);
            for i in 0..4 {
                let (p, q) = (corners[i], corners[(i + 1) % 4]);
                let (sp, sq) = (side(&p), side(&q));
                if sp >= 0.0 {
                    poly.push(p);
                }
                if (sp >= 0.0) != (sq >= 0.0) {
                    let s = sp / (sp - sq);
                    poly.push([p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]);
                }
            }
            let area: f64 = (0..poly.len())
                .map(|i| {
                    let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
                    p[0] * q[1] - q[0] * p[1]
                })
                .sum::<f64>()
                .abs()
                / 2.0;
            area / ((hi[0] - lo[0]) * (hi[1] - lo[1]))
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inside = (0..MONTE_CARLO_POINTS)
                .filter(|_| {
                    let s: f64 = (0..lo.len()).map(|a| w[a] * rng.random_range(lo[a]..hi[a])).sum();
                    s > t
                })
                .count();
            inside as f64 / MONTE_CARLO_POINTS as f64
        }
    }
}

/// `D 1_{n.x > c}(cell)`: by the divergence theorem, the face fractions
/// inside the half-space weighted by face areas. Equals `n` times the area
/// of the hyperplane inside the cell.
fn jump_gradients(mu: &GridMeasure, normal: &[f64], c: f64, seed: u64) -> Vec<Vec<f64>> {
    let d = mu.dim();
    let h: Vec<f64> = (0..d).map(|a| mu.cell_size(a)).collect();
    (0..mu.cell_count())
        .map(|cell| {
            let center = mu.cell_center(cell);
            let lo: Vec<f64> = (0..d).map(|a| center[a] - h[a] / 2.0).collect();
            let hi: Vec<f64> = (0..d).map(|a| center[a] + h[a] / 2.0).collect();
            // skip cells the plane cannot reach
            let reach: f64 = (0..d).map(|a| normal[a].abs() * h[a] / 2.0).sum();
            if (linalg::dot(normal, &center) - c).abs() > reach {
                return vec![0.0; d];
            }
            (0..d)
                .map(|j| {
                    let others: Vec<usize> = (0..d).filter(|&a| a != j).collect();
                    let flo: Vec<f64> = others.iter().map(|&a| lo[a]).collect();
                    let fhi: Vec<f64> = others.iter().map(|&a| hi[a]).collect();
                    let w: Vec<f64> = others.iter().map(|&a| normal[a]).collect();
                    let area: f64 = others.iter().map(|&a| h[a]).product();
                    let face_seed = seed ^ ((cell as u64) << 8) ^ j as u64;
                    let plus = halfspace_fraction(&flo, &fhi, &w, c - normal[j] * hi[j], face_seed);
                    let minus = halfspace_fraction(&flo, &fhi, &w, c - normal[j] * lo[j], face_seed ^ 0x55);
                    (plus - minus) * area
                })
                .collect()
        })
        .collect()
}

/// `Du` for `u = a 1_{n.x > c}`, valued in `R^{l x d}` (row-major).
pub fn make_bv_jump(jump: &JumpSpec, grid: &GridSpec) -> Result<GridMeasure> {
    let d = grid.dim();
    jump.check(d)?;
    let ell = jump.a.len();
    let mut mu = grid.empty(ell * d)?;
    for (cell, g) in jump_gradients(&mu, &jump.normal, jump.offset, grid.seed).into_iter().enumerate() {
        let v = mu.cell_value_mut(cell);
        for k in 0..ell {
            for j in 0..d {
                v[k * d + j] = jump.a[k] * g[j];
            }
        }
    }
    nonempty(mu, "hyperplane misses the box")
}

/// `Eu = (Du + Du^T)/2` for `u = a 1_{n.x > c}`, in the flattened symmetric basis.
pub fn make_bd_jump(jump: &JumpSpec, grid: &GridSpec) -> Result<GridMeasure> {
    let d = grid.dim();
    jump.check(d)?;
    if jump.a.len() != d {
        return Err(Error::dim(format!("BD jump amplitude needs length {d}")));
    }
    let mut mu = grid.empty(d * (d + 1) / 2)?;
    for (cell, g) in jump_gradients(&mu, &jump.normal, jump.offset, grid.seed).into_iter().enumerate() {
        if g.iter().all(|x| *x == 0.0) {
            continue;
        }
        let m = DMatrix::from_fn(d, d, |i, j| 0.5 * (jump.a[i] * g[j] + jump.a[j] * g[i]));
        mu.cell_value_mut(cell).copy_from_slice(&sym_flatten(&m));
    }
    nonempty(mu, "hyperplane misses the box")
}

fn nonempty(mu: GridMeasure, why: &str) -> Result<GridMeasure> {
    if mu.values().iter().all(|x| *x == 0.0) {
        return Err(Error::EmptyMeasure(why.into()));
    }
    Ok(mu)
}

/// `value * H^j` restricted to the affine plane `point + span(directions)`,
/// optionally cut to `|t_i| <= extents[i]` in the orthonormalized
/// parameters. `value` is per unit `j`-dimensional area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatSpec {
    pub point: Vec<f64>,
    pub directions: Vec<Vec<f64>>,
    #[serde(default)]
    pub extents: Option<Vec<f64>>,
    pub value: Vec<f64>,
    /// Quadrature points per cell side along each direction.
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

fn default_oversample() -> usize {
    4
}

fn orthonormalize(vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for u in &out {
            let p = linalg::dot(&w, u);
            w.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
        }
        let n = linalg::norm2(&w);
        if n < 1e-10 * linalg::norm2(v).max(1.0) {
            return Err(Error::dim("plane directions are linearly dependent"));
        }
        out.push(w.iter().map(|x| x / n).collect());
    }
    Ok(out)
}

pub fn make_flat_measure(flat: &FlatSpec, grid: &GridSpec) -> Result<GridMeasure> {
    let d = grid.dim();
    if flat.point.len() != d || flat.directions.iter().any(|v| v.len() != d) {
        return Err(Error::dim(format!("plane point and directions must have length {d}")));
    }
    if flat.directions.len() > d {
        return Err(Error::dim("more plane directions than dimensions"));
    }
    let basis = orthonormalize(&flat.directions)?;
    let j = basis.len();
    let mut mu = grid.empty(flat.value.len())?;
    if flat.value.is_empty() {
        return Err(Error::dim("flat measure value is empty"));
    }
    let hmin = (0..d).map(|a| mu.cell_size(a)).fold(f64::INFINITY, f64::min);
    let spacing = hmin / flat.oversample.max(1) as f64;
    // parameter ranges: projection of the box onto each direction
    let mut ranges = Vec::with_capacity(j);
    for (i, u) in basis.iter().enumerate() {
        let base = linalg::dot(u, &flat.point);
        let lo: f64 = (0..d).map(|a| (u[a] * grid.lower[a]).min(u[a] * grid.upper[a])).sum::<f64>() - base;
        let hi: f64 = (0..d).map(|a| (u[a] * grid.lower[a]).max(u[a] * grid.upper[a])).sum::<f64>() - base;
        let (lo, hi) = match &flat.extents {
            Some(e) => (lo.max(-e[i]), hi.min(e[i])),
            None => (lo, hi),
        };
        if hi <= lo {
            return Err(Error::EmptyMeasure("plane misses the box".into()));
        }
        let count = ((hi - lo) / spacing).ceil().max(1.0) as usize;
        ranges.push((lo, (hi - lo) / count as f64, count));
    }
    let weight: f64 = ranges.iter().map(|r| r.1).product();
    let total: usize = ranges.iter().map(|r| r.2).product();
    let mut x = vec![0.0; d];
    for flat_index in 0..total {
        let mut rem = flat_index;
        x.copy_from_slice(&flat.point);
        for (u, &(lo, step, count)) in basis.iter().zip(&ranges) {
            let t = lo + ((rem % count) as f64 + 0.5) * step;
            rem /= count;
            x.iter_mut().zip(u).for_each(|(p, q)| *p += t * q);
        }
        if let Some(cell) = mu.locate(&x) {
            mu.cell_value_mut(cell).iter_mut().zip(&flat.value).for_each(|(v, c)| *v += weight * c);
        }
    }
    nonempty(mu, "plane misses the box")
}

/// k-current `orientation * H^j` on a flat piece, see [`FlatSpec`]
/// (its `value` is replaced by the orientation coefficients).
pub fn make_current_segment(orientation: &KVector, flat: &FlatSpec, grid: &GridSpec) -> Result<DiscreteCurrent> {
    if orientation.dim() != grid.dim() {
        return Err(Error::dim("orientation and grid dimensions differ"));
    }
    let spec = FlatSpec { value: orientation.coeffs().to_vec(), ..flat.clone() };
    DiscreteCurrent::new(orientation.degree(), make_flat_measure(&spec, grid)?)
}

/// Absolutely continuous measure with density `f` (midpoint rule per cell).
pub fn make_smooth_density(grid: &GridSpec, m: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<GridMeasure> {
    let mut mu = grid.empty(m)?;
    let vol = mu.cell_volume();
    for cell in 0..mu.cell_count() {
        let v = f(&mu.cell_center(cell));
        if v.len() != m {
            return Err(Error::dim(format!("density returned {} channels, expected {m}", v.len())));
        }
        mu.cell_value_mut(cell).iter_mut().zip(&v).for_each(|(a, b)| *a = b * vol);
    }
    Ok(mu)
}

/// Independent Gaussian cell densities with standard deviation `amplitude`.
pub fn make_noise(grid: &GridSpec, m: usize, amplitude: f64) -> Result<GridMeasure> {
    let mut mu = grid.empty(m)?;
    let vol = mu.cell_volume();
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed);
    for v in mu.values_mut() {
        let g: f64 = StandardNormal.sample(&mut rng);
        *v = amplitude * g * vol;
    }
    Ok(mu)
}
