//! Lebesgue decomposition, polar fields and blow-ups of grid measures.

use serde::{Deserialize, Serialize};

use super::GridMeasure;
use crate::error::{Error, Result};
use crate::linalg;

/// Split `mu = ac + singular` cell by cell.
#[derive(Clone, Debug, PartialEq)]
pub struct Decomposition {
    /// Absolutely continuous part as a measure (per-cell integrals).
    pub ac: GridMeasure,
    pub singular: GridMeasure,
    /// Median cell density the threshold is relative to.
    pub reference_density: f64,
    /// Absolute density above which a cell counts as singular.
    pub threshold_used: f64,
    pub singular_cells: Vec<bool>,
}

impl Decomposition {
    /// Densities `ac(cell) / |cell|`, `m` values per cell.
    pub fn ac_density(&self) -> Vec<f64> {
        let vol = self.ac.cell_volume();
        self.ac.values().iter().map(|x| x / vol).collect()
    }

    pub fn singular_mass(&self) -> f64 {
        self.singular.total_variation()
    }

    pub fn ac_mass(&self) -> f64 {
        self.ac.total_variation()
    }
}

/// Cells whose density `|mu(cell)| / |cell|` exceeds `density_threshold`
/// times the median density over all cells are singular. In a singular
/// cell the absolutely continuous share is estimated from the densities of
/// its non-singular neighbours and taken parallel to `mu(cell)`, so the
/// masses of the two parts add up to `|mu(cell)|`.
pub fn lebesgue_decompose(mu: &GridMeasure, density_threshold: f64) -> Result<Decomposition> {
    if !(density_threshold > 0.0) {
        return Err(Error::dim("density threshold must be positive"));
    }
    let vol = mu.cell_volume();
    let n = mu.cell_count();
    let density: Vec<f64> = (0..n).map(|c| mu.cell_mass(c) / vol).collect();
    if density.iter().all(|x| *x == 0.0) {
        return Err(Error::EmptyMeasure("cannot decompose the zero measure".into()));
    }
    let mut sorted = density.clone();
    sorted.sort_by(f64::total_cmp);
    let reference = if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) };
    let threshold = density_threshold * reference;
    let singular_cells: Vec<bool> = density.iter().map(|&x| x > threshold).collect();

    let mut ac = mu.zeros_like(mu.channels());
    let mut singular = mu.zeros_like(mu.channels());
    for cell in 0..n {
        let v = mu.cell_value(cell);
        if !singular_cells[cell] {
            ac.cell_value_mut(cell).copy_from_slice(v);
            continue;
        }
        let (mut sum, mut count) = (0.0, 0usize);
        for nb in neighbours(mu, cell) {
            if !singular_cells[nb] {
                sum += density[nb];
                count += 1;
            }
        }
        let estimate = if count > 0 { sum / count as f64 * vol } else { 0.0 };
        let share = (estimate / mu.cell_mass(cell)).min(1.0);
        for (c, x) in v.iter().enumerate() {
            let a = share * x;
            ac.cell_value_mut(cell)[c] = a;
            singular.cell_value_mut(cell)[c] = x - a;
        }
    }
    Ok(Decomposition { ac, singular, reference_density: reference, threshold_used: threshold, singular_cells })
}

/// Indices of the up to `3^d - 1` cells sharing a face, edge or corner.
fn neighbours(mu: &GridMeasure, cell: usize) -> Vec<usize> {
    let idx = mu.cell_multi_index(cell);
    let n = mu.cells_per_axis() as isize;
    let d = idx.len();
    let mut out = Vec::new();
    for code in 0..3usize.pow(d as u32) {
        let mut c = code;
        let mut other = Vec::with_capacity(d);
        let mut zero = true;
        for &i in &idx {
            let off = (c % 3) as isize - 1;
            c /= 3;
            zero &= off == 0;
            let j = i as isize + off;
            if j < 0 || j >= n {
                break;
            }
            other.push(j as usize);
        }
        if !zero && other.len() == d {
            out.push(mu.cell_index(&other));
        }
    }
    out
}

/// `dmu / d|mu|` on cells carrying at least `mass_floor` times the largest cell mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarField {
    pub channels: usize,
    pub directions: Vec<Option<Vec<f64>>>,
}

impl PolarField {
    pub fn get(&self, cell: usize) -> Option<&[f64]> {
        self.directions[cell].as_deref()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.directions.iter().enumerate().filter_map(|(i, d)| d.as_ref().map(|_| i))
    }
}

pub fn polar(mu: &GridMeasure, mass_floor: f64) -> PolarField {
    let masses: Vec<f64> = (0..mu.cell_count()).map(|c| mu.cell_mass(c)).collect();
    let max = masses.iter().copied().fold(0.0, f64::max);
    let directions = masses
        .iter()
        .enumerate()
        .map(|(cell, &m)| {
            (m > 0.0 && m >= mass_floor * max).then(|| mu.cell_value(cell).iter().map(|x| x / m).collect())
        })
        .collect();
    PolarField { channels: mu.channels(), directions }
}

/// `(T^{x0,r})_# mu / |mu|(B_r(x0))` on `[-1, 1]^d` with `out_cells` cells
/// per axis, where `T^{x0,r}(y) = (y - x0)/r`. Mass of a source cell is
/// spread over the output cells in proportion to the overlap of its image.
/// `|mu|(B_r(x0))` sums the cells whose centers lie in the ball.
pub fn blowup(mu: &GridMeasure, x0: &[f64], r: f64, out_cells: usize) -> Result<GridMeasure> {
    let d = mu.dim();
    if x0.len() != d {
        return Err(Error::dim(format!("blow-up point has length {}, measure dimension is {d}", x0.len())));
    }
    if !(r > 0.0) {
        return Err(Error::dim("blow-up radius must be positive"));
    }
    let slack = 1e-12 * r;
    if (0..d).any(|a| x0[a] - r < mu.lower()[a] - slack || x0[a] + r > mu.upper()[a] + slack) {
        return Err(Error::dim("blow-up ball is not inside the box"));
    }
    let ball = ball_mass(mu, x0, r);
    if ball == 0.0 {
        return Err(Error::EmptyMeasure("no mass in the blow-up ball".into()));
    }
    let mut out = GridMeasure::zeros(d, mu.channels(), vec![-1.0; d], vec![1.0; d], out_cells)?;
    let out_h = 2.0 / out_cells as f64;
    // per axis: for every source index, the output cells hit and the overlap fractions
    let weights: Vec<Vec<Vec<(usize, f64)>>> = (0..d)
        .map(|a| {
            let h = mu.cell_size(a);
            (0..mu.cells_per_axis())
                .map(|i| {
                    let lo = (mu.lower()[a] + i as f64 * h - x0[a]) / r;
                    let hi = lo + h / r;
                    let first = ((lo.max(-1.0) + 1.0) / out_h).floor().max(0.0) as usize;
                    let mut hits = Vec::new();
                    let mut j = first;
                    while j < out_cells {
                        let (olo, ohi) = (-1.0 + j as f64 * out_h, -1.0 + (j + 1) as f64 * out_h);
                        if olo >= hi {
                            break;
                        }
                        let overlap = hi.min(ohi) - lo.max(olo);
                        if overlap > 0.0 {
                            hits.push((j, overlap / (hi - lo)));
                        }
                        j += 1;
                    }
                    hits
                })
                .collect()
        })
        .collect();
    let m = mu.channels();
    for cell in 0..mu.cell_count() {
        let v = mu.cell_value(cell);
        if v.iter().all(|x| *x == 0.0) {
            continue;
        }
        let idx = mu.cell_multi_index(cell);
        if (0..d).any(|a| weights[a][idx[a]].is_empty()) {
            continue;
        }
        // iterate over the product of per-axis hits
        let lists: Vec<&Vec<(usize, f64)>> = (0..d).map(|a| &weights[a][idx[a]]).collect();
        let mut pos = vec![0usize; d];
        'product: loop {
            let mut w = 1.0 / ball;
            let mut target = 0;
            for a in 0..d {
                let (j, f) = lists[a][pos[a]];
                w *= f;
                target = target * out_cells + j;
            }
            let dst = &mut out.values_mut()[target * m..(target + 1) * m];
            dst.iter_mut().zip(v).for_each(|(x, y)| *x += w * y);
            let mut a = d;
            loop {
                if a == 0 {
                    break 'product;
                }
                a -= 1;
                pos[a] += 1;
                if pos[a] < lists[a].len() {
                    break;
                }
                pos[a] = 0;
            }
        }
    }
    Ok(out)
}

/// `|mu|` of the cells whose centers lie in the closed ball.
pub(crate) fn ball_mass(mu: &GridMeasure, x0: &[f64], r: f64) -> f64 {
    (0..mu.cell_count())
        .filter(|&cell| {
            let c = mu.cell_center(cell);
            linalg::norm2(&c.iter().zip(x0).map(|(p, q)| p - q).collect::<Vec<_>>()) <= r
        })
        .map(|cell| mu.cell_mass(cell))
        .sum()
}
