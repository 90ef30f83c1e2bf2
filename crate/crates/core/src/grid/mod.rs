//! Vector-valued measures on uniform box grids.
//!
//! A [`GridMeasure`] stores `mu(cell)` for every cell, not densities, so a
//! hyperplane measure keeps its total mass when the grid is refined. Cells
//! are numbered row-major (last axis fastest) and each cell holds `m`
//! consecutive channel values.

mod afree;
mod analysis;
mod generators;
mod verify;

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::linalg;

pub use afree::{afree_residual, TestFunctionSpec};
pub use analysis::{blowup, lebesgue_decompose, polar, Decomposition, PolarField};
pub use generators::{
    make_bd_jump, make_bv_jump, make_current_segment, make_flat_measure, make_noise, make_smooth_density, FlatSpec,
    GridSpec, JumpSpec,
};
pub use verify::{verify_polar_in_cone, CellReport, VerificationReport, VerifyParams};

const MAGIC: &[u8; 5] = b"GMES1";

#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    d: usize,
    m: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cells: usize,
    values: Vec<f64>,
    periodic: bool,
}

impl GridMeasure {
    pub fn zeros(d: usize, m: usize, lower: Vec<f64>, upper: Vec<f64>, cells: usize) -> Result<Self> {
        if d == 0 || m == 0 || cells == 0 {
            return Err(Error::dim("grid needs d, m and cells per axis all positive"));
        }
        if lower.len() != d || upper.len() != d {
            return Err(Error::dim(format!("box corners must have length {d}")));
        }
        if lower.iter().zip(&upper).any(|(a, b)| !(b > a) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::dim("box must have positive finite extent along every axis"));
        }
        let count = cells
            .checked_pow(d as u32)
            .and_then(|c| c.checked_mul(m))
            .ok_or_else(|| Error::dim("grid too large"))?;
        Ok(GridMeasure { d, m, lower, upper, cells, values: vec![0.0; count], periodic: false })
    }

    pub fn from_values(d: usize, m: usize, lower: Vec<f64>, upper: Vec<f64>, cells: usize, values: Vec<f64>) -> Result<Self> {
        let mut out = Self::zeros(d, m, lower, upper, cells)?;
        if values.len() != out.values.len() {
            return Err(Error::dim(format!("expected {} values, got {}", out.values.len(), values.len())));
        }
        out.values = values;
        Ok(out)
    }

    /// Same grid and channel count, zero values.
    pub fn zeros_like(&self, m: usize) -> Self {
        GridMeasure { m, values: vec![0.0; self.cell_count() * m], ..self.clone() }
    }

    pub fn with_periodic(mut self, periodic: bool) -> Self {
        self.periodic = periodic;
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn channels(&self) -> usize {
        self.m
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn cell_count(&self) -> usize {
        self.values.len() / self.m
    }

    pub fn cell_size(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.cells as f64
    }

    /// Largest cell side.
    pub fn h(&self) -> f64 {
        (0..self.d).map(|a| self.cell_size(a)).fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.d).map(|a| self.cell_size(a)).product()
    }

    pub fn box_volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(a, b)| b - a).product()
    }

    pub fn cell_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.cells + i)
    }

    pub fn cell_multi_index(&self, mut cell: usize) -> Vec<usize> {
        let mut idx = vec![0; self.d];
        for a in (0..self.d).rev() {
            idx[a] = cell % self.cells;
            cell /= self.cells;
        }
        idx
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        self.cell_multi_index(cell)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lower[a] + (i as f64 + 0.5) * self.cell_size(a))
            .collect()
    }

    /// Cell containing `x`, or `None` outside the half-open box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut cell = 0;
        for a in 0..self.d {
            let t = ((x[a] - self.lower[a]) / self.cell_size(a)).floor();
            if !(t >= 0.0 && t < self.cells as f64) {
                return None;
            }
            cell = cell * self.cells + t as usize;
        }
        Some(cell)
    }

    pub fn cell_value(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.m..(cell + 1) * self.m]
    }

    pub fn cell_value_mut(&mut self, cell: usize) -> &mut [f64] {
        &mut self.values[cell * self.m..(cell + 1) * self.m]
    }

    pub fn cell_mass(&self, cell: usize) -> f64 {
        linalg::norm2(self.cell_value(cell))
    }

    /// `|mu|(box) = sum_cells |mu(cell)|`.
    pub fn total_variation(&self) -> f64 {
        (0..self.cell_count()).map(|c| self.cell_mass(c)).sum()
    }

    /// `sum_cells mu(cell)`.
    pub fn total(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for cell in self.values.chunks(self.m) {
            out.iter_mut().zip(cell).for_each(|(a, b)| *a += b);
        }
        out
    }

    pub fn scaled(&self, t: f64) -> Self {
        GridMeasure { values: self.values.iter().map(|x| t * x).collect(), ..self.clone() }
    }

    pub fn add(&self, other: &GridMeasure) -> Result<Self> {
        if (self.d, self.m, self.cells) != (other.d, other.m, other.cells) || self.lower != other.lower || self.upper != other.upper {
            return Err(Error::dim("adding measures on different grids"));
        }
        Ok(GridMeasure {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    /// Second-order finite difference of the cell values along `axis`,
    /// divided by the cell size. Same layout as [`values`](Self::values).
    pub fn axis_derivative(&self, axis: usize) -> Vec<f64> {
        let n = self.cells;
        let h = self.cell_size(axis);
        let stride = n.pow((self.d - 1 - axis) as u32) * self.m;
        let mut out = vec![0.0; self.values.len()];
        let v = &self.values;
        for (flat, slot) in out.iter_mut().enumerate() {
            let i = (flat / stride) % n;
            let at = |j: usize| v[flat - i * stride + j * stride];
            *slot = if self.periodic {
                (at((i + 1) % n) - at((i + n - 1) % n)) / (2.0 * h)
            } else if n < 3 {
                if n == 1 { 0.0 } else { (at(1) - at(0)) / h }
            } else if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
            } else if i == n - 1 {
                (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) / (2.0 * h)
            } else {
                (at(i + 1) - at(i - 1)) / (2.0 * h)
            };
        }
        out
    }

    /// Binary `GMES1` layout, little-endian: magic, `d`, `m`, cells per axis
    /// (u32 each), lower and upper corners (f64 each), then the values.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(MAGIC)?;
        for x in [self.d, self.m, self.cells] {
            out.write_all(&(x as u32).to_le_bytes())?;
        }
        for x in self.lower.iter().chain(&self.upper).chain(&self.values) {
            out.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 5];
        input.read_exact(&mut magic).map_err(|_| Error::parse("byte 0", "file too short for a GMES1 header"))?;
        if &magic != MAGIC {
            return Err(Error::parse("byte 0", "missing GMES1 magic"));
        }
        let mut word = [0u8; 4];
        let mut header = [0usize; 3];
        for (i, slot) in header.iter_mut().enumerate() {
            input
                .read_exact(&mut word)
                .map_err(|_| Error::parse(format!("byte {}", 5 + 4 * i), "truncated header"))?;
            *slot = u32::from_le_bytes(word) as usize;
        }
        let [d, m, cells] = header;
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        let count = cells
            .checked_pow(d as u32)
            .and_then(|c| c.checked_mul(m))
            .and_then(|c| c.checked_add(2 * d))
            .ok_or_else(|| Error::parse("byte 5", "header describes an impossibly large grid"))?;
        if rest.len() != 8 * count {
            return Err(Error::parse(
                "byte 17",
                format!("expected {} payload bytes for d={d} m={m} cells={cells}, found {}", 8 * count, rest.len()),
            ));
        }
        let floats: Vec<f64> = rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        GridMeasure::from_values(d, m, floats[..d].to_vec(), floats[d..2 * d].to_vec(), cells, floats[2 * d..].to_vec())
    }

    /// One row per cell: multi-index, center, values.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header: Vec<String> = (1..=self.d).map(|a| format!("i_{a}")).collect();
        header.extend((1..=self.d).map(|a| format!("x_{a}")));
        header.extend((1..=self.m).map(|c| format!("v_{c}")));
        writeln!(out, "{}", header.join(","))?;
        for cell in 0..self.cell_count() {
            let mut row: Vec<String> = self.cell_multi_index(cell).iter().map(|i| i.to_string()).collect();
            row.extend(self.cell_center(cell).iter().map(|x| format!("{x:e}")));
            row.extend(self.cell_value(cell).iter().map(|x| format!("{x:e}")));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}
