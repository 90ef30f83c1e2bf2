//! End-to-end check that the polar of the singular part lies in the wave cone.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{afree_residual, lebesgue_decompose, polar, GridMeasure, TestFunctionSpec};
use crate::error::{Error, Result};
use crate::operator::PdeOperator;
use crate::wavecone::{self, SphereSampling};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyParams {
    /// Relative density threshold for the singular/ac split.
    pub density_threshold: f64,
    /// Polar vectors are taken on singular cells above this fraction of the largest singular cell mass.
    pub mass_floor: f64,
    pub cone_tol: f64,
    pub sampling: SphereSampling,
    pub test_functions: TestFunctionSpec,
    /// The weak residual passes the gate when it is at most `gate_factor * h`.
    pub gate_factor: f64,
}

impl Default for VerifyParams {
    fn default() -> Self {
        VerifyParams {
            density_threshold: 10.0,
            mass_floor: 1e-6,
            cone_tol: 1e-4,
            sampling: SphereSampling::default(),
            test_functions: TestFunctionSpec::default(),
            gate_factor: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub index: Vec<usize>,
    pub center: Vec<f64>,
    pub singular_mass: f64,
    pub residual: f64,
    pub member: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub operator: String,
    pub h: f64,
    pub afree_residual: f64,
    pub afree_gate: f64,
    pub afree_gate_passed: bool,
    pub total_mass: f64,
    pub singular_mass: f64,
    /// Singular mass whose polar is in the cone, over all singular mass;
    /// `None` when there is no singular mass.
    pub mass_fraction_in_cone: Option<f64>,
    pub worst_polar_residual: f64,
    pub checked_cells: usize,
    pub cone_tol: f64,
    pub density_threshold: f64,
    pub cells: Vec<CellReport>,
}

impl VerificationReport {
    pub fn write_cells_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.cells.first().map_or(0, |c| c.index.len());
        let mut header: Vec<String> = (1..=d).map(|a| format!("i_{a}")).collect();
        header.extend((1..=d).map(|a| format!("x_{a}")));
        header.extend(["singular_mass", "residual", "member"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for c in &self.cells {
            let mut row: Vec<String> = c.index.iter().map(|i| i.to_string()).collect();
            row.extend(c.center.iter().map(|x| format!("{x:e}")));
            row.push(format!("{:e}", c.singular_mass));
            row.push(format!("{:e}", c.residual));
            row.push(c.member.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Decomposes `mu`, takes the polar of the singular part and runs the
/// wave-cone test on every polar vector. The weak residual is reported
/// against its gate but does not change the verdicts.
pub fn verify_polar_in_cone(op: &PdeOperator, mu: &GridMeasure, params: &VerifyParams) -> Result<VerificationReport> {
    if op.dim() != mu.dim() || op.source_dim() != mu.channels() {
        return Err(Error::dim(format!(
            "operator acts on R^{} in dimension {}, measure has {} channels in dimension {}",
            op.source_dim(),
            op.dim(),
            mu.channels(),
            mu.dim()
        )));
    }
    let residual = afree_residual(op, mu, &params.test_functions)?;
    let gate = params.gate_factor * mu.h();
    let dec = lebesgue_decompose(mu, params.density_threshold)?;
    let singular_mass = dec.singular_mass();
    let field = polar(&dec.singular, params.mass_floor);
    let support: Vec<usize> = field.support().collect();
    let cells = support
        .par_iter()
        .map(|&cell| -> Result<CellReport> {
            let v = field.get(cell).expect("support cell");
            let verdict = wavecone::in_wave_cone(op, v, params.cone_tol, &params.sampling)?;
            Ok(CellReport {
                index: mu.cell_multi_index(cell),
                center: mu.cell_center(cell),
                singular_mass: dec.singular.cell_mass(cell),
                residual: verdict.residual,
                member: verdict.member,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let in_cone = cells.iter().filter(|c| c.member).map(|c| c.singular_mass).fold(0.0, |a, b| a + b);
    Ok(VerificationReport {
        operator: op.label().to_string(),
        h: mu.h(),
        afree_residual: residual,
        afree_gate: gate,
        afree_gate_passed: residual <= gate,
        total_mass: mu.total_variation(),
        singular_mass,
        mass_fraction_in_cone: (singular_mass > 0.0).then(|| (in_cone / singular_mass).clamp(0.0, 1.0)),
        worst_polar_residual: cells.iter().map(|c| c.residual).fold(0.0, f64::max),
        checked_cells: cells.len(),
        cone_tol: params.cone_tol,
        density_threshold: params.density_threshold,
        cells,
    })
}
