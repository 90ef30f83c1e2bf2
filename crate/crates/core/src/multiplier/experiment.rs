use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::diagnostics::weak11_profile;
use super::field::{signed, PeriodicField};
use super::regularizer::{afree_projection, build_regularizer, mihlin_constant, principal_multiplier, MihlinParams, MihlinReport};
use super::spec::{apply_multiplier, bessel_potential, mollify, MollifierShape, MollifierSpec};
use crate::error::{Error, Result};
use crate::linalg;
use crate::operator::PdeOperator;
use crate::wavecone::{self, SphereSampling};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioKind {
    /// Blow-ups of a smooth positive density; the limit is the constant 1.
    Smooth,
    /// A line measure through the origin (self-similar under blow-up).
    Line,
    /// A unit point mass at the origin.
    Spike,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViolationMode {
    /// `V = t (Id - Pi)(P0 u)`, the part of `P0 u` outside `Ker A^k(xi)`.
    Projection,
    /// `V = t E u` for a fixed unit vector `E` orthogonal to `P0`.
    Tilt,
}

/// Parameters of a blow-up sequence. `u_j = nu_j * phi_{eps_j}` on the
/// torus `[-L/2, L/2)^d`, with `r_j = radius_scale 2^-j` and
/// `eps_j = max(min(1/j, r_j), min_eps_cells h)`; the defect is
/// `V_j = t_j X_j` with `t_j = violation_decay^(j-1)` and `X_j` chosen by
/// `violation`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub cells: usize,
    pub period: f64,
    pub steps: usize,
    pub seed: u64,
    pub mollifier: MollifierShape,
    pub radius_scale: f64,
    pub min_eps_cells: f64,
    pub violation: Option<ViolationMode>,
    pub violation_decay: Option<f64>,
    /// Cut-off `chi`: 1 on `|x| <= chi_inner`, 0 on `|x| >= chi_outer`.
    pub chi_inner: f64,
    pub chi_outer: f64,
    /// Axis of the line in the `line` scenario.
    pub line_axis: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            kind: ScenarioKind::Smooth,
            cells: 64,
            period: 4.0,
            steps: 4,
            seed: 0,
            mollifier: MollifierShape::Bump,
            radius_scale: 1.0,
            min_eps_cells: 2.0,
            violation: None,
            violation_decay: None,
            chi_inner: 0.5,
            chi_outer: 0.75,
            line_axis: 0,
        }
    }
}

impl Scenario {
    pub fn of_kind(kind: ScenarioKind) -> Self {
        Scenario { kind, ..Default::default() }
    }

    pub fn from_json(text: &str) -> Result<Scenario> {
        serde_json::from_str(text).map_err(|e| Error::parse(format!("line {}, column {}", e.line(), e.column()), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn violation_mode(&self) -> ViolationMode {
        self.violation.unwrap_or(match self.kind {
            ScenarioKind::Spike => ViolationMode::Tilt,
            _ => ViolationMode::Projection,
        })
    }

    pub fn decay(&self) -> f64 {
        self.violation_decay.unwrap_or(match self.kind {
            ScenarioKind::Spike => 0.5,
            _ => 1.0,
        })
    }

    fn check(&self, d: usize) -> Result<()> {
        if self.cells < 8 || self.steps == 0 || !(self.period > 0.0) || !(self.radius_scale > 0.0) {
            return Err(Error::dim("scenario needs cells >= 8, steps >= 1, period > 0 and radius_scale > 0"));
        }
        if !(0.0 < self.chi_inner && self.chi_inner < self.chi_outer && self.chi_outer < 0.5 * self.period) {
            return Err(Error::dim("cut-off radii must satisfy 0 < chi_inner < chi_outer < L/2"));
        }
        if self.line_axis >= d {
            return Err(Error::dim(format!("line axis {} out of range for d = {d}", self.line_axis)));
        }
        if !(self.decay() > 0.0 && self.decay() <= 1.0) {
            return Err(Error::dim("violation_decay must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn radius(&self, j: usize) -> f64 {
        self.radius_scale * 0.5f64.powi(j as i32)
    }

    pub fn epsilon(&self, j: usize) -> f64 {
        let h = self.period / self.cells as f64;
        (1.0 / j as f64).min(self.radius(j)).max(self.min_eps_cells * h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub j: usize,
    pub radius: f64,
    pub epsilon: f64,
    pub l1_chi_u: f64,
    pub l1_chi_v: f64,
    pub l1_r: f64,
    /// `|chi (Id - Pi)(P0 u)|_1 / |chi u|_1`: how far `P0 u` is from being `A^k`-free.
    pub relative_violation: f64,
    pub weak11_t0: f64,
    /// `weak11_t0 / l1_chi_v`, the observed weak-(1,1) constant.
    pub weak11_ratio: Option<f64>,
    pub l1_f: f64,
    pub l1_g: f64,
    pub l1_h: f64,
    /// `max (f^- - |g + h|)`; non-positive because `chi u >= 0`.
    pub f_negative_excess: f64,
    /// `max |chi u - (f + g + h)| / max |chi u|`.
    pub identity_error: f64,
    /// `|chi u_j - chi u_{j-1}|_1`.
    pub cauchy_increment: Option<f64>,
    /// `|chi u_j - chi|_1` for the smooth scenario.
    pub distance_to_limit: Option<f64>,
    /// Spectral energy of `chi u` above 3/4 of the Nyquist frequency.
    pub aliasing: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub operator: String,
    pub p0: Vec<f64>,
    pub scenario: Scenario,
    pub cone_residual: f64,
    pub t0_mihlin: MihlinReport,
    pub rows: Vec<ExperimentRow>,
    pub max_identity_error: f64,
    /// Largest over smallest observed weak-(1,1) constant.
    pub weak11_ratio_spread: Option<f64>,
    /// Least-squares slope of `log distance_to_limit` against `log r_j`.
    pub limit_rate: Option<f64>,
    pub min_relative_violation: f64,
    pub max_l1_r: f64,
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "j,radius,epsilon,l1_chi_u,l1_chi_v,l1_r,relative_violation,weak11_t0,weak11_ratio,l1_f,l1_g,l1_h,f_negative_excess,identity_error,cauchy_increment,distance_to_limit,aliasing"
        )?;
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        for r in &self.rows {
            writeln!(
                out,
                "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e},{:e},{:e},{},{},{:e}",
                r.j,
                r.radius,
                r.epsilon,
                r.l1_chi_u,
                r.l1_chi_v,
                r.l1_r,
                r.relative_violation,
                r.weak11_t0,
                opt(r.weak11_ratio),
                r.l1_f,
                r.l1_g,
                r.l1_h,
                r.f_negative_excess,
                r.identity_error,
                opt(r.cauchy_increment),
                opt(r.distance_to_limit),
                r.aliasing
            )?;
        }
        Ok(())
    }
}

/// Smooth radial cut-off, 1 inside `inner`, 0 outside `outer`.
pub fn cutoff(like: &PeriodicField, inner: f64, outer: f64) -> PeriodicField {
    let psi = |t: f64| if t <= 0.0 { 0.0 } else { (-1.0 / t).exp() };
    let d = like.dim();
    PeriodicField::from_fn(d, 1, like.cells_per_axis(), like.period(), |x| {
        let r = linalg::norm2(x);
        let s = ((r - inner) / (outer - inner)).clamp(0.0, 1.0);
        vec![psi(1.0 - s) / (psi(1.0 - s) + psi(s))]
    })
    .expect("valid grid")
}

/// Fraction of `sum |f^|^2` carried by modes with some `|k_a| > 3N/8`.
pub fn aliasing_fraction(f: &PeriodicField) -> f64 {
    let hat = f.forward();
    let n = f.cells_per_axis() as i64;
    let (mut high, mut total) = (0.0, 0.0);
    for c in 0..f.channels() {
        for (k, z) in hat.channel(c).iter().enumerate() {
            let e = z.norm_sqr();
            total += e;
            if f.multi_index(k).iter().any(|&i| 8 * signed(i, n as usize).abs() > 3 * n) {
                high += e;
            }
        }
    }
    if total == 0.0 { 0.0 } else { high / total }
}

fn blowup_density(scenario: &Scenario, d: usize, j: usize) -> Result<PeriodicField> {
    let n = scenario.cells;
    let l = scenario.period;
    let h = l / n as f64;
    match scenario.kind {
        ScenarioKind::Smooth => {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            let phases: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
            let rho = move |y: &[f64]| 1.0 + 0.5 * y.iter().zip(&phases).map(|(v, p)| (std::f64::consts::TAU * v + p).sin()).product::<f64>();
            let r = scenario.radius(j);
            let rho0 = rho(&vec![0.0; d]);
            PeriodicField::from_fn(d, 1, n, l, move |x| {
                let y: Vec<f64> = x.iter().map(|v| r * v).collect();
                vec![rho(&y) / rho0]
            })
        }
        ScenarioKind::Line => {
            let axis = scenario.line_axis;
            // unit mass per unit length on {x_b = 0 for b != axis}
            PeriodicField::from_fn(d, 1, n, l, move |x| {
                let on = x.iter().enumerate().all(|(b, v)| b == axis || v.abs() < 0.5 * h);
                vec![if on { h.powi(1 - d as i32) } else { 0.0 }]
            })
        }
        ScenarioKind::Spike => PeriodicField::from_fn(d, 1, n, l, move |x| {
            let on = x.iter().all(|v| v.abs() < 0.5 * h);
            vec![if on { h.powi(-(d as i32)) } else { 0.0 }]
        }),
    }
}

/// A unit vector orthogonal to `p0`, drawn from `seed`.
fn tilt_direction(p0: &[f64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let pn = linalg::norm2(p0);
    loop {
        let mut e: Vec<f64> = (0..p0.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = linalg::dot(&e, p0) / (pn * pn);
        e.iter_mut().zip(p0).for_each(|(x, p)| *x -= c * p);
        let en = linalg::norm2(&e);
        if en > 1e-3 {
            e.iter_mut().for_each(|x| *x /= en);
            return e;
        }
    }
}

fn max_norm_of(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Runs the decomposition `chi u_j = T0[chi V_j] + T1[chi u_j] + T2[R_j]`
/// along a blow-up sequence, with `R_j = A^k(P0 chi u_j - chi V_j)`
/// computed spectrally.
pub fn regularization_experiment(op: &PdeOperator, p0: &[f64], scenario: &Scenario) -> Result<ExperimentReport> {
    let d = op.dim();
    scenario.check(d)?;
    if p0.len() != op.source_dim() {
        return Err(Error::dim(format!("P0 has length {}, operator acts on R^{}", p0.len(), op.source_dim())));
    }
    let verdict = wavecone::in_wave_cone(op, p0, wavecone::DEFAULT_TOL, &SphereSampling::default())?;
    if verdict.member {
        return Err(Error::ScenarioContradictsHypothesis { residual: verdict.residual });
    }
    let reg = build_regularizer(op, p0)?;
    let principal = principal_multiplier(op)?;
    let projection = afree_projection(op, wavecone::DEFAULT_RANK_TOL)?;
    let mode = scenario.violation_mode();
    let tilt = tilt_direction(p0, scenario.seed);
    let like = PeriodicField::zeros(d, 1, scenario.cells, scenario.period)?;
    let chi = cutoff(&like, scenario.chi_inner, scenario.chi_outer);

    let mut rows: Vec<ExperimentRow> = Vec::new();
    let mut previous: Option<PeriodicField> = None;
    for j in 1..=scenario.steps {
        let eps = scenario.epsilon(j);
        let moll = MollifierSpec { shape: scenario.mollifier, epsilon: eps };
        let u = mollify(&blowup_density(scenario, d, j)?, &moll)?;
        let p0u = u.times_vector(p0)?;
        let deviation = p0u.sub(&apply_multiplier(&p0u, &projection)?)?;
        let t = scenario.decay().powi(j as i32 - 1);
        let v = match mode {
            ViolationMode::Projection => deviation.scaled(t),
            ViolationMode::Tilt => u.times_vector(&tilt)?.scaled(t),
        };
        let chi_u = u.times_scalar_field(&chi)?;
        let chi_v = v.times_scalar_field(&chi)?;
        let r = apply_multiplier(&chi_u.times_vector(p0)?.sub(&chi_v)?, &principal)?;
        let f = apply_multiplier(&chi_v, &reg.t0)?;
        let g = apply_multiplier(&chi_u, &reg.t1)?;
        let h = apply_multiplier(&r, &reg.t2)?;
        let sum = f.add(&g)?.add(&h)?;
        let scale = max_norm_of(&chi_u.real_parts());
        let identity_error = chi_u.sub(&sum)?.pointwise_norm().into_iter().fold(0.0, f64::max) / scale;
        let gh = g.add(&h)?;
        let f_negative_excess = f
            .data()
            .iter()
            .zip(gh.data())
            .map(|(a, b)| (-a.re).max(0.0) - b.re.abs())
            .fold(f64::NEG_INFINITY, f64::max);
        let l1_chi_u = chi_u.l1_norm();
        let l1_chi_v = chi_v.l1_norm();
        let weak = weak11_profile(&f).headline;
        rows.push(ExperimentRow {
            j,
            radius: scenario.radius(j),
            epsilon: eps,
            l1_chi_u,
            l1_chi_v,
            l1_r: r.l1_norm(),
            relative_violation: deviation.times_scalar_field(&chi)?.l1_norm() / l1_chi_u,
            weak11_t0: weak,
            weak11_ratio: (l1_chi_v > 0.0).then(|| weak / l1_chi_v),
            l1_f: f.l1_norm(),
            l1_g: g.l1_norm(),
            l1_h: h.l1_norm(),
            f_negative_excess,
            identity_error,
            cauchy_increment: previous.as_ref().map(|p| chi_u.sub(p).map(|x| x.l1_norm())).transpose()?,
            distance_to_limit: match scenario.kind {
                ScenarioKind::Smooth => Some(chi_u.sub(&chi)?.l1_norm()),
                _ => None,
            },
            aliasing: aliasing_fraction(&chi_u),
        });
        previous = Some(chi_u);
    }

    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.weak11_ratio).collect();
    let weak11_ratio_spread = (!ratios.is_empty()).then(|| {
        ratios.iter().copied().fold(0.0, f64::max) / ratios.iter().copied().fold(f64::INFINITY, f64::min)
    });
    let limit_rate = {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter_map(|r| r.distance_to_limit.filter(|x| *x > 0.0).map(|x| (r.radius.ln(), x.ln())))
            .collect();
        (pts.len() >= 2).then(|| {
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            sxy / sxx
        })
    };
    let t0_mihlin = mihlin_constant(&reg.t0, d, &MihlinParams::default())?;
    let min_relative_violation = rows.iter().map(|r| r.relative_violation).fold(f64::INFINITY, f64::min);
    let max_l1_r = rows.iter().map(|r| r.l1_r).fold(0.0, f64::max);
    let mut notes = Vec::new();
    if !t0_mihlin.bounded {
        notes.push("sampled Mihlin quantities of T0 grow at high frequency".to_string());
    }
    let last = rows.last().expect("steps >= 1");
    if last.relative_violation > 0.1 {
        notes.push(format!(
            "P0 u stays a fixed distance from A-free fields (relative violation {:.3} at j = {}); no A-free measure has these blow-ups",
            last.relative_violation, last.j
        ));
    }
    if rows.len() >= 2 && last.l1_r > 2.0 * rows[0].l1_r {
        notes.push("remainders are not bounded in L1 along the sequence".to_string());
    }
    if let Some(rate) = limit_rate {
        notes.push(format!("chi u_j -> chi in L1 with observed rate r_j^{rate:.2}"));
    }
    Ok(ExperimentReport {
        operator: op.label().to_string(),
        p0: p0.to_vec(),
        scenario: scenario.clone(),
        cone_residual: verdict.residual,
        t0_mihlin,
        max_identity_error: rows.iter().map(|r| r.identity_error).fold(0.0, f64::max),
        rows,
        weak11_ratio_spread,
        limit_rate,
        min_relative_violation,
        max_l1_r,
        notes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSweepRow {
    pub cells: usize,
    pub p: f64,
    pub norm: f64,
}

/// `|(Id - Laplacian)^(-s/2) delta_h|_p` for a unit-mass one-cell spike at
/// the origin, on `[-L/2, L/2)^d` with each resolution in `cells`.
pub fn bessel_lp_sweep(d: usize, s: f64, ps: &[f64], cells: &[usize], period: f64) -> Result<Vec<LpSweepRow>> {
    let mut out = Vec::new();
    for &n in cells {
        let mut spike = PeriodicField::zeros(d, 1, n, period)?;
        let center = (0..d).fold(0, |acc, _| acc * n + n / 2);
        spike.data_mut()[center].re = 1.0 / spike.cell_volume();
        let g = bessel_potential(&spike, s)?;
        for &p in ps {
            out.push(LpSweepRow { cells: n, p, norm: g.lp_norm(p) });
        }
    }
    Ok(out)
}
