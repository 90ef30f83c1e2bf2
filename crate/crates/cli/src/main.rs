//! `afree`: symbols, wave cones, k-vectors, measure verification and
//! multiplier experiments from the command line.
//!
//! Exit status: 0 on success or a positive verdict, 1 on a negative verdict
//! (non-member, rank violation, non-simple k-vector, ...), 2 on usage or
//! data errors.

mod input;
mod report;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afree::catalog;
use afree::exterior;
use afree::grid::{self, VerifyParams};
use afree::multiplier::{self, Scenario};
use afree::wavecone::{self, SphereSampling};
use afree::{Error, Result, SCHEMA_VERSIONS};
use clap::{Parser, Subcommand, ValueEnum};

use report::Report;

#[derive(Parser)]
#[command(name = "afree", about = "Wave cones and A-free measures", disable_version_flag = true)]
struct Cli {
    /// Print the report as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for sphere sampling, noise generators and scenarios.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print the program version and the schema versions of all file formats.
    #[arg(long)]
    version: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the principal (or full) symbol at a frequency.
    Symbol {
        #[arg(long)]
        op: String,
        /// Frequency, comma separated.
        #[arg(long, allow_hyphen_values = true)]
        xi: String,
        /// Include lower-order terms.
        #[arg(long)]
        full: bool,
    },
    /// Wave-cone membership of a vector.
    Cone {
        #[arg(value_enum)]
        action: Option<ConeAction>,
        #[arg(long)]
        op: String,
        /// Vector file (CSV or whitespace separated) or inline list.
        #[arg(long, allow_hyphen_values = true)]
        vector: String,
        #[arg(long, default_value_t = wavecone::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = 4096)]
        samples: usize,
        /// Skip the local refinement after sampling.
        #[arg(long)]
        no_refine: bool,
        /// Write the sampled residual landscape as CSV.
        #[arg(long)]
        landscape: Option<PathBuf>,
    },
    /// Check that the rank of the principal symbol is constant on the sphere.
    ConstantRank {
        #[arg(long)]
        op: String,
        #[arg(long, default_value_t = 4096)]
        samples: usize,
        #[arg(long, default_value_t = wavecone::DEFAULT_RANK_TOL)]
        rel_tol: f64,
    },
    /// List the built-in operators or write them as operator spec files.
    Catalog {
        #[arg(long)]
        list: bool,
        /// Directory to write the spec files into.
        #[arg(long)]
        write: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Exterior algebra on k-vectors given as `d k c_1 ... c_N` (file or inline).
    Kvector {
        #[command(subcommand)]
        action: KvectorAction,
    },
    /// Check that the polar of the singular part lies in the wave cone.
    Verify {
        #[arg(long)]
        op: String,
        #[command(flatten)]
        measure: MeasureOpts,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 10.0)]
        density_threshold: f64,
        /// Smallest in-cone fraction of singular mass counted as a positive verdict.
        #[arg(long, default_value_t = 0.99)]
        min_fraction: f64,
        /// Per-cell CSV report.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Blow up a measure at a point and write the rescaled measure.
    Blowup {
        #[command(flatten)]
        measure: MeasureOpts,
        /// Blow-up point (defaults to the origin).
        #[arg(long, allow_hyphen_values = true)]
        at: Option<String>,
        #[arg(long)]
        radius: f64,
        #[arg(long, default_value_t = 64)]
        out_cells: usize,
        /// Output file; `.csv` writes CSV, anything else GMES1.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fourier-multiplier experiments.
    Multiplier {
        #[command(subcommand)]
        action: MultiplierAction,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ConeAction {
    Check,
}

#[derive(clap::Args)]
struct MeasureOpts {
    /// GMES1 file or generator spec such as `bd-jump:a=0,1;n=1,0`.
    #[arg(long, alias = "generator", allow_hyphen_values = true)]
    measure: String,
    /// Cells per axis for generated measures.
    #[arg(long, default_value_t = 128)]
    cells: usize,
    /// Generated measures live on `[lower, upper]^d`.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    lower: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    upper: f64,
}

#[derive(Subcommand)]
enum KvectorAction {
    /// `a ^ b`.
    Wedge { a: String, b: String },
    /// `v -| eta` for a k-vector `v` and a j-covector `eta`.
    Interior { v: String, eta: String },
    /// Whether `v` is a wedge of 1-vectors.
    Simple {
        v: String,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// A unit 1-covector annihilating every given k-vector.
    Annihilator {
        #[arg(required = true)]
        vs: Vec<String>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

#[derive(Subcommand)]
enum MultiplierAction {
    /// Run the regularizing decomposition on a blow-up sequence.
    Demo {
        #[arg(long)]
        op: String,
        /// The fixed direction `P0` (file or inline list).
        #[arg(long, allow_hyphen_values = true)]
        p0: String,
        /// Scenario JSON; defaults apply to omitted fields.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Per-step CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// `L^p` norms of the Bessel potential of a unit spike across resolutions.
    LpSweep {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value = "1.5,3")]
        p: String,
        #[arg(long, default_value = "32,64,128,256")]
        cells: String,
        #[arg(long, default_value_t = 4.0)]
        period: f64,
    },
}

enum Verdict {
    Positive,
    Negative,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    if cli.version {
        print!("{}", version_report().render(cli.json));
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: no subcommand given (try --help)");
        return ExitCode::from(2);
    };
    match run(command, cli.seed) {
        Ok((report, verdict)) => {
            print!("{}", report.render(cli.json));
            match verdict {
                Verdict::Positive => ExitCode::SUCCESS,
                Verdict::Negative => ExitCode::from(1),
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn version_report() -> Report {
    let mut r = Report::new().field("afree", env!("CARGO_PKG_VERSION"));
    for (name, version) in SCHEMA_VERSIONS {
        r.push(name, version);
    }
    r
}

fn sampling(count: usize, seed: Option<u64>) -> SphereSampling {
    SphereSampling::with_count(count).with_seed(seed.unwrap_or(0))
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Positive
    } else {
        Verdict::Negative
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    fs::File::create(path).map(BufWriter::new).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

fn complex_rows(m: &afree::ComplexMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}

fn run(command: Command, seed: Option<u64>) -> Result<(Report, Verdict)> {
    match command {
        Command::Symbol { op, xi, full } => {
            let op = input::operator(&op)?;
            let xi = input::parse_reals(&xi, "--xi")?;
            let m = if full { op.full_symbol(&xi)? } else { op.principal_symbol(&xi)? };
            let report = Report::new()
                .field("operator", op.label())
                .field("order", op.order()?)
                .field("xi", &xi)
                .field("part", if full { "full" } else { "principal" })
                .field("shape", [m.nrows(), m.ncols()])
                .field("matrix", complex_rows(&m));
            Ok((report, Verdict::Positive))
        }
        Command::Cone { action: _, op, vector, tol, samples, no_refine, landscape } => {
            let op = input::operator(&op)?;
            let v = input::vector(&vector)?;
            let mut s = sampling(samples, seed);
            if no_refine {
                s = s.without_refinement();
            }
            let cone = wavecone::in_wave_cone(&op, &v, tol, &s)?;
            let mut report = Report::new()
                .field("operator", op.label())
                .field("vector", &v)
                .field("tol", tol)
                .field("samples", cone.samples_used)
                .field("seed", s.seed)
                .field("member", cone.member)
                .field("residual", cone.residual)
                .field("witness_xi", &cone.witness_xi)
                .field("argmin_xi", &cone.argmin_xi)
                .field("refined", cone.refined);
            if let Some(path) = landscape {
                let rows = wavecone::cone_distance_profile(&op, &v, &s)?;
                wavecone::write_landscape_csv(&rows, create(&path)?)?;
                report.push("landscape", path.display().to_string());
            }
            Ok((report, verdict(cone.member)))
        }
        Command::ConstantRank { op, samples, rel_tol } => {
            let op = input::operator(&op)?;
            let s = sampling(samples, seed);
            let p = wavecone::constant_rank_check(&op, &s, rel_tol)?;
            let report = Report::new()
                .field("operator", op.label())
                .field("samples", p.samples)
                .field("seed", s.seed)
                .field("rel_tol", rel_tol)
                .field("min_rank", p.min_rank)
                .field("max_rank", p.max_rank)
                .field("constant", p.is_constant())
                .field("violation_pair", &p.violation_pair)
                .field("cutoff", p.cutoff);
            Ok((report, verdict(p.is_constant())))
        }
        Command::Catalog { list, write, dim } => {
            let entries = catalog::default_entries(dim)?;
            let mut report = Report::new().field("dimension", dim);
            if list || write.is_none() {
                let rows: Vec<serde_json::Value> = entries
                    .iter()
                    .map(|e| {
                        serde_json::json!({
                            "name": e.name,
                            "file": e.file_name(),
                            "m": e.operator.source_dim(),
                            "n": e.operator.target_dim(),
                            "order": e.operator.order().ok(),
                            "citation": e.citation,
                        })
                    })
                    .collect();
                report.push("entries", rows);
            }
            if let Some(dir) = write {
                fs::create_dir_all(&dir)?;
                let mut written = Vec::new();
                for e in &entries {
                    let path = dir.join(e.file_name());
                    fs::write(&path, e.operator.to_json())?;
                    written.push(path.display().to_string());
                }
                report.push("written", written);
            }
            Ok((report, Verdict::Positive))
        }
        Command::Kvector { action } => kvector(action),
        Command::Verify { op, measure, tol, density_threshold, min_fraction, report: csv } => {
            let op = input::operator(&op)?;
            let mu = load_measure(&measure, seed, Some(op.dim()))?;
            let params = VerifyParams {
                density_threshold,
                cone_tol: tol,
                sampling: sampling(4096, seed),
                ..VerifyParams::default()
            };
            let r = grid::verify_polar_in_cone(&op, &mu, &params)?;
            let ok = r.mass_fraction_in_cone.is_none_or(|f| f >= min_fraction);
            let mut report = Report::new()
                .field("operator", &r.operator)
                .field("measure", &measure.measure)
                .field("cells", mu.cells_per_axis())
                .field("h", r.h)
                .field("afree_residual", r.afree_residual)
                .field("afree_gate", r.afree_gate)
                .field("afree_gate_passed", r.afree_gate_passed)
                .field("total_mass", r.total_mass)
                .field("singular_mass", r.singular_mass)
                .field("mass_fraction_in_cone", r.mass_fraction_in_cone)
                .field("worst_polar_residual", r.worst_polar_residual)
                .field("checked_cells", r.checked_cells)
                .field("cone_tol", r.cone_tol)
                .field("min_fraction", min_fraction)
                .field("verdict", if ok { "polar in cone" } else { "polar outside cone" });
            if let Some(path) = csv {
                let mut w = create(&path)?;
                r.write_cells_csv(&mut w)?;
                w.flush()?;
                report.push("report", path.display().to_string());
            }
            Ok((report, verdict(ok)))
        }
        Command::Blowup { measure, at, radius, out_cells, out } => {
            let mu = load_measure(&measure, seed, None)?;
            let x0 = match at {
                Some(a) => input::parse_reals(&a, "--at")?,
                None => vec![0.0; mu.dim()],
            };
            let b = grid::blowup(&mu, &x0, radius, out_cells)?;
            let mut w = create(&out)?;
            if out.extension().is_some_and(|e| e == "csv") {
                b.write_csv(&mut w)?;
            } else {
                b.write_binary(&mut w)?;
            }
            w.flush()?;
            let report = Report::new()
                .field("measure", &measure.measure)
                .field("at", &x0)
                .field("radius", radius)
                .field("out_cells", out_cells)
                .field("total_variation", b.total_variation())
                .field("total", b.total())
                .field("out", out.display().to_string());
            Ok((report, Verdict::Positive))
        }
        Command::Multiplier { action } => multiplier_cmd(action, seed),
    }
}

fn load_measure(opts: &MeasureOpts, seed: Option<u64>, default_dim: Option<usize>) -> Result<grid::GridMeasure> {
    input::measure(&input::MeasureArgs {
        source: &opts.measure,
        cells: opts.cells,
        lower: opts.lower,
        upper: opts.upper,
        seed: seed.unwrap_or(0),
        default_dim,
    })
}

fn kvector(action: KvectorAction) -> Result<(Report, Verdict)> {
    match action {
        KvectorAction::Wedge { a, b } => {
            let (a, b) = (input::kvector(&a)?, input::kvector(&b)?);
            let w = exterior::wedge(&a, &b)?;
            Ok((Report::new().field("result", w.to_text()).field("expanded", w.to_string()), Verdict::Positive))
        }
        KvectorAction::Interior { v, eta } => {
            let (v, eta) = (input::kvector(&v)?, input::kcovector(&eta)?);
            let w = exterior::interior_product(&v, &eta)?;
            Ok((Report::new().field("result", w.to_text()).field("expanded", w.to_string()), Verdict::Positive))
        }
        KvectorAction::Simple { v, tol } => {
            let v = input::kvector(&v)?;
            let simple = exterior::is_simple(&v, tol)?;
            Ok((Report::new().field("vector", v.to_text()).field("simple", simple), verdict(simple)))
        }
        KvectorAction::Annihilator { vs, tol } => {
            let vs = vs.iter().map(|s| input::kvector(s)).collect::<Result<Vec<_>>>()?;
            let omega = exterior::annihilator_covector(&vs, tol)?;
            let report = Report::new()
                .field("family", vs.iter().map(|v| v.to_text()).collect::<Vec<_>>())
                .field("annihilator", omega.as_ref().map(|w| w.to_text()))
                .field("expanded", omega.as_ref().map(|w| w.to_string()));
            Ok((report, verdict(omega.is_some())))
        }
    }
}

fn multiplier_cmd(action: MultiplierAction, seed: Option<u64>) -> Result<(Report, Verdict)> {
    match action {
        MultiplierAction::Demo { op, p0, scenario, out } => {
            let op = input::operator(&op)?;
            let p0 = input::vector(&p0)?;
            let mut sc = match &scenario {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
                    Scenario::from_json(&text).map_err(|e| match e {
                        Error::Parse { location, message } => Error::parse(format!("{}: {location}", path.display()), message),
                        other => other,
                    })?
                }
                None => Scenario::default(),
            };
            if let Some(s) = seed {
                sc.seed = s;
            }
            let r = multiplier::regularization_experiment(&op, &p0, &sc)?;
            let rows: Vec<serde_json::Value> = r
                .rows
                .iter()
                .map(|row| {
                    serde_json::json!({
                        "j": row.j,
                        "radius": row.radius,
                        "epsilon": row.epsilon,
                        "l1_chi_v": row.l1_chi_v,
                        "weak11_ratio": row.weak11_ratio,
                        "relative_violation": row.relative_violation,
                        "identity_error": row.identity_error,
                        "distance_to_limit": row.distance_to_limit,
                    })
                })
                .collect();
            let mut report = Report::new()
                .field("operator", &r.operator)
                .field("p0", &r.p0)
                .field("scenario", &r.scenario)
                .field("cone_residual", r.cone_residual)
                .field("t0_mihlin_constant", r.t0_mihlin.constant)
                .field("t0_mihlin_bounded", r.t0_mihlin.bounded)
                .field("max_identity_error", r.max_identity_error)
                .field("weak11_ratio_spread", r.weak11_ratio_spread)
                .field("limit_rate", r.limit_rate)
                .field("min_relative_violation", r.min_relative_violation)
                .field("max_l1_r", r.max_l1_r)
                .field("rows", rows)
                .field("notes", &r.notes);
            if let Some(path) = out {
                let mut w = create(&path)?;
                r.write_csv(&mut w)?;
                w.flush()?;
                report.push("out", path.display().to_string());
            }
            Ok((report, Verdict::Positive))
        }
        MultiplierAction::LpSweep { dim, s, p, cells, period } => {
            let ps = input::parse_reals(&p, "--p")?;
            let cells: Vec<usize> = input::parse_reals(&cells, "--cells")?.into_iter().map(|c| c as usize).collect();
            let rows = multiplier::bessel_lp_sweep(dim, s, &ps, &cells, period)?;
            let critical = if s < dim as f64 { dim as f64 / (dim as f64 - s) } else { f64::INFINITY };
            let report = Report::new()
                .field("dim", dim)
                .field("s", s)
                .field("critical_p", if critical.is_finite() { Some(critical) } else { None })
                .field("rows", &rows);
            Ok((report, Verdict::Positive))
        }
    }
}
