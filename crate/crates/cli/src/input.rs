//! Reading operators, vectors, k-vectors and measures from the command line.

use std::fs;
use std::path::Path;

use afree::exterior::{KCovector, KVector};
use afree::grid::{self, FlatSpec, GridMeasure, GridSpec, JumpSpec};
use afree::{Error, PdeOperator, Result};

/// Reads a file, or returns the argument itself when no such file exists
/// and `inline_ok` is set.
fn text_or_inline(arg: &str, inline_ok: bool) -> Result<(String, String)> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| Error::parse(arg, e.to_string()))?;
        return Ok((arg.to_string(), text));
    }
    if inline_ok {
        return Ok(("argument".to_string(), arg.to_string()));
    }
    Err(Error::parse(arg, "no such file"))
}

pub fn operator(path: &str) -> Result<PdeOperator> {
    let (source, text) = text_or_inline(path, false)?;
    PdeOperator::from_json(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::parse(format!("{source}: {location}"), message),
        other => other,
    })
}

/// Comma- or whitespace-separated reals, from a file or inline.
pub fn vector(arg: &str) -> Result<Vec<f64>> {
    let (source, text) = text_or_inline(arg, true)?;
    parse_reals(&text, &source)
}

pub fn parse_reals(text: &str, source: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        for (field_no, tok) in line.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).enumerate() {
            match tok.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => {
                    return Err(Error::parse(
                        format!("{source}: line {}, field {}", line_no + 1, field_no + 1),
                        format!("'{tok}' is not a finite number"),
                    ))
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::parse(source, "no numbers found"));
    }
    Ok(out)
}

pub fn kvector(arg: &str) -> Result<KVector> {
    let (source, text) = text_or_inline(arg, true)?;
    KVector::from_text(&text).map_err(|e| relocate(e, &source))
}

pub fn kcovector(arg: &str) -> Result<KCovector> {
    let (source, text) = text_or_inline(arg, true)?;
    KCovector::from_text(&text).map_err(|e| relocate(e, &source))
}

fn relocate(e: Error, source: &str) -> Error {
    match e {
        Error::Parse { location, message } => Error::parse(format!("{source}: {location}"), message),
        other => other,
    }
}

/// Where a measure comes from: a `GMES1` file or a generator spec
/// `kind:key=value;key=value`.
pub struct MeasureArgs<'a> {
    pub source: &'a str,
    pub cells: usize,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
    /// Used when the generator does not fix the dimension.
    pub default_dim: Option<usize>,
}

pub fn measure(args: &MeasureArgs) -> Result<GridMeasure> {
    let path = Path::new(args.source);
    if path.is_file() {
        let file = fs::File::open(path)?;
        return GridMeasure::read_binary(std::io::BufReader::new(file)).map_err(|e| relocate(e, args.source));
    }
    let Some((kind, rest)) = args.source.split_once(':') else {
        return Err(Error::parse(args.source, "neither a measure file nor a generator spec 'kind:key=value;...'"));
    };
    let params = Params::parse(rest, args.source)?;
    let grid_for = |d: usize| GridSpec { seed: args.seed, ..GridSpec::cube(d, args.lower, args.upper, args.cells) };
    match kind {
        "bv-jump" | "bd-jump" => {
            params.only(&["a", "n", "offset"])?;
            let jump = JumpSpec {
                a: params.reals("a")?,
                normal: params.reals("n")?,
                offset: params.opt_real("offset")?.unwrap_or(0.0),
            };
            let grid = grid_for(jump.normal.len());
            if kind == "bv-jump" {
                grid::make_bv_jump(&jump, &grid)
            } else {
                grid::make_bd_jump(&jump, &grid)
            }
        }
        "line" | "plane" => {
            params.only(&["value", "dir", "point", "extent", "oversample"])?;
            let directions = params
                .get("dir")?
                .split('/')
                .map(|d| parse_reals(d, &params.location("dir")))
                .collect::<Result<Vec<_>>>()?;
            let d = directions[0].len();
            let flat = FlatSpec {
                point: params.opt_reals("point")?.unwrap_or_else(|| vec![0.0; d]),
                directions,
                extents: params.opt_reals("extent")?,
                value: params.reals("value")?,
                oversample: params.opt_real("oversample")?.map_or(4, |x| x as usize),
            };
            grid::make_flat_measure(&flat, &grid_for(d))
        }
        "noise" => {
            params.only(&["m", "amp", "d"])?;
            let d = match params.opt_real("d")? {
                Some(d) => d as usize,
                None => args.default_dim.ok_or_else(|| Error::parse(params.location("d"), "dimension required"))?,
            };
            let m = params.real("m")? as usize;
            grid::make_noise(&grid_for(d), m, params.opt_real("amp")?.unwrap_or(1.0))
        }
        other => Err(Error::parse(
            args.source,
            format!("unknown generator '{other}' (expected bv-jump, bd-jump, line, plane or noise)"),
        )),
    }
}

struct Params<'a> {
    spec: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Params<'a> {
    fn parse(rest: &'a str, spec: &'a str) -> Result<Self> {
        let mut pairs = Vec::new();
        for part in rest.split(';').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::parse(spec, format!("'{part}' is not key=value")))?;
            pairs.push((k.trim(), v.trim()));
        }
        Ok(Params { spec, pairs })
    }

    fn location(&self, key: &str) -> String {
        format!("{} field '{key}'", self.spec)
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        match self.pairs.iter().find(|(k, _)| !allowed.contains(k)) {
            Some((k, _)) => Err(Error::parse(self.location(k), format!("unknown key (allowed: {})", allowed.join(", ")))),
            None => Ok(()),
        }
    }

    fn find(&self, key: &str) -> Option<&'a str> {
        self.pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    fn get(&self, key: &str) -> Result<&'a str> {
        self.find(key).ok_or_else(|| Error::parse(self.location(key), "missing"))
    }

    fn reals(&self, key: &str) -> Result<Vec<f64>> {
        parse_reals(self.get(key)?, &self.location(key))
    }

    fn opt_reals(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.find(key).map(|v| parse_reals(v, &self.location(key))).transpose()
    }

    fn real(&self, key: &str) -> Result<f64> {
        let v = self.reals(key)?;
        if v.len() != 1 {
            return Err(Error::parse(self.location(key), "expected a single number"));
        }
        Ok(v[0])
    }

    fn opt_real(&self, key: &str) -> Result<Option<f64>> {
        if self.find(key).is_none() {
            return Ok(None);
        }
        self.real(key).map(Some)
    }
}
