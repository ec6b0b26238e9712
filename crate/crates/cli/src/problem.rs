//! Problem files, channel files and direction files.

use std::fs;
use std::path::Path;

use canonical_region::region::{nondegeneracy_preflight, NONDEGENERACY_THRESHOLD};
use canonical_region::{attach_channels, Alphabet, Channel, Direction, DistortionMeasure, ProblemSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Total mass within this of 1 is used as written.
pub const EXACT_MASS_TOL: f64 = 1e-12;
/// Total mass within this of 1 is renormalized silently.
pub const SILENT_MASS_TOL: f64 = 1e-9;
/// Total mass within this of 1 is renormalized with a warning; beyond it the file is rejected.
pub const WARN_MASS_TOL: f64 = 1e-6;

const BUNDLED: [(&str, &str); 3] = [
    ("dsbs.json", include_str!("../fixtures/dsbs.json")),
    ("bwz.json", include_str!("../fixtures/bwz.json")),
    ("helper3.json", include_str!("../fixtures/helper3.json")),
];

/// Names of the problems compiled into the binary.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// A probability or distortion value: a decimal string, or a plain number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Decimal {
    Text(String),
    Number(f64),
}

impl Decimal {
    fn value(&self, origin: &str, field: &str) -> Result<f64> {
        let v = match self {
            Decimal::Text(s) => s.trim().parse::<f64>().map_err(|_| CliError::Field {
                origin: origin.into(),
                field: field.into(),
                message: format!("`{s}` is not a decimal number"),
            })?,
            Decimal::Number(v) => *v,
        };
        if !v.is_finite() || v < 0.0 {
            return Err(CliError::Field {
                origin: origin.into(),
                field: field.into(),
                message: format!("{v} is not a nonnegative finite number"),
            });
        }
        Ok(v)
    }

    fn exact(v: f64) -> Self {
        Decimal::Text(format!("{v}"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alphabets {
    #[serde(rename = "X")]
    pub x: Vec<usize>,
    #[serde(rename = "S")]
    pub s: usize,
    #[serde(rename = "V")]
    pub v: usize,
    #[serde(rename = "Vhat")]
    pub vhat: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmfEntry {
    /// `(x_1, ..., x_M, s, v)`, 0-based.
    pub symbols: Vec<usize>,
    pub p: Decimal,
}

/// On-disk problem definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub alphabets: Alphabets,
    /// Dense row-major over `(X_1, ..., X_M, S, V)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf: Option<Vec<Decimal>>,
    /// Sparse alternative to `pmf`; unlisted tuples have probability 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmf_entries: Option<Vec<PmfEntry>>,
    /// One dense `|V| x |Vhat_l|` table per distortion measure.
    pub distortions: Vec<Vec<Vec<Decimal>>>,
}

impl ProblemFile {
    pub fn from_spec(spec: &ProblemSpec, name: Option<String>) -> Self {
        let distortions = spec
            .distortions()
            .iter()
            .map(|d| {
                (0..d.v_size())
                    .map(|v| (0..d.recon_size()).map(|vh| Decimal::exact(d.get(v, vh))).collect())
                    .collect()
            })
            .collect();
        ProblemFile {
            name,
            notes: None,
            m: spec.sources(),
            j: spec.lossless(),
            l: spec.distortion_count(),
            alphabets: Alphabets {
                x: spec.x_alphabets().iter().map(Alphabet::size).collect(),
                s: spec.s_alphabet().size(),
                v: spec.v_alphabet().size(),
                vhat: spec.distortions().iter().map(DistortionMeasure::recon_size).collect(),
            },
            pmf: Some(spec.source().probs().iter().map(|&p| Decimal::exact(p)).collect()),
            pmf_entries: None,
            distortions,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem file serializes")
    }
}

/// A validated problem with its provenance.
#[derive(Clone, Debug)]
pub struct LoadedProblem {
    pub spec: ProblemSpec,
    pub name: String,
    /// The path read, or `bundled:<name>`.
    pub origin: String,
    pub warnings: Vec<String>,
}

fn shape_err(origin: &str, message: impl Into<String>) -> CliError {
    CliError::Shape {
        origin: origin.into(),
        message: message.into(),
    }
}

fn parse_err(origin: &str, e: serde_json::Error) -> CliError {
    CliError::Parse {
        origin: origin.into(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Reads a problem from `path`; when no such file exists and the file name
/// is one of the bundled problems, the bundled copy is used.
pub fn load_problem(path: &str) -> Result<LoadedProblem> {
    let p = Path::new(path);
    if p.exists() {
        let text = fs::read_to_string(p).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        })?;
        return parse_problem(&text, path);
    }
    let file = p.file_name().and_then(|f| f.to_str()).unwrap_or(path);
    let wanted = if file.ends_with(".json") {
        file.to_string()
    } else {
        format!("{file}.json")
    };
    match BUNDLED.iter().find(|(n, _)| *n == wanted) {
        Some((n, text)) => parse_problem(text, &format!("bundled:{n}")),
        None => Err(CliError::Io {
            path: p.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file or bundled problem"),
        }),
    }
}

pub fn parse_problem(text: &str, origin: &str) -> Result<LoadedProblem> {
    let file: ProblemFile = serde_json::from_str(text).map_err(|e| parse_err(origin, e))?;
    let mut warnings = Vec::new();
    let spec = build_spec(&file, origin, &mut warnings)?;
    if spec.sources() <= canonical_region::region::MAX_ENUMERATED_SOURCES {
        let chans: Vec<Channel> = spec.channel_sources().map(|k| Channel::identity(&spec, k)).collect();
        let aug = attach_channels(&spec, &chans)?;
        let pre = nondegeneracy_preflight(&aug, NONDEGENERACY_THRESHOLD)?;
        if !pre.passed() {
            warnings.push(format!(
                "source dependence is degenerate: {} of {} conditional dependences fall below {:e} (smallest {:e}); corners may coincide",
                pre.violations.len(),
                pre.checked,
                NONDEGENERACY_THRESHOLD,
                pre.min_value
            ));
        }
    }
    let name = file.name.clone().unwrap_or_else(|| {
        Path::new(origin.trim_start_matches("bundled:"))
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("problem")
            .to_string()
    });
    Ok(LoadedProblem {
        spec,
        name,
        origin: origin.into(),
        warnings,
    })
}

fn build_spec(file: &ProblemFile, origin: &str, warnings: &mut Vec<String>) -> Result<ProblemSpec> {
    let a = &file.alphabets;
    if a.x.len() != file.m {
        return Err(shape_err(
            origin,
            format!("M = {} but {} source alphabets given", file.m, a.x.len()),
        ));
    }
    if file.j > file.m {
        return Err(shape_err(origin, format!("J = {} exceeds M = {}", file.j, file.m)));
    }
    if a.vhat.len() != file.l || file.distortions.len() != file.l {
        return Err(shape_err(
            origin,
            format!(
                "L = {} but {} reconstruction alphabets and {} distortion tables given",
                file.l,
                a.vhat.len(),
                file.distortions.len()
            ),
        ));
    }
    let sizes: Vec<usize> = a.x.iter().copied().chain([a.s, a.v]).collect();
    if let Some(i) = sizes.iter().chain(&a.vhat).position(|&n| n == 0) {
        return Err(shape_err(origin, format!("alphabet {} is empty", i + 1)));
    }
    let cells = sizes.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n));
    let cells = match cells {
        Some(c) if c <= 1 << 24 => c,
        _ => return Err(shape_err(origin, "source tensor is too large")),
    };

    let mut probs = match (&file.pmf, &file.pmf_entries) {
        (Some(dense), None) => {
            if dense.len() != cells {
                return Err(shape_err(
                    origin,
                    format!("pmf has {} entries, alphabets require {cells}", dense.len()),
                ));
            }
            dense
                .iter()
                .enumerate()
                .map(|(i, d)| d.value(origin, &format!("pmf[{i}]")))
                .collect::<Result<Vec<_>>>()?
        }
        (None, Some(entries)) => {
            let mut probs = vec![0.0; cells];
            let mut seen = vec![false; cells];
            for (i, e) in entries.iter().enumerate() {
                let field = format!("pmf_entries[{i}]");
                if e.symbols.len() != sizes.len() {
                    return Err(shape_err(
                        origin,
                        format!("{field}: {} symbols, expected {}", e.symbols.len(), sizes.len()),
                    ));
                }
                let mut idx = 0;
                for (&s, &n) in e.symbols.iter().zip(&sizes) {
                    if s >= n {
                        return Err(shape_err(origin, format!("{field}: symbol {s} out of range 0..{n}")));
                    }
                    idx = idx * n + s;
                }
                if std::mem::replace(&mut seen[idx], true) {
                    return Err(shape_err(
                        origin,
                        format!("{field}: tuple {:?} listed twice", e.symbols),
                    ));
                }
                probs[idx] = e.p.value(origin, &format!("{field}.p"))?;
            }
            probs
        }
        (Some(_), Some(_)) => return Err(shape_err(origin, "give either `pmf` or `pmf_entries`, not both")),
        (None, None) => return Err(shape_err(origin, "missing `pmf` (or `pmf_entries`)")),
    };

    let total: f64 = probs.iter().sum();
    let gap = (total - 1.0).abs();
    if gap > WARN_MASS_TOL || !total.is_finite() {
        return Err(CliError::Mass {
            origin: origin.into(),
            total,
        });
    }
    if gap > EXACT_MASS_TOL {
        probs.iter_mut().for_each(|p| *p /= total);
        if gap > SILENT_MASS_TOL {
            warnings.push(format!("probabilities sum to {total}; renormalized"));
        }
    }

    let mut measures = Vec::with_capacity(file.l);
    for (l, table) in file.distortions.iter().enumerate() {
        let nr = a.vhat[l];
        if table.len() != a.v || table.iter().any(|row| row.len() != nr) {
            return Err(shape_err(origin, format!("distortions[{l}] must be {} x {nr}", a.v)));
        }
        let mut flat = Vec::with_capacity(a.v * nr);
        for (v, row) in table.iter().enumerate() {
            for (vh, d) in row.iter().enumerate() {
                flat.push(d.value(origin, &format!("distortions[{l}][{v}][{vh}]"))?);
            }
        }
        let recon = Alphabet::new(format!("Vhat{}", l + 1), nr)?;
        measures.push(DistortionMeasure::new(a.v, recon, flat)?);
    }

    let xs =
        a.x.iter()
            .enumerate()
            .map(|(k, &n)| Alphabet::new(format!("X{}", k + 1), n))
            .collect::<canonical_region::Result<Vec<_>>>()?;
    ProblemSpec::new(
        xs,
        Alphabet::new("S", a.s)?,
        Alphabet::new("V", a.v)?,
        file.j,
        probs,
        measures,
    )
    .map_err(|e| shape_err(origin, e.to_string()))
}

/// Channel file: `{"channels": [{"source": k, "rows": [[...], ...]}, ...]}`
/// with 1-based source indices covering every lossy source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub channels: Vec<ChannelEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub source: usize,
    pub rows: Vec<Vec<f64>>,
}

impl ChannelFile {
    pub fn from_channels(spec: &ProblemSpec, channels: &[Channel]) -> Self {
        ChannelFile {
            channels: spec
                .channel_sources()
                .zip(channels)
                .map(|(k, c)| ChannelEntry {
                    source: k + 1,
                    rows: (0..c.input_size()).map(|x| c.row(x).to_vec()).collect(),
                })
                .collect(),
        }
    }
}

pub fn parse_channels(text: &str, origin: &str, spec: &ProblemSpec) -> Result<Vec<Channel>> {
    let file: ChannelFile = serde_json::from_str(text).map_err(|e| parse_err(origin, e))?;
    let mut out = Vec::new();
    for k in spec.channel_sources() {
        let entry = file
            .channels
            .iter()
            .find(|c| c.source == k + 1)
            .ok_or_else(|| shape_err(origin, format!("no channel for source {}", k + 1)))?;
        let nz = entry.rows.first().map_or(0, Vec::len);
        if entry.rows.len() != spec.x_alphabet(k).size() || nz == 0 || entry.rows.iter().any(|r| r.len() != nz) {
            return Err(shape_err(
                origin,
                format!(
                    "channel for source {} must have {} rows of equal nonzero length",
                    k + 1,
                    spec.x_alphabet(k).size()
                ),
            ));
        }
        let rows = entry.rows.iter().flatten().copied().collect();
        out.push(Channel::for_source(spec, k, nz, rows).map_err(|e| CliError::Field {
            origin: origin.into(),
            field: format!("channels[source={}]", k + 1),
            message: e.to_string(),
        })?);
    }
    if let Some(extra) = file
        .channels
        .iter()
        .find(|c| !spec.channel_sources().contains(&(c.source.wrapping_sub(1))))
    {
        return Err(shape_err(
            origin,
            format!("source {} has no test channel", extra.source),
        ));
    }
    Ok(out)
}

/// One direction per nonempty line: nonnegative weights over the lossy
/// rates then the distortions, separated by commas or whitespace; `#`
/// starts a comment. Rows are scaled to unit norm.
pub fn parse_directions(text: &str, origin: &str, spec: &ProblemSpec) -> Result<Vec<Direction>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let row = out.len() + 1;
        let weights = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| CliError::Parse {
                origin: origin.into(),
                line: lineno + 1,
                column: 1,
                message: format!("direction row {row} is not a list of numbers"),
            })?;
        let d = Direction::normalized(spec, weights).map_err(|e| CliError::Field {
            origin: origin.into(),
            field: format!("direction row {row} (line {})", lineno + 1),
            message: e.to_string(),
        })?;
        out.push(d);
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("{origin}: no directions given")));
    }
    Ok(out)
}
