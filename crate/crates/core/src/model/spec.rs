//! Key-value model specification files.
//!
//! ```text
//! # Weibull with shape 2.5
//! kind = weibull
//! k = 2.5
//! ```
//!
//! Custom models are tabulated:
//!
//! ```text
//! kind = custom
//! variation = regular:1      # or `rapid`
//! q_bound = 0.5
//! table = g_table.csv        # rows `x, g, q`; or inline `row = x, g, q` lines
//! ```

use super::{DensityModel, VariationKind};
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Weibull {
        k: f64,
    },
    ExpExponential,
    HalfGaussian,
    Tabulated {
        rows: Vec<(f64, f64, f64)>,
        kind: VariationKind,
        q_bound: f64,
    },
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}` as a number")))
}

fn parse_row(key: &str, line: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<&str> = line
        .split([',', ' ', '\t'])
        .filter(|s| !s.is_empty())
        .collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!(
            "key `{key}`: expected `x, g, q`, got `{line}`"
        )));
    }
    Ok((
        parse_f64(key, parts[0])?,
        parse_f64(key, parts[1])?,
        parse_f64(key, parts[2])?,
    ))
}

fn parse_variation(v: &str) -> Result<VariationKind> {
    let v = v.trim();
    if v == "rapid" {
        return Ok(VariationKind::Rapid);
    }
    if let Some(beta) = v.strip_prefix("regular:") {
        let beta = parse_f64("variation", beta)?;
        if beta > 0.0 {
            return Ok(VariationKind::RegularRV { beta });
        }
    }
    Err(Error::Config(format!(
        "key `variation`: expected `rapid` or `regular:<beta>` with beta > 0, got `{v}`"
    )))
}

/// Reads `x, g, q` rows, skipping blank lines, `#` comments and a header.
pub(crate) fn read_table(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() || line.starts_with(|c: char| c.is_ascii_alphabetic()) {
            continue;
        }
        rows.push(parse_row("table", line)?);
    }
    Ok(rows)
}

impl ModelSpec {
    /// Short form used on the command line: `weibull:2`, `weibull(2)`,
    /// `exp_exponential`, `half_gaussian`, or a path to a spec file.
    pub fn from_short(s: &str) -> Result<ModelSpec> {
        let s = s.trim();
        match s {
            "exp_exponential" => return Ok(ModelSpec::ExpExponential),
            "half_gaussian" => return Ok(ModelSpec::HalfGaussian),
            "weibull" => return Ok(ModelSpec::Weibull { k: 2.0 }),
            _ => {}
        }
        let inner = s
            .strip_prefix("weibull:")
            .or_else(|| s.strip_prefix("weibull(").and_then(|r| r.strip_suffix(')')));
        if let Some(k) = inner {
            return Ok(ModelSpec::Weibull {
                k: parse_f64("model", k)?,
            });
        }
        let path = PathBuf::from(s);
        if path.is_file() {
            return ModelSpec::from_file(&path);
        }
        Err(Error::Config(format!("key `model`: unknown model `{s}`")))
    }

    pub fn from_file(path: &Path) -> Result<ModelSpec> {
        let text = std::fs::read_to_string(path)?;
        ModelSpec::parse(&text, path.parent())
    }

    /// Parses a spec; relative `table` paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<ModelSpec> {
        let mut kind = None;
        let mut k = None;
        let mut variation = None;
        let mut q_bound = None;
        let mut rows = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!(
                    "line {}: expected `key = value`, got `{line}`",
                    lineno + 1
                ))
            })?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "kind" => kind = Some(value.to_string()),
                "k" => k = Some(parse_f64(key, value)?),
                "variation" => variation = Some(parse_variation(value)?),
                "q_bound" => q_bound = Some(parse_f64(key, value)?),
                "row" => rows.push(parse_row(key, value)?),
                "table" => {
                    let p = Path::new(value);
                    let p = match base {
                        Some(b) if p.is_relative() => b.join(p),
                        _ => p.to_path_buf(),
                    };
                    rows.extend(read_table(&p)?);
                }
                other => {
                    return Err(Error::Config(format!(
                        "unknown key `{other}` in model spec"
                    )))
                }
            }
        }
        match kind.as_deref() {
            Some("weibull") => Ok(ModelSpec::Weibull {
                k: k.unwrap_or(2.0),
            }),
            Some("exp_exponential") => Ok(ModelSpec::ExpExponential),
            Some("half_gaussian") => Ok(ModelSpec::HalfGaussian),
            Some("custom") => {
                if rows.is_empty() {
                    return Err(Error::Config(
                        "custom model needs `table` or `row` entries".into(),
                    ));
                }
                Ok(ModelSpec::Tabulated {
                    rows,
                    kind: variation.ok_or_else(|| {
                        Error::Config("custom model needs key `variation`".into())
                    })?,
                    q_bound: q_bound.unwrap_or(0.0),
                })
            }
            Some(other) => Err(Error::Config(format!(
                "key `kind`: unknown model kind `{other}`"
            ))),
            None => Err(Error::Config("model spec is missing key `kind`".into())),
        }
    }

    /// Canonical text; tabulated models are written with inline rows.
    pub fn to_canonical(&self) -> String {
        let mut out = String::new();
        match self {
            ModelSpec::Weibull { k } => {
                let _ = write!(out, "kind = weibull\nk = {k:?}\n");
            }
            ModelSpec::ExpExponential => out.push_str("kind = exp_exponential\n"),
            ModelSpec::HalfGaussian => out.push_str("kind = half_gaussian\n"),
            ModelSpec::Tabulated {
                rows,
                kind,
                q_bound,
            } => {
                out.push_str("kind = custom\n");
                match kind {
                    VariationKind::Rapid => out.push_str("variation = rapid\n"),
                    VariationKind::RegularRV { beta } => {
                        let _ = writeln!(out, "variation = regular:{beta:?}");
                    }
                }
                let _ = writeln!(out, "q_bound = {q_bound:?}");
                for (x, g, q) in rows {
                    let _ = writeln!(out, "row = {x:?}, {g:?}, {q:?}");
                }
            }
        }
        out
    }

    /// Short name for builtin models, used by config files and reports.
    pub fn short_name(&self) -> Option<String> {
        match self {
            ModelSpec::Weibull { k } => Some(format!("weibull:{k:?}")),
            ModelSpec::ExpExponential => Some("exp_exponential".into()),
            ModelSpec::HalfGaussian => Some("half_gaussian".into()),
            ModelSpec::Tabulated { .. } => None,
        }
    }

    pub fn build(&self) -> Result<DensityModel> {
        match self {
            ModelSpec::Weibull { k } => DensityModel::weibull(*k),
            ModelSpec::ExpExponential => Ok(DensityModel::exp_exponential()),
            ModelSpec::HalfGaussian => Ok(DensityModel::half_gaussian()),
            ModelSpec::Tabulated {
                rows,
                kind,
                q_bound,
            } => DensityModel::tabulated(rows, *kind, *q_bound),
        }
    }
}
