//! Experiment configuration files.
//!
//! ```text
//! # weibull(2) at fixed level 3, Moderate sweep
//! model = weibull:2.0
//! n = 8, 16, 32, 64
//! a = fixed:3          # or power:<c>:<delta> (a = c n^delta), fast:<c> (a = c n^{1/(1+rho)})
//! a_grid = 1.5, 2, 4   # levels for `tilt`
//! regime = auto        # auto | moderate | fast
//! grid_step = 0.002    # oracle step as a fraction of s
//! half_width = 12      # oracle half-width in units of s
//! seed = 1
//! mc_samples = 0       # accepted draws per row; 0 disables the MC row
//! eta_scale = 1
//! kernel = tilted      # tilted | fast
//! block = 1            # joint block size k
//! tolerance_scale = 1
//! format = csv         # csv | json
//! out = -              # file path or - for stdout
//! curves = -           # gibbs: paired density curves CSV, or -
//! ```

use crate::error::{Error, Result};
use crate::exceedance::ExceedanceKernel;
use crate::gibbs::{fast_level, variance_rho_fit};
use crate::model::{DensityModel, ModelSpec};
use crate::validate::rho_fit_levels;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

/// How the conditioning level depends on `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevelRule {
    Fixed(f64),
    /// `a = c n^δ`.
    Power {
        c: f64,
        delta: f64,
    },
    /// `a = c n^{1/(1+ρ)}` with `ρ` fitted from the variance function.
    Fast {
        c: f64,
    },
}

impl LevelRule {
    /// Level for each row size.
    pub fn levels(&self, model: &DensityModel, ns: &[usize]) -> Result<Vec<f64>> {
        let rho = match self {
            LevelRule::Fast { .. } => variance_rho_fit(model, &rho_fit_levels())?,
            _ => 0.0,
        };
        Ok(ns
            .iter()
            .map(|&n| match *self {
                LevelRule::Fixed(a) => a,
                LevelRule::Power { c, delta } => c * (n as f64).powf(delta),
                LevelRule::Fast { c } => fast_level(n, rho, c),
            })
            .collect())
    }
}

impl std::fmt::Display for LevelRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LevelRule::Fixed(a) => write!(f, "fixed:{a:?}"),
            LevelRule::Power { c, delta } => write!(f, "power:{c:?}:{delta:?}"),
            LevelRule::Fast { c } => write!(f, "fast:{c:?}"),
        }
    }
}

impl FromStr for LevelRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || {
            Error::Config(format!(
                "key `a`: expected fixed:<a>, power:<c>:<delta> or fast:<c>, got `{s}`"
            ))
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let rule = match parts.as_slice() {
            [a] => LevelRule::Fixed(num(a)?),
            ["fixed", a] => LevelRule::Fixed(num(a)?),
            ["power", c, d] => LevelRule::Power {
                c: num(c)?,
                delta: num(d)?,
            },
            ["fast", c] => LevelRule::Fast { c: num(c)? },
            _ => return Err(bad()),
        };
        let ok = match rule {
            LevelRule::Fixed(a) => a.is_finite() && a > 0.0,
            LevelRule::Power { c, delta } => c.is_finite() && c > 0.0 && delta.is_finite(),
            LevelRule::Fast { c } => c.is_finite() && c > 0.0,
        };
        if ok {
            Ok(rule)
        } else {
            Err(bad())
        }
    }
}

/// Regime override for `gibbs` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeChoice {
    Auto,
    Moderate,
    Fast,
}

impl std::fmt::Display for RegimeChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RegimeChoice::Auto => "auto",
            RegimeChoice::Moderate => "moderate",
            RegimeChoice::Fast => "fast",
        })
    }
}

impl FromStr for RegimeChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(RegimeChoice::Auto),
            "moderate" => Ok(RegimeChoice::Moderate),
            "fast" => Ok(RegimeChoice::Fast),
            _ => Err(Error::Config(format!(
                "key `regime`: expected auto, moderate or fast, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::fmt::Display for Format {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!(
                "key `format`: expected csv or json, got `{s}`"
            ))),
        }
    }
}

fn kernel_name(k: ExceedanceKernel) -> &'static str {
    match k {
        ExceedanceKernel::Tilted => "tilted",
        ExceedanceKernel::FastGrowth => "fast",
    }
}

fn parse_kernel(s: &str) -> Result<ExceedanceKernel> {
    match s.trim() {
        "tilted" => Ok(ExceedanceKernel::Tilted),
        "fast" => Ok(ExceedanceKernel::FastGrowth),
        _ => Err(Error::Config(format!(
            "key `kernel`: expected tilted or fast, got `{s}`"
        ))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Model as written: a builtin short name or a spec file path.
    pub model: String,
    pub n: Vec<usize>,
    pub a: LevelRule,
    pub a_grid: Vec<f64>,
    pub regime: RegimeChoice,
    pub grid_step: f64,
    pub half_width: f64,
    pub seed: u64,
    pub mc_samples: usize,
    pub eta_scale: f64,
    pub kernel: ExceedanceKernel,
    pub block: usize,
    pub tolerance_scale: f64,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub curves: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: "weibull:2.0".into(),
            n: vec![8, 16, 32, 64],
            a: LevelRule::Fixed(3.0),
            a_grid: vec![1.5, 2.0, 3.0, 5.0, 10.0, 30.0, 100.0],
            regime: RegimeChoice::Auto,
            grid_step: 2e-3,
            half_width: 12.0,
            seed: 1,
            mc_samples: 0,
            eta_scale: 1.0,
            kernel: ExceedanceKernel::Tilted,
            block: 1,
            tolerance_scale: 1.0,
            format: Format::Csv,
            out: None,
            curves: None,
        }
    }
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    let items: Vec<&str> = v.split([',', ' ']).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(Error::Config(format!("key `{key}`: empty list")));
    }
    items
        .iter()
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{s}`")))
        })
        .collect()
}

fn scalar<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{v}`")))
}

fn path_or_dash(v: &str) -> Option<PathBuf> {
    if v == "-" {
        None
    } else {
        Some(PathBuf::from(v))
    }
}

fn dash_or_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.display().to_string())
        .unwrap_or_else(|| "-".into())
}

fn join<T: std::fmt::Debug>(v: &[T]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(", ")
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 16] = [
        "model",
        "n",
        "a",
        "a_grid",
        "regime",
        "grid_step",
        "half_width",
        "seed",
        "mc_samples",
        "eta_scale",
        "kernel",
        "block",
        "tolerance_scale",
        "format",
        "out",
        "curves",
    ];

    /// Parses `key = value` lines over the defaults. Blank lines and `#`
    /// comments are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
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
            c.set(key.trim(), value.trim())?;
        }
        c.check()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "model" => {
                ModelSpec::from_short(v)?;
                self.model = v.to_string();
            }
            "n" => self.n = list(key, v)?,
            "a" => self.a = v.parse()?,
            "a_grid" => self.a_grid = list(key, v)?,
            "regime" => self.regime = v.parse()?,
            "grid_step" => self.grid_step = scalar(key, v)?,
            "half_width" => self.half_width = scalar(key, v)?,
            "seed" => self.seed = scalar(key, v)?,
            "mc_samples" => self.mc_samples = scalar(key, v)?,
            "eta_scale" => self.eta_scale = scalar(key, v)?,
            "kernel" => self.kernel = parse_kernel(v)?,
            "block" => self.block = scalar(key, v)?,
            "tolerance_scale" => self.tolerance_scale = scalar(key, v)?,
            "format" => self.format = v.parse()?,
            "out" => self.out = path_or_dash(v),
            "curves" => self.curves = path_or_dash(v),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Range checks, naming the offending key.
    pub fn check(&self) -> Result<()> {
        let fail = |k: &str, why: &str| Err(Error::Config(format!("key `{k}`: {why}")));
        if self.n.iter().any(|&n| n < 2) {
            return fail("n", "row sizes must be at least 2");
        }
        if self.a_grid.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return fail("a_grid", "levels must be positive and finite");
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 0.1) {
            return fail("grid_step", "must lie in (0, 0.1]");
        }
        if !(self.half_width >= 4.0 && self.half_width.is_finite()) {
            return fail("half_width", "must be at least 4");
        }
        if !(self.eta_scale > 0.0 && self.eta_scale.is_finite()) {
            return fail("eta_scale", "must be positive");
        }
        if self.block == 0 {
            return fail("block", "must be at least 1");
        }
        if !(self.tolerance_scale >= 0.0 && self.tolerance_scale.is_finite()) {
            return fail("tolerance_scale", "must be non-negative");
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        ModelSpec::from_short(&self.model)
    }

    /// Canonical text: every key once, in [`Self::KEYS`] order, numbers in
    /// round-trip form. Builtin models are written by short name.
    pub fn to_canonical(&self) -> String {
        let model = ModelSpec::from_short(&self.model)
            .ok()
            .and_then(|m| m.short_name())
            .unwrap_or_else(|| self.model.clone());
        let mut s = String::new();
        let _ = writeln!(s, "model = {model}");
        let _ = writeln!(s, "n = {}", join(&self.n));
        let _ = writeln!(s, "a = {}", self.a);
        let _ = writeln!(s, "a_grid = {}", join(&self.a_grid));
        let _ = writeln!(s, "regime = {}", self.regime);
        let _ = writeln!(s, "grid_step = {:?}", self.grid_step);
        let _ = writeln!(s, "half_width = {:?}", self.half_width);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "mc_samples = {}", self.mc_samples);
        let _ = writeln!(s, "eta_scale = {:?}", self.eta_scale);
        let _ = writeln!(s, "kernel = {}", kernel_name(self.kernel));
        let _ = writeln!(s, "block = {}", self.block);
        let _ = writeln!(s, "tolerance_scale = {:?}", self.tolerance_scale);
        let _ = writeln!(s, "format = {}", self.format);
        let _ = writeln!(s, "out = {}", dash_or_path(&self.out));
        let _ = writeln!(s, "curves = {}", dash_or_path(&self.curves));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let text = c.to_canonical();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_canonical(), text);
    }

    #[test]
    fn comments_and_overrides() {
        let c = ExperimentConfig::parse(
            "# sweep\nmodel = weibull(2)\nn = 8 16\na = power:1.5:0.25 # grows\n",
        )
        .unwrap();
        assert_eq!(c.n, vec![8, 16]);
        assert_eq!(
            c.a,
            LevelRule::Power {
                c: 1.5,
                delta: 0.25
            }
        );
        assert!(c.to_canonical().starts_with("model = weibull:2.0\n"));
    }

    #[test]
    fn errors_name_the_key() {
        let e = ExperimentConfig::parse("colour = blue\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("colour"), "{e}");
        let e = ExperimentConfig::parse("n = 8, x\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("`n`"), "{e}");
        let e = ExperimentConfig::parse("a = fixed:-1\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("`a`"), "{e}");
        let e = ExperimentConfig::parse("n = 1\n").unwrap_err().to_string();
        assert!(e.contains("`n`"), "{e}");
        let e = ExperimentConfig::parse("just words\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 1"), "{e}");
    }

    #[test]
    fn level_rules() {
        let m = DensityModel::half_gaussian();
        let v = LevelRule::Power { c: 2.0, delta: 0.5 }
            .levels(&m, &[4, 16])
            .unwrap();
        assert_eq!(v, vec![4.0, 8.0]);
        assert_eq!("3".parse::<LevelRule>().unwrap(), LevelRule::Fixed(3.0));
        assert!("fast:0".parse::<LevelRule>().is_err());
    }
}
