//! Run configuration: a JSON file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bicw_core::ModelParams;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every field is optional so that a file and the flags can each supply
/// part of it; [`RunConfig::overlay`] merges them with the flags winning.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j11: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j12: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j22: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_plus: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

macro_rules! overlay_fields {
    ($base:ident, $top:ident, $($f:ident),*) => {
        RunConfig { $($f: $top.$f.or($base.$f)),* }
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    /// Values present in `top` replace those in `self`.
    pub fn overlay(self, top: RunConfig) -> RunConfig {
        let base = self;
        overlay_fields!(base, top, alpha, j11, j12, j22, h1, h2, n, lambda_plus, t_end, dt, seed, trials, output, format)
    }

    /// Fill unset model and run fields with their defaults.
    pub fn with_defaults(self) -> RunConfig {
        let defaults = RunConfig {
            alpha: Some(0.5),
            j11: Some(0.0),
            j12: Some(0.0),
            j22: Some(0.0),
            h1: Some(0.0),
            h2: Some(0.0),
            lambda_plus: Some(0.5),
            t_end: Some(1.0),
            seed: Some(0),
            trials: Some(1),
            format: Some(Format::Csv),
            ..RunConfig::default()
        };
        defaults.overlay(self)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let get = |v: Option<f64>, name: &str| v.with_context(|| format!("missing `{name}`"));
        Ok(ModelParams::new(
            get(self.alpha, "alpha")?,
            get(self.j11, "j11")?,
            get(self.j12, "j12")?,
            get(self.j22, "j22")?,
            get(self.h1, "h1")?,
            get(self.h2, "h2")?,
        )?)
    }

    /// `t_end`, checked positive.
    pub fn t_end(&self) -> Result<f64> {
        match self.t_end {
            Some(t) if t > 0.0 && t.is_finite() => Ok(t),
            Some(t) => bail!("t_end must be positive, got {t}"),
            None => bail!("missing `t_end`"),
        }
    }
}

/// `a,b,...` with exactly `N` numbers.
pub fn parse_list<const N: usize>(s: &str) -> std::result::Result<[f64; N], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got `{s}`"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| format!("`{p}` is not a number"))?;
    }
    Ok(out)
}

pub fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    parse_list::<2>(s)
}

pub fn parse_triple(s: &str) -> std::result::Result<[f64; 3], String> {
    parse_list::<3>(s)
}

/// `lo:hi:n` grid range.
pub fn parse_range(s: &str) -> std::result::Result<bicw_core::phase::GridAxis, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(format!("expected lo:hi:n, got `{s}`"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad lower bound in `{s}`"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad upper bound in `{s}`"))?;
    let n: usize = n.trim().parse().map_err(|_| format!("bad point count in `{s}`"))?;
    if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
        return Err(format!("range `{s}` needs finite lo <= hi and n >= 1"));
    }
    Ok(bicw_core::phase::GridAxis { lo, hi, n })
}
