//! Option resolution: defaults, an INI-style config file, and command-line
//! flags, with flags winning over the file.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use subspectral::MethodName;

/// Where the training data comes from.
#[derive(Debug, Clone)]
pub enum DataSource {
    Libsvm(PathBuf),
    Csv(PathBuf),
    Synthetic {
        dim: usize,
        count: usize,
        noise: f64,
        condition: f64,
    },
}

/// Fully resolved experiment options.
#[derive(Debug, Clone)]
pub struct Options {
    pub source: DataSource,
    pub data_seed: u64,
    pub train_fraction: f64,
    pub methods: Vec<MethodName>,
    pub n0: usize,
    pub tau: f64,
    pub eps: f64,
    pub p: f64,
    pub runs: usize,
    pub trim: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub diagnostics: bool,
    pub max_iter: usize,
}

/// Raw option values before resolution; every field optional so that config
/// file and flags can be merged field by field.
#[derive(Debug, Clone, Default)]
pub struct RawOptions {
    pub dataset: Option<PathBuf>,
    pub format: Option<String>,
    pub method: Option<Vec<String>>,
    pub n0: Option<usize>,
    pub tau: Option<f64>,
    pub eps: Option<f64>,
    pub p: Option<f64>,
    pub runs: Option<usize>,
    pub trim: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub diagnostics: Option<bool>,
    pub max_iter: Option<usize>,
    pub data_seed: Option<u64>,
    pub train_fraction: Option<f64>,
    pub synth_n: Option<usize>,
    pub synth_count: Option<usize>,
    pub synth_noise: Option<f64>,
    pub synth_cond: Option<f64>,
}

impl RawOptions {
    /// Field-wise merge; values in `self` win.
    pub fn or(self, fallback: RawOptions) -> RawOptions {
        RawOptions {
            dataset: self.dataset.or(fallback.dataset),
            format: self.format.or(fallback.format),
            method: self.method.or(fallback.method),
            n0: self.n0.or(fallback.n0),
            tau: self.tau.or(fallback.tau),
            eps: self.eps.or(fallback.eps),
            p: self.p.or(fallback.p),
            runs: self.runs.or(fallback.runs),
            trim: self.trim.or(fallback.trim),
            seed: self.seed.or(fallback.seed),
            out: self.out.or(fallback.out),
            diagnostics: self.diagnostics.or(fallback.diagnostics),
            max_iter: self.max_iter.or(fallback.max_iter),
            data_seed: self.data_seed.or(fallback.data_seed),
            train_fraction: self.train_fraction.or(fallback.train_fraction),
            synth_n: self.synth_n.or(fallback.synth_n),
            synth_count: self.synth_count.or(fallback.synth_count),
            synth_noise: self.synth_noise.or(fallback.synth_noise),
            synth_cond: self.synth_cond.or(fallback.synth_cond),
        }
    }

    /// Applies defaults and validates.
    pub fn resolve(self, default_methods: &[MethodName]) -> Result<Options> {
        let format = self.format.unwrap_or_else(|| {
            if self.dataset.is_some() {
                "libsvm".to_string()
            } else {
                "synthetic".to_string()
            }
        });
        let source = match format.as_str() {
            "libsvm" => DataSource::Libsvm(
                self.dataset
                    .clone()
                    .context("--dataset is required for format libsvm")?,
            ),
            "csv" => DataSource::Csv(
                self.dataset
                    .clone()
                    .context("--dataset is required for format csv")?,
            ),
            "synthetic" => DataSource::Synthetic {
                dim: self.synth_n.unwrap_or(20),
                count: self.synth_count.unwrap_or(2000),
                noise: self.synth_noise.unwrap_or(0.5),
                condition: self.synth_cond.unwrap_or(5.0),
            },
            other => bail!("unknown format `{other}` (expected libsvm, csv or synthetic)"),
        };

        let methods = match &self.method {
            Some(names) => names
                .iter()
                .map(|s| MethodName::from_str(s).map_err(anyhow::Error::msg))
                .collect::<Result<Vec<_>>>()?,
            None => default_methods.to_vec(),
        };
        if methods.is_empty() {
            bail!("no methods selected");
        }

        let runs = self.runs.unwrap_or(100);
        let trim = self.trim.unwrap_or(20);
        if runs == 0 {
            bail!("--runs must be at least 1");
        }
        let tau = self.tau.unwrap_or(1.1);
        if tau <= 1.0 {
            bail!("--tau must exceed 1");
        }
        let p = self.p.unwrap_or(0.1);
        if !(p > 0.0 && p <= 1.0) {
            bail!("--p must lie in (0, 1]");
        }
        let train_fraction = self.train_fraction.unwrap_or(0.95);

        Ok(Options {
            source,
            data_seed: self.data_seed.unwrap_or(42),
            train_fraction,
            methods,
            n0: self.n0.unwrap_or(3),
            tau,
            eps: self.eps.unwrap_or(1e-4),
            p,
            runs,
            trim,
            seed: self.seed.unwrap_or(0),
            out: self.out.unwrap_or_else(|| PathBuf::from("out")),
            diagnostics: self.diagnostics.unwrap_or(false),
            max_iter: self.max_iter.unwrap_or(10_000),
        })
    }
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
/// Keys mirror the long flags with `_` for `-`.
pub fn load_config_file(path: &Path) -> Result<RawOptions> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut kv = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('[') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("config line {} is not `key = value`", lineno + 1))?;
        kv.insert(key.trim().to_string(), value.trim().to_string());
    }

    fn parse<T: FromStr>(kv: &HashMap<String, String>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match kv.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key `{key}`: {e}")),
        }
    }

    let raw = RawOptions {
        dataset: kv.get("dataset").map(PathBuf::from),
        format: kv.get("format").cloned(),
        method: kv
            .get("method")
            .map(|v| v.split(',').map(|s| s.trim().to_string()).collect()),
        n0: parse(&kv, "n0")?,
        tau: parse(&kv, "tau")?,
        eps: parse(&kv, "eps")?,
        p: parse(&kv, "p")?,
        runs: parse(&kv, "runs")?,
        trim: parse(&kv, "trim")?,
        seed: parse(&kv, "seed")?,
        out: kv.get("out").map(PathBuf::from),
        diagnostics: parse(&kv, "diagnostics")?,
        max_iter: parse(&kv, "max_iter")?,
        data_seed: parse(&kv, "data_seed")?,
        train_fraction: parse(&kv, "train_fraction")?,
        synth_n: parse(&kv, "synth_n")?,
        synth_count: parse(&kv, "synth_count")?,
        synth_noise: parse(&kv, "synth_noise")?,
        synth_cond: parse(&kv, "synth_cond")?,
    };

    let known = [
        "dataset",
        "format",
        "method",
        "n0",
        "tau",
        "eps",
        "p",
        "runs",
        "trim",
        "seed",
        "out",
        "diagnostics",
        "max_iter",
        "data_seed",
        "train_fraction",
        "synth_n",
        "synth_count",
        "synth_noise",
        "synth_cond",
    ];
    for key in kv.keys() {
        if !known.contains(&key.as_str()) {
            bail!("unknown config key `{key}`");
        }
    }
    Ok(raw)
}
