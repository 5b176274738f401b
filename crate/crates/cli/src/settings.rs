//! Flags and the JSON config file share one shape; flags win field by field.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Univariate,
    AxisAligned,
    Identity,
    KnownSigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepTask {
    MeanDecoder,
    VarianceDecoder,
    GaussianDecoder,
    IdentityDecoder,
    Learner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Epsilon,
    Delta,
    Alpha,
    Beta,
    Gamma,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            Self::Epsilon => "epsilon",
            Self::Delta => "delta",
            Self::Alpha => "alpha",
            Self::Beta => "beta",
            Self::Gamma => "gamma",
        }
    }
}

/// `--dedup` alone turns snapping on at radius α/40; a number sets the
/// radius; `off` disables it.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Dedup {
    Switch(bool),
    Radius(f64),
}

impl Dedup {
    pub fn radius(self, alpha: f64) -> f64 {
        match self {
            Self::Switch(true) => alpha / 40.0,
            Self::Switch(false) => 0.0,
            Self::Radius(r) => r,
        }
    }
}

impl FromStr for Dedup {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "on" | "true" => Ok(Self::Switch(true)),
            "off" | "false" => Ok(Self::Switch(false)),
            _ => s
                .parse()
                .map(Self::Radius)
                .map_err(|_| format!("expected on, off or a radius, got `{s}`")),
        }
    }
}

impl fmt::Display for Dedup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Switch(true) => write!(f, "on"),
            Self::Switch(false) => write!(f, "off"),
            Self::Radius(r) => write!(f, "{r}"),
        }
    }
}

/// A model given by path, or inline in the config file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(serde_json::Value),
}

/// Every tunable. `None` means "not given here".
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// JSON file with values for any of these flags; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// Privacy parameter epsilon, in (0, 1] [default: 1]
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Privacy parameter delta, in (0, 1/n) [default: 1e-6]
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Target accuracy [default: 0.25]
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Failure probability [default: 0.1]
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Corruption fraction the decoders tolerate [default: 0.5]
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Number of mixture components [default: 2]
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Dimension for the multivariate families [default: 1]
    #[arg(long, global = true)]
    pub d: Option<usize>,
    /// Rows to generate; the sweep grid when given a comma list [default: 1000]
    #[arg(long, global = true, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Trials per sweep grid point [default: 10]
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Sample-size constant in every plan [default: 8]
    #[arg(long = "constant-C", global = true)]
    #[serde(rename = "constant-C")]
    pub constant_c: Option<f64>,
    /// Largest candidate list the learner materializes [default: 100000]
    #[arg(long, global = true)]
    pub candidate_cap: Option<usize>,
    /// Snap decoded components before building mixtures: on (radius alpha/40), off, or a radius [default: off]
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "on")]
    pub dedup: Option<Dedup>,
    /// Input dataset (CSV)
    #[arg(long, global = true, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Output file; stdout when absent
    #[arg(long, global = true, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Output format [default: json, or csv for gen and sweep]
    #[arg(long, global = true)]
    pub format: Option<Format>,
    /// Run below the planned sample size, splitting data proportionally
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    pub force: Option<bool>,

    /// Model JSON file (gen source, or sweep target)
    #[arg(long, global = true, value_name = "FILE")]
    #[serde(default, deserialize_with = "model_source")]
    pub model: Option<ModelSource>,
    /// Component family [default: univariate]
    #[arg(long, global = true)]
    pub family: Option<FamilyName>,
    /// Known scale for the known-sigma family
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    /// Monte-Carlo draws for TV estimates and unresolved contests [default: 1000000 for eval, 10000 otherwise]
    #[arg(long, global = true)]
    pub effort: Option<usize>,

    /// Sweep experiment [default: mean-decoder]
    #[arg(long, global = true)]
    pub task: Option<SweepTask>,
    /// Parameter the sweep varies besides n [default: epsilon]
    #[arg(long, global = true)]
    pub param: Option<SweepParam>,
    /// Values of the swept parameter, comma separated [default: its current value]
    #[arg(long, global = true, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    /// Extra JSON summary of a sweep
    #[arg(long, global = true, value_name = "FILE")]
    pub summary: Option<PathBuf>,
    /// Learner run report (JSON); printed with the model when absent
    #[arg(long, global = true, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Debug dump of the learner's contest outcomes (CSV of W/L/D)
    #[arg(long, global = true, value_name = "FILE")]
    pub contest_matrix: Option<PathBuf>,
}

fn model_source<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<ModelSource>, D::Error> {
    Ok(Some(ModelSource::deserialize(d)?))
}

impl FromStr for ModelSource {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self::Path(s.into()))
    }
}

macro_rules! overlay {
    ($top:expr, $base:expr; $($field:ident),*) => {
        Settings { config: $top.config, $($field: $top.$field.or($base.$field)),* }
    };
}

impl Settings {
    /// Loads the config file, if any, and lays these flags over it.
    pub fn resolve(self) -> Result<Settings, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
        let mut file: Settings = serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("config {}: {e}", path.display())))?;
        file.rebase(path.parent().unwrap_or(Path::new(".")));
        Ok(overlay!(self, file;
            epsilon, delta, alpha, beta, gamma, k, d, n, trials, seed, constant_c, candidate_cap, dedup,
            input, output, format, force, model, family, sigma, effort, task, param, values, summary, report,
            contest_matrix))
    }

    /// Relative paths in a config file are relative to the file.
    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = dir.join(&*path);
                }
            }
        };
        fix(&mut self.input);
        fix(&mut self.output);
        fix(&mut self.summary);
        fix(&mut self.report);
        fix(&mut self.contest_matrix);
        if let Some(ModelSource::Path(p)) = &mut self.model {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.unwrap_or(1.0)
    }
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(1e-6)
    }
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(0.25)
    }
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(0.1)
    }
    pub fn gamma(&self) -> f64 {
        self.gamma.unwrap_or(0.5)
    }
    pub fn k(&self) -> usize {
        self.k.unwrap_or(2)
    }
    pub fn d(&self) -> usize {
        self.d.unwrap_or(1)
    }
    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(10)
    }
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
    pub fn constant_c(&self) -> f64 {
        self.constant_c.unwrap_or(dpmix::privacy::DEFAULT_SAMPLE_CONSTANT)
    }
    pub fn candidate_cap(&self) -> usize {
        self.candidate_cap.unwrap_or(dpmix::learner::DEFAULT_CANDIDATE_CAP)
    }
    pub fn dedup_radius(&self) -> f64 {
        self.dedup.map_or(0.0, |d| d.radius(self.alpha()))
    }
    pub fn force(&self) -> bool {
        self.force.unwrap_or(false)
    }
    pub fn family(&self) -> FamilyName {
        self.family.unwrap_or(FamilyName::Univariate)
    }

    /// The single `n`; a list is only meaningful to `sweep`.
    pub fn single_n(&self) -> Result<usize, CliError> {
        match self.n.as_deref() {
            None => Ok(1000),
            Some([n]) => Ok(*n),
            Some(_) => Err(CliError::input("--n takes a single value outside sweep")),
        }
    }
}
