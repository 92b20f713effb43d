//! Flags shared by every subcommand, optionally pre-filled from a
//! `key = value` config file. Flags given on the command line win.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use smm_core::mechanisms::Mechanism;
use smm_core::Rational;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Bernoulli,
    Poisson,
    Skellam,
    Dgauss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Sgd,
    Adam,
}

fn mechanism(s: &str) -> Result<Mechanism, String> {
    s.parse().map_err(|e: smm_core::Error| e.to_string())
}

fn rational(s: &str) -> Result<Rational, String> {
    s.parse().map_err(|e: smm_core::Error| e.to_string())
}

#[derive(Debug, Clone, Default, Args)]
pub struct Params {
    /// Mechanism: smm, dgm, skellam_cr or ddg (repeatable where allowed)
    #[arg(long = "mech", value_parser = mechanism)]
    pub mech: Vec<Mechanism>,
    /// Target epsilon
    #[arg(long)]
    pub eps: Option<f64>,
    /// Target delta
    #[arg(long)]
    pub delta: Option<f64>,
    /// Aggregator modulus is 2^m-bits
    #[arg(long = "m-bits")]
    pub m_bits: Option<u32>,
    /// Scale applied before rounding
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Dimension (power of two)
    #[arg(long)]
    pub d: Option<usize>,
    /// Participants (records for fl-train, contributors for account)
    #[arg(long)]
    pub n: Option<usize>,
    /// Poisson sampling rate
    #[arg(long)]
    pub q: Option<f64>,
    /// Rounds
    #[arg(long = "T")]
    pub t: Option<u64>,
    /// Skellam rate per participant (`a/b` or decimal)
    #[arg(long, value_parser = rational)]
    pub lambda: Option<Rational>,
    /// Discrete Gaussian variance per participant
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Clipping budget on the sum of per-coordinate charges (scaled units)
    #[arg(long)]
    pub c: Option<f64>,
    /// Conditional-rounding failure probability
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file (stdout if absent)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// key = value file supplying defaults for any of these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Disable noise (rounding and modular effects only)
    #[arg(long = "no-noise")]
    pub no_noise: bool,
    /// Use the exact integer samplers instead of the fast ones
    #[arg(long = "exact-sampling")]
    pub exact_sampling: bool,
    /// Distribution to sample
    #[arg(long, value_enum)]
    pub dist: Option<Dist>,
    /// Number of samples
    #[arg(long)]
    pub count: Option<u64>,
    /// Bernoulli success probability
    #[arg(long)]
    pub p: Option<f64>,
    /// Renyi order (with --tau: convert a single RDP value)
    #[arg(long)]
    pub alpha: Option<u32>,
    /// RDP value at --alpha
    #[arg(long)]
    pub tau: Option<f64>,
    /// Per-coordinate bound (mixtures); chosen automatically if absent
    #[arg(long = "delta-inf")]
    pub delta_inf: Option<u64>,
    /// L2 clip of the unscaled inputs (baselines; also sets the default c)
    #[arg(long)]
    pub delta2: Option<f64>,
    /// Norm of the synthetic data points
    #[arg(long)]
    pub radius: Option<f64>,
    /// Features of the synthetic training data
    #[arg(long)]
    pub features: Option<usize>,
    /// Learning rate
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long = "update-rule", value_enum)]
    pub update_rule: Option<Rule>,
    /// Largest Renyi order considered
    #[arg(long = "max-order")]
    pub max_order: Option<u32>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| CliError::Usage(format!("config: cannot parse {key} = {value:?}")))
}

fn enum_value<T: ValueEnum>(key: &str, value: &str) -> Result<T, CliError> {
    T::from_str(value, true).map_err(|_| CliError::Usage(format!("config: bad value {key} = {value:?}")))
}

fn flag(value: &str, key: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("config: {key} must be true or false"))),
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn read_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

macro_rules! fill {
    ($self:ident, $key:ident, $value:ident; $($name:literal => $field:ident),* $(,)?) => {
        match $key.as_str() {
            $($name => {
                if $self.$field.is_none() {
                    $self.$field = Some(parse($name, &$value)?);
                }
            })*
            "mech" => {
                if $self.mech.is_empty() {
                    $self.mech = $value
                        .split(',')
                        .map(|s| mechanism(s.trim()).map_err(CliError::Usage))
                        .collect::<Result<_, _>>()?;
                }
            }
            "lambda" => {
                if $self.lambda.is_none() {
                    $self.lambda = Some(rational(&$value).map_err(CliError::Usage)?);
                }
            }
            "dist" => {
                if $self.dist.is_none() {
                    $self.dist = Some(enum_value("dist", &$value)?);
                }
            }
            "update-rule" => {
                if $self.update_rule.is_none() {
                    $self.update_rule = Some(enum_value("update-rule", &$value)?);
                }
            }
            "no-noise" => $self.no_noise |= flag(&$value, "no-noise")?,
            "exact-sampling" => $self.exact_sampling |= flag(&$value, "exact-sampling")?,
            other => return Err(CliError::Usage(format!("config: unknown key {other:?}"))),
        }
    };
}

impl Params {
    /// Fills every flag not given on the command line from `--config`.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        for (key, value) in read_config(&text)? {
            fill!(self, key, value;
                "eps" => eps, "delta" => delta, "m-bits" => m_bits, "gamma" => gamma, "d" => d,
                "n" => n, "q" => q, "T" => t, "sigma2" => sigma2, "c" => c, "beta" => beta,
                "seed" => seed, "out" => out, "trials" => trials, "count" => count, "p" => p,
                "alpha" => alpha, "tau" => tau, "delta-inf" => delta_inf, "delta2" => delta2,
                "radius" => radius, "features" => features, "lr" => lr, "max-order" => max_order,
            );
        }
        Ok(self)
    }

    pub fn modulus(&self, default_bits: u32) -> Result<u64, CliError> {
        let bits = self.m_bits.unwrap_or(default_bits);
        if !(2..=62).contains(&bits) {
            return Err(CliError::Usage(format!("--m-bits must be in 2..=62, got {bits}")));
        }
        Ok(1u64 << bits)
    }

    pub fn beta_or_default(&self) -> f64 {
        self.beta.unwrap_or((-0.5f64).exp())
    }
}
