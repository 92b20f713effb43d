//! Perturbation mechanisms and the participant / server pipelines.
//!
//! A mixture mechanism rounds `x` to `⌊x⌋ + 1` with probability
//! `x - ⌊x⌋` (else to `⌊x⌋`) and adds integer noise, so the output is an
//! unbiased integer. The participant pipeline is rotate → scale by `γ` →
//! clip → perturb → reduce mod `m`; the server decodes the modular sum and
//! undoes rotation and scaling.
//!
//! The baselines instead clip in L2, *conditionally* round (resampling
//! until the rounded norm is small) and then add Skellam or discrete
//! Gaussian noise. Conditional rounding is biased and inflates the
//! sensitivity by roughly `√d / 2`.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Result};
use crate::rational::Rational;
use crate::rng::RandomSource;
use crate::samplers::{NoiseSampler, NoiseSpec, SamplingMode};
use crate::transforms::{
    clip_smm, conditional_round, l2_clip, mod_decode, mod_encode, rotate, unrotate, ClipSpec, EncodedVector, SignVector,
};

/// Resampling attempts allowed to conditional rounding. Each attempt is
/// accepted with probability at least `1 - β`.
pub const DEFAULT_MAX_TRIES: usize = 100;

/// The four supported mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    /// Skellam mixture.
    Smm,
    /// Discrete Gaussian mixture.
    Dgm,
    /// Skellam noise after conditional rounding.
    SkellamCr,
    /// Distributed discrete Gaussian after conditional rounding.
    Ddg,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [Mechanism::Smm, Mechanism::Dgm, Mechanism::SkellamCr, Mechanism::Ddg];

    pub fn name(&self) -> &'static str {
        match self {
            Mechanism::Smm => "smm",
            Mechanism::Dgm => "dgm",
            Mechanism::SkellamCr => "skellam_cr",
            Mechanism::Ddg => "ddg",
        }
    }

    /// Whether the noise is Skellam (`λ`) rather than discrete Gaussian (`σ²`).
    pub fn uses_skellam(&self) -> bool {
        matches!(self, Mechanism::Smm | Mechanism::SkellamCr)
    }

    /// Noise of this mechanism's family at per-participant level `noise`.
    /// Skellam rates are rounded up to a multiple of `2^-20`.
    pub fn noise_spec(&self, noise: f64) -> Result<NoiseSpec> {
        Ok(if self.uses_skellam() {
            NoiseSpec::Skellam { lambda: Rational::ceil_from_f64(noise, LAMBDA_DEN)? }
        } else {
            NoiseSpec::DiscreteGaussian { sigma2: noise }
        })
    }
}

/// Denominator used when turning a calibrated real `λ` into a rational.
pub const LAMBDA_DEN: u64 = 1 << 20;

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| invalid(format!("unknown mechanism {s:?} (expected smm, dgm, skellam_cr or ddg)")))
    }
}

/// Rounds `x` to a neighbouring integer, unbiasedly, then adds one noise draw.
pub fn mixture_perturb_scalar(x: f64, noise: &NoiseSampler, src: &mut RandomSource) -> Result<i64> {
    if !x.is_finite() {
        return Err(invalid("cannot perturb a non-finite value"));
    }
    let fl = x.floor();
    let up = noise.coin(x - fl, src)?;
    Ok(fl as i64 + i64::from(up) + noise.sample(src)?)
}

/// Per-coordinate [`mixture_perturb_scalar`].
pub fn mixture_perturb_vector(x: &[f64], noise: &NoiseSampler, src: &mut RandomSource) -> Result<Vec<i64>> {
    x.iter().map(|&v| mixture_perturb_scalar(v, noise, src)).collect()
}

fn exact_skellam(lambda: Rational) -> Result<NoiseSampler> {
    NoiseSampler::new(NoiseSpec::Skellam { lambda }, SamplingMode::Exact)
}

fn exact_gaussian(sigma2: f64) -> Result<NoiseSampler> {
    if !(sigma2 >= 0.0) {
        return Err(invalid(format!("discrete Gaussian variance must be non-negative, got {sigma2}")));
    }
    NoiseSampler::new(NoiseSpec::DiscreteGaussian { sigma2 }, SamplingMode::Exact)
}

/// Skellam mixture on a scalar, with exact sampling.
pub fn smm_perturb_scalar(x: f64, lambda: Rational, src: &mut RandomSource) -> Result<i64> {
    mixture_perturb_scalar(x, &exact_skellam(lambda)?, src)
}

/// Skellam mixture on each coordinate independently, with exact sampling.
pub fn smm_perturb_vector(x: &[f64], lambda: Rational, src: &mut RandomSource) -> Result<Vec<i64>> {
    mixture_perturb_vector(x, &exact_skellam(lambda)?, src)
}

/// Discrete Gaussian mixture on a scalar (`σ² = 0` disables noise).
pub fn dgm_perturb_scalar(x: f64, sigma2: f64, src: &mut RandomSource) -> Result<i64> {
    mixture_perturb_scalar(x, &exact_gaussian(sigma2)?, src)
}

/// Discrete Gaussian mixture on each coordinate independently.
pub fn dgm_perturb_vector(x: &[f64], sigma2: f64, src: &mut RandomSource) -> Result<Vec<i64>> {
    mixture_perturb_vector(x, &exact_gaussian(sigma2)?, src)
}

/// Intermediate values of one participant encode, for tests and debugging.
/// Never enable in a run whose outputs leave the process.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    /// Rotated and scaled input, before clipping.
    pub pre_clip: Vec<f64>,
    /// After clipping.
    pub post_clip: Vec<f64>,
    /// Rounded integers, before noise.
    pub rounded: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantOutput {
    pub encoded: EncodedVector,
    pub trace: Option<Trace>,
}

/// Shared per-participant settings.
#[derive(Debug, Clone)]
pub struct Encoder<'a> {
    pub spec: &'a ClipSpec,
    pub xi: &'a SignVector,
    pub noise: &'a NoiseSampler,
    /// Record a [`Trace`]; off by default.
    pub trace: bool,
}

impl<'a> Encoder<'a> {
    pub fn new(spec: &'a ClipSpec, xi: &'a SignVector, noise: &'a NoiseSampler) -> Self {
        Self { spec, xi, noise, trace: false }
    }

    fn scaled_rotation(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.spec.validate()?;
        if g.len() != self.spec.d {
            return Err(invalid(format!("input has {} coordinates, expected {}", g.len(), self.spec.d)));
        }
        Ok(rotate(g, self.xi)?.into_iter().map(|v| v * self.spec.gamma).collect())
    }

    /// Mixture pipeline: rotate, scale, clip, round-and-noise, encode.
    pub fn encode_mixture(&self, g: &[f64], src: &mut RandomSource) -> Result<ParticipantOutput> {
        let scaled = self.scaled_rotation(g)?;
        let clipped = clip_smm(&scaled, self.spec);
        let mut out = Vec::with_capacity(clipped.len());
        let mut rounded = Vec::new();
        for &x in &clipped {
            let fl = x.floor();
            let r = fl as i64 + i64::from(self.noise.coin(x - fl, src)?);
            if self.trace {
                rounded.push(r);
            }
            out.push(r + self.noise.sample(src)?);
        }
        Ok(ParticipantOutput {
            encoded: mod_encode(&out, self.spec.m),
            trace: self.trace.then_some(Trace { pre_clip: scaled, post_clip: clipped, rounded }),
        })
    }

    /// Baseline pipeline: rotate, scale, L2-clip to `γ Δ₂`, conditionally
    /// round, add noise, encode.
    pub fn encode_rounded(
        &self,
        g: &[f64],
        delta2: f64,
        beta: f64,
        max_tries: usize,
        src: &mut RandomSource,
    ) -> Result<ParticipantOutput> {
        let scaled = self.scaled_rotation(g)?;
        let radius = self.spec.gamma * delta2;
        let clipped = l2_clip(&scaled, radius);
        let rounded = conditional_round(&clipped, self.spec.gamma, delta2, beta, src, max_tries)?;
        let mut out = Vec::with_capacity(rounded.len());
        for &r in &rounded {
            out.push(r + self.noise.sample(src)?);
        }
        Ok(ParticipantOutput {
            encoded: mod_encode(&out, self.spec.m),
            trace: self.trace.then_some(Trace { pre_clip: scaled, post_clip: clipped, rounded }),
        })
    }
}

fn require_kind(noise: &NoiseSampler, skellam: bool) -> Result<()> {
    match (noise.spec(), skellam) {
        (NoiseSpec::Skellam { .. }, true) | (NoiseSpec::DiscreteGaussian { .. }, false) => Ok(()),
        _ => Err(invalid("noise family does not match the mechanism")),
    }
}

/// Skellam-mixture participant encode.
pub fn participant_encode_smm(g: &[f64], enc: &Encoder<'_>, src: &mut RandomSource) -> Result<ParticipantOutput> {
    require_kind(enc.noise, true)?;
    enc.encode_mixture(g, src)
}

/// Discrete-Gaussian-mixture participant encode.
pub fn participant_encode_dgm(g: &[f64], enc: &Encoder<'_>, src: &mut RandomSource) -> Result<ParticipantOutput> {
    require_kind(enc.noise, false)?;
    enc.encode_mixture(g, src)
}

/// Skellam baseline with conditional rounding.
pub fn baseline_skellam_cr(
    g: &[f64],
    enc: &Encoder<'_>,
    delta2: f64,
    beta: f64,
    src: &mut RandomSource,
) -> Result<ParticipantOutput> {
    require_kind(enc.noise, true)?;
    enc.encode_rounded(g, delta2, beta, DEFAULT_MAX_TRIES, src)
}

/// Distributed discrete Gaussian baseline with conditional rounding.
pub fn baseline_ddg(
    g: &[f64],
    enc: &Encoder<'_>,
    delta2: f64,
    beta: f64,
    src: &mut RandomSource,
) -> Result<ParticipantOutput> {
    require_kind(enc.noise, false)?;
    enc.encode_rounded(g, delta2, beta, DEFAULT_MAX_TRIES, src)
}

/// Server-side estimate of the (clipped) sum.
#[derive(Debug, Clone, PartialEq)]
pub struct SumEstimate {
    pub values: Vec<f64>,
    pub participants: usize,
}

/// Decodes a modular sum: center the residues, undo the rotation, divide
/// by `γ`. A sum whose true value left `[-m/2, m/2)` wraps silently.
pub fn server_decode(
    zsum: &EncodedVector,
    spec: &ClipSpec,
    xi: &SignVector,
    participants: usize,
) -> Result<SumEstimate> {
    let centered: Vec<f64> = mod_decode(zsum).into_iter().map(|v| v as f64).collect();
    let values = unrotate(&centered, xi)?.into_iter().map(|v| v / spec.gamma).collect();
    Ok(SumEstimate { values, participants })
}
