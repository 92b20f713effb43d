//! Noise samplers.
//!
//! The exact samplers use integer arithmetic only and take all randomness
//! from [`RandomSource::rand_int`]: Bernoulli by comparing a uniform integer
//! with the numerator, Poisson(1) by the Duchon–Duvignau permutation loop,
//! Poisson(λ < 1) by thinning a Poisson(1) count, and general Poisson by
//! peeling off whole units of λ. Skellam is a difference of two Poissons.
//! The discrete Gaussian uses the rejection construction of Canonne, Kamath
//! and Steinke (a discrete Laplace proposal accepted with an exactly
//! sampled `exp(-γ)` coin).
//!
//! [`SamplingMode::Fast`] swaps in floating-point samplers that are much
//! quicker but only approximately distributed; nothing statistical is
//! claimed about them beyond "close".

use num_integer::Roots;
use rand_distr::Poisson;

use crate::error::{invalid, Error, Result};
use crate::rational::Rational;
use crate::rng::RandomSource;

/// Bernoulli(`p`), exactly: 1 iff `rand_int(p.den) <= p.num`.
pub fn bernoulli_exact(p: Rational, src: &mut RandomSource) -> Result<bool> {
    if p.num() > p.den() {
        return Err(invalid(format!("Bernoulli probability {p} exceeds 1")));
    }
    Ok(src.rand_int(p.den())? <= p.num())
}

fn bernoulli_wide(num: u128, den: u128, src: &mut RandomSource) -> Result<bool> {
    debug_assert!(num <= den);
    Ok(src.rand_int_wide(den)? <= num)
}

/// Denominator used to quantize real Bernoulli probabilities.
pub const FRAC_DEN: u64 = 1 << 53;

/// Bernoulli(`p`) for real `p`, quantized to a multiple of `2^-53` and then
/// sampled exactly.
pub fn bernoulli_frac(p: f64, src: &mut RandomSource) -> Result<bool> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("Bernoulli probability {p} outside [0, 1]")));
    }
    let num = (p * FRAC_DEN as f64).round() as u64;
    bernoulli_exact(Rational::new(num, FRAC_DEN)?, src)
}

/// Poisson(1) by the Duchon–Duvignau loop.
pub fn poisson_one(src: &mut RandomSource) -> Result<u64> {
    let (mut n, mut g, mut k) = (1u64, 0u64, 1u64);
    loop {
        let i = src.rand_int(n + 1)?;
        if i == n + 1 {
            k += 1;
        } else if i > g {
            k -= 1;
            g = n + 1;
        } else {
            return Ok(k);
        }
        n += 1;
    }
}

/// Poisson(λ) for `0 < λ < 1`: a Poisson(1) number of Bernoulli(λ) trials.
pub fn poisson_sub_one(lambda: Rational, src: &mut RandomSource) -> Result<u64> {
    if lambda.num() == 0 || lambda.num() >= lambda.den() {
        return Err(invalid(format!("rate {lambda} must lie strictly between 0 and 1")));
    }
    let trials = poisson_one(src)?;
    let mut k = 0;
    for _ in 0..trials {
        k += u64::from(bernoulli_exact(lambda, src)?);
    }
    Ok(k)
}

/// Poisson(λ) for any non-negative rational λ.
pub fn poisson_general(lambda: Rational, src: &mut RandomSource) -> Result<u64> {
    let (mut mx, my) = (lambda.num(), lambda.den());
    let mut k = 0;
    if mx == 0 {
        return Ok(k);
    }
    while mx >= my {
        k += poisson_one(src)?;
        mx -= my;
    }
    if mx > 0 {
        k += poisson_sub_one(Rational::new(mx, my)?, src)?;
    }
    Ok(k)
}

/// Symmetric Skellam `Sk(λ, λ)` as the difference of two independent Poissons.
pub fn skellam_exact(lambda: Rational, src: &mut RandomSource) -> Result<i64> {
    let a = poisson_general(lambda, src)?;
    let b = poisson_general(lambda, src)?;
    Ok(a as i64 - b as i64)
}

/// Exact `Bernoulli(exp(-num/den))`.
fn bernoulli_exp(num: u128, den: u128, src: &mut RandomSource) -> Result<bool> {
    if num <= den {
        // P[K odd] where K counts successes of Bernoulli(γ/1), Bernoulli(γ/2), ...
        let mut k: u128 = 1;
        loop {
            let kden = den.checked_mul(k).ok_or(Error::Overflow)?;
            if !bernoulli_wide(num, kden, src)? {
                return Ok(k % 2 == 1);
            }
            k += 1;
        }
    }
    let whole = num / den;
    for _ in 0..whole {
        if !bernoulli_exp(1, 1, src)? {
            return Ok(false);
        }
    }
    bernoulli_exp(num - whole * den, den, src)
}

/// Discrete Laplace with integer scale `t`: `Pr[Y = y] ∝ exp(-|y|/t)`.
fn discrete_laplace(t: u64, src: &mut RandomSource) -> Result<i64> {
    loop {
        let u = src.rand_int(t)? - 1;
        if !bernoulli_exp(u as u128, t as u128, src)? {
            continue;
        }
        let mut v: u64 = 0;
        while bernoulli_exp(1, 1, src)? {
            v += 1;
        }
        let x = u.checked_add(t.checked_mul(v).ok_or(Error::Overflow)?).ok_or(Error::Overflow)?;
        let negative = src.rand_int(2)? == 2;
        if negative && x == 0 {
            continue;
        }
        let x = i64::try_from(x).map_err(|_| Error::Overflow)?;
        return Ok(if negative { -x } else { x });
    }
}

/// Discrete Gaussian `N_Z(0, σ²)` for rational `σ²`, exactly.
pub fn discrete_gaussian_rational(sigma2: Rational, src: &mut RandomSource) -> Result<i64> {
    if sigma2.is_zero() {
        return Err(invalid("discrete Gaussian variance must be positive"));
    }
    let s = sigma2.reduced();
    let (a, b) = (s.num() as u128, s.den() as u128);
    // t = floor(σ) + 1; floor(sqrt(a/b)) = floor(sqrt(floor(a/b)))
    let t = (s.num() / s.den()).sqrt() + 1;
    let t128 = t as u128;
    // γ = (|Y| - σ²/t)² / (2σ²) = (|Y| b t - a)² / (2 a b t²)
    let den = 2u128
        .checked_mul(a)
        .and_then(|x| x.checked_mul(b))
        .and_then(|x| x.checked_mul(t128 * t128))
        .ok_or(Error::Overflow)?;
    loop {
        let y = discrete_laplace(t, src)?;
        let ybt = (y.unsigned_abs() as u128).checked_mul(b * t128).ok_or(Error::Overflow)?;
        let diff = ybt.abs_diff(a);
        let num = diff.checked_mul(diff).ok_or(Error::Overflow)?;
        if bernoulli_exp(num, den, src)? {
            return Ok(y);
        }
    }
}

/// Denominator used to represent a real variance for the exact sampler.
pub const SIGMA2_DEN: u64 = 1 << 16;

/// Discrete Gaussian `N_Z(0, σ²)`. A real `σ²` is first rounded *up* to a
/// multiple of `2^-16` (more noise, never less); dyadic values are exact.
pub fn discrete_gaussian_exact(sigma2: f64, src: &mut RandomSource) -> Result<i64> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(invalid(format!("discrete Gaussian variance must be positive, got {sigma2}")));
    }
    discrete_gaussian_rational(Rational::ceil_from_f64(sigma2, SIGMA2_DEN)?, src)
}

/// Exact integer samplers or fast floating-point ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMode {
    Exact,
    #[default]
    Fast,
}

/// Per-participant noise distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    /// `Sk(λ, λ)`; `λ = 0` disables noise.
    Skellam { lambda: Rational },
    /// `N_Z(0, σ²)`; `σ² = 0` disables noise.
    DiscreteGaussian { sigma2: f64 },
}

impl NoiseSpec {
    pub fn variance(&self) -> f64 {
        match self {
            NoiseSpec::Skellam { lambda } => 2.0 * lambda.to_f64(),
            NoiseSpec::DiscreteGaussian { sigma2 } => *sigma2,
        }
    }

    pub fn is_silent(&self) -> bool {
        match self {
            NoiseSpec::Skellam { lambda } => lambda.is_zero(),
            NoiseSpec::DiscreteGaussian { sigma2 } => *sigma2 == 0.0,
        }
    }
}

#[derive(Debug, Clone)]
enum Plan {
    Silent,
    ExactSkellam(Rational),
    ExactGaussian(Rational),
    FastSkellam(Poisson<f64>),
    /// Inversion table: `cdf[i]` is `Pr[X <= lo + i]`.
    FastTable {
        lo: i64,
        cdf: Vec<f64>,
    },
}

/// A noise distribution prepared for repeated sampling in a given mode.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    spec: NoiseSpec,
    mode: SamplingMode,
    plan: Plan,
}

impl NoiseSampler {
    pub fn new(spec: NoiseSpec, mode: SamplingMode) -> Result<Self> {
        let plan = match (spec, mode) {
            _ if spec.is_silent() => Plan::Silent,
            (NoiseSpec::DiscreteGaussian { sigma2 }, _) if !(sigma2.is_finite() && sigma2 > 0.0) => {
                return Err(invalid(format!("discrete Gaussian variance must be non-negative, got {sigma2}")))
            }
            (NoiseSpec::Skellam { lambda }, SamplingMode::Exact) => Plan::ExactSkellam(lambda),
            (NoiseSpec::Skellam { lambda }, SamplingMode::Fast) => {
                Plan::FastSkellam(Poisson::new(lambda.to_f64()).map_err(|e| invalid(e.to_string()))?)
            }
            (NoiseSpec::DiscreteGaussian { sigma2 }, SamplingMode::Exact) => {
                Plan::ExactGaussian(Rational::ceil_from_f64(sigma2, SIGMA2_DEN)?)
            }
            (NoiseSpec::DiscreteGaussian { sigma2 }, SamplingMode::Fast) => gaussian_table(sigma2),
        };
        Ok(Self { spec, mode, plan })
    }

    pub fn spec(&self) -> NoiseSpec {
        self.spec
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    pub fn sample(&self, src: &mut RandomSource) -> Result<i64> {
        match &self.plan {
            Plan::Silent => Ok(0),
            Plan::ExactSkellam(lambda) => skellam_exact(*lambda, src),
            Plan::ExactGaussian(s2) => discrete_gaussian_rational(*s2, src),
            Plan::FastSkellam(pois) => {
                let a = src.sample_f64(pois);
                let b = src.sample_f64(pois);
                Ok(a as i64 - b as i64)
            }
            Plan::FastTable { lo, cdf } => {
                let u = src.uniform_f64();
                let i = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                Ok(lo + i as i64)
            }
        }
    }

    /// A Bernoulli(`p`) coin in this sampler's mode.
    pub fn coin(&self, p: f64, src: &mut RandomSource) -> Result<bool> {
        match self.mode {
            SamplingMode::Exact => bernoulli_frac(p, src),
            SamplingMode::Fast => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!("Bernoulli probability {p} outside [0, 1]")));
                }
                Ok(src.uniform_f64() < p)
            }
        }
    }
}

fn gaussian_table(sigma2: f64) -> Plan {
    let t = (10.0 * sigma2.sqrt()).ceil() as i64 + 1;
    let weights: Vec<f64> = (-t..=t).map(|k| (-(k as f64).powi(2) / (2.0 * sigma2)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let cdf = weights
        .iter()
        .map(|w| {
            acc += w / total;
            acc
        })
        .collect();
    Plan::FastTable { lo: -t, cdf }
}
