//! Exact samplers against independently computed pmfs.

use smm_core::rng::RandomSource;
use smm_core::samplers::{
    bernoulli_exact, bernoulli_frac, discrete_gaussian_exact, discrete_gaussian_rational, poisson_general,
    skellam_exact,
};
use smm_core::stats::chi_square_gof;
use smm_core::{NoiseSampler, NoiseSpec, Rational, SamplingMode};
use statrs::distribution::{Discrete, Poisson};

const DRAWS: usize = 100_000;
const P_MIN: f64 = 1e-3;

/// Chi-square p-value of `samples` against `pmf` evaluated on `lo..=hi`;
/// leftover mass is credited to the edge cells and samples are clamped.
fn gof(samples: &[i64], lo: i64, hi: i64, pmf: impl Fn(i64) -> f64) -> f64 {
    let mut probs: Vec<f64> = (lo..=hi).map(&pmf).collect();
    let inside: f64 = probs.iter().sum();
    let below: f64 = 1.0 - inside - (hi + 1..hi + 200).map(&pmf).sum::<f64>();
    probs[0] += below.max(0.0);
    let last = probs.len() - 1;
    probs[last] += (1.0 - probs.iter().sum::<f64>()).max(0.0);
    let mut counts = vec![0u64; probs.len()];
    for &s in samples {
        counts[(s.clamp(lo, hi) - lo) as usize] += 1;
    }
    chi_square_gof(&counts, &probs).unwrap().p_value
}

fn poisson_pmf(rate: f64) -> impl Fn(i64) -> f64 {
    let d = Poisson::new(rate).unwrap();
    move |k| if k < 0 { 0.0 } else { d.pmf(k as u64) }
}

/// Difference of two independent Poisson(λ) pmfs, by direct convolution.
fn skellam_by_convolution(lambda: f64) -> impl Fn(i64) -> f64 {
    let d = Poisson::new(lambda).unwrap();
    move |k| {
        (0..400u64)
            .map(|j| {
                let a = j as i64 + k;
                if a < 0 {
                    0.0
                } else {
                    d.pmf(a as u64) * d.pmf(j)
                }
            })
            .sum()
    }
}

fn draws(seed: u64, mut f: impl FnMut(&mut RandomSource) -> i64) -> Vec<i64> {
    let mut src = RandomSource::new(seed);
    (0..DRAWS).map(|_| f(&mut src)).collect()
}

#[test]
fn poisson_exact_fits() {
    for (i, (num, den)) in [(1u64, 1u64), (3, 10), (7, 3)].into_iter().enumerate() {
        let lambda = Rational::new(num, den).unwrap();
        let s = draws(100 + i as u64, |src| poisson_general(lambda, src).unwrap() as i64);
        let p = gof(&s, 0, 25, poisson_pmf(num as f64 / den as f64));
        assert!(p > P_MIN, "Poisson({lambda}) p = {p}");
    }
}

#[test]
fn skellam_exact_fits() {
    let s = draws(7, |src| skellam_exact(Rational::integer(3), src).unwrap());
    let p = gof(&s, -25, 25, skellam_by_convolution(3.0));
    assert!(p > P_MIN, "Sk(3) p = {p}");
}

#[test]
fn skellam_is_additive() {
    let (a, b) = (Rational::new(1, 2).unwrap(), Rational::new(5, 4).unwrap());
    let s = draws(8, |src| skellam_exact(a, src).unwrap() + skellam_exact(b, src).unwrap());
    let p = gof(&s, -20, 20, skellam_by_convolution(1.75));
    assert!(p > P_MIN, "Sk(1/2) + Sk(5/4) p = {p}");
}

fn discrete_gaussian_oracle(sigma2: f64, t: i64) -> impl Fn(i64) -> f64 {
    let z: f64 = (-t..=t).map(|k| (-(k * k) as f64 / (2.0 * sigma2)).exp()).sum();
    move |k| {
        if k.abs() > t {
            0.0
        } else {
            (-(k * k) as f64 / (2.0 * sigma2)).exp() / z
        }
    }
}

#[test]
fn discrete_gaussian_exact_fits() {
    let s = draws(9, |src| discrete_gaussian_exact(1.0, src).unwrap());
    let p = gof(&s, -20, 20, discrete_gaussian_oracle(1.0, 20));
    assert!(p > P_MIN, "N_Z(0, 1) p = {p}");
    let mean = s.iter().sum::<i64>() as f64 / DRAWS as f64;
    assert!(mean.abs() < 3.0 / (DRAWS as f64).sqrt(), "mean {mean}");
    // symmetry: Pr[1] vs Pr[-1]
    let plus = s.iter().filter(|&&k| k == 1).count() as f64;
    let minus = s.iter().filter(|&&k| k == -1).count() as f64;
    assert!((plus - minus).abs() < 4.0 * (plus + minus).sqrt(), "{plus} vs {minus}");
}

#[test]
fn discrete_gaussian_rational_variance() {
    let sigma2 = Rational::new(25, 4).unwrap();
    let s = draws(10, |src| discrete_gaussian_rational(sigma2, src).unwrap());
    let p = gof(&s, -40, 40, discrete_gaussian_oracle(6.25, 60));
    assert!(p > P_MIN, "N_Z(0, 25/4) p = {p}");
}

#[test]
fn bernoulli_rates() {
    let mut src = RandomSource::new(11);
    let hits = (0..DRAWS).filter(|_| bernoulli_frac(0.37, &mut src).unwrap()).count() as f64;
    assert!((hits / DRAWS as f64 - 0.37).abs() < 0.01);
    let third = Rational::new(1, 3).unwrap();
    let hits = (0..DRAWS).filter(|_| bernoulli_exact(third, &mut src).unwrap()).count() as f64;
    let sd = (DRAWS as f64 * (2.0 / 9.0)).sqrt();
    assert!((hits - DRAWS as f64 / 3.0).abs() < 4.0 * sd);
}

#[test]
fn exact_mode_uses_integer_draws_only() {
    let mut src = RandomSource::new(12);
    for _ in 0..1000 {
        skellam_exact(Rational::new(7, 3).unwrap(), &mut src).unwrap();
        discrete_gaussian_exact(2.5, &mut src).unwrap();
        bernoulli_frac(0.3, &mut src).unwrap();
    }
    assert_eq!(src.float_draws(), 0);
    assert!(src.int_draws() > 0);
}

#[test]
fn streams_repeat_under_a_seed() {
    for mode in [SamplingMode::Exact, SamplingMode::Fast] {
        for spec in
            [NoiseSpec::Skellam { lambda: Rational::new(9, 2).unwrap() }, NoiseSpec::DiscreteGaussian { sigma2: 3.0 }]
        {
            let sampler = NoiseSampler::new(spec, mode).unwrap();
            let run = || draws(13, |src| sampler.sample(src).unwrap())[..2000].to_vec();
            assert_eq!(run(), run());
        }
    }
}

#[test]
fn fast_mode_is_close() {
    let fast = NoiseSampler::new(NoiseSpec::Skellam { lambda: Rational::integer(3) }, SamplingMode::Fast).unwrap();
    let s = draws(14, |src| fast.sample(src).unwrap());
    assert!(gof(&s, -25, 25, skellam_by_convolution(3.0)) > P_MIN);
    let fast = NoiseSampler::new(NoiseSpec::DiscreteGaussian { sigma2: 1.0 }, SamplingMode::Fast).unwrap();
    let s = draws(15, |src| fast.sample(src).unwrap());
    assert!(gof(&s, -20, 20, discrete_gaussian_oracle(1.0, 20)) > P_MIN);
}
