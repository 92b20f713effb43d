//! Mechanism outputs: unbiasedness, error law, pipeline agreement and the
//! law of the aggregated noise.

use smm_core::fl::secure_sum;
use smm_core::mechanisms::{
    dgm_perturb_scalar, participant_encode_dgm, participant_encode_smm, server_decode, smm_perturb_scalar, Encoder,
};
use smm_core::rng::RandomSource;
use smm_core::stats::chi_square_gof;
use smm_core::transforms::{clip_smm, mod_decode, rotate, ClipSpec, SignVector};
use smm_core::{NoiseSampler, NoiseSpec, Rational, SamplingMode};
use statrs::distribution::{Discrete, Poisson};

/// Sum of `n` scalar SMM outputs at `x`, repeated; returns (mean, mse)
/// of the error against `n x`.
fn repeated_sums(x: f64, n: usize, reps: usize, seed: u64, draw: impl Fn(&mut RandomSource) -> i64) -> (f64, f64) {
    let mut src = RandomSource::new(seed);
    let truth = n as f64 * x;
    let errs: Vec<f64> = (0..reps).map(|_| (0..n).map(|_| draw(&mut src)).sum::<i64>() as f64 - truth).collect();
    let mean = errs.iter().sum::<f64>() / reps as f64;
    let mse = errs.iter().map(|e| e * e).sum::<f64>() / reps as f64;
    (mean, mse)
}

#[test]
fn skellam_mixture_error_law() {
    let (x, n, reps) = (0.37, 10, 10_000);
    let lambda = Rational::integer(4);
    let (mean, mse) = repeated_sums(x, n, reps, 21, |src| smm_perturb_scalar(x, lambda, src).unwrap());
    let p: f64 = 0.37;
    let predicted = 2.0 * n as f64 * 4.0 + n as f64 * (p - p * p);
    assert!((predicted - 82.331).abs() < 1e-9);
    assert!(mean.abs() <= 4.0 * (predicted / reps as f64).sqrt(), "mean error {mean}");
    assert!((mse / predicted - 1.0).abs() <= 0.03, "mse {mse} vs {predicted}");
}

#[test]
fn gaussian_mixture_error_law() {
    let (x, n, reps) = (-2.8, 10, 10_000);
    let (mean, mse) = repeated_sums(x, n, reps, 22, |src| dgm_perturb_scalar(x, 2.5, src).unwrap());
    let p: f64 = 0.2;
    // a discrete Gaussian with σ² = 2.5 has variance within 1e-10 of σ²
    let predicted = n as f64 * 2.5 + n as f64 * (p - p * p);
    assert!(mean.abs() <= 4.0 * (predicted / reps as f64).sqrt(), "mean error {mean}");
    assert!((mse / predicted - 1.0).abs() <= 0.03, "mse {mse} vs {predicted}");
}

#[test]
fn pipeline_reduces_to_the_scalar_mechanism() {
    let lambda = Rational::new(5, 2).unwrap();
    let noise = NoiseSampler::new(NoiseSpec::Skellam { lambda }, SamplingMode::Exact).unwrap();
    let xi = SignVector::ones(1).unwrap();
    let spec = ClipSpec { c: 6.0, delta_inf: 3, gamma: 1.0, m: 1 << 16, d: 1 };
    let enc = Encoder::new(&spec, &xi, &noise);
    for (i, &x) in [0.0, 0.37, -1.5, 2.2, 7.9, -30.0].iter().enumerate() {
        for rep in 0..50 {
            let seed = 1000 * i as u64 + rep;
            let out = participant_encode_smm(&[x], &enc, &mut RandomSource::new(seed)).unwrap();
            let clipped = clip_smm(&[x], &spec)[0];
            let direct = smm_perturb_scalar(clipped, lambda, &mut RandomSource::new(seed)).unwrap();
            assert_eq!(mod_decode(&out.encoded), vec![direct], "x={x}");
        }
    }
}

#[test]
fn traced_rounding_picks_a_neighbour() {
    let noise = NoiseSampler::new(NoiseSpec::DiscreteGaussian { sigma2: 4.0 }, SamplingMode::Exact).unwrap();
    let xi = SignVector::from_seed(3, 16).unwrap();
    let spec = ClipSpec { c: 200.0, delta_inf: 6, gamma: 3.0, m: 1 << 12, d: 16 };
    let mut enc = Encoder::new(&spec, &xi, &noise);
    enc.trace = true;
    let mut src = RandomSource::new(4);
    let g: Vec<f64> = (0..16).map(|_| src.standard_normal()).collect();
    let out = participant_encode_dgm(&g, &enc, &mut src).unwrap();
    let trace = out.trace.unwrap();
    assert_eq!(trace.pre_clip, rotate(&g, &xi).unwrap().iter().map(|v| v * 3.0).collect::<Vec<_>>());
    for (&r, &x) in trace.rounded.iter().zip(&trace.post_clip) {
        assert!(r == x.floor() as i64 || r == x.ceil() as i64);
    }
    assert!(Encoder::new(&spec, &xi, &noise).encode_mixture(&g, &mut src).unwrap().trace.is_none());
}

/// Pr[Sk(λ, λ) = k] by direct convolution of Poisson pmfs.
fn skellam_oracle(lambda: f64, k: i64) -> f64 {
    let d = Poisson::new(lambda).unwrap();
    (0..600u64)
        .filter_map(|j| {
            let a = j as i64 + k;
            (a >= 0).then(|| d.pmf(a as u64) * d.pmf(j))
        })
        .sum()
}

#[test]
fn aggregated_noise_is_skellam() {
    // d = 1, n = 10 integer inputs: decoded sum minus the true sum is Sk(nλ)
    let n = 10;
    let lambda = Rational::new(3, 4).unwrap();
    let noise = NoiseSampler::new(NoiseSpec::Skellam { lambda }, SamplingMode::Exact).unwrap();
    let spec = ClipSpec { c: 100.0, delta_inf: 5, gamma: 1.0, m: 1 << 10, d: 1 };
    let inputs: Vec<f64> = (0..n).map(|i| (i % 4) as f64 - 1.0).collect();
    let truth: f64 = inputs.iter().sum();
    let reps = 50_000;
    let (lo, hi) = (-25i64, 25i64);
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    let mut src = RandomSource::new(5);
    for rep in 0..reps {
        let xi = SignVector::from_seed(rep, 1).unwrap();
        let enc = Encoder::new(&spec, &xi, &noise);
        let outs: Vec<_> =
            inputs.iter().map(|&x| participant_encode_smm(&[x], &enc, &mut src).unwrap().encoded).collect();
        let est = server_decode(&secure_sum(&outs).unwrap(), &spec, &xi, n).unwrap();
        let k = (est.values[0] - truth).round() as i64;
        counts[(k.clamp(lo, hi) - lo) as usize] += 1;
    }
    let total = 7.5;
    let mut probs: Vec<f64> = (lo..=hi).map(|k| skellam_oracle(total, k)).collect();
    let tail = (1.0 - probs.iter().sum::<f64>()) / 2.0;
    probs[0] += tail;
    *probs.last_mut().unwrap() += tail;
    let gof = chi_square_gof(&counts, &probs).unwrap();
    assert!(gof.p_value > 1e-3, "{gof:?}");
}

#[test]
fn decoded_sums_are_unbiased() {
    let (d, n, reps, gamma) = (8usize, 5usize, 4000u64, 2.0);
    let mut data_src = RandomSource::new(6);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| 0.7 * data_src.standard_normal()).collect()).collect();
    let truth: Vec<f64> = (0..d).map(|j| inputs.iter().map(|x| x[j]).sum()).collect();
    let spec = ClipSpec { c: 1e6, delta_inf: 100, gamma, m: 1 << 16, d };
    for spec_noise in [NoiseSpec::Skellam { lambda: Rational::integer(2) }, NoiseSpec::DiscreteGaussian { sigma2: 4.0 }]
    {
        let noise = NoiseSampler::new(spec_noise, SamplingMode::Fast).unwrap();
        let mut mean = vec![0.0; d];
        let mut src = RandomSource::new(7);
        for rep in 0..reps {
            let xi = SignVector::from_seed(rep, d).unwrap();
            let enc = Encoder::new(&spec, &xi, &noise);
            let outs: Vec<_> = inputs
                .iter()
                .map(|x| {
                    let o = match spec_noise {
                        NoiseSpec::Skellam { .. } => participant_encode_smm(x, &enc, &mut src),
                        NoiseSpec::DiscreteGaussian { .. } => participant_encode_dgm(x, &enc, &mut src),
                    };
                    o.unwrap().encoded
                })
                .collect();
            let est = server_decode(&secure_sum(&outs).unwrap(), &spec, &xi, n).unwrap();
            for (m, v) in mean.iter_mut().zip(&est.values) {
                *m += v / reps as f64;
            }
        }
        // per-coordinate sd of one estimate is at most √(n (var + 1/4)) / γ
        let sd = ((n as f64) * (spec_noise.variance() + 0.25)).sqrt() / gamma / (reps as f64).sqrt();
        for (m, t) in mean.iter().zip(&truth) {
            assert!((m - t).abs() <= 4.0 * sd, "{spec_noise:?}: {m} vs {t}");
        }
    }
}
