use rayon::prelude::*;

use super::secure_sum;
use super::train::{accounting_for, calibrate_for};
use crate::accountant::{PrivacyReport, Schedule};
use crate::error::{invalid, Result};
use crate::mechanisms::{
    baseline_ddg, baseline_skellam_cr, participant_encode_dgm, participant_encode_smm, server_decode, Encoder,
    Mechanism,
};
use crate::rng::{derive_seed, RandomSource};
use crate::samplers::{NoiseSampler, SamplingMode};
use crate::transforms::{ClipSpec, SignVector};

const TAG_DATA: u64 = 11;
const TAG_ROTATION: u64 = 12;
const TAG_PARTICIPANT: u64 = 13;

/// Distributed mean/sum estimation over points on a sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct SumEstimationConfig {
    pub n: usize,
    /// Dimension (power of two).
    pub d: usize,
    /// Norm of every data point; also the L2 clip of the baselines.
    pub radius: f64,
    pub eps: f64,
    pub delta: f64,
    pub m: u64,
    pub gamma: f64,
    /// Mixture budget on `Σ φ`; defaults to `(γ r)²`.
    pub c: Option<f64>,
    pub beta: f64,
    pub trials: usize,
    pub seed: u64,
    pub mode: SamplingMode,
    /// Use this per-participant `λ` / `σ²` instead of calibrating to `eps`.
    pub noise: Option<f64>,
    /// Skip noise entirely (rounding and modular effects only).
    pub no_noise: bool,
}

impl SumEstimationConfig {
    pub fn budget(&self) -> f64 {
        self.c.unwrap_or((self.gamma * self.radius).powi(2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    /// `‖estimate − Σ x_i‖² / d`, in original units.
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumEstimationResult {
    pub mechanism: Mechanism,
    /// Per-participant `λ` or `σ²` actually used (0 without noise).
    pub noise: f64,
    /// Coordinate bound used by the mixtures.
    pub delta_inf: u64,
    pub report: Option<PrivacyReport>,
    pub rows: Vec<TrialRow>,
}

impl SumEstimationResult {
    pub fn mean_mse(&self) -> f64 {
        self.rows.iter().map(|r| r.mse).sum::<f64>() / self.rows.len() as f64
    }

    /// Standard error of [`Self::mean_mse`] across trials.
    pub fn std_error(&self) -> f64 {
        let k = self.rows.len() as f64;
        if k < 2.0 {
            return f64::NAN;
        }
        let mu = self.mean_mse();
        let var = self.rows.iter().map(|r| (r.mse - mu).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    }
}

/// `n` points drawn uniformly from the sphere of radius `radius` in `R^d`.
pub fn sphere_points(n: usize, d: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut src = RandomSource::derived(seed, &[TAG_DATA]);
    (0..n)
        .map(|_| loop {
            let v: Vec<f64> = (0..d).map(|_| src.standard_normal()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                break v.into_iter().map(|x| x * radius / norm).collect();
            }
        })
        .collect()
}

/// Sign vector used for the rotation of trial `trial`.
pub fn trial_signs(seed: u64, trial: usize, d: usize) -> Result<SignVector> {
    SignVector::from_seed(derive_seed(seed, &[TAG_ROTATION, trial as u64]), d)
}

/// Runs `trials` independent single-round aggregations of the same data
/// through `mechanism` and records the squared error of each decoded sum.
pub fn sum_estimation_experiment(cfg: &SumEstimationConfig, mechanism: Mechanism) -> Result<SumEstimationResult> {
    if cfg.n == 0 || cfg.trials == 0 {
        return Err(invalid("need at least one participant and one trial"));
    }
    if !(cfg.radius > 0.0 && cfg.radius.is_finite()) {
        return Err(invalid("radius must be positive"));
    }
    let c = cfg.budget();
    let schedule = Schedule::single(cfg.n as u64);
    let accounting = accounting_for(mechanism, c, cfg.gamma, cfg.radius, cfg.d, cfg.beta);
    let cap = cfg.m / 2 - 1;
    let (noise, delta_inf, report) = if cfg.no_noise {
        (0.0, cap, None)
    } else if let Some(noise) = cfg.noise {
        let report = accounting.report(&schedule, noise, cfg.delta)?;
        let dinf = accounting.delta_inf(&schedule, noise, report.best_alpha).min(cap);
        (noise, dinf, Some(report))
    } else {
        let cal = calibrate_for(mechanism, &accounting, &schedule, cfg.m, cfg.eps, cfg.delta)?;
        (cal.noise, cal.delta_inf, Some(cal.report))
    };
    let spec = ClipSpec {
        c,
        // baselines do not use the coordinate cap
        delta_inf: if matches!(mechanism, Mechanism::Smm | Mechanism::Dgm) { delta_inf.max(1) } else { cap },
        gamma: cfg.gamma,
        m: cfg.m,
        d: cfg.d,
    };
    spec.validate()?;
    let sampler = NoiseSampler::new(mechanism.noise_spec(noise)?, cfg.mode)?;
    let points = sphere_points(cfg.n, cfg.d, cfg.radius, cfg.seed);
    let mut truth = vec![0.0; cfg.d];
    for x in &points {
        for (t, v) in truth.iter_mut().zip(x) {
            *t += v;
        }
    }

    let mut rows = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let xi = trial_signs(cfg.seed, trial, cfg.d)?;
        let enc = Encoder::new(&spec, &xi, &sampler);
        let outputs = points
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                let mut src = RandomSource::derived(cfg.seed, &[TAG_PARTICIPANT, trial as u64, i as u64]);
                let out = match mechanism {
                    Mechanism::Smm => participant_encode_smm(x, &enc, &mut src),
                    Mechanism::Dgm => participant_encode_dgm(x, &enc, &mut src),
                    Mechanism::SkellamCr => baseline_skellam_cr(x, &enc, cfg.radius, cfg.beta, &mut src),
                    Mechanism::Ddg => baseline_ddg(x, &enc, cfg.radius, cfg.beta, &mut src),
                };
                out.map(|o| o.encoded)
            })
            .collect::<Result<Vec<_>>>()?;
        let est = server_decode(&secure_sum(&outputs)?, &spec, &xi, cfg.n)?;
        let mse = est.values.iter().zip(&truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / cfg.d as f64;
        rows.push(TrialRow { trial, mse });
    }
    Ok(SumEstimationResult {
        mechanism,
        noise: sampler.spec().variance() / if mechanism.uses_skellam() { 2.0 } else { 1.0 },
        delta_inf: spec.delta_inf,
        report,
        rows,
    })
}
