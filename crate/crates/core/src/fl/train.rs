use rayon::prelude::*;

use super::model::{accuracy, logistic_loss, Dataset};
use super::{expected_batch, poisson_sample, secure_sum};
use crate::accountant::{best_epsilon, calibrate, Accounting, Calibration, PrivacyReport, RdpCurve, Schedule};
use crate::error::{invalid, Result};
use crate::mechanisms::{
    baseline_ddg, baseline_skellam_cr, participant_encode_dgm, participant_encode_smm, server_decode, Encoder,
    Mechanism, ParticipantOutput,
};
use crate::rng::{derive_seed, RandomSource};
use crate::samplers::{NoiseSampler, NoiseSpec, SamplingMode};
use crate::transforms::{conditional_round_bound, ClipSpec, SignVector};

const TAG_SAMPLE: u64 = 1;
const TAG_ROTATION: u64 = 2;
const TAG_PARTICIPANT: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateRule {
    #[default]
    Sgd,
    /// Adam with the usual `β₁ = 0.9`, `β₂ = 0.999`.
    Adam,
}

/// Model weights, zero-padded to a power-of-two length for the rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub theta: Vec<f64>,
    /// Number of leading coordinates that carry features.
    pub dim_logical: usize,
}

impl ModelState {
    pub fn zeros(dim: usize) -> Self {
        Self { theta: vec![0.0; dim.max(1).next_power_of_two()], dim_logical: dim }
    }

    /// Weights restricted to the feature coordinates.
    pub fn weights(&self) -> &[f64] {
        &self.theta[..self.dim_logical]
    }
}

/// One training run's settings. `spec.d` must equal the padded model length.
#[derive(Debug, Clone, PartialEq)]
pub struct FlConfig {
    /// Poisson sampling rate.
    pub q: f64,
    pub rounds: u64,
    pub spec: ClipSpec,
    /// Per-participant noise; a silent spec trains without privacy.
    pub noise: NoiseSpec,
    pub mode: SamplingMode,
    pub learning_rate: f64,
    pub update_rule: UpdateRule,
    pub seed: u64,
    /// L2 clip (unscaled) used by the conditional-rounding baselines.
    pub delta2: f64,
    /// Conditional-rounding failure probability.
    pub beta: f64,
    /// Target `δ` of the reported guarantee.
    pub delta: f64,
    pub max_order: u32,
}

/// Per-round progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundMetrics {
    pub round: u64,
    pub loss: f64,
    pub accuracy: f64,
    pub batch_size: usize,
    /// `ε` spent by the rounds so far; `None` without noise.
    pub eps_spent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ModelState,
    pub report: Option<PrivacyReport>,
    pub metrics: Vec<RoundMetrics>,
}

/// Accounting parameters of `mechanism` for inputs clipped to budget `c`
/// (mixtures) or L2 norm `delta2` (baselines), at scale `gamma`.
pub fn accounting_for(mechanism: Mechanism, c: f64, gamma: f64, delta2: f64, d: usize, beta: f64) -> Accounting {
    let b = conditional_round_bound(gamma, delta2, d, beta);
    match mechanism {
        Mechanism::Smm => Accounting::Smm { c },
        Mechanism::Dgm => Accounting::Dgm { c, delta_1: (d as f64 * c).sqrt(), d: d as u64 },
        Mechanism::SkellamCr => Accounting::SkellamCr { b },
        Mechanism::Ddg => Accounting::Ddg { delta2: b, delta1: ((d as f64).sqrt() * b).min(b * b), d: d as u64 },
    }
}

/// Calibrates `mechanism` for `schedule` and caps the returned coordinate
/// bound at what the modulus can represent (a smaller bound is always
/// admissible).
pub fn calibrate_for(
    mechanism: Mechanism,
    accounting: &Accounting,
    schedule: &Schedule,
    m: u64,
    eps: f64,
    delta: f64,
) -> Result<Calibration> {
    let mut cal = calibrate(accounting, schedule, eps, delta)?;
    if matches!(mechanism, Mechanism::Smm | Mechanism::Dgm) {
        cal.delta_inf = cal.delta_inf.min(m / 2 - 1);
    }
    Ok(cal)
}

/// Returns `cfg` with noise (and, for the mixtures, the coordinate bound)
/// calibrated so that the full run meets `eps` at `cfg.delta`.
pub fn calibrate_training(mechanism: Mechanism, cfg: &FlConfig, n: usize, eps: f64) -> Result<(FlConfig, Calibration)> {
    let s = schedule(cfg, n, cfg.rounds)?;
    let spec = &cfg.spec;
    let accounting = accounting_for(mechanism, spec.c, spec.gamma, cfg.delta2, spec.d, cfg.beta);
    let cal = calibrate_for(mechanism, &accounting, &s, spec.m, eps, cfg.delta)?;
    let mut out = cfg.clone();
    out.noise = mechanism.noise_spec(cal.noise)?;
    if matches!(mechanism, Mechanism::Smm | Mechanism::Dgm) {
        out.spec.delta_inf = cal.delta_inf.max(1);
    }
    Ok((out, cal))
}

fn schedule(cfg: &FlConfig, n: usize, rounds: u64) -> Result<Schedule> {
    let batch = expected_batch(n, cfg.q);
    if batch == 0 {
        return Err(invalid(format!("expected batch round(n q) is zero for n = {n}, q = {}", cfg.q)));
    }
    Ok(Schedule { rounds, q: cfg.q, n_agg: batch as u64, max_order: cfg.max_order })
}

/// RDP curve of `rounds` training rounds with the configured noise and a
/// *fixed* coordinate bound `cfg.spec.delta_inf`. Fails with the violated
/// constraint when no order is admissible.
pub fn training_curve(mechanism: Mechanism, cfg: &FlConfig, n: usize, rounds: u64) -> Result<RdpCurve> {
    let s = schedule(cfg, n, rounds)?;
    let spec = &cfg.spec;
    let noise = match (mechanism.uses_skellam(), cfg.noise) {
        (true, NoiseSpec::Skellam { lambda }) => lambda.to_f64(),
        (false, NoiseSpec::DiscreteGaussian { sigma2 }) => sigma2,
        _ => return Err(invalid("noise family does not match the mechanism")),
    };
    let acc = accounting_for(mechanism, spec.c, spec.gamma, cfg.delta2, spec.d, cfg.beta);
    let curve = acc.curve_at(&s, noise, Some(spec.delta_inf))?;
    if curve.is_empty() {
        acc.report_at(&s, noise, Some(spec.delta_inf), cfg.delta)?;
    }
    Ok(curve)
}

/// Guarantee of a full training run; `None` when noise is disabled.
pub fn training_report(mechanism: Mechanism, cfg: &FlConfig, n: usize) -> Result<Option<PrivacyReport>> {
    if cfg.noise.is_silent() {
        return Ok(None);
    }
    best_epsilon(&training_curve(mechanism, cfg, n, cfg.rounds)?, cfg.delta).map(Some)
}

fn encode(
    mechanism: Mechanism,
    g: &[f64],
    enc: &Encoder<'_>,
    cfg: &FlConfig,
    src: &mut RandomSource,
) -> Result<ParticipantOutput> {
    match mechanism {
        Mechanism::Smm => participant_encode_smm(g, enc, src),
        Mechanism::Dgm => participant_encode_dgm(g, enc, src),
        Mechanism::SkellamCr => baseline_skellam_cr(g, enc, cfg.delta2, cfg.beta, src),
        Mechanism::Ddg => baseline_ddg(g, enc, cfg.delta2, cfg.beta, src),
    }
}

/// Private federated logistic regression. Each round Poisson-samples the
/// participants, aggregates their encoded gradients through the secure
/// sum, and steps along the decoded sum divided by the expected batch
/// size. Infeasible accounting parameters fail before any round runs.
pub fn train(data: &Dataset, model: ModelState, cfg: &FlConfig, mechanism: Mechanism) -> Result<TrainOutcome> {
    let d = model.theta.len();
    if cfg.spec.d != d || model.dim_logical != data.dim() {
        return Err(invalid(format!(
            "model has {} features padded to {d}, data has {} and the clip spec {}",
            model.dim_logical,
            data.dim(),
            cfg.spec.d
        )));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(invalid("learning rate must be positive"));
    }
    cfg.spec.validate()?;
    let n = data.len();
    let batch_norm = expected_batch(n, cfg.q);
    let (report, per_round) = if cfg.noise.is_silent() {
        if batch_norm == 0 {
            return Err(invalid("expected batch round(n q) is zero"));
        }
        (None, None)
    } else {
        (training_report(mechanism, cfg, n)?, Some(training_curve(mechanism, cfg, n, 1)?))
    };
    let noise = NoiseSampler::new(cfg.noise, cfg.mode)?;
    let mut model = model;
    let mut adam = (vec![0.0; d], vec![0.0; d]);
    let mut metrics = Vec::with_capacity(cfg.rounds as usize);

    for round in 1..=cfg.rounds {
        let mut sampler = RandomSource::derived(cfg.seed, &[TAG_SAMPLE, round]);
        let batch = poisson_sample(n, cfg.q, &mut sampler)?;
        if !batch.is_empty() {
            let xi = SignVector::from_seed(derive_seed(cfg.seed, &[TAG_ROTATION, round]), d)?;
            let enc = Encoder::new(&cfg.spec, &xi, &noise);
            let theta = &model.theta;
            let outputs = batch
                .par_iter()
                .map(|&i| {
                    let mut src = RandomSource::derived(cfg.seed, &[TAG_PARTICIPANT, round, i as u64]);
                    let mut g = data.gradient(&theta[..model.dim_logical], i);
                    g.resize(d, 0.0);
                    encode(mechanism, &g, &enc, cfg, &mut src).map(|o| o.encoded)
                })
                .collect::<Result<Vec<_>>>()?;
            let sum = server_decode(&secure_sum(&outputs)?, &cfg.spec, &xi, batch.len())?;
            let grad: Vec<f64> = sum.values.iter().map(|v| v / batch_norm as f64).collect();
            step(&mut model.theta, &grad, cfg, &mut adam, round);
            // padding coordinates carry only noise
            model.theta[model.dim_logical..].iter_mut().for_each(|v| *v = 0.0);
        }
        let eps_spent = match &per_round {
            Some(curve) => Some(best_epsilon(&curve.scaled(round as f64), cfg.delta)?.epsilon),
            None => None,
        };
        metrics.push(RoundMetrics {
            round,
            loss: logistic_loss(model.weights(), data),
            accuracy: accuracy(model.weights(), data),
            batch_size: batch.len(),
            eps_spent,
        });
    }
    Ok(TrainOutcome { model, report, metrics })
}

fn step(theta: &mut [f64], grad: &[f64], cfg: &FlConfig, adam: &mut (Vec<f64>, Vec<f64>), t: u64) {
    match cfg.update_rule {
        UpdateRule::Sgd => {
            for (w, g) in theta.iter_mut().zip(grad) {
                *w -= cfg.learning_rate * g;
            }
        }
        UpdateRule::Adam => {
            const B1: f64 = 0.9;
            const B2: f64 = 0.999;
            let (m, v) = adam;
            let c1 = 1.0 - B1.powi(t as i32);
            let c2 = 1.0 - B2.powi(t as i32);
            for j in 0..theta.len() {
                m[j] = B1 * m[j] + (1.0 - B1) * grad[j];
                v[j] = B2 * v[j] + (1.0 - B2) * grad[j] * grad[j];
                theta[j] -= cfg.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + 1e-8);
            }
        }
    }
}
