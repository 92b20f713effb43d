//! Federated orchestration over a simulated secure aggregator, a small
//! logistic-regression workload, and the distributed sum-estimation
//! experiment.
//!
//! Randomness is derived per `(round, participant)` from the master seed, so
//! results do not depend on how the per-participant work is scheduled.

mod experiment;
mod model;
mod train;

pub use experiment::{
    sphere_points, sum_estimation_experiment, trial_signs, SumEstimationConfig, SumEstimationResult, TrialRow,
};
pub use model::{accuracy, logistic_gradient, logistic_loss, sigmoid, Dataset};
pub use train::{
    accounting_for, calibrate_for, calibrate_training, train, training_curve, training_report, FlConfig, ModelState,
    RoundMetrics, TrainOutcome, UpdateRule,
};

use crate::error::{invalid, Result};
use crate::rng::RandomSource;
use crate::samplers::bernoulli_frac;
use crate::transforms::EncodedVector;

/// Coordinate-wise sum modulo `m`: all the server learns.
pub fn secure_sum(outputs: &[EncodedVector]) -> Result<EncodedVector> {
    let first = outputs.first().ok_or_else(|| invalid("secure sum needs at least one input"))?;
    let (d, m) = (first.entries.len(), first.m);
    let mut acc = vec![0u64; d];
    for z in outputs {
        if z.entries.len() != d || z.m != m {
            return Err(invalid("secure sum inputs differ in dimension or modulus"));
        }
        for (a, &e) in acc.iter_mut().zip(&z.entries) {
            *a = ((u128::from(*a) + u128::from(e)) % u128::from(m)) as u64;
        }
    }
    Ok(EncodedVector { entries: acc, m })
}

/// Indices `0..n` kept independently with probability `q`.
pub fn poisson_sample(n: usize, q: f64, src: &mut RandomSource) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!("sampling rate {q} outside [0, 1]")));
    }
    let mut out = Vec::new();
    for i in 0..n {
        if bernoulli_frac(q, src)? {
            out.push(i);
        }
    }
    Ok(out)
}

/// Expected batch size `round(n q)`, the contributor count used for
/// accounting and for normalizing the update.
pub fn expected_batch(n: usize, q: f64) -> usize {
    (n as f64 * q).round() as usize
}
