use crate::error::{invalid, Result};
use crate::rng::RandomSource;

/// Binary-labelled records for logistic regression (no intercept).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        if features.len() != labels.len() || features.is_empty() {
            return Err(invalid("need as many labels as records, and at least one record"));
        }
        let dim = features[0].len();
        if dim == 0 || features.iter().any(|f| f.len() != dim) {
            return Err(invalid("records must share a positive dimension"));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(invalid("labels must be 0 or 1"));
        }
        Ok(Self { features, labels })
    }

    /// Standard normal features labelled by the sign of `⟨w*, x⟩` for a
    /// random unit `w*`: separable through the origin.
    pub fn separable_synthetic(n: usize, dim: usize, seed: u64) -> Result<Self> {
        let mut src = RandomSource::derived(seed, &[0xda7a]);
        let w: Vec<f64> = (0..dim).map(|_| src.standard_normal()).collect();
        let features: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| src.standard_normal()).collect()).collect();
        let labels = features.iter().map(|x| u8::from(dot(&w, x) > 0.0)).collect();
        Self::new(features, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features[0].len()
    }

    /// Cross-entropy gradient of record `i` at `theta`.
    pub fn gradient(&self, theta: &[f64], i: usize) -> Vec<f64> {
        logistic_gradient(theta, &self.features[i], self.labels[i])
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `(σ(⟨θ, x⟩) - y) x`.
pub fn logistic_gradient(theta: &[f64], x: &[f64], y: u8) -> Vec<f64> {
    let r = sigmoid(dot(theta, x)) - f64::from(y);
    x.iter().map(|v| r * v).collect()
}

/// Mean cross-entropy over the dataset.
pub fn logistic_loss(theta: &[f64], data: &Dataset) -> f64 {
    let total: f64 = data
        .features
        .iter()
        .zip(&data.labels)
        .map(|(x, &y)| {
            // -log σ(z) for y = 1, -log(1 - σ(z)) for y = 0, computed stably
            let z = dot(theta, x);
            let s = if y == 1 { -z } else { z };
            s.max(0.0) + (-s.abs()).exp().ln_1p()
        })
        .sum();
    total / data.len() as f64
}

pub fn accuracy(theta: &[f64], data: &Dataset) -> f64 {
    let hits = data.features.iter().zip(&data.labels).filter(|(x, &y)| u8::from(dot(theta, x) > 0.0) == y).count();
    hits as f64 / data.len() as f64
}
