//! Chi-square goodness-of-fit, used to check samplers against their pmfs.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};
use crate::math::Pmf;

/// Bins whose expected count falls below this are pooled with a neighbour.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofResult {
    pub chi2: f64,
    /// Degrees of freedom after pooling.
    pub df: usize,
    pub p_value: f64,
    pub samples: u64,
}

/// Pearson's test of observed `counts` against cell probabilities `probs`
/// (which should sum to 1). Adjacent cells are pooled left to right until
/// each pooled cell expects at least [`MIN_EXPECTED`] hits; a short final
/// run joins the last full cell.
pub fn chi_square_gof(counts: &[u64], probs: &[f64]) -> Result<GofResult> {
    if counts.len() != probs.len() || counts.is_empty() {
        return Err(invalid("counts and probabilities must be non-empty and the same length"));
    }
    let total: u64 = counts.iter().sum();
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(probs) {
        obs += c as f64;
        exp += p * n;
        if exp >= MIN_EXPECTED {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }
    if cells.len() < 2 {
        return Err(invalid("too few samples for a chi-square test"));
    }
    let chi2: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = cells.len() - 1;
    let dist = ChiSquared::new(df as f64).map_err(|e| invalid(e.to_string()))?;
    Ok(GofResult { chi2, df, p_value: dist.sf(chi2), samples: total })
}

/// Tests integer `samples` against `pmf`. Samples outside the pmf window
/// are counted in the nearest edge cell.
pub fn gof_samples(samples: &[i64], pmf: &Pmf) -> Result<GofResult> {
    let (lo, hi) = (pmf.lo(), pmf.hi());
    let mut counts = vec![0u64; pmf.masses().len()];
    for &s in samples {
        counts[(s.clamp(lo, hi) - lo) as usize] += 1;
    }
    let total = pmf.total();
    let probs: Vec<f64> = pmf.masses().iter().map(|m| m / total).collect();
    chi_square_gof(&counts, &probs)
}
