use super::pmf::Pmf;
use super::KahanSum;
use crate::error::{invalid, Error, Result};

/// Rényi divergence of order `alpha` of `p` from `q`:
/// `1/(alpha-1) * ln sum_k p(k)^alpha q(k)^(1-alpha)`.
///
/// Summed over the support of `p` in log space with compensated summation.
/// Fails with [`Error::DivergenceInfinite`] when `p` puts mass where `q`
/// has none, so build `q` on a window covering `p` (see [`super::Support`]).
pub fn renyi_divergence(p: &Pmf, q: &Pmf, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(invalid(format!("Renyi order must exceed 1, got {alpha}")));
    }
    let mut logs = Vec::with_capacity(p.masses().len());
    for (k, pk) in p.iter() {
        if pk == 0.0 {
            continue;
        }
        let qk = q.get(k);
        if qk == 0.0 {
            return Err(Error::DivergenceInfinite);
        }
        logs.push(alpha * pk.ln() + (1.0 - alpha) * qk.ln());
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum = logs.iter().map(|l| (l - top).exp()).collect::<KahanSum>().value();
    Ok((top + sum.ln()) / (alpha - 1.0))
}
