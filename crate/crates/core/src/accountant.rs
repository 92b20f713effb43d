//! Rényi-DP accounting.
//!
//! Closed-form per-order bounds for each mechanism, composition,
//! amplification by Poisson subsampling, conversion to `(ε, δ)`, and noise
//! calibration. All divergences are in nats.
//!
//! Bounds carry preconditions on the order `α`. An order that violates
//! them is reported as [`Error::OrderOutOfRange`] and simply left out of
//! the curve; it is never clamped into range. Every precondition used here
//! is monotone in `α`, so the admissible orders always form a prefix
//! `2..=k`.
//!
//! Under Poisson sampling the batch size is random; the accounting uses the
//! expected batch size `round(n q)` as the number of noise contributors.
//! A batch that happens to come out smaller carries less noise than the
//! bound assumes, so treat training guarantees as nominal.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use statrs::function::factorial::ln_binomial;

use crate::error::{invalid, Error, Result};

/// Largest Rényi order searched when converting to `(ε, δ)`.
pub const DEFAULT_MAX_ORDER: u32 = 100;

/// Upper end of the calibration search for a noise parameter.
pub const MAX_NOISE_PARAM: f64 = 1e12;

/// Relative width at which calibration bisection stops.
pub const CALIBRATION_RTOL: f64 = 1e-3;

/// Map from integer order `α >= 2` to a divergence bound `τ(α)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RdpCurve {
    taus: BTreeMap<u32, f64>,
}

impl RdpCurve {
    pub fn new() -> Self {
        Self::default()
    }

    /// Evaluates `f` at orders `2..=max_order`, dropping the orders it
    /// rejects with [`Error::OrderOutOfRange`]. Other errors propagate.
    pub fn from_fn(max_order: u32, mut f: impl FnMut(u32) -> Result<f64>) -> Result<Self> {
        let mut curve = Self::new();
        for alpha in 2..=max_order {
            match f(alpha) {
                Ok(tau) => curve.insert(alpha, tau)?,
                Err(Error::OrderOutOfRange { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(curve)
    }

    pub fn insert(&mut self, alpha: u32, tau: f64) -> Result<()> {
        if alpha < 2 {
            return Err(invalid(format!("RDP orders start at 2, got {alpha}")));
        }
        if !(tau >= 0.0) {
            return Err(invalid(format!("RDP bound must be non-negative, got {tau}")));
        }
        self.taus.insert(alpha, tau);
        Ok(())
    }

    pub fn get(&self, alpha: u32) -> Option<f64> {
        self.taus.get(&alpha).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.taus.iter().map(|(&a, &t)| (a, t))
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    /// Bound after `times` adaptive repetitions.
    pub fn scaled(&self, times: f64) -> Self {
        Self { taus: self.taus.iter().map(|(&a, &t)| (a, t * times)).collect() }
    }
}

/// `(ε, δ)` guarantee read off an RDP curve at its best order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyReport {
    pub epsilon: f64,
    pub delta: f64,
    pub best_alpha: u32,
    pub tau_at_best: f64,
}

/// Per-order sum of the curves; an order survives only if every curve has it.
pub fn compose(curves: &[RdpCurve]) -> Result<RdpCurve> {
    let (first, rest) = curves.split_first().ok_or_else(|| invalid("cannot compose an empty list of curves"))?;
    let mut out = RdpCurve::new();
    for (alpha, tau) in first.iter() {
        let mut total = tau;
        let mut everywhere = true;
        for c in rest {
            match c.get(alpha) {
                Some(t) => total += t,
                None => {
                    everywhere = false;
                    break;
                }
            }
        }
        if everywhere {
            out.taus.insert(alpha, total);
        }
    }
    Ok(out)
}

/// Amplification by Poisson subsampling at rate `q`, for an integer order
/// `α >= 2`, given the unsampled mechanism's bounds `tau_fn(l)` at
/// `l = 2..=α`:
///
/// `1/(α-1) ln[(1-q)^(α-1) (αq - q + 1) + Σ_l C(α,l) (1-q)^(α-l) q^l e^((l-1) τ(l))]`,
///
/// evaluated with log-sum-exp.
pub fn subsample(mut tau_fn: impl FnMut(u32) -> Result<f64>, q: f64, alpha: u32) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(invalid(format!("sampling rate {q} outside [0, 1]")));
    }
    if alpha < 2 {
        return Err(invalid(format!("subsampled orders start at 2, got {alpha}")));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    if q == 1.0 {
        return tau_fn(alpha);
    }
    let a = f64::from(alpha);
    let ln_q = q.ln();
    let ln_1q = (-q).ln_1p();
    let mut logs = Vec::with_capacity(alpha as usize);
    logs.push((a - 1.0) * ln_1q + (a * q - q + 1.0).ln());
    for l in 2..=alpha {
        let lf = f64::from(l);
        logs.push(ln_binomial(u64::from(alpha), u64::from(l)) + (a - lf) * ln_1q + lf * ln_q + (lf - 1.0) * tau_fn(l)?);
    }
    Ok((log_sum_exp(&logs) / (a - 1.0)).max(0.0))
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

/// `(α, τ)`-RDP implies `(ε, δ)`-DP with
/// `ε = τ + (ln(1/δ) + (α-1) ln(1 - 1/α) - ln α) / (α - 1)`.
pub fn rdp_to_dp(alpha: u32, tau: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta {delta} outside (0, 1)")));
    }
    if alpha < 2 {
        return Err(invalid(format!("integer RDP order must exceed 1, got {alpha}")));
    }
    let a = f64::from(alpha);
    Ok(tau + ((1.0 / delta).ln() + (a - 1.0) * (-1.0 / a).ln_1p() - a.ln()) / (a - 1.0))
}

/// The order minimizing `ε`; ties go to the smaller order.
pub fn best_epsilon(curve: &RdpCurve, delta: f64) -> Result<PrivacyReport> {
    if curve.is_empty() {
        return Err(invalid("RDP curve has no admissible orders"));
    }
    let mut best: Option<PrivacyReport> = None;
    for (alpha, tau) in curve.iter() {
        let epsilon = rdp_to_dp(alpha, tau, delta)?;
        if best.map_or(true, |b| epsilon < b.epsilon) {
            best = Some(PrivacyReport { epsilon, delta, best_alpha: alpha, tau_at_best: tau });
        }
    }
    Ok(best.expect("curve is non-empty"))
}

/// Mechanism parameters needed by the closed-form bounds. `lambda` and
/// `sigma2` are per contributor; only the one matching the mechanism is
/// read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismBudget {
    /// Budget on `Σ_j φ(x_j)` (Skellam/DG mixtures) in scaled units.
    pub c: f64,
    /// Number of noise contributors (`n`, or the batch size).
    pub n_agg: u64,
    pub lambda: f64,
    pub sigma2: f64,
    pub delta_inf: u64,
    /// L1 bound, discrete-Gaussian mixture only.
    pub delta_1: f64,
    pub d: u64,
}

impl MechanismBudget {
    pub fn smm(c: f64, n_agg: u64, lambda: f64, delta_inf: u64) -> Self {
        Self { c, n_agg, lambda, sigma2: 0.0, delta_inf, delta_1: 0.0, d: 1 }
    }

    pub fn dgm(c: f64, n_agg: u64, sigma2: f64, delta_inf: u64, delta_1: f64, d: u64) -> Self {
        Self { c, n_agg, lambda: 0.0, sigma2, delta_inf, delta_1, d }
    }

    fn check(&self) -> Result<()> {
        if !(self.c >= 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("clipping budget must be non-negative, got {}", self.c)));
        }
        if self.n_agg == 0 {
            return Err(invalid("need at least one noise contributor"));
        }
        if self.delta_inf == 0 {
            return Err(invalid("coordinate bound must be at least 1"));
        }
        Ok(())
    }
}

fn check_order(alpha: u32) -> Result<()> {
    if alpha < 2 {
        return Err(invalid(format!("integer RDP order must exceed 1, got {alpha}")));
    }
    Ok(())
}

fn out_of_range(alpha: u32, constraint: &'static str) -> Error {
    Error::OrderOutOfRange { alpha, constraint }
}

/// Bound for an integer shift `s` with `‖s‖₂² <= c`, `‖s‖∞ <= Δ∞` under
/// `Sk(λ_total, λ_total)` noise per coordinate:
/// `(1.09α + 0.91)/2 · c / (2 λ_total)`, for `α < 2 λ_total / Δ∞ + 1`.
pub fn skellam_rdp(c: f64, lambda_total: f64, alpha: u32, delta_inf: u64) -> Result<f64> {
    check_order(alpha)?;
    if !(lambda_total > 0.0) {
        return Err(invalid(format!("Skellam rate must be positive, got {lambda_total}")));
    }
    let a = f64::from(alpha);
    if !(a < 2.0 * lambda_total / delta_inf as f64 + 1.0) {
        return Err(out_of_range(alpha, SKELLAM_ORDER));
    }
    Ok((1.09 * a + 0.91) / 2.0 * c / (2.0 * lambda_total))
}

const SKELLAM_ORDER: &str = "alpha < 2*lambda/delta_inf + 1";
const SMM_LINEAR: &str = "alpha < 2*n*lambda/delta_inf + 1";
const SMM_QUADRATIC: &str = "10.9*alpha^2 - 1.8*alpha - 9.1 < 4*n*lambda/delta_inf^2";

/// Whether the Skellam-mixture order constraints hold for `n λ = nl`.
fn smm_admissible(nl: f64, alpha: u32, delta_inf: u64) -> Result<(), &'static str> {
    let a = f64::from(alpha);
    let dinf = delta_inf as f64;
    if !(a < 2.0 * nl / dinf + 1.0) {
        return Err(SMM_LINEAR);
    }
    if !(10.9 * a * a - 1.8 * a - 9.1 < 4.0 * nl / (dinf * dinf)) {
        return Err(SMM_QUADRATIC);
    }
    Ok(())
}

fn smm_tau(c: f64, nl: f64, alpha: u32) -> f64 {
    (1.2 * f64::from(alpha) + 1.0) / 2.0 * c / (2.0 * nl)
}

fn check_rate(x: f64, what: &str) -> Result<()> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid(format!("{what} must be positive, got {x}")));
    }
    Ok(())
}

/// Skellam-mixture bound `(1.2α + 1)/2 · c / (2 n λ)`, valid when
/// `α < 2nλ/Δ∞ + 1` and `10.9α² - 1.8α - 9.1 < 4nλ/Δ∞²`.
pub fn smm_rdp(budget: &MechanismBudget, alpha: u32) -> Result<f64> {
    check_order(alpha)?;
    budget.check()?;
    check_rate(budget.lambda, "Skellam rate")?;
    let nl = budget.n_agg as f64 * budget.lambda;
    smm_admissible(nl, alpha, budget.delta_inf).map_err(|c| out_of_range(alpha, c))?;
    Ok(smm_tau(budget.c, nl, alpha))
}

/// Largest `k >= 1` with `pred(k)`, for `pred` true on a prefix of the
/// positive integers; 0 if `pred(1)` fails.
fn largest_satisfying(pred: impl Fn(u64) -> bool) -> u64 {
    if !pred(1) {
        return 0;
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while pred(hi) {
        lo = hi;
        if hi >= 1 << 62 {
            return hi;
        }
        hi *= 2;
    }
    // pred(lo) holds, pred(hi) fails
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest integer coordinate bound `Δ∞` admitted by the Skellam-mixture
/// order constraints at `α`; 0 when none is.
pub fn max_linf_bound(n_agg: u64, lambda: f64, alpha: u32) -> u64 {
    let nl = n_agg as f64 * lambda;
    if alpha < 2 || !(nl > 0.0) {
        return 0;
    }
    largest_satisfying(|dinf| smm_admissible(nl, alpha, dinf).is_ok())
}

/// Subsampled, `T`-fold composed Skellam mixture: the mixture bound at
/// orders `l <= α` with `n_agg` as the batch size, amplified at rate `q`.
pub fn fl_rdp(t: u64, q: f64, budget: &MechanismBudget, alpha: u32) -> Result<f64> {
    // the constraint at α implies it at every l <= α
    smm_rdp(budget, alpha)?;
    let nl = budget.n_agg as f64 * budget.lambda;
    Ok(t as f64 * subsample(|l| Ok(smm_tau(budget.c, nl, l)), q, alpha)?)
}

/// Curve of [`fl_rdp`] at the budget's fixed `Δ∞`.
pub fn fl_curve(t: u64, q: f64, budget: &MechanismBudget, max_order: u32) -> Result<RdpCurve> {
    RdpCurve::from_fn(max_order, |a| fl_rdp(t, q, budget, a))
}

/// `τ_n = 10 Σ_{k=1}^{n-1} exp(-2π²σ² k/(k+1))`, the gap between a sum of
/// `n` discrete Gaussians and a single one of `n` times the variance.
pub fn dgm_tau_n(n_agg: u64, sigma2: f64) -> f64 {
    // terms shrink towards exp(-2π²σ²); stop once they no longer register
    let mut sum = 0.0;
    for k in 1..n_agg {
        let kf = k as f64;
        let term = (-2.0 * PI * PI * sigma2 * kf / (kf + 1.0)).exp();
        let before = sum;
        sum += term;
        if sum == before && k > 1 {
            let rest = (n_agg - 1 - k) as f64 * (-2.0 * PI * PI * sigma2).exp();
            sum += rest;
            break;
        }
    }
    10.0 * sum
}

/// Bound for a scalar integer shift `s` under the sum of `n` discrete
/// Gaussians `N_Z(0, σ²)`:
/// `min{α s²/(2nσ²) + τ_n, (α/2)(s/(√n σ) + τ_n)²}`.
pub fn ddg_sum_rdp(s: f64, n_agg: u64, sigma2: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(invalid(format!("Renyi order must exceed 1, got {alpha}")));
    }
    check_rate(sigma2, "discrete Gaussian variance")?;
    if n_agg == 0 {
        return Err(invalid("need at least one noise contributor"));
    }
    let n = n_agg as f64;
    let tn = dgm_tau_n(n_agg, sigma2);
    let s = s.abs();
    let first = alpha * s * s / (2.0 * n * sigma2) + tn;
    let second = alpha / 2.0 * (s / (n.sqrt() * sigma2.sqrt()) + tn).powi(2);
    Ok(first.min(second))
}

/// Vector version of [`ddg_sum_rdp`] for an integer shift with
/// `‖s‖₂ <= Δ₂` and `‖s‖₁ <= Δ₁` in `d` coordinates, obtained by summing
/// each branch over coordinates:
/// `min{αΔ₂²/(2nσ²) + dτ_n, (α/2)(Δ₂²/(nσ²) + 2Δ₁τ_n/(√n σ) + dτ_n²)}`.
pub fn ddg_vector_rdp(delta2: f64, delta1: f64, d: u64, n_agg: u64, sigma2: f64, alpha: u32) -> Result<f64> {
    check_order(alpha)?;
    check_rate(sigma2, "discrete Gaussian variance")?;
    if n_agg == 0 {
        return Err(invalid("need at least one noise contributor"));
    }
    let (a, n, d) = (f64::from(alpha), n_agg as f64, d as f64);
    let tn = dgm_tau_n(n_agg, sigma2);
    let ns2 = n * sigma2;
    let first = a * delta2 * delta2 / (2.0 * ns2) + d * tn;
    let second = a / 2.0 * (delta2 * delta2 / ns2 + 2.0 * delta1 * tn / ns2.sqrt() + d * tn * tn);
    Ok(first.min(second))
}

const DGM_FIRST: &str = "alpha*delta_inf^2/(2*n*sigma2) + tau_n < 0.1/(alpha - 1)";
const DGM_SECOND: &str = "(delta_inf/(sqrt(n)*sigma) + tau_n)^2 < 0.2/(alpha^2 - alpha)";
const DGM_FL_FIRST: &str = "1.1*alpha*c/(2*|B|*sigma2) < 0.1 - 1.1*d*tau_n";
const DGM_FL_SECOND: &str =
    "1.1*alpha*c/(2*|B|*sigma2) + 1.1*alpha*delta_inf*tau_n/(sqrt(|B|)*sigma) < 0.1 - 1.1*d*tau_n^2";

fn dgm_admissible(budget: &MechanismBudget, alpha: u32, delta_inf: u64) -> Result<(), &'static str> {
    let a = f64::from(alpha);
    let n = budget.n_agg as f64;
    let s2 = budget.sigma2;
    let tn = dgm_tau_n(budget.n_agg, s2);
    let dinf = delta_inf as f64;
    if !(a * dinf * dinf / (2.0 * n * s2) + tn < 0.1 / (a - 1.0)) {
        return Err(DGM_FIRST);
    }
    if !((dinf / (n * s2).sqrt() + tn).powi(2) < 0.2 / (a * a - a)) {
        return Err(DGM_SECOND);
    }
    Ok(())
}

fn dgm_fl_admissible(budget: &MechanismBudget, alpha: u32, delta_inf: u64) -> Result<(), &'static str> {
    dgm_admissible(budget, alpha, delta_inf)?;
    let a = f64::from(alpha);
    let n = budget.n_agg as f64;
    let s2 = budget.sigma2;
    let d = budget.d as f64;
    let tn = dgm_tau_n(budget.n_agg, s2);
    let lead = 1.1 * a * budget.c / (2.0 * n * s2);
    if !(lead < 0.1 - 1.1 * d * tn) {
        return Err(DGM_FL_FIRST);
    }
    if !(lead + 1.1 * a * delta_inf as f64 * tn / (n * s2).sqrt() < 0.1 - 1.1 * d * tn * tn) {
        return Err(DGM_FL_SECOND);
    }
    Ok(())
}

fn dgm_tau(budget: &MechanismBudget, alpha: u32) -> f64 {
    let a = f64::from(alpha);
    let n = budget.n_agg as f64;
    let s2 = budget.sigma2;
    let d = budget.d as f64;
    let tn = dgm_tau_n(budget.n_agg, s2);
    let lead = 1.1 * a * budget.c / (2.0 * n * s2);
    let first = lead + 1.1 * d * tn;
    let second = lead + 1.1 * a * budget.delta_1 * tn / (n * s2).sqrt() + 1.1 * d * tn * tn;
    first.min(second)
}

/// Discrete-Gaussian-mixture bound
/// `min{1.1αc/(2nσ²) + 1.1dτ_n, 1.1αc/(2nσ²) + 1.1αΔ₁τ_n/(√n σ) + 1.1dτ_n²}`,
/// valid when `αΔ∞²/(2nσ²) + τ_n < 0.1/(α-1)` and
/// `(Δ∞/(√n σ) + τ_n)² < 0.2/(α² - α)`.
pub fn dgm_rdp(budget: &MechanismBudget, alpha: u32) -> Result<f64> {
    check_order(alpha)?;
    budget.check()?;
    check_rate(budget.sigma2, "discrete Gaussian variance")?;
    dgm_admissible(budget, alpha, budget.delta_inf).map_err(|c| out_of_range(alpha, c))?;
    Ok(dgm_tau(budget, alpha))
}

/// Largest `Δ∞` admitted by the federated discrete-Gaussian-mixture
/// constraints at `α`; 0 when none is.
pub fn dgm_max_linf_bound(budget: &MechanismBudget, alpha: u32) -> u64 {
    if alpha < 2 || !(budget.sigma2 > 0.0) || budget.n_agg == 0 {
        return 0;
    }
    largest_satisfying(|dinf| dgm_fl_admissible(budget, alpha, dinf).is_ok())
}

/// Subsampled, `T`-fold composed discrete Gaussian mixture. Requires both
/// the single-release constraints and the federated ones at `α`.
pub fn dgm_fl_rdp(t: u64, q: f64, budget: &MechanismBudget, alpha: u32) -> Result<f64> {
    check_order(alpha)?;
    budget.check()?;
    check_rate(budget.sigma2, "discrete Gaussian variance")?;
    dgm_fl_admissible(budget, alpha, budget.delta_inf).map_err(|c| out_of_range(alpha, c))?;
    Ok(t as f64 * subsample(|l| Ok(dgm_tau(budget, l)), q, alpha)?)
}

/// Curve of [`dgm_fl_rdp`] at the budget's fixed `Δ∞`.
pub fn dgm_fl_curve(t: u64, q: f64, budget: &MechanismBudget, max_order: u32) -> Result<RdpCurve> {
    RdpCurve::from_fn(max_order, |a| dgm_fl_rdp(t, q, budget, a))
}

/// Subsampled, composed Skellam noise on conditionally rounded integer
/// vectors with `‖s‖₂ <= b`; uses `c = b²` and `Δ∞ = ⌊b⌋`.
pub fn skellam_cr_rdp(t: u64, q: f64, b: f64, n_agg: u64, lambda: f64, alpha: u32) -> Result<f64> {
    let total = n_agg as f64 * lambda;
    let dinf = (b.floor() as u64).max(1);
    skellam_rdp(b * b, total, alpha, dinf)?;
    Ok(t as f64 * subsample(|l| skellam_rdp(b * b, total, l, dinf), q, alpha)?)
}

/// Subsampled, composed distributed discrete Gaussian on conditionally
/// rounded integer vectors (`‖s‖₂ <= Δ₂`, `‖s‖₁ <= Δ₁`).
#[allow(clippy::too_many_arguments)]
pub fn ddg_rdp(t: u64, q: f64, delta2: f64, delta1: f64, d: u64, n_agg: u64, sigma2: f64, alpha: u32) -> Result<f64> {
    Ok(t as f64 * subsample(|l| ddg_vector_rdp(delta2, delta1, d, n_agg, sigma2, l), q, alpha)?)
}

/// The four accounted mechanisms with the parameters that do not vary
/// during calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Accounting {
    /// Skellam mixture; `Δ∞` is chosen per order as the largest admissible.
    Smm { c: f64 },
    /// Discrete Gaussian mixture; `Δ∞` chosen per order likewise.
    Dgm { c: f64, delta_1: f64, d: u64 },
    /// Skellam noise after conditional rounding to L2 norm `b`.
    SkellamCr { b: f64 },
    /// Discrete Gaussian noise after conditional rounding.
    Ddg { delta2: f64, delta1: f64, d: u64 },
}

/// Composition setting shared by every accounting query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub rounds: u64,
    pub q: f64,
    pub n_agg: u64,
    pub max_order: u32,
}

impl Schedule {
    /// One release over all `n` contributors.
    pub fn single(n_agg: u64) -> Self {
        Self { rounds: 1, q: 1.0, n_agg, max_order: DEFAULT_MAX_ORDER }
    }
}

impl Accounting {
    /// RDP curve at per-contributor noise parameter `noise` (`λ` or `σ²`).
    pub fn curve(&self, schedule: &Schedule, noise: f64) -> Result<RdpCurve> {
        self.curve_at(schedule, noise, None)
    }

    /// As [`Accounting::curve`], but with the mixtures' coordinate bound
    /// fixed to `delta_inf` when given (the baselines ignore it).
    pub fn curve_at(&self, schedule: &Schedule, noise: f64, delta_inf: Option<u64>) -> Result<RdpCurve> {
        let max_order = schedule.max_order;
        RdpCurve::from_fn(max_order, |a| self.order(schedule, noise, delta_inf, a))
    }

    fn order(&self, schedule: &Schedule, noise: f64, delta_inf: Option<u64>, a: u32) -> Result<f64> {
        let Schedule { rounds, q, n_agg, .. } = *schedule;
        match *self {
            Accounting::Smm { c } => {
                let dinf = delta_inf.unwrap_or_else(|| max_linf_bound(n_agg, noise, a));
                if dinf == 0 {
                    return Err(out_of_range(a, SMM_QUADRATIC));
                }
                fl_rdp(rounds, q, &MechanismBudget::smm(c, n_agg, noise, dinf), a)
            }
            Accounting::Dgm { c, delta_1, d } => {
                let probe = MechanismBudget::dgm(c, n_agg, noise, 1, delta_1, d);
                let dinf = delta_inf.unwrap_or_else(|| dgm_max_linf_bound(&probe, a));
                if dinf == 0 {
                    return Err(out_of_range(a, DGM_FL_FIRST));
                }
                dgm_fl_rdp(rounds, q, &MechanismBudget { delta_inf: dinf, ..probe }, a)
            }
            Accounting::SkellamCr { b } => skellam_cr_rdp(rounds, q, b, n_agg, noise, a),
            Accounting::Ddg { delta2, delta1, d } => ddg_rdp(rounds, q, delta2, delta1, d, n_agg, noise, a),
        }
    }

    /// Best `(ε, δ)` at noise parameter `noise`.
    pub fn report(&self, schedule: &Schedule, noise: f64, delta: f64) -> Result<PrivacyReport> {
        self.report_at(schedule, noise, None, delta)
    }

    /// Best `(ε, δ)` with an optionally fixed coordinate bound. When no
    /// order is admissible the error names the constraint failing at `α = 2`.
    pub fn report_at(
        &self,
        schedule: &Schedule,
        noise: f64,
        delta_inf: Option<u64>,
        delta: f64,
    ) -> Result<PrivacyReport> {
        let curve = self.curve_at(schedule, noise, delta_inf)?;
        if curve.is_empty() {
            return Err(match self.order(schedule, noise, delta_inf, 2) {
                Err(Error::OrderOutOfRange { constraint, .. }) => Error::Infeasible(constraint),
                Err(e) => e,
                Ok(_) => Error::Infeasible("alpha >= 2"),
            });
        }
        best_epsilon(&curve, delta)
    }

    /// The coordinate bound to clip to when reporting at `alpha`
    /// (mixtures only; 0 otherwise).
    pub fn delta_inf(&self, schedule: &Schedule, noise: f64, alpha: u32) -> u64 {
        match *self {
            Accounting::Smm { .. } => max_linf_bound(schedule.n_agg, noise, alpha),
            Accounting::Dgm { c, delta_1, d } => {
                dgm_max_linf_bound(&MechanismBudget::dgm(c, schedule.n_agg, noise, 1, delta_1, d), alpha)
            }
            _ => 0,
        }
    }
}

/// Result of calibrating a noise parameter to a target `ε`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// Per-contributor `λ` or `σ²`.
    pub noise: f64,
    /// Coordinate bound at the reporting order (mixtures only, else 0).
    pub delta_inf: u64,
    pub report: PrivacyReport,
}

/// Smallest noise parameter (to relative tolerance [`CALIBRATION_RTOL`])
/// whose best `ε` is at most `target_eps`. Searches geometrically for a
/// bracket, then bisects; gives up above [`MAX_NOISE_PARAM`].
pub fn calibrate(accounting: &Accounting, schedule: &Schedule, target_eps: f64, delta: f64) -> Result<Calibration> {
    if !(target_eps > 0.0 && target_eps.is_finite()) {
        return Err(invalid(format!("target epsilon must be positive, got {target_eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta {delta} outside (0, 1)")));
    }
    let meets = |x: f64| -> Result<Option<PrivacyReport>> {
        match accounting.report(schedule, x, delta) {
            Ok(r) if r.epsilon <= target_eps => Ok(Some(r)),
            Ok(_) | Err(Error::Infeasible(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    // bracket: lo fails, hi meets
    let mut hi = 1.0;
    let mut hi_report = meets(hi)?;
    let mut lo;
    if hi_report.is_some() {
        lo = hi / 2.0;
        while let Some(r) = meets(lo)? {
            hi = lo;
            hi_report = Some(r);
            lo /= 2.0;
            if lo < 1e-12 {
                break;
            }
        }
    } else {
        lo = hi;
        loop {
            hi *= 2.0;
            if hi > MAX_NOISE_PARAM {
                return Err(Error::CalibrationFailure(format!(
                    "epsilon {target_eps} unreachable with noise parameter up to {MAX_NOISE_PARAM:e}"
                )));
            }
            if let Some(r) = meets(hi)? {
                hi_report = Some(r);
                break;
            }
            lo = hi;
        }
    }
    while hi - lo > CALIBRATION_RTOL * hi {
        let mid = 0.5 * (lo + hi);
        match meets(mid)? {
            Some(r) => {
                hi = mid;
                hi_report = Some(r);
            }
            None => lo = mid,
        }
    }
    let report = hi_report.expect("bracket upper end meets the target");
    Ok(Calibration { noise: hi, delta_inf: accounting.delta_inf(schedule, hi, report.best_alpha), report })
}

/// Per-participant Skellam-mixture `λ` for `T` rounds at sampling rate `q`
/// over `n_agg` contributors per round with budget `c`.
pub fn calibrate_lambda(target_eps: f64, delta: f64, t: u64, q: f64, n_agg: u64, c: f64) -> Result<Calibration> {
    let schedule = Schedule { rounds: t, q, n_agg, max_order: DEFAULT_MAX_ORDER };
    calibrate(&Accounting::Smm { c }, &schedule, target_eps, delta)
}
