use super::bessel::ln_bessel_i;
use super::KahanSum;
use crate::error::{invalid, Result};

/// Per-point mass below which tails are dropped by [`Support::Auto`].
pub const TRUNCATION: f64 = 1e-15;

/// A probability mass function on the integer window `[lo, hi]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    lo: i64,
    mass: Vec<f64>,
}

/// How a distribution constructor picks its window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Support {
    /// Drop tail points with mass below [`TRUNCATION`] and renormalize.
    Auto,
    /// Exact (unrenormalized) masses on the given inclusive window. Use a
    /// window wider than the first argument's support when building the
    /// second argument of a divergence.
    Window(i64, i64),
}

impl Pmf {
    pub fn new(lo: i64, mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(invalid("pmf needs at least one point"));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(invalid("pmf masses must be finite and non-negative"));
        }
        Ok(Self { lo, mass })
    }

    /// Unit mass at `k`.
    pub fn point(k: i64) -> Self {
        Self { lo: k, mass: vec![1.0] }
    }

    /// Symmetric Skellam `Sk(lambda, lambda)`.
    pub fn skellam(lambda: f64, support: Support) -> Result<Self> {
        check_lambda(lambda)?;
        match support {
            Support::Window(lo, hi) => window(lo, hi, |k| skellam_pmf_unchecked(k, lambda)),
            Support::Auto => {
                let k = skellam_radius(lambda, TRUNCATION);
                Ok(window(-k, k, |k| skellam_pmf_unchecked(k, lambda))?.truncated(TRUNCATION))
            }
        }
    }

    /// Discrete Gaussian `N_Z(0, sigma2)`, normalized over `|k| <= ceil(10 sigma) + 1`.
    pub fn discrete_gaussian(sigma2: f64, support: Support) -> Result<Self> {
        let t = dg_truncation(sigma2)?;
        let z = dg_normalizer(sigma2, t);
        let at = |k: i64| {
            if k.abs() > t {
                0.0
            } else {
                (-(k as f64).powi(2) / (2.0 * sigma2)).exp() / z
            }
        };
        match support {
            Support::Window(lo, hi) => window(lo, hi, at),
            Support::Auto => Ok(window(-t, t, at)?.truncated(TRUNCATION)),
        }
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.mass.len() as i64 - 1
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Mass at `k`; zero outside the window.
    pub fn get(&self, k: i64) -> f64 {
        if k < self.lo || k > self.hi() {
            0.0
        } else {
            self.mass[(k - self.lo) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.mass.iter().enumerate().map(move |(i, &m)| (self.lo + i as i64, m))
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().copied().collect::<KahanSum>().value()
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(k, m)| k as f64 * m).collect::<KahanSum>().value() / self.total()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.iter().map(|(k, m)| (k as f64 - mu).powi(2) * m).collect::<KahanSum>().value() / self.total()
    }

    /// Law of `X + s`.
    pub fn shifted(&self, s: i64) -> Self {
        Self { lo: self.lo + s, mass: self.mass.clone() }
    }

    /// `(1 - w) * self + w * other`, on the union of both windows.
    pub fn mixture(&self, other: &Pmf, w: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(invalid(format!("mixture weight {w} outside [0, 1]")));
        }
        let lo = self.lo.min(other.lo);
        let hi = self.hi().max(other.hi());
        let mass = (lo..=hi).map(|k| (1.0 - w) * self.get(k) + w * other.get(k)).collect();
        Ok(Self { lo, mass })
    }

    /// Law of `X + Y` for independent `X ~ self`, `Y ~ other`.
    pub fn convolve(&self, other: &Pmf) -> Self {
        let mut mass = vec![0.0; self.mass.len() + other.mass.len() - 1];
        for (i, &a) in self.mass.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.mass.iter().enumerate() {
                mass[i + j] += a * b;
            }
        }
        Self { lo: self.lo + other.lo, mass }
    }

    /// `n`-fold self-convolution (`n >= 1`).
    pub fn convolve_power(&self, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(invalid("convolution power needs n >= 1"));
        }
        let mut acc = self.clone();
        for _ in 1..n {
            acc = acc.convolve(self);
        }
        Ok(acc)
    }

    /// Drops leading and trailing points below `threshold`, then renormalizes.
    pub fn truncated(&self, threshold: f64) -> Self {
        let first = self.mass.iter().position(|&m| m >= threshold);
        let last = self.mass.iter().rposition(|&m| m >= threshold);
        let trimmed = match (first, last) {
            (Some(a), Some(b)) => Self { lo: self.lo + a as i64, mass: self.mass[a..=b].to_vec() },
            // nothing survives: keep the heaviest point
            _ => {
                let (i, _) = self
                    .mass
                    .iter()
                    .enumerate()
                    .fold((0, f64::MIN), |best, (i, &m)| if m > best.1 { (i, m) } else { best });
                Self::point(self.lo + i as i64)
            }
        };
        trimmed.normalized()
    }

    pub fn normalized(&self) -> Self {
        let total = self.total();
        Self { lo: self.lo, mass: self.mass.iter().map(|m| m / total).collect() }
    }
}

fn window(lo: i64, hi: i64, f: impl Fn(i64) -> f64) -> Result<Pmf> {
    if lo > hi {
        return Err(invalid(format!("empty window [{lo}, {hi}]")));
    }
    Pmf::new(lo, (lo..=hi).map(f).collect())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(invalid(format!("Skellam rate must be positive, got {lambda}")));
    }
    Ok(())
}

fn skellam_pmf_unchecked(k: i64, lambda: f64) -> f64 {
    (ln_bessel_i(k.unsigned_abs() as u32, 2.0 * lambda) - 2.0 * lambda).exp()
}

/// Smallest `k >= 0` with `Pr[Sk = k] < threshold`. The symmetric Skellam pmf
/// decreases in `|k|`, so everything beyond is smaller still.
fn skellam_radius(lambda: f64, threshold: f64) -> i64 {
    // jump close to the answer before walking
    let mut k = (2.0 * lambda).sqrt() as i64;
    while k > 0 && skellam_pmf_unchecked(k, lambda) < threshold {
        k /= 2;
    }
    while skellam_pmf_unchecked(k, lambda) >= threshold {
        k += 1;
    }
    k
}

/// `Pr[Sk(lambda, lambda) = k] = exp(-2 lambda) I_|k|(2 lambda)`.
pub fn skellam_pmf(k: i64, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(skellam_pmf_unchecked(k, lambda))
}

fn dg_truncation(sigma2: f64) -> Result<i64> {
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(invalid(format!("discrete Gaussian variance must be positive, got {sigma2}")));
    }
    Ok((10.0 * sigma2.sqrt()).ceil() as i64 + 1)
}

fn dg_normalizer(sigma2: f64, t: i64) -> f64 {
    (-t..=t).map(|j| (-(j as f64).powi(2) / (2.0 * sigma2)).exp()).collect::<KahanSum>().value()
}

/// Discrete Gaussian mass at `k`, renormalized over `|k| <= truncation`.
/// `truncation` must be at least `10 sigma`, which leaves tail mass far
/// below `1e-15`.
pub fn discrete_gaussian_pmf(k: i64, sigma2: f64, truncation: i64) -> Result<f64> {
    dg_truncation(sigma2)?;
    if (truncation as f64) < 10.0 * sigma2.sqrt() {
        return Err(invalid(format!("truncation {truncation} is below 10 sigma = {}", 10.0 * sigma2.sqrt())));
    }
    if k.abs() > truncation {
        return Ok(0.0);
    }
    Ok((-(k as f64).powi(2) / (2.0 * sigma2)).exp() / dg_normalizer(sigma2, truncation))
}

/// Output law of the scalar Skellam mixture on input `x`:
/// `(1-p) (floor(x) + Sk) + p (ceil(x) + Sk)` with `p = x - floor(x)`.
pub fn smm_scalar_pmf(x: f64, lambda: f64, support: Support) -> Result<Pmf> {
    check_lambda(lambda)?;
    if !x.is_finite() {
        return Err(invalid("input must be finite"));
    }
    let fl = x.floor();
    let p = x - fl;
    let fl = fl as i64;
    let mix = |lo: i64, hi: i64| {
        window(lo, hi, |k| {
            let lower = skellam_pmf_unchecked(k - fl, lambda);
            if p == 0.0 {
                lower
            } else {
                (1.0 - p) * lower + p * skellam_pmf_unchecked(k - fl - 1, lambda)
            }
        })
    };
    match support {
        Support::Window(lo, hi) => mix(lo, hi),
        Support::Auto => {
            // margin so the trimmed edges are computed from exact masses
            let r = skellam_radius(lambda, TRUNCATION * 1e-3);
            Ok(mix(fl - r, fl + 1 + r)?.truncated(TRUNCATION))
        }
    }
}

/// Output law of the scalar discrete-Gaussian mixture on input `x`.
pub fn dgm_scalar_pmf(x: f64, sigma2: f64, support: Support) -> Result<Pmf> {
    if !x.is_finite() {
        return Err(invalid("input must be finite"));
    }
    let t = dg_truncation(sigma2)?;
    let fl = x.floor();
    let p = x - fl;
    let fl = fl as i64;
    let base = Pmf::discrete_gaussian(sigma2, Support::Window(-t, t))?;
    let mix = base.shifted(fl).mixture(&base.shifted(fl + 1), p)?;
    Ok(match support {
        Support::Window(lo, hi) => window(lo, hi, |k| mix.get(k))?,
        Support::Auto => mix.truncated(TRUNCATION),
    })
}
