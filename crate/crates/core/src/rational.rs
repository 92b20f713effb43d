use std::fmt;
use std::str::FromStr;

use num_integer::Integer;

use crate::error::{invalid, Error, Result};

/// Non-negative rational `num / den`, used for exact Bernoulli probabilities
/// and exact Poisson/Skellam rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rational {
    num: u64,
    den: u64,
}

impl Rational {
    pub const ZERO: Rational = Rational { num: 0, den: 1 };
    pub const ONE: Rational = Rational { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(invalid("rational denominator must be positive"));
        }
        Ok(Self { num, den })
    }

    pub fn integer(n: u64) -> Self {
        Self { num: n, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// Lowest terms.
    pub fn reduced(&self) -> Self {
        let g = self.num.gcd(&self.den);
        Self { num: self.num / g, den: self.den / g }
    }

    /// Smallest multiple of `1/den` that is `>= x`. Rounding a noise rate up
    /// never weakens the privacy guarantee computed for `x`.
    pub fn ceil_from_f64(x: f64, den: u64) -> Result<Self> {
        if !x.is_finite() || x < 0.0 {
            return Err(invalid(format!("cannot represent {x} as a non-negative rational")));
        }
        if den == 0 {
            return Err(invalid("rational denominator must be positive"));
        }
        let scaled = (x * den as f64).ceil();
        if scaled >= u64::MAX as f64 {
            return Err(Error::Overflow);
        }
        Ok(Self { num: scaled as u64, den }.reduced())
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Accepts `a/b`, integers, and finite decimals (`0.3` parses to exactly `3/10`).
impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || invalid(format!("cannot parse rational from {s:?}"));
        if let Some((a, b)) = s.split_once('/') {
            let num = a.trim().parse::<u64>().map_err(|_| bad())?;
            let den = b.trim().parse::<u64>().map_err(|_| bad())?;
            return Rational::new(num, den).map(|r| r.reduced());
        }
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u64.checked_pow(frac_part.len() as u32).ok_or(Error::Overflow)?;
        let digits = format!("{int_part}{frac_part}");
        let num = if digits.is_empty() { 0 } else { digits.parse::<u64>().map_err(|_| Error::Overflow)? };
        Rational::new(num, den).map(|r| r.reduced())
    }
}
