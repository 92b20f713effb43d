//! Distribution math: Bessel series, noise pmfs, and a numeric Rényi
//! divergence used to check the closed-form privacy bounds.

mod bessel;
mod divergence;
mod pmf;

pub use bessel::{bessel_i, ln_bessel_i};
pub use divergence::renyi_divergence;
pub use pmf::{dgm_scalar_pmf, discrete_gaussian_pmf, skellam_pmf, smm_scalar_pmf, Pmf, Support, TRUNCATION};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}
