use statrs::function::gamma::ln_gamma;

/// Relative size below which a series term is dropped.
const TERM_CUTOFF: f64 = 1e-30;

/// Modified Bessel function of the first kind, `I_nu(u)`, for integer order,
/// by direct power series
/// `sum_h (u/2)^(2h+nu) / (h! * Gamma(h+nu+1))`.
///
/// Overflows to infinity for `u` beyond roughly 700; use [`ln_bessel_i`] there.
pub fn bessel_i(nu: u32, u: f64) -> f64 {
    assert!(u >= 0.0, "bessel_i needs u >= 0, got {u}");
    if u == 0.0 {
        return if nu == 0 { 1.0 } else { 0.0 };
    }
    let half = u / 2.0;
    let quarter_sq = half * half;
    let nu_f = f64::from(nu);
    let mut term = (nu_f * half.ln() - ln_gamma(nu_f + 1.0)).exp();
    let mut sum = term;
    let mut h = 0.0;
    loop {
        h += 1.0;
        term *= quarter_sq / (h * (h + nu_f));
        sum += term;
        // terms rise until h ~ u/2, then fall monotonically
        if h > half && term <= TERM_CUTOFF * sum {
            return sum;
        }
    }
}

/// `ln I_nu(u)`, summed in log space so arguments in the thousands are fine.
pub fn ln_bessel_i(nu: u32, u: f64) -> f64 {
    assert!(u >= 0.0, "ln_bessel_i needs u >= 0, got {u}");
    if u == 0.0 {
        return if nu == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let ln_half = (u / 2.0).ln();
    let nu_f = f64::from(nu);
    let mut ln_term = nu_f * ln_half - ln_gamma(nu_f + 1.0);
    // running sum represented as exp(scale) * acc
    let mut scale = ln_term;
    let mut acc = 1.0;
    let mut h = 0.0;
    let ln_cutoff = TERM_CUTOFF.ln();
    loop {
        h += 1.0;
        ln_term += 2.0 * ln_half - (h * (h + nu_f)).ln();
        if ln_term > scale {
            acc = acc * (scale - ln_term).exp() + 1.0;
            scale = ln_term;
        } else {
            acc += (ln_term - scale).exp();
        }
        if h > u / 2.0 && ln_term - (scale + acc.ln()) <= ln_cutoff {
            return scale + acc.ln();
        }
    }
}
