//! Closed-form RDP bounds against numerically evaluated Rényi divergences.
//!
//! Right-hand sides are re-derived here by hand rather than read from the
//! accountant, and the accountant is then checked to agree with them.

use smm_core::accountant::{ddg_sum_rdp, dgm_rdp, dgm_tau_n, skellam_rdp, smm_rdp, MechanismBudget};
use smm_core::math::{dgm_scalar_pmf, renyi_divergence, smm_scalar_pmf, Pmf, Support};
use smm_core::transforms::phi;
use smm_core::Error;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

/// `D_α(P ‖ Q)` where `q` is built exactly on `p`'s window.
fn div(p: &Pmf, q: impl Fn(Support) -> Pmf, alpha: u32) -> f64 {
    renyi_divergence(p, &q(Support::Window(p.lo(), p.hi())), f64::from(alpha)).unwrap()
}

#[test]
fn shifted_skellam_bound() {
    let mut checked = 0;
    for lambda in [1.0, 2.0, 5.0, 10.0] {
        for s in [1i64, 2, 3] {
            for alpha in 2u32..=10 {
                if f64::from(alpha) >= 2.0 * lambda / s as f64 + 1.0 {
                    assert!(matches!(
                        skellam_rdp((s * s) as f64, lambda, alpha, s as u64),
                        Err(Error::OrderOutOfRange { .. })
                    ));
                    continue;
                }
                let bound = (1.09 * f64::from(alpha) + 0.91) * (s * s) as f64 / (4.0 * lambda);
                assert!(close(skellam_rdp((s * s) as f64, lambda, alpha, s as u64).unwrap(), bound));
                let p = Pmf::skellam(lambda, Support::Auto).unwrap().shifted(s);
                let d = div(&p, |w| Pmf::skellam(lambda, w).unwrap(), alpha);
                assert!(d <= bound, "lambda={lambda} s={s} alpha={alpha}: {d} > {bound}");
                checked += 1;
            }
        }
    }
    // admissible points of the 4 x 3 x 9 grid
    assert_eq!(checked, 46);
}

/// Checks both orderings at every admissible point; returns how many.
fn mixture_grid(xs: &[f64], ns: &[u64], lambdas: &[f64], alphas: &[u32]) -> usize {
    let mut checked = 0;
    for &x in xs {
        let p = x - f64::floor(x);
        let c = x * x + p - p * p;
        assert!(close(phi(x), c));
        for &n in ns {
            for &lambda in lambdas {
                let nl = n as f64 * lambda;
                for &alpha in alphas {
                    let budget = MechanismBudget::smm(c, n, lambda, f64::ceil(x) as u64);
                    let tau = match smm_rdp(&budget, alpha) {
                        Ok(t) => t,
                        Err(Error::OrderOutOfRange { .. }) => continue,
                        Err(e) => panic!("{e}"),
                    };
                    let bound = (1.2 * f64::from(alpha) + 1.0) * c / (4.0 * nl);
                    assert!(close(tau, bound));
                    let mix = smm_scalar_pmf(x, nl, Support::Auto).unwrap();
                    let sk = Pmf::skellam(nl, Support::Auto).unwrap();
                    let forward = div(&mix, |w| Pmf::skellam(nl, w).unwrap(), alpha);
                    let backward = div(&sk, |w| smm_scalar_pmf(x, nl, w).unwrap(), alpha);
                    assert!(forward <= bound, "x={x} n={n} lambda={lambda} alpha={alpha}: {forward} > {bound}");
                    assert!(backward <= bound, "x={x} n={n} lambda={lambda} alpha={alpha}: {backward} > {bound}");
                    checked += 1;
                }
            }
        }
    }
    checked
}

#[test]
fn skellam_mixture_bound_both_orderings() {
    // The order constraints need n λ > 7.7 Δ∞² already at α = 2, so only
    // (x <= 1, n = 5, λ = 4, α = 2) survives on this small grid.
    assert_eq!(mixture_grid(&[0.3, 0.5, 1.7], &[1, 5], &[1.0, 4.0], &[2, 3, 5]), 2);
    let wide = mixture_grid(&[0.05, 0.3, 0.5, 0.9, 1.7, 2.5], &[1, 5, 20], &[2.0, 8.0, 40.0], &[2, 3, 5, 8, 12, 20]);
    assert!(wide >= 50, "{wide}");
}

#[test]
fn small_mixture_example() {
    // c = 1, n = 10, λ = 1, α = 2 gives 3.4/2 · 1/20
    let tau = smm_rdp(&MechanismBudget::smm(1.0, 10, 1.0, 1), 2).unwrap();
    assert!(close(tau, 0.085));
    for x in [0.5, 1.0] {
        assert!(phi(x) <= 1.0);
        let mix = smm_scalar_pmf(x, 10.0, Support::Auto).unwrap();
        assert!(div(&mix, |w| Pmf::skellam(10.0, w).unwrap(), 2) <= tau);
    }
}

/// `τ_n` summed term by term, without any early exit.
fn tau_n_direct(n: u64, sigma2: f64) -> f64 {
    let pi2 = std::f64::consts::PI.powi(2);
    10.0 * (1..n).map(|k| (-2.0 * pi2 * sigma2 * k as f64 / (k as f64 + 1.0)).exp()).sum::<f64>()
}

#[test]
fn tau_n_reference() {
    let expected = 10.0 * (-std::f64::consts::PI.powi(2)).exp();
    assert!((dgm_tau_n(2, 1.0) - expected).abs() <= 1e-9 * expected);
    assert!((expected - 5.175e-4).abs() < 1e-6);
    assert_eq!(dgm_tau_n(1, 3.0), 0.0);
    for n in [2, 3, 10, 1000] {
        for s2 in [0.05, 0.25, 1.0, 4.0] {
            let (a, b) = (dgm_tau_n(n, s2), tau_n_direct(n, s2));
            assert!((a - b).abs() <= 1e-12 * b, "n={n} s2={s2}: {a} vs {b}");
        }
    }
}

fn dg_sum(n: u32, sigma2: f64) -> Pmf {
    Pmf::discrete_gaussian(sigma2, Support::Auto).unwrap().convolve_power(n).unwrap()
}

/// Rényi divergence between a single discrete Gaussian and its shift is
/// exactly `α s² / (2σ²)`, and a sum of a few such is Gaussian to within
/// `τ_n ~ 1e-17`, so the first branch is tight: allow relative roundoff.
const ROUNDOFF: f64 = 1e-9;

#[test]
fn dg_sum_bound() {
    for n in [2u32, 4] {
        for sigma2 in [4.0, 9.0] {
            let z = dg_sum(n, sigma2);
            let tn = tau_n_direct(n as u64, sigma2);
            for s in [1i64, 2] {
                let p = z.shifted(s).truncated(1e-15);
                for alpha in 2u32..=8 {
                    let a = f64::from(alpha);
                    let nf = f64::from(n);
                    let sf = s as f64;
                    let bound = (a * sf * sf / (2.0 * nf * sigma2) + tn)
                        .min(a / 2.0 * (sf / (nf * sigma2).sqrt() + tn).powi(2));
                    assert!(close(ddg_sum_rdp(sf, n as u64, sigma2, a).unwrap(), bound));
                    let d = renyi_divergence(&p, &z, a).unwrap();
                    assert!(d <= bound * (1.0 + ROUNDOFF), "n={n} s2={sigma2} s={s} a={alpha}: {d} > {bound}");
                }
            }
        }
    }
}

#[test]
fn dg_sum_degenerate_cases() {
    // one contributor: both branches are the plain Gaussian bound
    assert!(close(ddg_sum_rdp(2.0, 1, 4.0, 3.0).unwrap(), 3.0 * 4.0 / 8.0));
    let tn = tau_n_direct(4, 0.3);
    let v = ddg_sum_rdp(0.0, 4, 0.3, 2.0).unwrap();
    assert!(close(v, tn.min(tn * tn)));
}

#[test]
fn dg_mixture_bound_both_orderings() {
    let mut checked = 0;
    for (n, sigma2) in [(2u64, 4.0), (4, 9.0), (100, 4.0)] {
        let z = dg_sum(n as u32, sigma2);
        for x in [0.3, 0.5, 1.7] {
            let c = phi(x);
            let dinf = f64::ceil(x) as u64;
            for alpha in [2u32, 3, 5] {
                let budget = MechanismBudget::dgm(c, n, sigma2, dinf, dinf as f64, 1);
                let tau = match dgm_rdp(&budget, alpha) {
                    Ok(t) => t,
                    Err(Error::OrderOutOfRange { .. }) => continue,
                    Err(e) => panic!("{e}"),
                };
                let (a, nf) = (f64::from(alpha), n as f64);
                let tn = tau_n_direct(n, sigma2);
                let lead = 1.1 * a * c / (2.0 * nf * sigma2);
                let bound =
                    (lead + 1.1 * tn).min(lead + 1.1 * a * dinf as f64 * tn / (nf * sigma2).sqrt() + 1.1 * tn * tn);
                assert!(close(tau, bound));
                // the mixture around the n-fold sum
                let fl = x.floor() as i64;
                let mix = z.shifted(fl).mixture(&z.shifted(fl + 1), x - x.floor()).unwrap();
                let forward = renyi_divergence(&mix.truncated(1e-15), &z, a).unwrap();
                let backward = renyi_divergence(&z.truncated(1e-15), &mix, a).unwrap();
                assert!(forward <= bound, "n={n} x={x} a={alpha}: {forward} > {bound}");
                assert!(backward <= bound, "n={n} x={x} a={alpha}: {backward} > {bound}");
                checked += 1;
            }
        }
    }
    assert!(checked >= 10, "{checked}");
    // the scalar mixture helper agrees with the hand-built one for n = 1
    let built = Pmf::discrete_gaussian(4.0, Support::Auto).unwrap();
    let mix = built.shifted(0).mixture(&built.shifted(1), 0.3).unwrap();
    let lib = dgm_scalar_pmf(0.3, 4.0, Support::Window(mix.lo(), mix.hi())).unwrap();
    for k in mix.lo()..=mix.hi() {
        assert!((mix.get(k) - lib.get(k)).abs() < 1e-15);
    }
}

#[test]
fn convexity_in_second_argument() {
    for (l0, l1, lp) in [(1.0, 3.0, 2.0), (2.0, 6.0, 3.0), (0.5, 4.0, 1.5)] {
        let p = Pmf::skellam(lp, Support::Auto).unwrap();
        let w = Support::Window(p.lo(), p.hi());
        let q0 = Pmf::skellam(l0, w).unwrap();
        let q1 = Pmf::skellam(l1, w).unwrap();
        let q = q0.mixture(&q1, 0.5).unwrap();
        for alpha in [2.0, 3.5, 6.0] {
            let lhs = renyi_divergence(&p, &q, alpha).unwrap();
            let rhs = 0.5 * renyi_divergence(&p, &q0, alpha).unwrap() + 0.5 * renyi_divergence(&p, &q1, alpha).unwrap();
            assert!(lhs <= rhs + 1e-12, "{lhs} > {rhs}");
        }
    }
}
