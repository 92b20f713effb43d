use std::time::Instant;

use smm_core::accountant::{rdp_to_dp, Calibration, RdpCurve, Schedule, DEFAULT_MAX_ORDER};
use smm_core::fl::{
    accounting_for, calibrate_for, calibrate_training, sum_estimation_experiment, train, Dataset, FlConfig, ModelState,
    SumEstimationConfig, UpdateRule,
};
use smm_core::math::{Pmf, Support};
use smm_core::mechanisms::Mechanism;
use smm_core::rng::RandomSource;
use smm_core::samplers::{bernoulli_frac, discrete_gaussian_rational, poisson_general, skellam_exact, SIGMA2_DEN};
use smm_core::stats::gof_samples;
use smm_core::transforms::ClipSpec;
use smm_core::{NoiseSampler, NoiseSpec, Rational, SamplingMode};

use crate::output::{opt, Output};
use crate::params::{Dist, Params, Rule};
use crate::CliError;

type Draw = Box<dyn FnMut(&mut RandomSource) -> smm_core::Result<i64>>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn mode(p: &Params) -> SamplingMode {
    if p.exact_sampling {
        SamplingMode::Exact
    } else {
        SamplingMode::Fast
    }
}

fn mode_name(m: SamplingMode) -> &'static str {
    match m {
        SamplingMode::Exact => "exact",
        SamplingMode::Fast => "fast",
    }
}

fn one_mechanism(p: &Params) -> Result<Mechanism, CliError> {
    match p.mech.as_slice() {
        [m] => Ok(*m),
        [] => Err(usage("--mech is required")),
        _ => Err(usage("this command takes a single --mech")),
    }
}

/// Per-participant noise for `mech` from `--lambda` / `--sigma2`.
fn fixed_noise(p: &Params, mech: Mechanism) -> Result<Option<f64>, CliError> {
    Ok(match (mech.uses_skellam(), p.lambda, p.sigma2) {
        (true, Some(l), _) => Some(l.to_f64()),
        (false, _, Some(s)) => Some(s),
        _ => None,
    })
}

fn poisson_pmf(lambda: f64) -> Result<Pmf, CliError> {
    if lambda == 0.0 {
        return Ok(Pmf::point(0));
    }
    let mut mass = Vec::new();
    let mut ln_fact = 0.0;
    for k in 0u64.. {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let m = (k as f64 * lambda.ln() - lambda - ln_fact).exp();
        if k as f64 > lambda && m < 1e-15 {
            break;
        }
        mass.push(m);
    }
    Ok(Pmf::new(0, mass)?.normalized())
}

pub fn sample(p: &Params) -> Result<(), CliError> {
    let dist = p.dist.ok_or_else(|| usage("--dist is required (bernoulli, poisson, skellam, dgauss)"))?;
    let count = p.count.unwrap_or(1000);
    let seed = p.seed.unwrap_or(0);
    let mut src = RandomSource::new(seed);
    let mut config = vec![("count", count.to_string()), ("seed", seed.to_string()), ("mode", "exact".into())];
    let need_lambda = || p.lambda.ok_or_else(|| usage("--lambda is required"));
    let (name, pmf, mut draw): (&str, Pmf, Draw) = match dist {
        Dist::Bernoulli => {
            let prob = p.p.ok_or_else(|| usage("--p is required"))?;
            if !(0.0..=1.0).contains(&prob) {
                return Err(usage(format!("--p must be in [0, 1], got {prob}")));
            }
            config.push(("p", prob.to_string()));
            let pmf = Pmf::new(0, vec![1.0 - prob, prob])?;
            ("bernoulli", pmf, Box::new(move |s| bernoulli_frac(prob, s).map(i64::from)))
        }
        Dist::Poisson => {
            let l = need_lambda()?;
            config.push(("lambda", l.to_string()));
            ("poisson", poisson_pmf(l.to_f64())?, Box::new(move |s| poisson_general(l, s).map(|k| k as i64)))
        }
        Dist::Skellam => {
            let l = need_lambda()?;
            if l.is_zero() {
                return Err(usage("--lambda must be positive"));
            }
            config.push(("lambda", l.to_string()));
            let pmf = Pmf::skellam(l.to_f64(), Support::Auto)?;
            ("skellam", pmf, Box::new(move |s| skellam_exact(l, s)))
        }
        Dist::Dgauss => {
            let s2 = p.sigma2.ok_or_else(|| usage("--sigma2 is required"))?;
            let r = Rational::ceil_from_f64(s2, SIGMA2_DEN)?;
            if r.is_zero() {
                return Err(usage("--sigma2 must be positive"));
            }
            config.push(("sigma2", r.to_string()));
            let pmf = Pmf::discrete_gaussian(r.to_f64(), Support::Auto)?;
            ("dgauss", pmf, Box::new(move |s| discrete_gaussian_rational(r, s)))
        }
    };
    config.push(("dist", name.into()));
    let mut out = Output::new("sample", &config);
    let mut samples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let k = draw(&mut src)?;
        out.line(k);
        samples.push(k);
    }
    match gof_samples(&samples, &pmf) {
        Ok(g) => {
            out.comment(format_args!("gof chi2={} df={} p_value={} samples={}", g.chi2, g.df, g.p_value, g.samples))
        }
        Err(e) => out.comment(format_args!("gof skipped: {e}")),
    }
    out.finish(&p.out)
}

fn schedule(p: &Params, n: usize) -> Schedule {
    Schedule {
        rounds: p.t.unwrap_or(1),
        q: p.q.unwrap_or(1.0),
        n_agg: n as u64,
        max_order: p.max_order.unwrap_or(DEFAULT_MAX_ORDER),
    }
}

fn write_curve(out: &mut Output, curve: &RdpCurve, delta: f64) -> Result<(), CliError> {
    out.line("alpha,tau,epsilon");
    for (a, tau) in curve.iter() {
        out.line(format_args!("{a},{tau},{}", rdp_to_dp(a, tau, delta)?));
    }
    Ok(())
}

/// Shared mechanism settings of `account` and `calibrate`.
struct Setting {
    mech: Mechanism,
    c: f64,
    gamma: f64,
    delta2: f64,
    d: usize,
    beta: f64,
    delta: f64,
}

impl Setting {
    fn from(p: &Params) -> Result<Self, CliError> {
        let mech = one_mechanism(p)?;
        let gamma = p.gamma.unwrap_or(1.0);
        let delta2 = p.delta2.unwrap_or(1.0);
        Ok(Self {
            mech,
            c: p.c.unwrap_or((gamma * delta2).powi(2)),
            gamma,
            delta2,
            d: p.d.unwrap_or(1),
            beta: p.beta_or_default(),
            delta: p.delta.unwrap_or(1e-5),
        })
    }

    fn config(&self, s: &Schedule) -> Vec<(&'static str, String)> {
        vec![
            ("mech", self.mech.to_string()),
            ("c", self.c.to_string()),
            ("gamma", self.gamma.to_string()),
            ("delta2", self.delta2.to_string()),
            ("d", self.d.to_string()),
            ("beta", self.beta.to_string()),
            ("delta", self.delta.to_string()),
            ("T", s.rounds.to_string()),
            ("q", s.q.to_string()),
            ("n", s.n_agg.to_string()),
            ("max-order", s.max_order.to_string()),
        ]
    }
}

pub fn account(p: &Params) -> Result<(), CliError> {
    let delta = p.delta.unwrap_or(1e-5);
    if let (Some(alpha), Some(tau)) = (p.alpha, p.tau) {
        let eps = rdp_to_dp(alpha, tau, delta)?;
        let config = [("alpha", alpha.to_string()), ("tau", tau.to_string()), ("delta", delta.to_string())];
        let mut out = Output::new("account", &config);
        out.line(format_args!("epsilon={eps}"));
        return out.finish(&p.out);
    }
    if p.alpha.is_some() != p.tau.is_some() {
        return Err(usage("--alpha and --tau go together"));
    }
    let set = Setting::from(p)?;
    let s = schedule(p, p.n.unwrap_or(1));
    let noise = fixed_noise(p, set.mech)?
        .ok_or_else(|| usage(if set.mech.uses_skellam() { "--lambda is required" } else { "--sigma2 is required" }))?;
    let acc = accounting_for(set.mech, set.c, set.gamma, set.delta2, set.d, set.beta);
    let report = acc.report_at(&s, noise, p.delta_inf, delta)?;
    let curve = acc.curve_at(&s, noise, p.delta_inf)?;
    let mut config = set.config(&s);
    config.push(("noise", noise.to_string()));
    config.push(("delta-inf", p.delta_inf.map_or("auto".into(), |d| d.to_string())));
    let mut out = Output::new("account", &config);
    out.line(format_args!("epsilon={}", report.epsilon));
    out.line(format_args!("delta={}", report.delta));
    out.line(format_args!("best_alpha={}", report.best_alpha));
    out.line(format_args!("tau={}", report.tau_at_best));
    if p.delta_inf.is_none() {
        out.line(format_args!("delta_inf={}", acc.delta_inf(&s, noise, report.best_alpha)));
    }
    out.line("");
    write_curve(&mut out, &curve, delta)?;
    out.finish(&p.out)
}

pub fn calibrate(p: &Params) -> Result<(), CliError> {
    let set = Setting::from(p)?;
    let eps = p.eps.ok_or_else(|| usage("--eps is required"))?;
    let m = p.modulus(16)?;
    let s = schedule(p, p.n.unwrap_or(1));
    let acc = accounting_for(set.mech, set.c, set.gamma, set.delta2, set.d, set.beta);
    let Calibration { noise, delta_inf, report } = calibrate_for(set.mech, &acc, &s, m, eps, set.delta)?;
    let mut config = set.config(&s);
    config.push(("eps", eps.to_string()));
    config.push(("m", m.to_string()));
    let mut out = Output::new("calibrate", &config);
    let key = if set.mech.uses_skellam() { "lambda" } else { "sigma2" };
    out.line(format_args!("{key}={noise}"));
    out.line(format_args!("epsilon={}", report.epsilon));
    out.line(format_args!("best_alpha={}", report.best_alpha));
    out.line(format_args!("tau={}", report.tau_at_best));
    if matches!(set.mech, Mechanism::Smm | Mechanism::Dgm) {
        out.line(format_args!("delta_inf={delta_inf}"));
    }
    out.finish(&p.out)
}

pub fn sum_estimate(p: &Params) -> Result<(), CliError> {
    let mechs = if p.mech.is_empty() { Mechanism::ALL.to_vec() } else { p.mech.clone() };
    let m = p.modulus(10)?;
    let base = SumEstimationConfig {
        n: p.n.unwrap_or(100),
        d: p.d.unwrap_or(4096),
        radius: p.radius.unwrap_or(1.0),
        eps: p.eps.unwrap_or(3.0),
        delta: p.delta.unwrap_or(1e-5),
        m,
        gamma: p.gamma.unwrap_or(4.0),
        c: p.c,
        beta: p.beta_or_default(),
        trials: p.trials.unwrap_or(20),
        seed: p.seed.unwrap_or(0),
        mode: mode(p),
        noise: None,
        no_noise: p.no_noise,
    };
    let config = [
        ("mech", mechs.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")),
        ("n", base.n.to_string()),
        ("d", base.d.to_string()),
        ("radius", base.radius.to_string()),
        ("eps", base.eps.to_string()),
        ("delta", base.delta.to_string()),
        ("m", m.to_string()),
        ("gamma", base.gamma.to_string()),
        ("c", base.c.map_or("auto".into(), |c| c.to_string())),
        ("beta", base.beta.to_string()),
        ("trials", base.trials.to_string()),
        ("seed", base.seed.to_string()),
        ("sampling", mode_name(base.mode).into()),
        ("no-noise", base.no_noise.to_string()),
        ("lambda", p.lambda.map_or("calibrated".into(), |l| l.to_string())),
        ("sigma2", p.sigma2.map_or("calibrated".into(), |s| s.to_string())),
    ];
    let mut results = Vec::new();
    for &mech in &mechs {
        let cfg = SumEstimationConfig { noise: fixed_noise(p, mech)?, ..base.clone() };
        results.push(sum_estimation_experiment(&cfg, mech)?);
    }
    let mut out = Output::new("sum-estimate", &config);
    out.line("mechanism,eps,m,gamma,d,n,trial,mse");
    for r in &results {
        for row in &r.rows {
            out.line(format_args!(
                "{},{},{},{},{},{},{},{}",
                r.mechanism, base.eps, m, base.gamma, base.d, base.n, row.trial, row.mse
            ));
        }
    }
    for r in &results {
        out.comment(format_args!(
            "summary mechanism={} noise={} delta_inf={} epsilon={} best_alpha={} mean_mse={} std_error={}",
            r.mechanism,
            r.noise,
            r.delta_inf,
            opt(r.report.map(|x| x.epsilon)),
            r.report.map(|x| x.best_alpha.to_string()).unwrap_or_default(),
            r.mean_mse(),
            r.std_error()
        ));
    }
    out.finish(&p.out)
}

pub fn fl_train(p: &Params) -> Result<(), CliError> {
    let mech = one_mechanism(p)?;
    let n = p.n.unwrap_or(1000);
    let features = p.features.unwrap_or(16);
    let seed = p.seed.unwrap_or(0);
    let gamma = p.gamma.unwrap_or(64.0);
    let delta2 = p.delta2.unwrap_or(1.0);
    let m = p.modulus(16)?;
    let eps = p.eps.unwrap_or(8.0);
    let model = ModelState::zeros(features);
    let mut cfg = FlConfig {
        q: p.q.unwrap_or(0.2),
        rounds: p.t.unwrap_or(200),
        spec: ClipSpec {
            c: p.c.unwrap_or((gamma * delta2).powi(2)),
            delta_inf: p.delta_inf.unwrap_or(m / 2 - 1),
            gamma,
            m,
            d: model.theta.len(),
        },
        noise: mech.noise_spec(0.0)?,
        mode: mode(p),
        learning_rate: p.lr.unwrap_or(1.0),
        update_rule: match p.update_rule.unwrap_or(Rule::Sgd) {
            Rule::Sgd => UpdateRule::Sgd,
            Rule::Adam => UpdateRule::Adam,
        },
        seed,
        delta2,
        beta: p.beta_or_default(),
        delta: p.delta.unwrap_or(1e-5),
        max_order: p.max_order.unwrap_or(DEFAULT_MAX_ORDER),
    };
    let config = vec![
        ("mech", mech.to_string()),
        ("n", n.to_string()),
        ("features", features.to_string()),
        ("seed", seed.to_string()),
        ("eps", eps.to_string()),
        ("delta", cfg.delta.to_string()),
        ("q", cfg.q.to_string()),
        ("T", cfg.rounds.to_string()),
        ("gamma", gamma.to_string()),
        ("m", m.to_string()),
        ("c", cfg.spec.c.to_string()),
        ("delta2", delta2.to_string()),
        ("beta", cfg.beta.to_string()),
        ("lr", cfg.learning_rate.to_string()),
        ("update-rule", format!("{:?}", cfg.update_rule).to_lowercase()),
        ("sampling", mode_name(cfg.mode).into()),
        ("no-noise", p.no_noise.to_string()),
        ("lambda", p.lambda.map_or("calibrated".into(), |l| l.to_string())),
        ("sigma2", p.sigma2.map_or("calibrated".into(), |s| s.to_string())),
        ("delta-inf", p.delta_inf.map_or("auto".into(), |d| d.to_string())),
        ("max-order", cfg.max_order.to_string()),
    ];
    let data = Dataset::separable_synthetic(n, features, seed)?;
    if !p.no_noise {
        match fixed_noise(p, mech)? {
            Some(noise) => cfg.noise = mech.noise_spec(noise)?,
            None => cfg = calibrate_training(mech, &cfg, n, eps)?.0,
        }
    }
    let outcome = train(&data, model, &cfg, mech)?;
    let mut out = Output::new("fl-train", &config);
    out.line("round,loss,accuracy,batch_size,eps_spent_running");
    for r in &outcome.metrics {
        out.line(format_args!("{},{},{},{},{}", r.round, r.loss, r.accuracy, r.batch_size, opt(r.eps_spent)));
    }
    let last = outcome.metrics.last();
    out.comment(format_args!(
        "result noise={} delta_inf={} epsilon={} best_alpha={} final_loss={} final_accuracy={}",
        noise_value(cfg.noise),
        cfg.spec.delta_inf,
        opt(outcome.report.map(|r| r.epsilon)),
        outcome.report.map(|r| r.best_alpha.to_string()).unwrap_or_default(),
        opt(last.map(|r| r.loss)),
        opt(last.map(|r| r.accuracy)),
    ));
    out.finish(&p.out)
}

fn noise_value(spec: NoiseSpec) -> String {
    match spec {
        NoiseSpec::Skellam { lambda } => lambda.to_f64().to_string(),
        NoiseSpec::DiscreteGaussian { sigma2 } => sigma2.to_string(),
    }
}

pub fn bench(p: &Params) -> Result<(), CliError> {
    let count = p.count.unwrap_or(20_000).max(1);
    let seed = p.seed.unwrap_or(0);
    let variances: Vec<f64> = match (p.lambda, p.sigma2) {
        (Some(l), _) => vec![2.0 * l.to_f64()],
        (None, Some(s)) => vec![s],
        _ => vec![1.0, 2.0, 4.0, 8.0, 16.0],
    };
    let config = [
        ("count", count.to_string()),
        ("seed", seed.to_string()),
        ("variances", variances.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")),
    ];
    let mut out = Output::new("bench", &config);
    out.comment("samples_per_second is wall-clock and varies between runs");
    out.line("sampler,mode,variance,samples_per_second");
    for &v in &variances {
        for (name, spec) in [
            ("skellam", NoiseSpec::Skellam { lambda: Rational::ceil_from_f64(v / 2.0, 1 << 20)? }),
            ("dgauss", NoiseSpec::DiscreteGaussian { sigma2: v }),
        ] {
            for m in [SamplingMode::Exact, SamplingMode::Fast] {
                let sampler = NoiseSampler::new(spec, m)?;
                let mut src = RandomSource::new(seed);
                let start = Instant::now();
                let mut sink = 0i64;
                for _ in 0..count {
                    sink = sink.wrapping_add(sampler.sample(&mut src)?);
                }
                std::hint::black_box(sink);
                let rate = count as f64 / start.elapsed().as_secs_f64().max(1e-9);
                out.line(format_args!("{name},{},{v},{rate:.0}", mode_name(m)));
            }
        }
    }
    out.finish(&p.out)
}
