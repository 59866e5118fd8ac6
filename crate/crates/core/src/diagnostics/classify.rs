//! Sufficient conditions for the strong law, decided from the catalog's
//! asymptotic rates after checking them against the computed series.

use super::{bounded_away, diagnostic_series, fit_rate, geometric_schedule, tends_to_zero};
use super::{FitModel, Thresholds};
use crate::error::{Error, Result};
use crate::integrands::{IntegrandSpec, Rate};
use crate::quad::{integrate, QuadOptions};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Criterion {
    /// `v_t -> 0`.
    #[serde(rename = "wlln")]
    Wlln,
    /// `sum b_n^2 < inf`.
    #[serde(rename = "i")]
    SquareSummable,
    /// `sum e^{-1/b_n} < inf`.
    #[serde(rename = "ii")]
    ExpSummable,
    /// `limsup t b_t < inf`.
    #[serde(rename = "univ")]
    Univ,
    /// `limsup v_n ln n = 0`.
    #[serde(rename = "cuzick-ii'")]
    CuzickII,
    /// `limsup t^{q-1} lambda f^q / (lambda f)^q < inf`.
    #[serde(rename = "iii")]
    CuzickIII,
    /// `int b_t^2 K2(1/b_t) dt < inf`.
    #[serde(rename = "K2")]
    K2,
    /// Any sufficient condition holds (holds), the weak law fails (fails).
    #[serde(rename = "slln")]
    Slln,
}

impl Criterion {
    pub fn id(&self) -> &'static str {
        match self {
            Criterion::Wlln => "wlln",
            Criterion::SquareSummable => "i",
            Criterion::ExpSummable => "ii",
            Criterion::Univ => "univ",
            Criterion::CuzickII => "cuzick-ii'",
            Criterion::CuzickIII => "iii",
            Criterion::K2 => "K2",
            Criterion::Slln => "slln",
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ClassifierVerdict {
    pub criterion: Criterion,
    pub verdict: Verdict,
    pub witness: Witness,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Witness {
    pub reason: String,
    pub probe_horizon: f64,
    pub values: BTreeMap<String, f64>,
}

/// `K2(x) = int_0^x u P(|Y| > u) du` for `Y = X - 1`, `X ~ Exp(1)`.
pub fn k2(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let tail = |u: f64| {
        let right = (-(1.0 + u)).exp();
        let left = if u < 1.0 { -(-(1.0 - u)).exp_m1() } else { 0.0 };
        u * (right + left)
    };
    let o = QuadOptions::default().with_rel_tol(1e-12);
    let x_eff = x.min(60.0);
    let bps = [1.0];
    // beyond 60 the tail mass is below e^{-60}
    integrate(tail, 0.0, x_eff, &bps, &o).map(|r| r.value).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub probe_horizon: f64,
    pub q: f64,
    pub points: usize,
    pub thresholds: Thresholds,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions { probe_horizon: 1e6, q: 2.0, points: 64, thresholds: Thresholds::default() }
    }
}

/// Slope tolerance of the check `b_t / claimed rate ~ const`.
const RATE_SLOPE_TOL: f64 = 0.05;

/// Runs every criterion. Integrands that are neither increasing nor
/// bounded and nonintegrable are outside the hypothesis (usage error).
pub fn classify_slln(f: &IntegrandSpec, opts: &ClassifyOptions) -> Result<Vec<ClassifierVerdict>> {
    let meta = f.metadata();
    let increasing = meta.monotone.is_increasing();
    let bounded_nonint = meta.bounded && !meta.integrable;
    if !(increasing || bounded_nonint) {
        return Err(Error::usage(format!(
            "{f} is neither increasing nor bounded and nonintegrable; the classifiers do not apply"
        )));
    }
    let h = opts.probe_horizon;
    if !(h >= 1e3) {
        return Err(Error::domain(format!("probe horizon {h} too short (need >= 1e3)")));
    }
    let ts = geometric_schedule(10.0, h, opts.points.max(16));
    let s = diagnostic_series(f, &ts)?;
    let th = &opts.thresholds;
    let n = ts.len();
    let (b_h, v_h) = (s.b[n - 1], s.v[n - 1]);

    let mut base = BTreeMap::new();
    base.insert("b_at_horizon".to_string(), b_h);
    base.insert("v_at_horizon".to_string(), v_h);
    let witness = |reason: String, extra: &[(&str, f64)]| {
        let mut values = base.clone();
        for (k, v) in extra {
            values.insert((*k).to_string(), *v);
        }
        Witness { reason, probe_horizon: h, values }
    };
    let mut out = Vec::new();
    let mut push = |criterion, verdict, w| out.push(ClassifierVerdict { criterion, verdict, witness: w });

    // weak law
    let wlln = if tends_to_zero(&ts, &s.v, th) {
        Verdict::Holds
    } else if bounded_away(&ts, &s.v, th) {
        Verdict::Fails
    } else {
        Verdict::Undecided
    };
    push(
        Criterion::Wlln,
        wlln,
        witness(
            match wlln {
                Verdict::Holds => "v_t strictly decreasing over the last decade and below threshold".into(),
                Verdict::Fails => "v_t flat and bounded away from zero".into(),
                Verdict::Undecided => "v_t neither clearly vanishing nor flat".into(),
            },
            &[],
        ),
    );

    // catalog rates, checked against the series
    let asym = f.asymptotics();
    let rate_check = asym.map(|a| {
        let half = n / 2;
        let y: Vec<f64> = (half..n).map(|i| s.b[i].ln() - a.b_rate.ln_at(ts[i])).collect();
        let x: Vec<f64> = ts[half..].iter().map(|t| t.ln()).collect();
        super::fit::ols_slope(&x, &y)
    });
    let rate = match (asym, rate_check) {
        (Some(a), Some(slope)) if slope.abs() <= RATE_SLOPE_TOL && slope.is_finite() => Some(a),
        _ => None,
    };
    let slope_val = rate_check.unwrap_or(f64::NAN);
    let no_rate = |what: &str| {
        witness(
            format!("{what}: no catalog rate confirmed by the series (slope check {slope_val:.3})"),
            &[("rate_check_slope", slope_val)],
        )
    };
    let rate_vals = |r: &Rate, c: f64| {
        vec![
            ("rate_power", r.power),
            ("rate_log_power", r.log_power),
            ("rate_loglog_power", r.loglog_power),
            ("rate_constant", c),
            ("rate_check_slope", slope_val),
        ]
    };

    // integrals along the schedule, trapezoid in ln t
    let log_integral = |g: &dyn Fn(usize) -> f64| -> f64 {
        (1..n).map(|i| 0.5 * (g(i) * ts[i] + g(i - 1) * ts[i - 1]) * (ts[i] / ts[i - 1]).ln()).sum()
    };

    // (i)
    let sq_partial = log_integral(&|i| s.b[i] * s.b[i]);
    let verdict_i = match &rate {
        None => {
            push(Criterion::SquareSummable, Verdict::Undecided, no_rate("sum b_n^2"));
            Verdict::Undecided
        }
        Some(a) => {
            let r = a.b_rate;
            let holds = square_summable(&r);
            let mut vals = rate_vals(&r, a.b_const);
            vals.push(("partial_integral", sq_partial));
            if holds {
                let lh = h.ln();
                let tail = if 2.0 * r.power + 1.0 < 0.0 {
                    b_h * b_h * h / -(2.0 * r.power + 1.0)
                } else {
                    b_h * b_h * h * lh / -(2.0 * r.log_power + 1.0)
                };
                vals.push(("tail_estimate", tail));
            }
            let v = if holds { Verdict::Holds } else { Verdict::Fails };
            push(
                Criterion::SquareSummable,
                v,
                witness(
                    format!("b_t ~ {}: b^2 {} integrable", r.describe(), if holds { "is" } else { "is not" }),
                    &vals,
                ),
            );
            v
        }
    };

    // (ii)
    let exp_partial = log_integral(&|i| (-1.0 / s.b[i]).exp());
    match &rate {
        None => push(Criterion::ExpSummable, Verdict::Undecided, no_rate("sum e^{-1/b_n}")),
        Some(a) => {
            let r = a.b_rate;
            let c_hat = (b_h.ln() - r.ln_at(h)).exp();
            let (v, reason) = exp_summable(&r, c_hat);
            let mut vals = rate_vals(&r, a.b_const);
            vals.push(("fitted_constant", c_hat));
            vals.push(("partial_integral", exp_partial));
            push(Criterion::ExpSummable, v, witness(reason, &vals));
        }
    }

    // univ
    match &rate {
        None => push(Criterion::Univ, Verdict::Undecided, no_rate("limsup t b_t")),
        Some(a) => {
            let r = a.b_rate;
            let holds = r.power < -1.0
                || (r.power == -1.0 && (r.log_power < 0.0 || (r.log_power == 0.0 && r.loglog_power <= 0.0)));
            let mut vals = rate_vals(&r, a.b_const);
            vals.push(("t_b_at_horizon", h * b_h));
            push(
                Criterion::Univ,
                if holds { Verdict::Holds } else { Verdict::Fails },
                witness(format!("t b_t ~ t {}: {}", r.describe(), if holds { "bounded" } else { "unbounded" }), &vals),
            );
        }
    }

    // cuzick (ii'): v_n ln n -> 0
    match &rate {
        None => push(Criterion::CuzickII, Verdict::Undecided, no_rate("v_n ln n")),
        Some(a) => {
            let r = a.v_rate;
            let holds = r.power < 0.0
                || (r.power == 0.0 && (r.log_power < -1.0 || (r.log_power == -1.0 && r.loglog_power < 0.0)));
            let mut vals = rate_vals(&r, 1.0);
            vals.push(("v_ln_t_at_horizon", v_h * h.ln()));
            push(
                Criterion::CuzickII,
                if holds { Verdict::Holds } else { Verdict::Fails },
                witness(
                    format!("v_t ln t ~ {} ln t: {}", r.describe(), if holds { "vanishes" } else { "does not vanish" }),
                    &vals,
                ),
            );
        }
    }

    // (iii): t^{q-1} lambda f^q / (lambda f)^q bounded, from a fit of the
    // computed quantity
    let q = opts.q;
    let mut ys = Vec::with_capacity(n);
    for (i, &t) in ts.iter().enumerate() {
        let lq = super::ln_lambda_p(f, t, q, super::DEFAULT_TOL)?;
        ys.push(((q - 1.0) * t.ln() + lq - q * s.ln_lambda[i]).exp());
    }
    let half = n / 2;
    let fit3 = fit_rate(&ts[half..], &ys[half..], FitModel::PowerTimesLogPower)?;
    let v3 = if fit3.exponent < -RATE_SLOPE_TOL {
        Verdict::Holds
    } else if fit3.exponent > RATE_SLOPE_TOL {
        Verdict::Fails
    } else if fit3.log_exponent <= RATE_SLOPE_TOL {
        Verdict::Holds
    } else if fit3.log_exponent > 0.25 {
        Verdict::Fails
    } else {
        Verdict::Undecided
    };
    push(
        Criterion::CuzickIII,
        v3,
        witness(
            format!(
                "t^(q-1) lambda f^q/(lambda f)^q fitted as t^{:.3} ln^{:.3} t (q = {q})",
                fit3.exponent, fit3.log_exponent
            ),
            &[
                ("q", q),
                ("fit_exponent", fit3.exponent),
                ("fit_log_exponent", fit3.log_exponent),
                ("value_at_horizon", ys[n - 1]),
            ],
        ),
    );

    // K2: K2(x) -> 1/2, so once b_t -> 0 the integral behaves like (i)
    let k2_partial = log_integral(&|i| s.b[i] * s.b[i] * k2(1.0 / s.b[i]));
    let vk2 = match &rate {
        None => Verdict::Undecided,
        Some(a) if a.b_rate.vanishes() => verdict_i,
        Some(_) => Verdict::Fails,
    };
    push(
        Criterion::K2,
        vk2,
        witness(
            match vk2 {
                Verdict::Undecided => "no confirmed rate for b_t".into(),
                _ if rate.is_some_and(|a| a.b_rate.vanishes()) => {
                    "K2(1/b_t) -> 1/2 as b_t -> 0, so the integral converges iff sum b_n^2 does".into()
                }
                _ => "b_t does not vanish: the integrand is bounded below".into(),
            },
            &[("partial_integral", k2_partial), ("k2_at_inverse_b", k2(1.0 / b_h))],
        ),
    );

    // overall
    let sufficient = [
        Criterion::SquareSummable,
        Criterion::ExpSummable,
        Criterion::Univ,
        Criterion::CuzickII,
        Criterion::CuzickIII,
        Criterion::K2,
    ];
    let held: Vec<&str> = out
        .iter()
        .filter(|c| sufficient.contains(&c.criterion) && c.verdict == Verdict::Holds)
        .map(|c| c.criterion.id())
        .collect();
    let (vs, reason) = if !held.is_empty() {
        (Verdict::Holds, format!("sufficient condition(s) hold: {}", held.join(", ")))
    } else if wlln == Verdict::Fails {
        (Verdict::Fails, "the weak law already fails".to_string())
    } else {
        (Verdict::Undecided, "no sufficient condition holds and the weak law does not fail".to_string())
    };
    out.push(ClassifierVerdict { criterion: Criterion::Slln, verdict: vs, witness: witness(reason, &[]) });
    Ok(out)
}

fn square_summable(r: &Rate) -> bool {
    let (a, b, g) = (2.0 * r.power, 2.0 * r.log_power, 2.0 * r.loglog_power);
    a < -1.0 || (a == -1.0 && (b < -1.0 || (b == -1.0 && g < -1.0)))
}

fn exp_summable(r: &Rate, c_hat: f64) -> (Verdict, String) {
    if r.power < 0.0 {
        return (Verdict::Holds, format!("1/b_t grows like a power ({}): e^(-1/b) summable", r.describe()));
    }
    if r.power > 0.0 {
        return (Verdict::Fails, "b_t grows".into());
    }
    if r.log_power < -1.0 {
        return (Verdict::Holds, format!("1/b_t ~ {}: faster than ln t", r.describe()));
    }
    if r.log_power == -1.0 && r.loglog_power == 0.0 {
        // e^{-1/b_n} ~ n^{-1/C}
        if (c_hat - 1.0).abs() < 0.1 {
            return (Verdict::Undecided, format!("e^(-1/b_n) ~ n^(-1/C) with C = {c_hat:.3} too close to 1"));
        }
        let v = if c_hat < 1.0 { Verdict::Holds } else { Verdict::Fails };
        return (v, format!("e^(-1/b_n) ~ n^(-1/C), C = {c_hat:.3}"));
    }
    (
        Verdict::Fails,
        format!("1/b_t ~ {} grows slower than ln t", Rate::new(0.0, -r.log_power, -r.loglog_power).describe()),
    )
}
