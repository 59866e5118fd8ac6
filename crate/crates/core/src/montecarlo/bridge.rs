//! Coupling of `R_t` with discrete weighted sums `S_n = sum w_k X_k` whose
//! `X_k` are the Gamma masses of the cells `((k-1)q, kq]` of the same path.
//!
//! For unit cells the pathwise sandwich is checked at every schedule point,
//! with `f_k = f(k)`, `W_m = sum_{k<=m} f_k`, `R_m = sum_{k<=m} f_k X_k / W_m`,
//! `R'_m = sum_{k<=m} f_k X_{k+1} / W_m`, `n = floor(t)`:
//!
//! * increasing `f` with `f(0) = 0`:
//!   `R'_{n-1}/(1 + d_{n-1}) <= R_t <= R_n/(1 - b_n) + d_n X_{n+1}`;
//! * decreasing `f`:
//!   `R_n/(1 + f_0/W_n) <= R_t <= (W_{n-1} R'_{n-1} + f_0 X_1 + f_n X_{n+1})/W_n`.
//!
//! In the decreasing case the cruder form `R_n <= R_t <= R'_{n-1}/(1 - b_n)
//! + b_n X_{n+1}` is tallied separately; it is not a pathwise bound.

use super::{replicate_map, vanishing_verdict, BridgeWeights, ConvergenceReport, Design, ExperimentConfig};
use crate::diagnostics::{self, Verdict};
use crate::error::{Error, Result};
use crate::rng::PathSeed;

/// Relative slack allowed in the pathwise inequalities.
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Increasing,
    Decreasing,
}

/// Everything the discrete side needs at one schedule point.
struct Point {
    /// Whole cells below `t`.
    n: usize,
    /// `lambda` at `n - 1` and `n`, in the scale of `f_k`.
    lambda_prev: f64,
    lambda_n: f64,
}

struct Rep {
    r: Vec<f64>,
    discrete: Vec<f64>,
    /// Per point: largest relative violation of the checked sandwich and of
    /// the crude decreasing form.
    violation: Vec<f64>,
    crude: Vec<f64>,
}

/// Pathwise coupling of the continuous and discrete pipelines.
pub fn run_bridge(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let f = cfg.validate()?;
    let m = f.monotone();
    if !m.is_monotone() {
        return Err(Error::usage(format!("the bridge needs a monotone integrand; {f} is not")));
    }
    let q = cfg.bridge_cell;
    let ts = &cfg.t_schedule;
    let t_max = *ts.last().expect("validated");
    let cells = (t_max / q).floor() as usize + 1;
    let horizon = cells as f64 * q;
    if ts.iter().any(|&t| t < q) {
        return Err(Error::domain(format!("every schedule point must cover at least one cell of length {q}")));
    }
    let mut ts_ext = ts.clone();
    if horizon > t_max {
        ts_ext.push(horizon);
    }
    let knots: Vec<f64> = (1..=cells).map(|k| k as f64 * q).collect();
    let design = Design::build(&f, cfg, &ts_ext, &knots)?;

    let side = if m.is_decreasing() { Side::Decreasing } else { Side::Increasing };
    let unit = q == 1.0;
    let sandwich = unit && (side == Side::Decreasing || f.value(0.0) == 0.0);

    // f at the knots 0..=cells, normalized by the largest value
    let ln_fk: Vec<f64> = (0..=cells).map(|k| f.ln_value(k as f64 * q)).collect();
    let scale = ln_fk.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fk: Vec<f64> = ln_fk.iter().map(|l| (l - scale).exp()).collect();
    let weights: Vec<f64> = (1..=cells)
        .map(|k| {
            let (a, b) = ((k - 1) as f64 * q, k as f64 * q);
            Ok(match cfg.bridge_weights {
                BridgeWeights::CellMass => (diagnostics::ln_increment(&f, 1.0, a, b, cfg.tol)? - scale).exp(),
                BridgeWeights::Right => fk[k],
                BridgeWeights::Left => fk[k - 1],
            })
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(ts.len());
    for &t in ts {
        let n = (t / q + 1e-9).floor() as usize;
        let lam = |x: f64| -> Result<f64> { Ok((diagnostics::ln_lambda_p(&f, x, 1.0, cfg.tol)? - scale).exp()) };
        let lambda_prev = if n >= 2 { lam((n - 1) as f64 * q)? } else { f64::NAN };
        points.push(Point { n, lambda_prev, lambda_n: lam(n as f64 * q)? });
    }
    if sandwich && points.iter().any(|p| p.n < 2) {
        return Err(Error::domain("the sandwich needs t >= 2"));
    }

    let nodes = design.grid.nodes().to_vec();
    let owner: Vec<usize> = nodes.windows(2).map(|w| ((0.5 * (w[0] + w[1])) / q).floor() as usize).collect();
    let reps: Vec<Rep> = replicate_map(cfg, |seed: PathSeed| {
        let d = design.deltas(seed);
        let mut r = design.ratios(&d);
        r.truncate(ts.len());
        // X[k] is the mass of cell k (1-based), X[0] unused
        let mut x = vec![0.0; cells + 1];
        for (k, delta) in d.iter().enumerate() {
            x[owner[k] + 1] += delta;
        }
        let mut discrete = Vec::with_capacity(ts.len());
        let mut violation = Vec::with_capacity(ts.len());
        let mut crude = Vec::with_capacity(ts.len());
        for (i, p) in points.iter().enumerate() {
            let n = p.n;
            let (s, w) = (1..=n).fold((0.0, 0.0), |(s, w), k| (s + weights[k - 1] * x[k], w + weights[k - 1]));
            // X_k ~ Gamma(q): divide by q for unit-mean summands
            discrete.push(s / (w * q));
            if !sandwich {
                continue;
            }
            let wsum = |m: usize| (1..=m).map(|k| fk[k]).sum::<f64>();
            let (w_n, w_prev) = (wsum(n), wsum(n - 1));
            let s_n: f64 = (1..=n).map(|k| fk[k] * x[k]).sum();
            let s_shift: f64 = (1..n).map(|k| fk[k] * x[k + 1]).sum();
            let (r_n, r_shift) = (s_n / w_n, s_shift / w_prev);
            let rt = r[i];
            let (lower, upper) = match side {
                Side::Increasing => {
                    let d_prev = fk[n] / p.lambda_prev;
                    let b_n = fk[n] / p.lambda_n;
                    let d_n = fk[n + 1] / p.lambda_n;
                    let upper = if b_n < 1.0 { r_n / (1.0 - b_n) + d_n * x[n + 1] } else { f64::INFINITY };
                    (r_shift / (1.0 + d_prev), upper)
                }
                Side::Decreasing => {
                    let b_n = fk[n] / p.lambda_n;
                    let cu = if b_n < 1.0 { r_shift / (1.0 - b_n) + b_n * x[n + 1] } else { f64::INFINITY };
                    crude.push(excess(r_n, rt, cu));
                    (r_n / (1.0 + fk[0] / w_n), (w_prev * r_shift + fk[0] * x[1] + fk[n] * x[n + 1]) / w_n)
                }
            };
            violation.push(excess(lower, rt, upper));
        }
        Rep { r, discrete, violation, crude }
    });

    let mut rep = ConvergenceReport::new(cfg, design.step, design.grid.cells());
    let (mut cont, mut disc) = (Vec::new(), Vec::new());
    let mut all_pass = true;
    let mut crude_fail = 0usize;
    for (i, &t) in ts.iter().enumerate() {
        let rs: Vec<f64> = reps.iter().map(|r| r.r[i]).collect();
        let ds: Vec<f64> = reps.iter().map(|r| r.discrete[i]).collect();
        cont.push(rep.push_tail(t, "tail_prob_continuous", &rs, cfg.epsilon));
        disc.push(rep.push_tail(t, "tail_prob_discrete", &ds, cfg.epsilon));
        if sandwich {
            let v: Vec<f64> = reps.iter().map(|r| r.violation[i]).collect();
            let pass = v.iter().filter(|x| **x <= SLACK).count();
            all_pass &= pass == v.len();
            push_rate(&mut rep, t, "sandwich_pass_rate", pass, v.len());
            rep.push(t, "sandwich_max_violation", v.iter().copied().fold(f64::NEG_INFINITY, f64::max), 0.0);
            if side == Side::Decreasing {
                let c: Vec<f64> = reps.iter().map(|r| r.crude[i]).collect();
                let pass = c.iter().filter(|x| **x <= SLACK).count();
                crude_fail += c.len() - pass;
                push_rate(&mut rep, t, "crude_form_pass_rate", pass, c.len());
            }
        }
    }
    if sandwich {
        let v = if all_pass { Verdict::Holds } else { Verdict::Fails };
        let why = match side {
            Side::Increasing => "R'_{n-1}/(1+d_{n-1}) <= R_t <= R_n/(1-b_n) + d_n X_{n+1} on every path",
            Side::Decreasing => "R_n/(1+f_0/W_n) <= R_t <= (W_{n-1}R'_{n-1} + f_0 X_1 + f_n X_{n+1})/W_n on every path",
        };
        let why = if all_pass { why.to_string() } else { format!("violated somewhere: {why}") };
        rep.decide("sandwich", v, why);
        if side == Side::Decreasing && crude_fail > 0 {
            rep.notes.push(format!(
                "the form R_n <= R_t <= R'_{{n-1}}/(1-b_n) + b_n X_{{n+1}} failed on {crude_fail} path-points"
            ));
        }
    } else if !unit {
        rep.notes.push(format!("cells of length {q}: only the discrete law is compared"));
    } else {
        rep.notes.push("increasing integrand with f(0) > 0: sandwich not applicable".into());
    }
    let (vc, why_c) = vanishing_verdict(&cont, cfg.tail_threshold, "continuous tail probability");
    let (vd, why_d) = vanishing_verdict(&disc, cfg.tail_threshold, "discrete tail probability");
    rep.decide("wlln_continuous", vc, why_c);
    rep.decide("wlln_discrete", vd, why_d);
    let agree = match (vc, vd) {
        (a, b) if a == b => Verdict::Holds,
        (Verdict::Undecided, _) | (_, Verdict::Undecided) => Verdict::Undecided,
        _ => Verdict::Fails,
    };
    rep.decide("wlln_agreement", agree, format!("continuous {vc:?}, discrete {vd:?}"));
    Ok(rep)
}

/// Largest relative excess of `lower <= x <= upper`; nonpositive inside.
fn excess(lower: f64, x: f64, upper: f64) -> f64 {
    let lo = (lower - x) / x.abs().max(f64::MIN_POSITIVE);
    let hi = if upper.is_finite() { (x - upper) / upper.abs().max(f64::MIN_POSITIVE) } else { f64::NEG_INFINITY };
    lo.max(hi)
}

fn push_rate(rep: &mut ConvergenceReport, t: f64, name: &str, pass: usize, n: usize) {
    let p = pass as f64 / n as f64;
    let (lo, hi) = super::stats::wilson(pass, n);
    rep.estimates.push(super::Estimate {
        t,
        statistic: name.into(),
        value: p,
        stderr: (p * (1.0 - p) / n as f64).sqrt(),
        interval: Some((lo, hi)),
    });
}
