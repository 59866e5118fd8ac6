//! Deterministic characteristics of an integrand: `lambda_t f^p`, the
//! series `v, b, ell, d, h`, Laplace deficits, exact moments of `R_t`,
//! inequality audits, SLLN classifiers and rate fits.
//!
//! Everything is computed from logarithms of integrals so the exponential
//! catalog rows stay finite far beyond `t = 700`.

mod audit;
mod classify;
mod fit;

pub use audit::{inequality_audit, AuditEntry, AuditFamily};
pub use classify::{classify_slln, k2, ClassifierVerdict, ClassifyOptions, Criterion, Verdict, Witness};
pub(crate) use fit::ols_slope;
pub use fit::{fit_rate, FitModel, FitResult};

use crate::error::{Error, Result};
use crate::integrands::{log_sum_exp, IntegrandSpec};
use crate::quad::{integrate, integrate_log, QuadOptions, QuadResult};

/// Default relative tolerance for quadrature.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Breakpoints handed to one quadrature call; longer lists are chunked.
const CHUNK: usize = 256;

fn opts(tol: f64) -> QuadOptions {
    QuadOptions::default().with_rel_tol(tol).graded(48)
}

/// Splits `[a, b]` so that each piece holds at most [`CHUNK`] breakpoints.
fn chunks(f: &IntegrandSpec, a: f64, b: f64) -> Vec<(f64, f64, Vec<f64>)> {
    let bps: Vec<f64> = f.breakpoints(b, usize::MAX).into_iter().filter(|&x| x > a && x < b).collect();
    if bps.len() <= CHUNK {
        return vec![(a, b, bps)];
    }
    let mut out = Vec::new();
    let mut lo = a;
    for group in bps.chunks(CHUNK) {
        let hi = *group.last().expect("nonempty chunk");
        let inner: Vec<f64> = group[..group.len() - 1].to_vec();
        out.push((lo, hi, inner));
        lo = hi;
    }
    if lo < b {
        out.push((lo, b, Vec::new()));
    }
    out
}

/// `ln int_a^b f^p`, from a closed form when the catalog has one and from
/// log-shifted quadrature otherwise.
pub fn ln_increment(f: &IntegrandSpec, p: f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= a) {
        return Err(Error::domain(format!("invalid integration range [{a}, {b}]")));
    }
    if a == b {
        return Ok(f64::NEG_INFINITY);
    }
    if let Some(v) = f.ln_integral_closed(p, a, b) {
        if !v.is_nan() {
            return Ok(v);
        }
    }
    let o = opts(tol);
    let mut parts = Vec::new();
    for (lo, hi, bps) in chunks(f, a, b) {
        let (l, _) = integrate_log(|x| p * f.ln_value(x), lo, hi, &bps, &o)?;
        parts.push(l);
    }
    Ok(log_sum_exp(parts.into_iter()))
}

/// `ln lambda_t f^p`.
pub fn ln_lambda_p(f: &IntegrandSpec, t: f64, p: f64, tol: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {t}")));
    }
    if p < 1.0 {
        return Err(Error::domain(format!("power p must be at least 1, got {p}")));
    }
    ln_increment(f, p, 0.0, t, tol)
}

/// `lambda_t f^p = int_0^t f^p` (may overflow to `+inf`).
pub fn lambda_p(f: &IntegrandSpec, t: f64, p: f64, tol: f64) -> Result<f64> {
    Ok(ln_lambda_p(f, t, p, tol)?.exp())
}

/// Quadrature of `g` over `[a, b]` using the integrand's breakpoints.
fn integrate_along(f: &IntegrandSpec, g: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    let o = QuadOptions { abs_tol: 1e-300, ..opts(tol) };
    let mut total = QuadResult { value: 0.0, error: 0.0 };
    for (lo, hi, bps) in chunks(f, a, b) {
        let r = integrate(&g, lo, hi, &bps, &o)?;
        total.value += r.value;
        total.error += r.error;
    }
    Ok(total)
}

/// `ln(1 + y) - y` without cancellation for small `y`.
fn log1p_minus(y: f64) -> f64 {
    if y.abs() < 1e-4 {
        y * y * (-0.5 + y * (1.0 / 3.0 - 0.25 * y))
    } else {
        y.ln_1p() - y
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DiagnosticSeries {
    pub t: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub v: Vec<f64>,
    pub b: Vec<f64>,
    pub ell: Vec<f64>,
    pub d: Vec<f64>,
    pub h: Vec<f64>,
    pub ln_lambda: Vec<f64>,
    pub ln_lambda2: Vec<f64>,
    /// `1 - ell_t = int_{t-1}^t f / lambda_t`, computed directly.
    pub one_minus_ell: Vec<f64>,
    /// `h` comes from an analytic derivative rather than differences.
    pub h_analytic: bool,
}

pub const SERIES_CSV_HEADER: &str = "t,lambda,lambda2,v,b,ell,d,h";

impl DiagnosticSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SERIES_CSV_HEADER);
        out.push('\n');
        for i in 0..self.t.len() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.t[i], self.lambda[i], self.lambda2[i], self.v[i], self.b[i], self.ell[i], self.d[i], self.h[i]
            ));
        }
        out
    }
}

fn check_schedule(ts: &[f64], min: f64) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::domain("empty t schedule"));
    }
    if !(ts[0] >= min) {
        return Err(Error::domain(format!("t schedule must start at or above {min}, got {}", ts[0])));
    }
    if ts.windows(2).any(|w| !(w[1] > w[0])) || !ts.iter().all(|t| t.is_finite()) {
        return Err(Error::domain("t schedule must be finite and strictly increasing"));
    }
    Ok(())
}

/// `(ln f)'(t)`, analytic when available, else a central difference with
/// step `1e-4 t`.
pub fn log_derivative(f: &IntegrandSpec, t: f64) -> (f64, bool) {
    match f.log_derivative(t) {
        Some(h) => (h, true),
        None => {
            let dt = 1e-4 * t;
            ((f.ln_value(t + dt) - f.ln_value(t - dt)) / (2.0 * dt), false)
        }
    }
}

/// The series `lambda, lambda2, v, b, ell, d, h` over a schedule with
/// every `t >= 1`.
pub fn diagnostic_series(f: &IntegrandSpec, ts: &[f64]) -> Result<DiagnosticSeries> {
    diagnostic_series_tol(f, ts, DEFAULT_TOL)
}

pub fn diagnostic_series_tol(f: &IntegrandSpec, ts: &[f64], tol: f64) -> Result<DiagnosticSeries> {
    check_schedule(ts, 1.0)?;
    let n = ts.len();
    let mut s = DiagnosticSeries {
        t: ts.to_vec(),
        lambda: Vec::with_capacity(n),
        lambda2: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        ell: Vec::with_capacity(n),
        d: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        ln_lambda: Vec::with_capacity(n),
        ln_lambda2: Vec::with_capacity(n),
        one_minus_ell: Vec::with_capacity(n),
        h_analytic: true,
    };
    let (mut prev, mut l1, mut l2) = (0.0, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &t in ts {
        l1 = log_sum_exp([l1, ln_increment(f, 1.0, prev, t, tol)?].into_iter());
        l2 = log_sum_exp([l2, ln_increment(f, 2.0, prev, t, tol)?].into_iter());
        prev = t;
        if l1 == f64::NEG_INFINITY {
            return Err(Error::domain(format!("lambda_t f = 0 at t = {t}")));
        }
        let last = ln_increment(f, 1.0, t - 1.0, t, tol)?;
        let ome = (last - l1).exp().min(1.0);
        let (h, analytic) = log_derivative(f, t);
        s.h_analytic &= analytic;
        s.lambda.push(l1.exp());
        s.lambda2.push(l2.exp());
        s.v.push((l2 - 2.0 * l1).exp());
        s.b.push((f.ln_value(t) - l1).exp());
        s.ell.push(1.0 - ome);
        s.d.push((f.ln_value(t + 1.0) - l1).exp());
        s.h.push(h);
        s.ln_lambda.push(l1);
        s.ln_lambda2.push(l2);
        s.one_minus_ell.push(ome);
    }
    Ok(s)
}

/// `1 - lambda_{t-delta} f / lambda_t f`.
pub fn lag_gap(f: &IntegrandSpec, t: f64, delta: f64, tol: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= t) {
        return Err(Error::domain(format!("lag {delta} must lie in (0, t]")));
    }
    let l = ln_lambda_p(f, t, 1.0, tol)?;
    Ok((ln_increment(f, 1.0, t - delta, t, tol)? - l).exp())
}

/// `int_0^t ln(1 + s f/lambda_t f) dx - s`, integrated as
/// `int (ln(1 + s u) - s u)` with `u = f/lambda_t`, which avoids the
/// cancellation against `s` since `int u = 1`.
pub fn laplace_deficit(f: &IntegrandSpec, t: f64, s: f64, tol: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("Laplace argument must be nonnegative, got {s}")));
    }
    let ln_lam = ln_lambda_p(f, t, 1.0, tol)?;
    if ln_lam == f64::NEG_INFINITY {
        return Err(Error::domain(format!("lambda_t f = 0 at t = {t}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let g = |x: f64| {
        let u = (f.ln_value(x) - ln_lam).exp();
        if u.is_infinite() {
            // integrable spike: the logarithm is integrable, the linear part
            // is accounted for exactly by int u = 1
            return 0.0;
        }
        log1p_minus(s * u)
    };
    Ok(integrate_along(f, g, 0.0, t, tol)?.value)
}

/// `E(R_t - 1)^n` for `n = 2..=n_max`, assembled from the cumulants
/// `kappa_n(R_t) = (n-1)! lambda f^n / (lambda f)^n`.
pub fn exact_central_moments(f: &IntegrandSpec, t: f64, n_max: usize, tol: f64) -> Result<Vec<f64>> {
    if n_max < 2 || !n_max.is_multiple_of(2) {
        return Err(Error::domain(format!("n_max must be an even integer >= 2, got {n_max}")));
    }
    let l1 = ln_lambda_p(f, t, 1.0, tol)?;
    let mut kappa = vec![0.0; n_max + 1];
    let mut fact = 1.0;
    for (n, slot) in kappa.iter_mut().enumerate().skip(2) {
        fact *= (n - 1) as f64;
        let ln_m = ln_lambda_p(f, t, n as f64, tol)? - n as f64 * l1;
        let k = fact * ln_m.exp();
        if !k.is_finite() {
            return Err(Error::domain(format!("moment of order {n} is infinite (lambda_t f^{n} diverges)")));
        }
        *slot = k;
    }
    Ok(central_from_cumulants(&kappa)[2..].to_vec())
}

/// Central moments `mu_0..mu_n` from cumulants with `kappa_1 = 0`:
/// `mu_n = sum_{k=2}^{n} C(n-1, k-1) kappa_k mu_{n-k}`.
pub fn central_from_cumulants(kappa: &[f64]) -> Vec<f64> {
    let n_max = kappa.len() - 1;
    let mut mu = vec![0.0; n_max + 1];
    mu[0] = 1.0;
    for n in 2..=n_max {
        let mut binom = 1.0; // C(n-1, k-1) starting at k = 1
        let mut acc = 0.0;
        for k in 1..=n {
            if k > 1 {
                binom *= (n - k + 1) as f64 / (k - 1) as f64;
            }
            if k >= 2 {
                acc += binom * kappa[k] * mu[n - k];
            }
        }
        mu[n] = acc;
    }
    mu
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Concavity {
    pub concave: bool,
    /// Largest increase of the slope of `ln lambda` between neighbouring
    /// schedule intervals (positive means a convex kink).
    pub max_slope_increase: f64,
}

/// Checks that the slopes of `ln lambda_t f` between schedule points are
/// non-increasing.
pub fn is_ln_f_concave(f: &IntegrandSpec, ts: &[f64], tol: f64) -> Result<Concavity> {
    check_schedule(ts, 0.0)?;
    if ts.len() < 3 {
        return Err(Error::domain("concavity check needs at least three points"));
    }
    let mut logs = Vec::with_capacity(ts.len());
    let (mut prev, mut l) = (0.0, f64::NEG_INFINITY);
    for &t in ts {
        l = log_sum_exp([l, ln_increment(f, 1.0, prev, t, tol)?].into_iter());
        prev = t;
        logs.push(l);
    }
    let slopes: Vec<f64> = (1..ts.len()).map(|i| (logs[i] - logs[i - 1]) / (ts[i] - ts[i - 1])).collect();
    let mut worst = f64::NEG_INFINITY;
    for w in slopes.windows(2) {
        let scale = w[0].abs().max(w[1].abs()).max(1e-300);
        let inc = if w[0].is_finite() { (w[1] - w[0]) / scale } else { f64::INFINITY };
        worst = worst.max(inc);
    }
    Ok(Concavity { concave: worst <= 1e-9, max_slope_increase: worst })
}

/// Thresholds that turn asymptotic statements into finite checks.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Thresholds {
    /// Final value below which a decreasing series counts as vanishing.
    pub zero_final: f64,
    /// Final value above which a series counts as bounded away from 0.
    pub away_final: f64,
    /// Maximal |log-log slope| of a flat series.
    pub flat_slope: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { zero_final: 1e-2, away_final: 0.1, flat_slope: 0.02 }
    }
}

fn last_decade(ts: &[f64]) -> usize {
    let end = *ts.last().expect("nonempty");
    ts.partition_point(|&t| t < end / 10.0)
}

/// Strictly decreasing over the last decade of the schedule and ending
/// below `zero_final`.
pub fn tends_to_zero(ts: &[f64], ys: &[f64], th: &Thresholds) -> bool {
    let Some(&last) = ys.last() else { return false };
    let i0 = last_decade(ts).min(ys.len() - 1);
    ys[i0..].windows(2).all(|w| w[1] < w[0]) && last < th.zero_final
}

/// Ends above `away_final` with a flat log-log fit over the last decade.
pub fn bounded_away(ts: &[f64], ys: &[f64], th: &Thresholds) -> bool {
    let Some(&last) = ys.last() else { return false };
    if last.is_infinite() {
        return true;
    }
    if !(last > th.away_final) {
        return false;
    }
    let i0 = last_decade(ts).min(ys.len().saturating_sub(2));
    let (x, y): (Vec<f64>, Vec<f64>) = ts[i0..].iter().zip(&ys[i0..]).map(|(t, y)| (t.ln(), y.ln())).unzip();
    fit::ols_slope(&x, &y).abs() < th.flat_slope
}

/// `n` points geometrically spaced on `[a, b]`.
pub fn geometric_schedule(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let r = (b / a).ln() / (n - 1) as f64;
    (0..n).map(|i| if i + 1 == n { b } else { a * (r * i as f64).exp() }).collect()
}
