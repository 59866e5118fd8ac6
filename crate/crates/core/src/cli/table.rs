//! Numerical reproduction of the table of test functions: log-log slopes of
//! `int f`, `int f^2`, `v_t`, `b_t` and `h_t` over `[1e2, 1e6]`, each also
//! divided by its claimed rate. A claimed rate is reproduced when the
//! quotient has log-log slope within `TABLE_SLOPE_TOL`.

use crate::diagnostics::{diagnostic_series, geometric_schedule, ols_slope};
use crate::error::Result;
use crate::integrands::{parse_id, IntegrandSpec, Kind, Rate, TABLE_ROWS};
use serde::Serialize;

pub const TABLE_SLOPE_TOL: f64 = 0.05;
pub const TABLE_RANGE: (f64, f64) = (1e2, 1e6);
pub const TABLE_POINTS: usize = 32;
pub const TABLE_CSV_HEADER: &str = "row,quantity,claimed,fitted_exponent,ratio_slope,pass";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableEntry {
    pub quantity: &'static str,
    pub claimed: String,
    /// Slope of `ln y` against `ln t`.
    pub fitted_exponent: f64,
    /// Slope of `ln(y / claimed)` against `ln t`.
    pub ratio_slope: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub id: String,
    pub entries: Vec<TableEntry>,
    /// Fitted `ln t` exponent of `h_t / b_t`.
    pub h_over_b_log_exponent: f64,
    /// `h_t` and `b_t` follow different rates on this row.
    pub pattern_breaking: bool,
    /// The claimed `v_t` does not vanish, so the weak law fails.
    pub wlln_fails: bool,
}

impl TableRow {
    pub fn entry(&self, quantity: &str) -> Option<&TableEntry> {
        self.entries.iter().find(|e| e.quantity == quantity)
    }

    pub fn passes(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// `ln` of the claimed `int^t f^p` given `ln f(t)`, with its label.
fn claimed_lambda(f: &IntegrandSpec, p: f64, t: f64) -> Option<(String, f64)> {
    let lf = p * f.ln_value(t);
    let (lt, llt) = (t.ln(), t.ln().ln());
    let fp = if p == 1.0 { "f".to_string() } else { format!("f^{p}") };
    Some(match *f.kind() {
        Kind::Power(a) => (format!("t^{}", p * a + 1.0), lf + lt),
        Kind::ExpLogPower(a) if a <= 1.0 => (format!("t {fp}"), lf + lt),
        Kind::ExpLogPower(a) => (format!("t {fp} ln^{} t", 1.0 - a), lf + lt + (1.0 - a) * llt),
        Kind::ExpPower(a) => (format!("t^{} {fp}", 1.0 - a), lf + (1.0 - a) * lt),
        Kind::ExpOverLogPower(a) => (format!("{fp} ln^{a} t"), lf + a * llt),
        Kind::ExpOverIterLog(1) => (format!("{fp} ln t"), lf + llt),
        Kind::ExpOverIterLog(_) => (format!("{fp} ln_2 t"), lf + llt.ln()),
        Kind::PolyTimesExp(_) | Kind::PureExp => (fp, lf),
        _ => return None,
    })
}

fn slope(ts: &[f64], ln_y: &[f64]) -> f64 {
    let lt: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    ols_slope(&lt, ln_y)
}

fn entry(quantity: &'static str, claimed: String, ts: &[f64], ln_y: &[f64], ln_claim: &[f64]) -> TableEntry {
    let ratio: Vec<f64> = ln_y.iter().zip(ln_claim).map(|(y, c)| y - c).collect();
    let ratio_slope = slope(ts, &ratio);
    TableEntry {
        quantity,
        claimed,
        fitted_exponent: slope(ts, ln_y),
        ratio_slope,
        pass: ratio_slope.abs() <= TABLE_SLOPE_TOL,
    }
}

/// One row of the table for an integrand with catalog asymptotics.
pub fn table_row(id: &str) -> Result<TableRow> {
    let f = parse_id(id)?;
    let ts = geometric_schedule(TABLE_RANGE.0, TABLE_RANGE.1, TABLE_POINTS);
    let s = diagnostic_series(&f, &ts)?;
    let asym = f.asymptotics().ok_or_else(|| crate::Error::Usage(format!("{id} has no catalog asymptotics")))?;
    let mut entries = Vec::new();
    for (p, quantity, ln_y) in [(1.0, "int_f", &s.ln_lambda), (2.0, "int_f2", &s.ln_lambda2)] {
        let claims: Vec<(String, f64)> = ts
            .iter()
            .map(|&t| claimed_lambda(&f, p, t))
            .collect::<Option<_>>()
            .ok_or_else(|| crate::Error::Usage(format!("{id} has no claimed integral rate")))?;
        let label = claims[0].0.clone();
        let ln_claim: Vec<f64> = claims.into_iter().map(|c| c.1).collect();
        entries.push(entry(quantity, label, &ts, ln_y, &ln_claim));
    }
    let rate_entry = |quantity: &'static str, rate: Rate, ys: &[f64]| {
        let ln_y: Vec<f64> = ys.iter().map(|y| y.abs().ln()).collect();
        let ln_claim: Vec<f64> = ts.iter().map(|&t| rate.ln_at(t)).collect();
        entry(quantity, rate.describe(), &ts, &ln_y, &ln_claim)
    };
    entries.push(rate_entry("v", asym.v_rate, &s.v));
    entries.push(rate_entry("b", asym.b_rate, &s.b));
    entries.push(rate_entry("h", asym.h_rate, &s.h));
    // h/b carries no power of t on any row, so only the ln t exponent is fitted
    let ln_ratio: Vec<f64> = s.h.iter().zip(&s.b).map(|(h, b)| (h.abs() / b).ln()).collect();
    let llt: Vec<f64> = ts.iter().map(|t| t.ln().ln()).collect();
    let split = ols_slope(&llt, &ln_ratio);
    Ok(TableRow {
        id: id.to_string(),
        entries,
        h_over_b_log_exponent: split,
        pattern_breaking: split.abs() > 0.25,
        wlln_fails: !asym.v_rate.vanishes(),
    })
}

/// Every row of the table, in the listed order.
pub fn compute_table() -> Result<Vec<TableRow>> {
    TABLE_ROWS.iter().map(|id| table_row(id)).collect()
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(TABLE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        for e in &r.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.id, e.quantity, e.claimed, e.fitted_exponent, e.ratio_slope, e.pass
            ));
        }
    }
    out
}
