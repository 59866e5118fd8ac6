//! Pointwise checks of the elementary inequalities linking `ell`, `b`,
//! `d`, `v` and their discrete counterparts.

use super::{ln_increment, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::integrands::{log_sum_exp, IntegrandSpec, Kind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditFamily {
    /// Increasing f: `1 - ell_{t+1} >= b_t/(1+b_t)` and `1 - ell_t <= b_t`.
    EllIncreasing,
    /// Increasing f: `b_t <= d_t <= b_{t+1}/(1-b_{t+1})`.
    LeadIncreasing,
    /// `f = b e^B` with non-increasing `b`: `b_t <= 2 v_t`.
    FromB,
    /// Increasing f: `b_n^(d) <= b_n <= b_n^(d)/(1-b_n^(d))`.
    DiscreteIncreasing,
    /// Decreasing f: `1 - ell_t >= b_t` and `1 - ell_{t+1} <= b_t/(1+b_t)`.
    EllDecreasing,
    /// Decreasing f: `d_t <= b_t`.
    LeadDecreasing,
    /// Decreasing f: `b_n <= b_n^(d)`.
    DiscreteDecreasing,
}

impl AuditFamily {
    pub fn id(&self) -> &'static str {
        match self {
            AuditFamily::EllIncreasing => "a:ell_vs_b",
            AuditFamily::LeadIncreasing => "b:b_le_d_le_bnext",
            AuditFamily::FromB => "c:b_le_2v",
            AuditFamily::DiscreteIncreasing => "d:discrete_b",
            AuditFamily::EllDecreasing => "a_dec:ell_vs_b",
            AuditFamily::LeadDecreasing => "b_dec:d_le_b",
            AuditFamily::DiscreteDecreasing => "d_dec:discrete_b",
        }
    }

    pub const ALL: [AuditFamily; 7] = [
        AuditFamily::EllIncreasing,
        AuditFamily::LeadIncreasing,
        AuditFamily::FromB,
        AuditFamily::DiscreteIncreasing,
        AuditFamily::EllDecreasing,
        AuditFamily::LeadDecreasing,
        AuditFamily::DiscreteDecreasing,
    ];

    fn applies(&self, f: &IntegrandSpec) -> bool {
        let m = f.monotone();
        match self {
            AuditFamily::EllIncreasing | AuditFamily::LeadIncreasing | AuditFamily::DiscreteIncreasing => {
                m.is_increasing()
            }
            AuditFamily::EllDecreasing | AuditFamily::LeadDecreasing | AuditFamily::DiscreteDecreasing => {
                m.is_decreasing()
            }
            AuditFamily::FromB => matches!(f.kind(), Kind::FromB(b) if b.is_decreasing()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct AuditEntry {
    pub family: AuditFamily,
    pub id: &'static str,
    /// Largest signed violation `rhs - lhs` of a `lhs >= rhs` check;
    /// nonpositive when every point satisfies the family.
    pub max_violation: f64,
    pub points: usize,
    /// Points where a bound is vacuous (e.g. `b_{t+1} >= 1`).
    pub vacuous: usize,
}

struct Acc {
    worst: f64,
    points: usize,
    vacuous: usize,
}

impl Acc {
    fn new() -> Self {
        Acc { worst: f64::NEG_INFINITY, points: 0, vacuous: 0 }
    }

    /// Records `lhs >= rhs`.
    fn ge(&mut self, lhs: f64, rhs: f64) {
        self.worst = self.worst.max(rhs - lhs);
    }
}

/// Runs every family whose precondition `f` meets. Non-monotone integrands
/// that are not of the `b e^B` form are a usage error.
pub fn inequality_audit(f: &IntegrandSpec, ts: &[f64]) -> Result<Vec<AuditEntry>> {
    let fams: Vec<AuditFamily> = AuditFamily::ALL.into_iter().filter(|a| a.applies(f)).collect();
    if fams.is_empty() {
        return Err(Error::usage(format!("{f} meets the precondition of no audit family")));
    }
    fams.into_iter().map(|fam| audit_family(f, ts, fam)).collect()
}

/// One family; a usage error when `f` lacks the required monotonicity or
/// form.
pub fn audit_family(f: &IntegrandSpec, ts: &[f64], fam: AuditFamily) -> Result<AuditEntry> {
    if !fam.applies(f) {
        return Err(Error::usage(format!("audit {} does not apply to {f}", fam.id())));
    }
    if ts.is_empty() || ts[0] < 1.0 || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("audit schedule must be increasing with t >= 1"));
    }
    let acc = match fam {
        AuditFamily::DiscreteIncreasing | AuditFamily::DiscreteDecreasing => discrete(f, ts, fam)?,
        _ => continuous(f, ts, fam)?,
    };
    Ok(AuditEntry { family: fam, id: fam.id(), max_violation: acc.worst, points: acc.points, vacuous: acc.vacuous })
}

fn continuous(f: &IntegrandSpec, ts: &[f64], fam: AuditFamily) -> Result<Acc> {
    let tol = DEFAULT_TOL;
    let mut acc = Acc::new();
    let (mut prev, mut ll) = (0.0, f64::NEG_INFINITY);
    for &t in ts {
        ll = log_sum_exp([ll, ln_increment(f, 1.0, prev, t, tol)?].into_iter());
        prev = t;
        let i_prev = ln_increment(f, 1.0, t - 1.0, t, tol)?;
        let i_next = ln_increment(f, 1.0, t, t + 1.0, tol)?;
        let ll_next = log_sum_exp([ll, i_next].into_iter());
        let lf = f.ln_value(t);
        let lf1 = f.ln_value(t + 1.0);
        let b = (lf - ll).exp();
        let b_next = (lf1 - ll_next).exp();
        let ome = (i_prev - ll).exp();
        let ome_next = (i_next - ll_next).exp();
        let d = (lf1 - ll).exp();
        acc.points += 1;
        match fam {
            AuditFamily::EllIncreasing => {
                acc.ge(ome_next, b / (1.0 + b));
                acc.ge(b, ome);
            }
            AuditFamily::EllDecreasing => {
                acc.ge(ome, b);
                acc.ge(b / (1.0 + b), ome_next);
            }
            AuditFamily::LeadIncreasing => {
                acc.ge(d, b);
                if b_next < 1.0 {
                    acc.ge(b_next / (1.0 - b_next), d);
                } else {
                    acc.vacuous += 1;
                }
            }
            AuditFamily::LeadDecreasing => acc.ge(b, d),
            AuditFamily::FromB => {
                let l2 = ln_increment(f, 2.0, 0.0, t, tol)?;
                let v = (l2 - 2.0 * ll).exp();
                acc.ge(2.0 * v, b);
            }
            _ => unreachable!("discrete families handled separately"),
        }
    }
    Ok(acc)
}

/// Discrete weights `w_k = f(k)`, `W_n = sum_{k<=n} w_k` and
/// `b_n^(d) = f(n)/W_n` at the integers nearest to the schedule.
fn discrete(f: &IntegrandSpec, ts: &[f64], fam: AuditFamily) -> Result<Acc> {
    let tol = DEFAULT_TOL;
    let mut ns: Vec<u64> = ts.iter().map(|t| t.round().max(1.0) as u64).collect();
    ns.dedup();
    let mut acc = Acc::new();
    let (mut k, mut lw) = (0u64, f64::NEG_INFINITY);
    let (mut prev, mut ll) = (0.0, f64::NEG_INFINITY);
    for n in ns {
        while k < n {
            k += 1;
            let lf = f.ln_value(k as f64);
            lw = if lw == f64::NEG_INFINITY {
                lf
            } else if lf == f64::NEG_INFINITY {
                lw
            } else {
                lw.max(lf) + (-(lw - lf).abs()).exp().ln_1p()
            };
        }
        let x = n as f64;
        ll = log_sum_exp([ll, ln_increment(f, 1.0, prev, x, tol)?].into_iter());
        prev = x;
        let lf = f.ln_value(x);
        let b = (lf - ll).exp();
        let bd = (lf - lw).exp();
        acc.points += 1;
        match fam {
            AuditFamily::DiscreteIncreasing => {
                acc.ge(b, bd);
                if bd < 1.0 {
                    acc.ge(bd / (1.0 - bd), b);
                } else {
                    acc.vacuous += 1;
                }
            }
            AuditFamily::DiscreteDecreasing => acc.ge(bd, b),
            _ => unreachable!(),
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::geometric_schedule;
    use crate::integrands::parse_id;

    #[test]
    fn identity_satisfies_all_families() {
        let ts: Vec<f64> = (2..=100).map(f64::from).collect();
        let rep = inequality_audit(&parse_id("power:1").unwrap(), &ts).unwrap();
        assert_eq!(rep.len(), 3);
        for e in rep {
            assert!(e.max_violation <= 1e-9, "{e:?}");
        }
    }

    #[test]
    fn constant_saturates_ell_family() {
        let ts = [5.0, 50.0];
        let e = audit_family(&parse_id("const:1").unwrap(), &ts, AuditFamily::EllIncreasing).unwrap();
        assert!(e.max_violation.abs() < 1e-15, "{e:?}");
    }

    #[test]
    fn metadata_gate() {
        let ts = geometric_schedule(2.0, 100.0, 10);
        let ex = parse_id("pure_exp").unwrap();
        assert!(matches!(audit_family(&ex, &ts, AuditFamily::FromB), Err(Error::Usage(_))));
        let ramps = parse_id("fstar:power:1@arith:2:1").unwrap();
        assert!(matches!(inequality_audit(&ramps, &ts), Err(Error::Usage(_))));
        let e = audit_family(&parse_id("from_b:sqrt").unwrap(), &ts, AuditFamily::FromB).unwrap();
        assert!(e.max_violation <= 1e-9, "{e:?}");
    }
}
