//! Periodic bases, cut schedules and step sequences: the building blocks of
//! the non-monotone integrands.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// A nonnegative base function on one period `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeriodicBase {
    /// `c` on the whole period.
    Const(f64),
    /// `y^(-beta)`, unbounded at the start of every period.
    Spike(f64),
    /// `|sin(pi y)|`.
    AbsSin,
    /// Indicator of `[0, duty)`.
    Square(f64),
}

impl PeriodicBase {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PeriodicBase::Const(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::domain(format!("periodic base is identically {c}; need a nonzero base")))
            }
            PeriodicBase::Spike(beta) if !(beta > 0.0 && beta < 1.0) => {
                Err(Error::domain(format!("spike exponent {beta} must lie in (0, 1) for an integrable base")))
            }
            PeriodicBase::Square(d) if !(d > 0.0 && d <= 1.0) => {
                Err(Error::domain(format!("square-wave duty {d} must lie in (0, 1]")))
            }
            _ => Ok(()),
        }
    }

    /// Value at the in-period position `y` in `[0, 1)`.
    #[inline]
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            PeriodicBase::Const(c) => c,
            PeriodicBase::Spike(beta) => {
                if y <= 0.0 {
                    f64::INFINITY
                } else {
                    y.powf(-beta)
                }
            }
            PeriodicBase::AbsSin => (PI * y).sin().abs(),
            PeriodicBase::Square(d) => {
                if y < d {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `int_0^y g^p` for `y` in `[0, 1]`, when known in closed form.
    /// Returns `+inf` when `g^p` is not integrable near 0.
    pub fn primitive(&self, p: f64, y: f64) -> Option<f64> {
        let y = y.clamp(0.0, 1.0);
        match *self {
            PeriodicBase::Const(c) => Some(c.powf(p) * y),
            PeriodicBase::Spike(beta) => {
                let e = 1.0 - p * beta;
                if e <= 0.0 {
                    Some(f64::INFINITY)
                } else {
                    Some(y.powf(e) / e)
                }
            }
            PeriodicBase::AbsSin => {
                if p == 1.0 {
                    Some((1.0 - (PI * y).cos()) / PI)
                } else if p == 2.0 {
                    Some(y / 2.0 - (2.0 * PI * y).sin() / (4.0 * PI))
                } else {
                    None
                }
            }
            PeriodicBase::Square(d) => Some(y.min(d)),
        }
    }

    /// `int_{y0}^{y1} g^p` for `0 <= y0 <= y1 <= 1`; finite away from a
    /// non-integrable spike at 0.
    pub fn segment(&self, p: f64, y0: f64, y1: f64) -> Option<f64> {
        if let PeriodicBase::Spike(beta) = *self {
            let e = 1.0 - p * beta;
            if e <= 0.0 {
                return Some(if y0 <= 0.0 {
                    f64::INFINITY
                } else if e == 0.0 {
                    (y1 / y0).ln()
                } else {
                    (y1.powf(e) - y0.powf(e)) / e
                });
            }
        }
        Some(self.primitive(p, y1)? - self.primitive(p, y0)?)
    }

    /// `int_0^1 g^p`.
    pub fn norm_pow(&self, p: f64) -> Option<f64> {
        self.primitive(p, 1.0)
    }

    pub fn ess_sup(&self) -> f64 {
        match *self {
            PeriodicBase::Const(c) => c,
            PeriodicBase::Spike(_) => f64::INFINITY,
            PeriodicBase::AbsSin | PeriodicBase::Square(_) => 1.0,
        }
    }

    pub fn is_square_integrable(&self) -> bool {
        self.norm_pow(2.0).is_some_and(f64::is_finite)
    }

    /// Lebesgue measure of `{y in [0,1) : g(y) >= r}`.
    pub fn measure_at_least(&self, r: f64) -> f64 {
        match *self {
            PeriodicBase::Const(c) => {
                if c >= r {
                    1.0
                } else {
                    0.0
                }
            }
            PeriodicBase::Spike(beta) => {
                if r <= 0.0 {
                    1.0
                } else {
                    r.powf(-1.0 / beta).min(1.0)
                }
            }
            PeriodicBase::AbsSin => {
                if r <= 0.0 {
                    1.0
                } else if r > 1.0 {
                    0.0
                } else {
                    1.0 - 2.0 * r.asin() / PI
                }
            }
            PeriodicBase::Square(d) => {
                if r <= 0.0 {
                    1.0
                } else if r <= 1.0 {
                    d
                } else {
                    0.0
                }
            }
        }
    }

    /// The base is singular at the start of every period.
    pub fn has_spike(&self) -> bool {
        matches!(self, PeriodicBase::Spike(_))
    }

    /// Offset of a jump strictly inside the period.
    pub fn interior_jump(&self) -> Option<f64> {
        match self {
            PeriodicBase::Square(d) if *d < 1.0 => Some(*d),
            _ => None,
        }
    }
}

/// Interlaced cut points `0 < s_1 < t_1 < s_2 < t_2 < ...`.
#[derive(Debug, Clone, PartialEq)]
pub enum CutSchedule {
    /// `s_k = period * k`, `t_k = s_k + length`, `k >= 1`.
    Arithmetic {
        period: f64,
        length: f64,
    },
    Explicit {
        s: Vec<f64>,
        t: Vec<f64>,
    },
}

impl CutSchedule {
    pub fn arithmetic(period: f64, length: f64) -> Result<Self> {
        let sched = CutSchedule::Arithmetic { period, length };
        sched.validate()?;
        Ok(sched)
    }

    pub fn explicit(s: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        let sched = CutSchedule::Explicit { s, t };
        sched.validate()?;
        Ok(sched)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CutSchedule::Arithmetic { period, length } => {
                if !(period.is_finite() && *length > 0.0 && length < period) {
                    return Err(Error::domain(format!(
                        "arithmetic cut schedule needs 0 < length < period, got length {length}, period {period}"
                    )));
                }
            }
            CutSchedule::Explicit { s, t } => {
                if s.is_empty() || s.len() != t.len() {
                    return Err(Error::domain("cut schedule needs equally many s_k and t_k"));
                }
                let mut prev = 0.0;
                for (k, (&sk, &tk)) in s.iter().zip(t).enumerate() {
                    if !(sk > prev && tk > sk && tk.is_finite()) {
                        return Err(Error::domain(format!(
                            "cut schedule not interlaced at k={k}: s={sk}, t={tk}, previous={prev}"
                        )));
                    }
                    prev = tk;
                }
            }
        }
        Ok(())
    }

    /// The piece `(s_k, t_k]` containing `x`, as `(s_k, t_k)`.
    pub fn piece_at(&self, x: f64) -> Option<(f64, f64)> {
        match self {
            CutSchedule::Arithmetic { period, length } => {
                // largest k >= 1 with s_k < x
                let k = ((x / period).ceil() - 1.0).max(0.0);
                if k < 1.0 {
                    return None;
                }
                let s = k * period;
                let t = s + length;
                (x > s && x <= t).then_some((s, t))
            }
            CutSchedule::Explicit { s, t } => {
                let i = s.partition_point(|&sk| sk < x);
                if i == 0 {
                    return None;
                }
                (x <= t[i - 1]).then_some((s[i - 1], t[i - 1]))
            }
        }
    }

    /// Visits the portions `(s_k, min(t_k, x)]` of every piece starting
    /// before `x`, passing `(s_k, covered length)`. Arithmetic schedules
    /// report complete pieces in one call with a multiplicity.
    pub fn for_each_piece_upto(&self, x: f64, mut visit: impl FnMut(f64, f64, f64)) {
        match self {
            CutSchedule::Arithmetic { period, length } => {
                if x <= *period {
                    return;
                }
                let full = ((x - length) / period).floor().max(0.0);
                if full >= 1.0 {
                    visit(*period, *length, full);
                }
                let s_next = (full + 1.0) * period;
                if x > s_next {
                    visit(s_next, (x - s_next).min(*length), 1.0);
                }
            }
            CutSchedule::Explicit { s, t } => {
                for (&sk, &tk) in s.iter().zip(t) {
                    if sk >= x {
                        break;
                    }
                    visit(sk, tk.min(x) - sk, 1.0);
                }
            }
        }
    }

    /// Cut points inside `(0, x)`, for quadrature breakpoints.
    pub fn nodes_upto(&self, x: f64, limit: usize) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            CutSchedule::Arithmetic { period, length } => {
                let mut k = 1.0;
                while k * period < x && out.len() < limit {
                    out.push(k * period);
                    if k * period + length < x {
                        out.push(k * period + length);
                    }
                    k += 1.0;
                }
            }
            CutSchedule::Explicit { s, t } => {
                for (&sk, &tk) in s.iter().zip(t) {
                    if sk >= x || out.len() >= limit {
                        break;
                    }
                    out.push(sk);
                    if tk < x {
                        out.push(tk);
                    }
                }
            }
        }
        out
    }
}

/// `g = sum_k a_k 1_(s_k, t_k]` with finitely many pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSequence {
    pub a: Vec<f64>,
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    /// `G(t_k) = sum_{j<=k} a_j m_j`.
    cum: Vec<f64>,
}

impl StepSequence {
    pub fn new(a: Vec<f64>, s: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        CutSchedule::explicit(s.clone(), t.clone())?;
        if a.len() != s.len() || a.iter().any(|&ak| !(ak > 0.0 && ak.is_finite())) {
            return Err(Error::domain("step heights must be positive and match the schedule"));
        }
        let mut cum = Vec::with_capacity(a.len());
        let mut acc = 0.0;
        for k in 0..a.len() {
            acc += a[k] * (t[k] - s[k]);
            cum.push(acc);
        }
        Ok(StepSequence { a, s, t, cum })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// Index of the last piece with `s_k < x`.
    fn last_started(&self, x: f64) -> Option<usize> {
        let i = self.s.partition_point(|&sk| sk < x);
        i.checked_sub(1)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self.last_started(x) {
            Some(k) if x <= self.t[k] => self.a[k],
            _ => 0.0,
        }
    }

    /// `G(x) = int_0^x g`.
    pub fn cumulative(&self, x: f64) -> f64 {
        match self.last_started(x) {
            None => 0.0,
            Some(k) => {
                let before = if k == 0 { 0.0 } else { self.cum[k - 1] };
                before + self.a[k] * (x.min(self.t[k]) - self.s[k])
            }
        }
    }

    /// `int_0^x g^p`.
    pub fn power_integral(&self, p: f64, x: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.a.len() {
            if self.s[k] >= x {
                break;
            }
            acc += self.a[k].powf(p) * (x.min(self.t[k]) - self.s[k]);
        }
        acc
    }

    pub fn nodes_upto(&self, x: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for k in 0..self.a.len() {
            if self.s[k] >= x {
                break;
            }
            out.push(self.s[k]);
            if self.t[k] < x {
                out.push(self.t[k]);
            }
        }
        out
    }
}
