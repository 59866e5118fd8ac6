//! String identifiers for catalog integrands.
//!
//! Grammar (parameters are decimal numbers or fractions `p/q`):
//!
//! ```text
//! const:c  power:a  exp_log_power:a  exp_power:a  exp_over_logpower:a
//! exp_over_iterlog:m  poly_times_exp:a  pure_exp
//! bounded:{inv_log,recip,exp_decay}
//! periodic:{spike:beta,abs_sin,square:duty,const:c}
//! from_b:{const:c,recip,sqrt}  counterexample
//! fstar:<inner>@arith:<period>:<length>
//! quasi:<amplitude>@<factor>[@<level>]
//! scaled:<c>@<inner>   sum:<a>+<b>[+...]
//! ```

use super::construct::{
    make_counterexample_b_not_v, make_from_b, make_fstar, make_periodic, make_quasiperiodic_with_threshold,
    IntegrabilityClass, QUASI_DEFAULT_THRESHOLD,
};
use super::pieces::{CutSchedule, PeriodicBase};
use super::{BSpec, BoundedKind, IntegrandSpec, Kind};
use crate::error::{Error, Result};
use std::fmt;

pub const CATALOG_VERSION: &str = "1";

#[derive(Debug, Clone, serde::Serialize)]
pub struct CatalogEntry {
    pub id: &'static str,
    pub group: &'static str,
    pub description: &'static str,
}

/// Representative members of every family, in listing order.
pub fn catalog_entries() -> Vec<CatalogEntry> {
    let e = |id, group, description| CatalogEntry { id, group, description };
    vec![
        e("const:1", "table", "f = 1"),
        e("power:2", "table", "x^2"),
        e("exp_log_power:0.5", "table", "exp(ln^0.5(x+e))"),
        e("exp_log_power:2", "table", "exp(ln^2(x+e))"),
        e("exp_power:0.5", "table", "exp(x^0.5)"),
        e("exp_over_logpower:1", "table", "exp(x/ln(x+e))"),
        e("exp_over_iterlog:2", "table", "exp(x/ln ln(x+e^e))"),
        e("poly_times_exp:1", "table", "(x+e)^-1 e^x"),
        e("pure_exp", "table", "e^x"),
        e("bounded:inv_log", "bounded", "1/ln(x+e)"),
        e("bounded:recip", "bounded", "1/(1+x)"),
        e("bounded:exp_decay", "bounded", "e^-x (integrable)"),
        e("periodic:spike:1/3", "periodic", "period-1 extension of y^(-1/3), square integrable"),
        e("periodic:spike:2/3", "periodic", "period-1 extension of y^(-2/3), integrable only"),
        e("periodic:abs_sin", "periodic", "|sin(pi x)|"),
        e("periodic:square:0.5", "periodic", "square wave, duty 1/2"),
        e("fstar:const:1@arith:2:1", "construction", "indicator of (2k, 2k+1]"),
        e("fstar:power:1@arith:2:1", "construction", "unit ramps on (2k, 2k+1]"),
        e("from_b:const:1", "construction", "b = 1, f = e^x"),
        e("from_b:recip", "construction", "b = 1/(1+x), f = 1"),
        e("from_b:sqrt", "construction", "b = 1/(2 sqrt(1+x))"),
        e("counterexample", "construction", "step b in V but not in B"),
        e("quasi:power:1@abs_sin", "construction", "x |sin(pi x)|"),
        e("quasi:power:2@square:0.5@1", "construction", "x^2 times a square wave"),
        e("scaled:3@power:1", "combinator", "3x"),
        e("sum:power:1+power:2", "combinator", "x + x^2"),
    ]
}

/// The table rows checked against their claimed `b` and `v` rates.
pub const TABLE_ROWS: [&str; 8] = [
    "power:2",
    "exp_log_power:0.5",
    "exp_log_power:2",
    "exp_power:0.5",
    "exp_over_logpower:1",
    "exp_over_iterlog:2",
    "poly_times_exp:1",
    "pure_exp",
];

fn bad(id: &str, why: impl fmt::Display) -> Error {
    Error::Parse(format!("integrand id '{id}': {why}"))
}

fn number(id: &str, s: &str) -> Result<f64> {
    let v = if let Some((p, q)) = s.split_once('/') {
        let p: f64 = p.trim().parse().map_err(|_| bad(id, format!("bad number '{s}'")))?;
        let q: f64 = q.trim().parse().map_err(|_| bad(id, format!("bad number '{s}'")))?;
        p / q
    } else {
        s.trim().parse().map_err(|_| bad(id, format!("bad number '{s}'")))?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad(id, format!("non-finite parameter '{s}'")))
    }
}

fn parse_periodic_base(id: &str, s: &str) -> Result<PeriodicBase> {
    let (name, arg) = s.split_once(':').unwrap_or((s, ""));
    Ok(match name {
        "spike" => PeriodicBase::Spike(number(id, arg)?),
        "abs_sin" => PeriodicBase::AbsSin,
        "square" => PeriodicBase::Square(number(id, arg)?),
        "const" => PeriodicBase::Const(number(id, arg)?),
        _ => return Err(bad(id, format!("unknown periodic base '{s}'"))),
    })
}

/// Parses a catalog identifier. Unknown names and malformed parameters are
/// parse errors; parameters outside a family's domain are domain errors.
pub fn parse_id(id: &str) -> Result<IntegrandSpec> {
    parse_inner(id.trim(), id)
}

fn parse_inner(s: &str, full: &str) -> Result<IntegrandSpec> {
    if let Some(rest) = s.strip_prefix("sum:") {
        let parts = rest.split('+').map(|p| parse_inner(p, full)).collect::<Result<Vec<_>>>()?;
        return IntegrandSpec::sum(parts);
    }
    if let Some(rest) = s.strip_prefix("fstar:") {
        let (inner, sched) =
            rest.rsplit_once('@').ok_or_else(|| bad(full, "fstar needs '@arith:<period>:<length>'"))?;
        let mut it = sched.split(':');
        if it.next() != Some("arith") {
            return Err(bad(full, "only arithmetic cut schedules have identifiers"));
        }
        let period = number(full, it.next().unwrap_or(""))?;
        let length = number(full, it.next().unwrap_or(""))?;
        return make_fstar(parse_inner(inner, full)?, CutSchedule::arithmetic(period, length)?);
    }
    if let Some(rest) = s.strip_prefix("quasi:") {
        let segs: Vec<&str> = rest.split('@').collect();
        if segs.len() < 2 {
            return Err(bad(full, "quasi needs '<amplitude>@<factor>'"));
        }
        let (amp_segs, factor, level) = match number(full, segs[segs.len() - 1]) {
            Ok(r) if segs.len() >= 3 => (&segs[..segs.len() - 2], segs[segs.len() - 2], r),
            _ => (&segs[..segs.len() - 1], segs[segs.len() - 1], QUASI_DEFAULT_THRESHOLD),
        };
        let amp = parse_inner(&amp_segs.join("@"), full)?;
        return make_quasiperiodic_with_threshold(amp, parse_periodic_base(full, factor)?, level);
    }
    if let Some(rest) = s.strip_prefix("scaled:") {
        let (c, inner) = rest.split_once('@').ok_or_else(|| bad(full, "scaled needs '<c>@<inner>'"))?;
        return IntegrandSpec::scaled(number(full, c)?, parse_inner(inner, full)?);
    }

    let (name, arg) = s.split_once(':').unwrap_or((s, ""));
    let need = |what: &str| -> Result<f64> {
        if arg.is_empty() {
            Err(bad(full, format!("'{name}' needs a {what}")))
        } else {
            number(full, arg)
        }
    };
    match name {
        "const" => IntegrandSpec::constant(need("value")?),
        "power" => IntegrandSpec::power(need("exponent")?),
        "exp_log_power" => IntegrandSpec::exp_log_power(need("exponent")?),
        "exp_power" => IntegrandSpec::exp_power(need("exponent")?),
        "exp_over_logpower" => IntegrandSpec::exp_over_logpower(need("exponent")?),
        "exp_over_iterlog" => {
            let m = need("depth")?;
            if m.fract() != 0.0 || m < 1.0 {
                return Err(bad(full, "iterated-log depth must be a positive integer"));
            }
            IntegrandSpec::exp_over_iterlog(m as u32)
        }
        "poly_times_exp" => IntegrandSpec::poly_times_exp(need("exponent")?),
        "pure_exp" if arg.is_empty() => Ok(IntegrandSpec::pure_exp()),
        "counterexample" if arg.is_empty() => Ok(make_counterexample_b_not_v()),
        "bounded" => Ok(IntegrandSpec::bounded(match arg {
            "inv_log" => BoundedKind::InvLog,
            "recip" => BoundedKind::Recip,
            "exp_decay" => BoundedKind::ExpDecay,
            _ => return Err(bad(full, format!("unknown bounded family '{arg}'"))),
        })),
        "periodic" => {
            let base = parse_periodic_base(full, arg)?;
            base.validate()?;
            let class = if base.is_square_integrable() { IntegrabilityClass::L2 } else { IntegrabilityClass::L1Only };
            make_periodic(base, class)
        }
        "from_b" => {
            let (bname, barg) = arg.split_once(':').unwrap_or((arg, ""));
            let b = match bname {
                "const" => BSpec::Const(number(full, barg)?),
                "recip" => BSpec::Recip,
                "sqrt" => BSpec::HalfInvSqrt,
                _ => return Err(bad(full, format!("unknown b family '{arg}'"))),
            };
            make_from_b(b)
        }
        _ => Err(bad(full, format!("unknown integrand '{name}'"))),
    }
}

impl fmt::Display for PeriodicBase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeriodicBase::Const(c) => write!(f, "const:{c}"),
            PeriodicBase::Spike(b) => write!(f, "spike:{b}"),
            PeriodicBase::AbsSin => write!(f, "abs_sin"),
            PeriodicBase::Square(d) => write!(f, "square:{d}"),
        }
    }
}

impl fmt::Display for IntegrandSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind() {
            Kind::Const(c) => write!(f, "const:{c}"),
            Kind::Power(a) => write!(f, "power:{a}"),
            Kind::ExpLogPower(a) => write!(f, "exp_log_power:{a}"),
            Kind::ExpPower(a) => write!(f, "exp_power:{a}"),
            Kind::ExpOverLogPower(a) => write!(f, "exp_over_logpower:{a}"),
            Kind::ExpOverIterLog(m) => write!(f, "exp_over_iterlog:{m}"),
            Kind::PolyTimesExp(a) => write!(f, "poly_times_exp:{a}"),
            Kind::PureExp => write!(f, "pure_exp"),
            Kind::Bounded(BoundedKind::InvLog) => write!(f, "bounded:inv_log"),
            Kind::Bounded(BoundedKind::Recip) => write!(f, "bounded:recip"),
            Kind::Bounded(BoundedKind::ExpDecay) => write!(f, "bounded:exp_decay"),
            Kind::Periodic(base) => write!(f, "periodic:{base}"),
            Kind::FStar { inner, schedule } => match schedule {
                CutSchedule::Arithmetic { period, length } => {
                    write!(f, "fstar:{inner}@arith:{period}:{length}")
                }
                CutSchedule::Explicit { s, .. } => write!(f, "fstar:{inner}@explicit[{}]", s.len()),
            },
            Kind::QuasiPeriodic { amplitude, factor, partition } => {
                write!(f, "quasi:{amplitude}@{factor}")?;
                if partition.r != QUASI_DEFAULT_THRESHOLD {
                    write!(f, "@{}", partition.r)?;
                }
                Ok(())
            }
            Kind::FromB(BSpec::Const(c)) => write!(f, "from_b:const:{c}"),
            Kind::FromB(BSpec::Recip) => write!(f, "from_b:recip"),
            Kind::FromB(BSpec::HalfInvSqrt) => write!(f, "from_b:sqrt"),
            Kind::FromB(BSpec::Step { .. }) => write!(f, "counterexample"),
            Kind::StepSequence(seq) => write!(f, "step_sequence[{}]", seq.len()),
            Kind::Sum(parts) => {
                write!(f, "sum:")?;
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            Kind::Scaled(c, inner) => write!(f, "scaled:{c}@{inner}"),
        }
    }
}
