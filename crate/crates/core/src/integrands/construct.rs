use super::pieces::{CutSchedule, PeriodicBase, StepSequence};
use super::{BSpec, IntegrandSpec, Kind, QuasiPartition};
use crate::error::{Error, Result};

/// Declared integrability of a periodic base on one period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum IntegrabilityClass {
    L2,
    L1Only,
}

/// `f*(x) = sum_k f(x - s_k) 1_(s_k, t_k](x)`.
pub fn make_fstar(inner: IntegrandSpec, schedule: CutSchedule) -> Result<IntegrandSpec> {
    schedule.validate()?;
    Ok(IntegrandSpec::from_kind(Kind::FStar { inner: Box::new(inner), schedule }))
}

/// Periodic extension of `base` with period 1. The declared class must
/// match the base: an `L2` base has to be square integrable and an
/// `L1Only` base must not be.
pub fn make_periodic(base: PeriodicBase, class: IntegrabilityClass) -> Result<IntegrandSpec> {
    base.validate()?;
    let l2 = base.is_square_integrable();
    match (class, l2) {
        (IntegrabilityClass::L2, false) => return Err(Error::domain("periodic base is not square integrable")),
        (IntegrabilityClass::L1Only, true) => {
            return Err(Error::domain("periodic base declared L1-only is square integrable"))
        }
        _ => {}
    }
    Ok(IntegrandSpec::from_kind(Kind::Periodic(base)))
}

/// `f = b e^B` with `B = int_0^x b`, so that `lambda_t f = e^{B_t} - 1`.
pub fn make_from_b(b: BSpec) -> Result<IntegrandSpec> {
    match &b {
        BSpec::Const(c) if !(*c > 0.0 && c.is_finite()) => {
            return Err(Error::domain(format!("b must be positive, got constant {c}")))
        }
        BSpec::Step { .. } => {
            return Err(Error::domain(
                "a step b is not decreasing; use make_counterexample_b_not_v for the step construction",
            ))
        }
        _ => {}
    }
    Ok(IntegrandSpec::from_kind(Kind::FromB(b)))
}

/// Number of pieces in the truncated counterexample.
pub const COUNTEREXAMPLE_PIECES: usize = 1024;

/// Step construction with `b = g/2` whose `v_t` vanishes along the right
/// ends `t_n` while `b = 1/2` on every piece indexed by a power of two.
///
/// Increments `c_k = e^{(am)_k} - e^{(am)_{k-1}}` are fixed to 1, so
/// `(am)_k = ln(k+1)`. Heights are 1 on `K = {2^j}` and `1/k^2` elsewhere;
/// lengths follow from `a_k m_k = ln(1 + 1/k)`. Pieces are separated by
/// unit blanks.
pub fn make_counterexample_b_not_v() -> IntegrandSpec {
    let n = COUNTEREXAMPLE_PIECES;
    let mut a = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut t = Vec::with_capacity(n);
    let mut x = 1.0;
    for k in 1..=n {
        let ak = if k.is_power_of_two() { 1.0 } else { 1.0 / (k as f64).powi(2) };
        let m = (1.0 / k as f64).ln_1p() / ak;
        a.push(ak);
        s.push(x);
        t.push(x + m);
        x += m + 1.0;
    }
    let seq = StepSequence::new(a, s, t).expect("construction is interlaced");
    IntegrandSpec::from_kind(Kind::FromB(BSpec::Step { seq, scale: 0.5 }))
}

/// Default level of the quasi-periodic partition.
pub const QUASI_DEFAULT_THRESHOLD: f64 = 0.5;

/// `amplitude * g` for an increasing amplitude and a periodic factor with
/// essential supremum 1.
pub fn make_quasiperiodic(amplitude: IntegrandSpec, g: PeriodicBase) -> Result<IntegrandSpec> {
    make_quasiperiodic_with_threshold(amplitude, g, QUASI_DEFAULT_THRESHOLD)
}

pub fn make_quasiperiodic_with_threshold(amplitude: IntegrandSpec, g: PeriodicBase, r: f64) -> Result<IntegrandSpec> {
    g.validate()?;
    if !amplitude.monotone().is_increasing() {
        return Err(Error::domain("quasi-periodic amplitude must be increasing"));
    }
    let sup = g.ess_sup();
    if (sup - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "periodic factor must have essential supremum 1 (got {sup}); rescale it first"
        )));
    }
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::domain(format!("partition level r = {r} must lie in (0, 1]")));
    }
    let rho = g.measure_at_least(r);
    if rho <= 0.0 {
        return Err(Error::domain(format!("level set {{g >= {r}}} is null")));
    }
    let d = (((1.0 - rho) / rho) - 1e-12).ceil().max(0.0) as u32;
    let partition = QuasiPartition { r, rho, d };
    Ok(IntegrandSpec::from_kind(Kind::QuasiPeriodic { amplitude: Box::new(amplitude), factor: g, partition }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_b_examples() {
        let f = make_from_b(BSpec::Const(0.5)).unwrap();
        let lam = f.integral_closed(1.0, 0.0, 4.0).unwrap();
        assert!((lam - 2f64.exp_m1()).abs() < 1e-12);

        let one = make_from_b(BSpec::Recip).unwrap();
        assert_eq!(one.eval(7.3).unwrap(), 1.0);
        assert_eq!(one.integral_closed(1.0, 0.0, 9.0).unwrap(), 9.0);

        let root = make_from_b(BSpec::HalfInvSqrt).unwrap();
        let t: f64 = 99.0;
        let lam = root.integral_closed(1.0, 0.0, t).unwrap();
        assert!((lam - ((1.0 + t).sqrt() - 1.0).exp_m1()).abs() < 1e-9 * lam);
    }

    #[test]
    fn periodic_class_checked() {
        assert!(make_periodic(PeriodicBase::Spike(1.0 / 3.0), IntegrabilityClass::L2).is_ok());
        assert!(make_periodic(PeriodicBase::Spike(2.0 / 3.0), IntegrabilityClass::L2).is_err());
        assert!(make_periodic(PeriodicBase::Spike(2.0 / 3.0), IntegrabilityClass::L1Only).is_ok());
        assert!(make_periodic(PeriodicBase::Const(0.0), IntegrabilityClass::L2).is_err());
        let one = make_periodic(PeriodicBase::Const(1.0), IntegrabilityClass::L2).unwrap();
        assert_eq!(one.eval(12.7).unwrap(), 1.0);
    }

    #[test]
    fn counterexample_shape() {
        let f = make_counterexample_b_not_v();
        let Kind::FromB(BSpec::Step { seq, .. }) = f.kind() else { panic!() };
        // (am)_k = ln(k + 1)
        let n = seq.len();
        let g_end = seq.cumulative(seq.t[n - 1]);
        assert!((g_end - ((n + 1) as f64).ln()).abs() < 1e-10);
        // b = 1/2 inside every piece indexed by a power of two
        for j in 0..=10 {
            let k = 1usize << j;
            let mid = 0.5 * (seq.s[k - 1] + seq.t[k - 1]);
            assert_eq!(0.5 * seq.eval(mid), 0.5);
        }
    }

    #[test]
    fn quasi_partition() {
        let amp = IntegrandSpec::power(1.0).unwrap();
        let f = make_quasiperiodic(amp.clone(), PeriodicBase::AbsSin).unwrap();
        let Kind::QuasiPeriodic { partition, .. } = f.kind() else { panic!() };
        assert!((partition.rho - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(partition.d, 1);
        let sq = make_quasiperiodic_with_threshold(IntegrandSpec::power(2.0).unwrap(), PeriodicBase::Square(0.5), 1.0)
            .unwrap();
        let Kind::QuasiPeriodic { partition, .. } = sq.kind() else { panic!() };
        assert_eq!(partition.d, 1);
        assert_eq!(partition.comparison_constant(), 2.0);
        assert!(make_quasiperiodic(amp, PeriodicBase::Const(2.0)).is_err());
        let dec = IntegrandSpec::bounded(super::super::BoundedKind::Recip);
        assert!(make_quasiperiodic(dec, PeriodicBase::AbsSin).is_err());
    }
}
