use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `y = C t^a`
    Power,
    /// `y = C t^a (ln t)^beta`
    PowerTimesLogPower,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FitResult {
    pub exponent: f64,
    /// Exponent of `ln t`; zero for the plain power model.
    pub log_exponent: f64,
    pub constant: f64,
    /// Max absolute deviation of the fit in log space.
    pub residual: f64,
}

pub(crate) fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Least squares of `ln y` on `ln t` (and `ln ln t`). Needs at least eight
/// points spanning two decades, all with `t > 1` and `y > 0`.
pub fn fit_rate(t: &[f64], y: &[f64], model: FitModel) -> Result<FitResult> {
    if t.len() != y.len() {
        return Err(Error::domain("t and y must have equal length"));
    }
    if t.len() < 8 {
        return Err(Error::domain(format!("rate fit needs at least 8 points, got {}", t.len())));
    }
    let (lo, hi) = t.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
    if !(lo > 1.0 && hi / lo >= 100.0 * (1.0 - 1e-12)) {
        return Err(Error::domain("rate fit needs t > 1 spanning at least two decades"));
    }
    if let Some(bad) = y.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("rate fit needs positive finite values, got {bad}")));
    }
    let lt: Vec<f64> = t.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|x| x.ln()).collect();
    let n = t.len() as f64;
    let (a, beta, c) = match model {
        FitModel::Power => {
            let a = ols_slope(&lt, &ly);
            let c = (ly.iter().sum::<f64>() - a * lt.iter().sum::<f64>()) / n;
            (a, 0.0, c)
        }
        FitModel::PowerTimesLogPower => {
            let llt: Vec<f64> = lt.iter().map(|x| x.ln()).collect();
            let m = |v: &[f64]| v.iter().sum::<f64>() / n;
            let (m1, m2, my) = (m(&lt), m(&llt), m(&ly));
            let mut s11 = 0.0;
            let mut s12 = 0.0;
            let mut s22 = 0.0;
            let mut s1y = 0.0;
            let mut s2y = 0.0;
            for i in 0..t.len() {
                let (u, v, w) = (lt[i] - m1, llt[i] - m2, ly[i] - my);
                s11 += u * u;
                s12 += u * v;
                s22 += v * v;
                s1y += u * w;
                s2y += v * w;
            }
            let det = s11 * s22 - s12 * s12;
            if det.abs() <= 1e-14 * s11 * s22 {
                return Err(Error::domain("ln t and ln ln t are collinear on this schedule"));
            }
            let a = (s22 * s1y - s12 * s2y) / det;
            let beta = (s11 * s2y - s12 * s1y) / det;
            (a, beta, my - a * m1 - beta * m2)
        }
    };
    let residual = lt
        .iter()
        .zip(&ly)
        .map(|(x, yv)| {
            let pred = c + a * x + if beta != 0.0 { beta * x.ln() } else { 0.0 };
            (yv - pred).abs()
        })
        .fold(0.0, f64::max);
    Ok(FitResult { exponent: a, log_exponent: beta, constant: c.exp(), residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::geometric_schedule;

    #[test]
    fn exact_power_law() {
        let t = geometric_schedule(10.0, 1e4, 12);
        let y: Vec<f64> = t.iter().map(|x| 3.0 / x).collect();
        let r = fit_rate(&t, &y, FitModel::Power).unwrap();
        assert!((r.exponent + 1.0).abs() < 1e-12);
        assert!((r.constant - 3.0).abs() < 1e-11);
        assert!(r.residual < 1e-12);
    }

    #[test]
    fn two_regressor_recovers_log_exponent() {
        let t = geometric_schedule(1e2, 1e6, 32);
        let y: Vec<f64> = t.iter().map(|x| 2.0 * x.powf(-1.0) * x.ln().powf(-0.5)).collect();
        let r = fit_rate(&t, &y, FitModel::PowerTimesLogPower).unwrap();
        assert!((r.exponent + 1.0).abs() < 1e-9 && (r.log_exponent + 0.5).abs() < 1e-8, "{r:?}");
    }

    #[test]
    fn preconditions() {
        let t = geometric_schedule(10.0, 100.0, 12);
        let y = vec![1.0; 12];
        assert!(fit_rate(&t[..7], &y[..7], FitModel::Power).is_err());
        let t2 = geometric_schedule(10.0, 50.0, 12);
        assert!(fit_rate(&t2, &y, FitModel::Power).is_err());
        let mut yneg = y.clone();
        yneg[3] = -1.0;
        assert!(matches!(fit_rate(&t, &yneg, FitModel::Power), Err(Error::Domain(_))));
    }
}
