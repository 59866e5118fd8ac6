//! Run configuration files and the `--t` range syntax.
//!
//! ```toml
//! schema_version = 1
//! seed = 42
//!
//! [simulate]
//! integrand = "const:1"
//! mode = "wlln"
//! t_schedule = [10.0, 100.0, 1000.0]
//! replicates = 10000
//!
//! [diagnose]
//! integrand = "power:2"
//! t = "10:1e6:geom32"
//! ```

use crate::diagnostics::geometric_schedule;
use crate::error::{Error, Result};
use crate::montecarlo::ExperimentConfig;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_DIAGNOSE_RANGE: &str = "10:1e6:geom32";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub integrand: Option<String>,
    pub t: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub simulate: Option<ExperimentConfig>,
    pub diagnose: Option<DiagnoseConfig>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "config schema_version {} is not supported (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

fn number(s: &str) -> Result<f64> {
    let x: f64 = s.trim().parse().map_err(|_| Error::Parse(format!("not a number: {s:?}")))?;
    if !x.is_finite() {
        return Err(Error::Parse(format!("not a finite number: {s:?}")));
    }
    Ok(x)
}

/// Parses `a:b:geomN`, `a:b:linN`, a comma list or a single value.
pub fn parse_t_range(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let ts = match parts.as_slice() {
        [a, b, kind] => {
            let (a, b) = (number(a)?, number(b)?);
            let (lin, n) = if let Some(n) = kind.strip_prefix("geom") {
                (false, n)
            } else if let Some(n) = kind.strip_prefix("lin") {
                (true, n)
            } else {
                return Err(Error::Parse(format!("range kind must be geomN or linN, got {kind:?}")));
            };
            let n: usize = n.parse().map_err(|_| Error::Parse(format!("bad point count in {text:?}")))?;
            if n < 2 || !(a > 0.0 && b > a) {
                return Err(Error::Parse(format!("range {text:?} needs 0 < a < b and at least 2 points")));
            }
            if lin {
                (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
            } else {
                geometric_schedule(a, b, n)
            }
        }
        [_] => text.split(',').map(number).collect::<Result<Vec<_>>>()?,
        _ => return Err(Error::Parse(format!("cannot read t range {text:?}"))),
    };
    if ts.iter().any(|t| *t <= 0.0) || ts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parse(format!("t values must be positive and increasing: {text:?}")));
    }
    Ok(ts)
}

/// Comma-separated list of numbers.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(number).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::Mode;

    #[test]
    fn ranges() {
        let g = parse_t_range("10:1e6:geom32").unwrap();
        assert_eq!(g.len(), 32);
        assert!((g[0] - 10.0).abs() < 1e-12 && (g[31] - 1e6).abs() < 1e-6);
        assert_eq!(parse_t_range("1:3:lin3").unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(parse_t_range("10,100,1000").unwrap(), vec![10.0, 100.0, 1000.0]);
        assert_eq!(parse_t_range("50.5").unwrap(), vec![50.5]);
        for bad in ["", "1:2", "10:1:geom5", "1:10:log5", "1:10:geom1", "100,10", "-1", "x"] {
            assert!(matches!(parse_t_range(bad), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
schema_version = 1
seed = 7

[simulate]
integrand = "power:1"
mode = "dist-limit"
t_schedule = [15.0]
replicates = 200

[diagnose]
t = "10:1e3:geom8"
"#;
        let c = ConfigFile::parse(text).unwrap();
        let sim = c.simulate.clone().unwrap();
        assert_eq!(sim.mode, Mode::DistLimit);
        assert_eq!(sim.replicates, 200);
        assert_eq!(sim.epsilon, ExperimentConfig::default().epsilon);
        assert_eq!(c.seed, Some(7));
        let again = ConfigFile::parse(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(again, c);
        assert!(ConfigFile::parse("schema_version = 2").is_err());
        assert!(ConfigFile::parse("schema_version = 1\nbogus = 3").is_err());
    }
}
