//! Monte Carlo experiments on `R_t = Gamma_t f / lambda_t f`: tail
//! probabilities, absolute moments, tail suprema along single extended
//! paths, the Laplace transform for the exponential integrand, and the
//! coupling with discrete weighted sums of cell masses.
//!
//! Replicate `r` always uses `PathSeed::replicate(master_seed, r)`, and
//! replicates are collected in index order before any reduction, so reports
//! are bit-identical for any number of worker threads.

mod bridge;
pub mod stats;

pub use bridge::run_bridge;

use crate::diagnostics::{self, Verdict};
use crate::error::{Error, Result};
use crate::gamma::{extend_path, ln_cell_weight, sample_increments, sample_lattice_path, Grid};
use crate::integrands::{parse_id, IntegrandSpec, Kind};
use crate::quad::{integrate, QuadOptions};
use crate::rng::PathSeed;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stats::{ks_critical, ks_distance, mean_se, quantile_sorted, sorted, wilson, Z95};
use std::fmt;
use std::str::FromStr;

/// Largest simulation grid accepted before an experiment is refused.
pub const MAX_CELLS: usize = 5_000_000;

/// How often a too-wide integral bracket may halve the grid step.
const MAX_REFINE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Wlln,
    Lp,
    Slln,
    DistLimit,
    Bridge,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Wlln => "wlln",
            Mode::Lp => "lp",
            Mode::Slln => "slln",
            Mode::DistLimit => "dist-limit",
            Mode::Bridge => "bridge",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "wlln" => Mode::Wlln,
            "lp" => Mode::Lp,
            "slln" => Mode::Slln,
            "dist-limit" | "dist_limit" => Mode::DistLimit,
            "bridge" => Mode::Bridge,
            _ => return Err(Error::Parse(format!("unknown mode `{s}`"))),
        })
    }
}

/// Weights of the discrete sums in the bridge experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BridgeWeights {
    /// `w_k = int over cell k of f`.
    CellMass,
    /// `w_k = f` at the right end of cell `k`.
    Right,
    /// `w_k = f` at the left end of cell `k`.
    Left,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub integrand: String,
    pub mode: Mode,
    pub t_schedule: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    /// Tail threshold in `P(|R_t - 1| > epsilon)`.
    pub epsilon: f64,
    pub p_list: Vec<f64>,
    /// Laplace arguments for the distributional limit.
    pub s_list: Vec<f64>,
    /// Simulation grid step; chosen from the horizon when absent.
    pub grid_step: Option<f64>,
    /// Geometric grading levels next to periodic spikes.
    pub spike_levels: u32,
    /// Level below which a tail probability, moment or tail-sup quantile
    /// counts as vanished.
    pub tail_threshold: f64,
    /// Largest expected relative width of the integral bracket.
    pub bracket_tol: f64,
    /// Cell length of the discrete sums in the bridge.
    pub bridge_cell: f64,
    pub bridge_weights: BridgeWeights,
    /// Quadrature tolerance for the deterministic side.
    pub tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            integrand: "const:1".into(),
            mode: Mode::Wlln,
            t_schedule: vec![10.0, 100.0, 1000.0],
            replicates: 1000,
            master_seed: 0,
            epsilon: 0.1,
            p_list: vec![2.0, 4.0],
            s_list: vec![1.0],
            grid_step: None,
            spike_levels: 20,
            tail_threshold: 0.05,
            bracket_tol: 0.1,
            bridge_cell: 1.0,
            bridge_weights: BridgeWeights::CellMass,
            tol: diagnostics::DEFAULT_TOL,
        }
    }
}

impl ExperimentConfig {
    pub fn new(mode: Mode, integrand: &str, t_schedule: &[f64]) -> Self {
        ExperimentConfig { mode, integrand: integrand.into(), t_schedule: t_schedule.to_vec(), ..Default::default() }
    }

    /// Checks the configuration and parses the integrand.
    pub fn validate(&self) -> Result<IntegrandSpec> {
        let f = parse_id(&self.integrand)?;
        let ts = &self.t_schedule;
        if ts.is_empty() {
            return Err(Error::domain("empty t schedule"));
        }
        if !(ts[0] > 0.0) || ts.windows(2).any(|w| !(w[1] > w[0])) || !ts.iter().all(|t| t.is_finite()) {
            return Err(Error::domain("t schedule must be positive, finite and strictly increasing"));
        }
        if self.replicates < 100 {
            return Err(Error::domain(format!(
                "distributional outputs need at least 100 replicates, got {}",
                self.replicates
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if let Some(p) = self.p_list.iter().find(|p| !(**p >= 1.0 && p.is_finite())) {
            return Err(Error::domain(format!("moment order {p} must be at least 1")));
        }
        if let Some(s) = self.s_list.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::domain(format!("Laplace argument {s} must be nonnegative")));
        }
        if let Some(h) = self.grid_step {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::domain(format!("grid step must be positive, got {h}")));
            }
        }
        if !(self.bridge_cell > 0.0 && self.bridge_cell.is_finite()) {
            return Err(Error::domain(format!("bridge cell must be positive, got {}", self.bridge_cell)));
        }
        if !(self.tail_threshold > 0.0 && self.bracket_tol > 0.0 && self.tol > 0.0) {
            return Err(Error::domain("thresholds and tolerances must be positive"));
        }
        Ok(f)
    }

    pub fn run(&self) -> Result<ConvergenceReport> {
        match self.mode {
            Mode::Wlln => run_wlln(self),
            Mode::Lp => run_lp(self),
            Mode::Slln => run_slln(self),
            Mode::DistLimit => run_dist_limit_exponential(self),
            Mode::Bridge => run_bridge(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub t: f64,
    pub statistic: String,
    pub value: f64,
    /// Zero for exact reference values.
    pub stderr: f64,
    /// 95% interval where one is meaningful (Wilson for proportions).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentVerdict {
    pub name: String,
    pub verdict: Verdict,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub mode: Mode,
    pub integrand: String,
    pub master_seed: u64,
    pub replicates: usize,
    pub epsilon: f64,
    pub grid_step: f64,
    pub grid_cells: usize,
    pub estimates: Vec<Estimate>,
    pub verdicts: Vec<ExperimentVerdict>,
    pub notes: Vec<String>,
}

pub const REPORT_CSV_HEADER: &str = "t,statistic,value,stderr";

impl ConvergenceReport {
    fn new(cfg: &ExperimentConfig, grid_step: f64, grid_cells: usize) -> Self {
        ConvergenceReport {
            mode: cfg.mode,
            integrand: cfg.integrand.clone(),
            master_seed: cfg.master_seed,
            replicates: cfg.replicates,
            epsilon: cfg.epsilon,
            grid_step,
            grid_cells,
            estimates: Vec::new(),
            verdicts: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Long format, one estimate per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(REPORT_CSV_HEADER);
        out.push('\n');
        for e in &self.estimates {
            out.push_str(&format!("{},{},{},{}\n", e.t, e.statistic, e.value, e.stderr));
        }
        out
    }

    pub fn get(&self, statistic: &str, t: f64) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.statistic == statistic && e.t == t)
    }

    /// `(t, value)` of every estimate named `statistic`, in schedule order.
    pub fn series(&self, statistic: &str) -> Vec<(f64, f64)> {
        self.estimates.iter().filter(|e| e.statistic == statistic).map(|e| (e.t, e.value)).collect()
    }

    pub fn verdict(&self, name: &str) -> Option<&ExperimentVerdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    fn push(&mut self, t: f64, statistic: impl Into<String>, value: f64, stderr: f64) {
        self.estimates.push(Estimate { t, statistic: statistic.into(), value, stderr, interval: None });
    }

    fn push_mean(&mut self, t: f64, statistic: impl Into<String>, xs: &[f64]) -> (f64, f64) {
        let (m, se) = mean_se(xs);
        let interval = Some((m - Z95 * se, m + Z95 * se));
        self.estimates.push(Estimate { t, statistic: statistic.into(), value: m, stderr: se, interval });
        (m, se)
    }

    /// Proportion of `|R - 1| > eps` with its Wilson interval.
    fn push_tail(&mut self, t: f64, statistic: &str, rs: &[f64], eps: f64) -> Tail {
        let n = rs.len();
        let k = rs.iter().filter(|r| (*r - 1.0).abs() > eps).count();
        let p = k as f64 / n as f64;
        let (lo, hi) = wilson(k, n);
        self.estimates.push(Estimate {
            t,
            statistic: statistic.into(),
            value: p,
            stderr: (p * (1.0 - p) / n as f64).sqrt(),
            interval: Some((lo, hi)),
        });
        Tail { p, lo, hi }
    }

    fn decide(&mut self, name: &str, verdict: Verdict, reason: String) {
        self.verdicts.push(ExperimentVerdict { name: name.into(), verdict, reason });
    }
}

#[derive(Debug, Clone, Copy)]
struct Tail {
    p: f64,
    lo: f64,
    hi: f64,
}

/// Vanishing verdict for a series of estimates with 95% intervals: holds
/// when the last estimate is below `threshold` and below the first; fails
/// when the last interval sits above `threshold` and overlaps the first.
fn vanishing_verdict(series: &[Tail], threshold: f64, what: &str) -> (Verdict, String) {
    let (first, last) = (series[0], *series.last().expect("nonempty"));
    if last.p < threshold && (series.len() == 1 || last.p < first.p) {
        return (Verdict::Holds, format!("{what} falls from {:.4} to {:.4} < {threshold}", first.p, last.p));
    }
    if last.lo > threshold && last.hi >= first.lo {
        return (
            Verdict::Fails,
            format!("{what} stays at {:.4} (95% interval above {threshold}), first {:.4}", last.p, first.p),
        );
    }
    (Verdict::Undecided, format!("{what} ends at {:.4} from {:.4}; threshold {threshold}", last.p, first.p))
}

/// Default grid step: a thousandth of the horizon within `[1e-3, 0.05]`.
pub fn default_grid_step(t_max: f64) -> f64 {
    (t_max / 1000.0).clamp(1e-3, 0.05)
}

/// Grid over `[0, t_max]` holding the lattice `step Z`, every `fixed`
/// point, and, for periodic spikes, nodes `k + step 2^-j` graded towards
/// each integer `k`.
pub fn simulation_grid(f: &IntegrandSpec, t_max: f64, step: f64, fixed: &[f64], spike_levels: u32) -> Result<Grid> {
    let spike = f.has_periodic_spike();
    let lattice = (t_max / step).floor();
    let graded = if spike { t_max.ceil() * f64::from(spike_levels + 1) } else { 0.0 };
    if lattice + graded + fixed.len() as f64 > MAX_CELLS as f64 {
        return Err(Error::Execution(format!("grid with step {step} up to {t_max} needs more than {MAX_CELLS} cells")));
    }
    let mut pts: Vec<(f64, bool)> = Vec::with_capacity(lattice as usize + graded as usize + fixed.len() + 2);
    pts.push((0.0, true));
    pts.push((t_max, true));
    for k in 1..=lattice as u64 {
        pts.push((k as f64 * step, false));
    }
    pts.extend(fixed.iter().filter(|&&x| x > 0.0 && x <= t_max).map(|&x| (x, true)));
    if spike {
        let h = step.min(1.0);
        for k in 0..t_max.ceil() as u64 {
            let k = k as f64;
            pts.push((k, false));
            let mut d = h;
            for _ in 0..spike_levels {
                d *= 0.5;
                pts.push((k + d, false));
            }
        }
    }
    pts.retain(|p| p.0 <= t_max);
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut nodes: Vec<(f64, bool)> = Vec::with_capacity(pts.len());
    for (x, fixed) in pts {
        match nodes.last_mut() {
            Some(last) if x - last.0 <= 64.0 * f64::EPSILON * x.max(1.0) => {
                if fixed && !last.1 && last.0 != 0.0 {
                    *last = (x, true);
                }
            }
            _ => nodes.push((x, fixed)),
        }
    }
    Grid::new(nodes.into_iter().map(|p| p.0).collect())
}

/// Precomputed weights for `R_t` along one grid. Weights of cells in the
/// `i`-th schedule segment are stored divided by `lambda_{t_i}`, and the
/// running sum is rescaled by `lambda_{t_{i-1}}/lambda_{t_i}` between
/// segments, so exponential integrands never overflow.
struct Design {
    grid: Grid,
    step: f64,
    ts: Vec<f64>,
    /// Cells below `t_i`.
    ends: Vec<usize>,
    ln_lambda: Vec<f64>,
    scaled: Vec<f64>,
    carry: Vec<f64>,
    /// Scaled `min`/`max` of `f` over each cell's end points (monotone f).
    bracket: Option<(Vec<f64>, Vec<f64>)>,
}

impl Design {
    fn build(f: &IntegrandSpec, cfg: &ExperimentConfig, ts: &[f64], extra: &[f64]) -> Result<Design> {
        let t_max = *ts.last().expect("validated schedule");
        let mut step = cfg.grid_step.unwrap_or_else(|| default_grid_step(t_max));
        let mut width = 0.0;
        for _ in 0..=MAX_REFINE {
            let d = Design::with_step(f, cfg, ts, extra, step)?;
            match d.expected_bracket_width() {
                Some(w) if w > cfg.bracket_tol => {
                    width = w;
                    step *= 0.5;
                }
                _ => return Ok(d),
            }
        }
        Err(Error::Execution(format!(
            "expected integral-bracket width {width:.3e} still exceeds {} after {MAX_REFINE} grid refinements",
            cfg.bracket_tol
        )))
    }

    fn with_step(f: &IntegrandSpec, cfg: &ExperimentConfig, ts: &[f64], extra: &[f64], step: f64) -> Result<Design> {
        let t_max = *ts.last().expect("validated schedule");
        let mut fixed = ts.to_vec();
        fixed.extend_from_slice(extra);
        let grid = simulation_grid(f, t_max, step, &fixed, cfg.spike_levels)?;
        let nodes = grid.nodes();
        let mut ends = Vec::with_capacity(ts.len());
        for &t in ts {
            let i = nodes.partition_point(|&x| x < t);
            let i = if i < nodes.len() && (nodes[i] - t).abs() <= 64.0 * f64::EPSILON * t.max(1.0) { i } else { i - 1 };
            ends.push(i);
        }
        let mut ln_lambda = Vec::with_capacity(ts.len());
        for &t in ts {
            let l = diagnostics::ln_lambda_p(f, t, 1.0, cfg.tol)?;
            if !(l > f64::NEG_INFINITY) {
                return Err(Error::domain(format!("lambda_t f = 0 at t = {t}")));
            }
            ln_lambda.push(l);
        }
        let mut carry = vec![0.0; ts.len()];
        for i in 1..ts.len() {
            carry[i] = (ln_lambda[i - 1] - ln_lambda[i]).exp();
        }
        let mut scaled = Vec::with_capacity(grid.cells());
        let monotone = f.monotone().is_monotone();
        let (mut lo, mut hi) = (Vec::new(), Vec::new());
        let mut seg = 0;
        let mut left = f.ln_value(nodes[0]);
        for k in 0..grid.cells() {
            while seg + 1 < ends.len() && k >= ends[seg] {
                seg += 1;
            }
            let (a, b) = (nodes[k], nodes[k + 1]);
            scaled.push((ln_cell_weight(f, a, b) - ln_lambda[seg]).exp());
            if monotone {
                let right = f.ln_value(b);
                lo.push((left.min(right) - ln_lambda[seg]).exp());
                hi.push((left.max(right) - ln_lambda[seg]).exp());
                left = right;
            }
        }
        let bracket = monotone.then_some((lo, hi));
        Ok(Design { grid, step, ts: ts.to_vec(), ends, ln_lambda, scaled, carry, bracket })
    }

    /// Runs the segment recursion for per-cell values `x` against weights
    /// `w`, returning the sum up to each schedule point.
    fn accumulate(&self, w: &[f64], x: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.ts.len());
        let (mut acc, mut k) = (0.0, 0);
        for (i, &end) in self.ends.iter().enumerate() {
            acc *= self.carry[i];
            while k < end {
                acc += w[k] * x(k);
                k += 1;
            }
            out.push(acc);
        }
        out
    }

    /// Largest `E(upper - lower)/lambda_t` over the schedule.
    fn expected_bracket_width(&self) -> Option<f64> {
        let (lo, hi) = self.bracket.as_ref()?;
        let widths: Vec<f64> = self.grid.widths().collect();
        let diff: Vec<f64> = hi.iter().zip(lo).map(|(h, l)| h - l).collect();
        let w = self.accumulate(&diff, |k| widths[k]);
        Some(w.into_iter().fold(0.0, f64::max))
    }

    fn deltas(&self, seed: PathSeed) -> Vec<f64> {
        sample_increments(self.grid.clone(), seed).deltas().to_vec()
    }

    fn ratios(&self, deltas: &[f64]) -> Vec<f64> {
        self.accumulate(&self.scaled, |k| deltas[k])
    }

    /// `(lower, upper)` endpoint brackets of `R_t`.
    fn bracket_ratios(&self, deltas: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let (lo, hi) = self.bracket.as_ref()?;
        Some((self.accumulate(lo, |k| deltas[k]), self.accumulate(hi, |k| deltas[k])))
    }
}

/// One row per replicate, transposed to one row per schedule point.
fn transpose(rows: Vec<Vec<f64>>, n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(rows.len()); n];
    for row in rows {
        for (i, v) in row.into_iter().enumerate() {
            out[i].push(v);
        }
    }
    out
}

/// `job` on every replicate seed, in replicate order.
fn replicate_map<T: Send>(cfg: &ExperimentConfig, job: impl Fn(PathSeed) -> T + Sync) -> Vec<T> {
    (0..cfg.replicates as u64).into_par_iter().map(|r| job(PathSeed::replicate(cfg.master_seed, r))).collect()
}

struct Sampled {
    r: Vec<Vec<f64>>,
    /// Relative bracket widths, when `f` is monotone.
    width: Option<Vec<Vec<f64>>>,
    /// Replicates whose estimate left its bracket.
    outside: usize,
}

fn sample_ratios(design: &Design, cfg: &ExperimentConfig, master: u64) -> Sampled {
    let n = design.ts.len();
    let rows: Vec<(Vec<f64>, Option<Vec<f64>>, bool)> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let d = design.deltas(PathSeed::replicate(master, r));
            let ratios = design.ratios(&d);
            match design.bracket_ratios(&d) {
                Some((lo, hi)) => {
                    let slack = 1e-12;
                    let outside = ratios
                        .iter()
                        .zip(lo.iter().zip(&hi))
                        .any(|(x, (l, h))| *x < l * (1.0 - slack) || *x > h * (1.0 + slack));
                    let w = lo.iter().zip(&hi).zip(&ratios).map(|((l, h), x)| (h - l) / x).collect();
                    (ratios, Some(w), outside)
                }
                None => (ratios, None, false),
            }
        })
        .collect();
    let outside = rows.iter().filter(|r| r.2).count();
    let has_width = rows.first().is_some_and(|r| r.1.is_some());
    let (r, w): (Vec<_>, Vec<_>) = rows.into_iter().map(|(r, w, _)| (r, w)).unzip();
    let width = has_width.then(|| transpose(w.into_iter().map(|w| w.expect("monotone")).collect(), n));
    Sampled { r: transpose(r, n), width, outside }
}

fn report_bracket(rep: &mut ConvergenceReport, ts: &[f64], s: &Sampled) {
    if let Some(w) = &s.width {
        for (i, &t) in ts.iter().enumerate() {
            rep.push_mean(t, "bracket_rel_width", &w[i]);
        }
        if s.outside > 0 {
            rep.notes.push(format!("{} replicates left their integral bracket", s.outside));
        }
    } else {
        rep.notes.push("integrand is not monotone; no endpoint bracket".into());
    }
}

/// Tail probabilities `P(|R_t - 1| > eps)` with Wilson intervals, plus the
/// mean and the second central moment of `R_t`.
pub fn run_wlln(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let f = cfg.validate()?;
    let ts = &cfg.t_schedule;
    let design = Design::build(&f, cfg, ts, &[])?;
    let s = sample_ratios(&design, cfg, cfg.master_seed);
    let mut rep = ConvergenceReport::new(cfg, design.step, design.grid.cells());
    let mut tails = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        let rs = &s.r[i];
        tails.push(rep.push_tail(t, "tail_prob", rs, cfg.epsilon));
        rep.push_mean(t, "mean_r", rs);
        let sq: Vec<f64> = rs.iter().map(|r| (r - 1.0).powi(2)).collect();
        rep.push_mean(t, "moment_2", &sq);
    }
    report_bracket(&mut rep, ts, &s);
    let (v, why) = vanishing_verdict(&tails, cfg.tail_threshold, "tail probability");
    rep.decide("wlln", v, why);
    Ok(rep)
}

/// Absolute moments `E|R_t - 1|^p`, signed central moments for integer
/// `p`, and the exact central moments from cumulants for comparison.
pub fn run_lp(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let f = cfg.validate()?;
    let ts = &cfg.t_schedule;
    for &t in ts {
        for &p in &cfg.p_list {
            if diagnostics::ln_lambda_p(&f, t, 2.0 * p, cfg.tol)?.is_infinite() {
                return Err(Error::domain(format!(
                    "lambda_t f^{} is infinite at t = {t}; the order-{p} moment estimate has no variance",
                    2.0 * p
                )));
            }
        }
    }
    let design = Design::build(&f, cfg, ts, &[])?;
    let s = sample_ratios(&design, cfg, cfg.master_seed);
    let mut rep = ConvergenceReport::new(cfg, design.step, design.grid.cells());
    let n_exact =
        cfg.p_list.iter().filter(|p| p.fract() == 0.0).map(|p| *p as usize).max().map(|m| (m + m % 2).clamp(2, 8));
    let mut worst_z: f64 = 0.0;
    let mut series: Vec<Vec<Tail>> = vec![Vec::new(); cfg.p_list.len()];
    for (i, &t) in ts.iter().enumerate() {
        let rs = &s.r[i];
        let exact = match n_exact {
            Some(n) => match diagnostics::exact_central_moments(&f, t, n, cfg.tol) {
                Ok(m) => Some(m),
                Err(e) => {
                    rep.notes.push(format!("no exact moments at t = {t}: {e}"));
                    None
                }
            },
            None => None,
        };
        for (j, &p) in cfg.p_list.iter().enumerate() {
            let abs: Vec<f64> = rs.iter().map(|r| (r - 1.0).abs().powf(p)).collect();
            let (m, se) = rep.push_mean(t, format!("abs_moment_{p}"), &abs);
            series[j].push(Tail { p: m, lo: m - Z95 * se, hi: m + Z95 * se });
            if p.fract() != 0.0 {
                continue;
            }
            let n = p as i32;
            let signed: Vec<f64> = rs.iter().map(|r| (r - 1.0).powi(n)).collect();
            let (m, se) = rep.push_mean(t, format!("moment_{p}"), &signed);
            if let Some(ex) = exact.as_ref().and_then(|e| e.get(n as usize - 2)) {
                rep.push(t, format!("exact_moment_{p}"), *ex, 0.0);
                let z = (m - ex) / se;
                rep.push(t, format!("z_moment_{p}"), z, 0.0);
                worst_z = worst_z.max(z.abs());
            }
        }
    }
    report_bracket(&mut rep, ts, &s);
    if n_exact.is_some() {
        let v = if worst_z <= 3.0 { Verdict::Holds } else { Verdict::Fails };
        rep.decide("moment_agreement", v, format!("largest |estimate - exact| is {worst_z:.2} standard errors"));
    }
    for (j, &p) in cfg.p_list.iter().enumerate() {
        let (v, why) = vanishing_verdict(&series[j], cfg.tail_threshold, &format!("E|R-1|^{p}"));
        rep.decide(&format!("lp_{p}"), v, why);
    }
    Ok(rep)
}

/// Tail suprema `sup_{u >= T} |R_u - 1|` along one path per replicate,
/// extended across the schedule; quantiles across replicates.
pub fn run_slln(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let f = cfg.validate()?;
    let ts = &cfg.t_schedule;
    let t_max = *ts.last().expect("validated");
    let step = cfg.grid_step.unwrap_or_else(|| default_grid_step(t_max));
    if t_max / step > MAX_CELLS as f64 {
        return Err(Error::Execution(format!("lattice with step {step} up to {t_max} exceeds {MAX_CELLS} cells")));
    }
    let mut ln_lambda = Vec::with_capacity(ts.len());
    for &t in ts {
        let l = diagnostics::ln_lambda_p(&f, t, 1.0, cfg.tol)?;
        if !(l > f64::NEG_INFINITY) {
            return Err(Error::domain(format!("lambda_t f = 0 at t = {t}")));
        }
        ln_lambda.push(l);
    }
    let rows: Vec<Result<Vec<f64>>> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| {
            let seed = PathSeed::replicate(cfg.master_seed, r);
            let mut path = sample_lattice_path(ts[0], step, seed)?;
            let mut out = Vec::with_capacity(ts.len());
            let (mut acc, mut done) = (0.0, 0);
            for (i, &t) in ts.iter().enumerate() {
                if i > 0 {
                    path = extend_path(&path, t)?;
                    acc *= (ln_lambda[i - 1] - ln_lambda[i]).exp();
                }
                let nodes = path.grid().nodes();
                for (k, d) in path.deltas().iter().enumerate().skip(done) {
                    acc += (ln_cell_weight(&f, nodes[k], nodes[k + 1]) - ln_lambda[i]).exp() * d;
                }
                done = path.deltas().len();
                out.push(acc);
            }
            Ok(out)
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let sups: Vec<Vec<f64>> = rows
        .iter()
        .map(|rs| {
            let mut s = vec![0.0; rs.len()];
            let mut m: f64 = 0.0;
            for i in (0..rs.len()).rev() {
                m = m.max((rs[i] - 1.0).abs());
                s[i] = m;
            }
            s
        })
        .collect();
    let sups = transpose(sups, ts.len());
    let r = transpose(rows, ts.len());
    let mut rep = ConvergenceReport::new(cfg, step, (t_max / step).ceil() as usize);
    let mut q95 = Vec::new();
    for (i, &t) in ts.iter().enumerate() {
        let sorted_sup = sorted(&sups[i]);
        for q in [0.5, 0.95] {
            let (v, lo, hi) = quantile_with_interval(&sorted_sup, q);
            rep.estimates.push(Estimate {
                t,
                statistic: format!("tail_sup_q{}", (q * 100.0) as u32),
                value: v,
                stderr: (hi - lo) / (2.0 * Z95),
                interval: Some((lo, hi)),
            });
            if q == 0.95 {
                q95.push(Tail { p: v, lo, hi });
            }
        }
        rep.push_tail(t, "tail_prob", &r[i], cfg.epsilon);
    }
    let (v, mut why) = vanishing_verdict(&q95, cfg.tail_threshold, "95% quantile of the tail sup");
    if !f.monotone().is_monotone() {
        why.push_str("; schedule-relative (integrand is not monotone)");
    }
    rep.decide("slln", v, why);
    Ok(rep)
}

/// Quantile with a distribution-free 95% interval from order statistics.
fn quantile_with_interval(sorted: &[f64], q: f64) -> (f64, f64, f64) {
    let n = sorted.len() as f64;
    let half = Z95 * (n * q * (1.0 - q)).sqrt();
    let idx = |x: f64| (x.round().max(0.0) as usize).min(sorted.len() - 1);
    (quantile_sorted(sorted, q), sorted[idx(n * q - half - 1.0)], sorted[idx(n * q + half)])
}

/// `exp(-int_0^inf ln(1 + s e^{-u}) du)`, the Laplace transform of
/// `int_0^inf e^{-u} dGamma(u)`.
pub fn thorin_laplace_limit(s: f64) -> Result<f64> {
    if s == 0.0 {
        return Ok(1.0);
    }
    let opts = QuadOptions::default().with_rel_tol(1e-13).graded(8);
    let r = integrate(|u| (s * (-u).exp()).ln_1p(), 0.0, 60.0, &[], &opts)?;
    // tail: int_60^inf ln(1 + s e^{-u}) ~ s e^{-60}
    Ok((-(r.value + s * (-60.0f64).exp())).exp())
}

/// Empirical Laplace transform of `R_t` for `f = e^x` against the finite-t
/// value and the Thorin limit, the standardized statistic's moments, and a
/// two-sample KS distance between the first and last horizon. Each horizon
/// uses independent paths.
pub fn run_dist_limit_exponential(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    let f = cfg.validate()?;
    if !matches!(f.kind(), Kind::PureExp) {
        return Err(Error::usage(format!("the distributional limit is only implemented for pure_exp, got {f}")));
    }
    let ts = &cfg.t_schedule;
    let seed = PathSeed::new(cfg.master_seed);
    let mut rep: Option<ConvergenceReport> = None;
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut worst_z: f64 = 0.0;
    for (i, &t) in ts.iter().enumerate() {
        let design = Design::build(&f, cfg, &[t], &[])?;
        let master = if i == 0 { cfg.master_seed } else { seed.fork(i as u64).master };
        let rs = sample_ratios(&design, cfg, master).r.swap_remove(0);
        let rep = rep.get_or_insert_with(|| ConvergenceReport::new(cfg, design.step, design.grid.cells()));
        for &s in &cfg.s_list {
            let e: Vec<f64> = rs.iter().map(|r| (-s * r).exp()).collect();
            let (m, se) = rep.push_mean(t, format!("laplace_{s}"), &e);
            let finite = (-(diagnostics::laplace_deficit(&f, t, s, cfg.tol)? + s)).exp();
            let limit = thorin_laplace_limit(s)?;
            rep.push(t, format!("laplace_exact_{s}"), finite, 0.0);
            rep.push(t, format!("laplace_limit_{s}"), limit, 0.0);
            if i + 1 == ts.len() && se > 0.0 {
                worst_z = worst_z.max(((m - limit) / se).abs());
            }
        }
        let l1 = design.ln_lambda[0];
        let v = (diagnostics::ln_lambda_p(&f, t, 2.0, cfg.tol)? - 2.0 * l1).exp();
        let k3 = 2.0 * (diagnostics::ln_lambda_p(&f, t, 3.0, cfg.tol)? - 3.0 * l1).exp();
        let z: Vec<f64> = rs.iter().map(|r| (r - 1.0) / v.sqrt()).collect();
        rep.push_mean(t, "centered_mean", &z);
        let z2: Vec<f64> = z.iter().map(|x| x * x).collect();
        rep.push_mean(t, "centered_var", &z2);
        let z3: Vec<f64> = z.iter().map(|x| x * x * x).collect();
        rep.push_mean(t, "centered_skew", &z3);
        rep.push(t, "centered_skew_exact", k3 / v.powf(1.5), 0.0);
        samples.push(rs);
    }
    let mut rep = rep.expect("nonempty schedule");
    if cfg.s_list.iter().any(|&s| s > 0.0) {
        let v = if worst_z <= 3.0 { Verdict::Holds } else { Verdict::Fails };
        rep.decide(
            "thorin_limit",
            v,
            format!("largest |L(s) - limit| at the last horizon is {worst_z:.2} standard errors"),
        );
    }
    if samples.len() >= 2 {
        let (a, b) = (&samples[0], samples.last().expect("two samples"));
        let d = ks_distance(a, b);
        let crit = ks_critical(a.len(), b.len());
        let t = *ts.last().expect("nonempty");
        rep.push(t, "ks_first_last", d, 0.0);
        rep.push(t, "ks_critical_5pct", crit, 0.0);
        let v = if d < crit { Verdict::Holds } else { Verdict::Fails };
        rep.decide("distributional_stabilization", v, format!("KS distance {d:.4} against critical value {crit:.4}"));
    }
    Ok(rep)
}

#[cfg(test)]
mod tests;
