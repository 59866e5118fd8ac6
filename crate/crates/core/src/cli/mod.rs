//! The `gamma-od` command line: `diagnose`, `simulate`, `table` and
//! `list-catalog`.
//!
//! Exit codes: 0 when the computation finished (whatever the verdicts), 2 for
//! bad input, 3 when the computation or file output failed.

pub mod config;
pub mod manifest;
pub mod svg;
pub mod table;

use crate::diagnostics::{
    classify_slln, diagnostic_series_tol, fit_rate, inequality_audit, is_ln_f_concave, AuditEntry, ClassifierVerdict,
    ClassifyOptions, Concavity, Criterion, FitModel, FitResult, Verdict, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::integrands::{catalog_entries, parse_id};
use crate::montecarlo::{BridgeWeights, ConvergenceReport, ExperimentConfig, Mode};
use clap::{Parser, Subcommand};
use config::{parse_list, parse_t_range, ConfigFile, DEFAULT_DIAGNOSE_RANGE};
use manifest::{now_utc, sha256_hex, OutputFile, RunManifest};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Parser)]
#[command(name = "gamma-od", version, about = "Diagnostics and Monte Carlo checks for Gamma process integrals")]
pub struct Cli {
    /// Master seed of the random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all available).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Quadrature tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    pub svg: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deterministic diagnostics, classifier verdicts and rate fits.
    Diagnose {
        /// Catalog id, e.g. power:2.
        id: Option<String>,
        /// Schedule: a:b:geomN, a:b:linN, a comma list or one value.
        #[arg(long)]
        t: Option<String>,
    },
    /// Monte Carlo experiment.
    Simulate {
        /// wlln, lp, slln, dist-limit or bridge.
        mode: Option<String>,
        id: Option<String>,
        #[arg(long)]
        t: Option<String>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        /// Moment orders (comma list).
        #[arg(long)]
        p: Option<String>,
        /// Laplace arguments (comma list).
        #[arg(long)]
        s: Option<String>,
        /// Simulation grid step.
        #[arg(long)]
        step: Option<f64>,
        /// Bridge cell length.
        #[arg(long)]
        cell: Option<f64>,
        /// Bridge weights: cell_mass, right or left.
        #[arg(long)]
        weights: Option<String>,
        #[arg(long)]
        spike_levels: Option<u32>,
    },
    /// Fitted rates for the rows of the table of test functions.
    Table,
    /// Print the integrand catalog.
    ListCatalog {
        #[arg(long)]
        json: bool,
    },
}

/// Parses `args` (including the program name), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gamma-od: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_input_error() {
        2
    } else {
        3
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(0) = cli.jobs {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    let file = cli.config.as_deref().map(ConfigFile::load).transpose()?;
    let go = || match &cli.command {
        Command::Diagnose { id, t } => diagnose(cli, file.as_ref(), id.as_deref(), t.as_deref()),
        Command::Simulate { .. } => simulate(cli, file.as_ref()),
        Command::Table => table_cmd(cli),
        Command::ListCatalog { json } => list_catalog(*json),
    };
    match cli.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Execution(format!("thread pool: {e}")))?
            .install(go),
        None => go(),
    }
}

/// Collects output files and writes them under one directory.
struct Writer {
    dir: PathBuf,
    outputs: Vec<OutputFile>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Execution(format!("creating {}: {e}", dir.display())))?;
        Ok(Writer { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::Execution(format!("writing {}: {e}", path.display())))?;
        self.outputs.push(OutputFile { path: name.to_string(), sha256: sha256_hex(contents.as_bytes()) });
        println!("wrote {}", path.display());
        Ok(())
    }

    fn finish(self, mut m: RunManifest) -> Result<()> {
        m.outputs = self.outputs;
        m.write(&self.dir)
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::Execution(e.to_string()))
}

/// File-name stem of an integrand id.
pub fn stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' }).collect()
}

fn tol_of(cli: &Cli, file: Option<&ConfigFile>) -> Result<f64> {
    let tol = cli.tol.or(file.and_then(|f| f.tol)).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Error::Domain(format!("tol must be positive, got {tol}")));
    }
    Ok(tol)
}

#[derive(Debug, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Applicability<T> {
    Computed { results: T },
    NotApplicable { reason: String },
}

fn applicability<T>(r: Result<T>) -> Result<Applicability<T>> {
    match r {
        Ok(results) => Ok(Applicability::Computed { results }),
        Err(Error::Usage(reason)) => Ok(Applicability::NotApplicable { reason }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum FitOutcome {
    Fitted(FitResult),
    Skipped { skipped: String },
}

#[derive(Debug, Serialize)]
pub struct DiagnoseReport {
    pub integrand: String,
    pub t: Vec<f64>,
    pub tol: f64,
    /// The weak-law verdict, reported even when the strong-law criteria are
    /// not applicable.
    pub wlln: Option<ClassifierVerdict>,
    pub classifier: Applicability<Vec<ClassifierVerdict>>,
    pub audit: Applicability<Vec<AuditEntry>>,
    /// Concavity of `ln lambda_t f` on the schedule plus the breakpoints of `f`.
    pub ln_lambda_concavity: Concavity,
    pub fits: Vec<(String, FitOutcome)>,
}

/// Builds the diagnose report and series without touching the filesystem.
pub fn diagnose_report(
    id: &str,
    ts: &[f64],
    tol: f64,
) -> Result<(DiagnoseReport, crate::diagnostics::DiagnosticSeries)> {
    let f = parse_id(id)?;
    let series = diagnostic_series_tol(&f, ts, tol)?;
    let mut classifier = applicability(classify_slln(&f, &ClassifyOptions::default()))?;
    let mut wlln = None;
    if let Applicability::Computed { results } = &classifier {
        wlln = results.iter().find(|v| v.criterion == Criterion::Wlln).cloned();
        // the strong-law criteria presuppose the weak law
        if let Some(w) = wlln.as_ref().filter(|w| w.verdict == Verdict::Fails) {
            classifier = Applicability::NotApplicable { reason: format!("weak law fails: {}", w.witness.reason) };
        }
    }
    let audit = applicability(inequality_audit(&f, ts))?;
    let (lo, hi) = (ts[0], *ts.last().expect("nonempty schedule"));
    let mut knots: Vec<f64> = f.breakpoints(hi, 512).into_iter().filter(|x| *x >= lo).collect();
    knots.extend_from_slice(ts);
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1.0));
    let ln_lambda_concavity = is_ln_f_concave(&f, &knots, tol)?;
    let mut fits = Vec::new();
    for (name, ys, model) in [
        ("v", &series.v, FitModel::Power),
        ("b", &series.b, FitModel::Power),
        ("h", &series.h, FitModel::Power),
        ("h_log", &series.h, FitModel::PowerTimesLogPower),
    ] {
        let abs: Vec<f64> = ys.iter().map(|y| y.abs()).collect();
        let out = match fit_rate(ts, &abs, model) {
            Ok(r) => FitOutcome::Fitted(r),
            Err(e) => FitOutcome::Skipped { skipped: e.to_string() },
        };
        fits.push((name.to_string(), out));
    }
    let report = DiagnoseReport {
        integrand: id.to_string(),
        t: ts.to_vec(),
        tol,
        wlln,
        classifier,
        audit,
        ln_lambda_concavity,
        fits,
    };
    Ok((report, series))
}

fn diagnose(cli: &Cli, file: Option<&ConfigFile>, id: Option<&str>, t: Option<&str>) -> Result<()> {
    let section = file.and_then(|f| f.diagnose.clone()).unwrap_or_default();
    let id = id
        .map(str::to_string)
        .or(section.integrand)
        .ok_or_else(|| Error::Usage("diagnose needs an integrand id".into()))?;
    let range = t.map(str::to_string).or(section.t).unwrap_or_else(|| DEFAULT_DIAGNOSE_RANGE.to_string());
    let ts = parse_t_range(&range)?;
    let tol = tol_of(cli, file)?;
    let started = now_utc();
    let (report, series) = diagnose_report(&id, &ts, tol)?;
    let mut w = Writer::new(&cli.out)?;
    let s = stem(&id);
    w.put(&format!("{s}.diag.csv"), &series.to_csv())?;
    w.put(&format!("{s}.report.json"), &json(&report)?)?;
    if cli.svg {
        let pts = |ys: &[f64]| ts.iter().copied().zip(ys.iter().map(|y| y.abs())).collect();
        let plot = svg::log_log_plot(
            &id,
            &[
                svg::Series { name: "v", points: pts(&series.v) },
                svg::Series { name: "b", points: pts(&series.b) },
                svg::Series { name: "h", points: pts(&series.h) },
            ],
        );
        if let Some(p) = plot {
            w.put(&format!("{s}.diag.svg"), &p)?;
        }
    }
    if let Applicability::Computed { results } = &report.classifier {
        for v in results {
            println!("{:>12}: {:?}", v.criterion.id(), v.verdict);
        }
    } else {
        if let Some(w) = &report.wlln {
            println!("{:>12}: {:?}", w.criterion.id(), w.verdict);
        }
        println!("  classifier: not-applicable");
    }
    let config = serde_json::json!({ "integrand": id, "t": range, "tol": tol });
    w.finish(RunManifest::new("diagnose", None, config, started))
}

/// The effective simulation config: file values, then flags.
pub fn simulation_config(cli: &Cli, file: Option<&ConfigFile>) -> Result<ExperimentConfig> {
    let Command::Simulate { mode, id, t, reps, eps, p, s, step, cell, weights, spike_levels } = &cli.command else {
        return Err(Error::Usage("not a simulate command".into()));
    };
    let mut cfg = file.and_then(|f| f.simulate.clone()).unwrap_or_default();
    if let Some(seed) = file.and_then(|f| f.seed) {
        cfg.master_seed = seed;
    }
    if let Some(tol) = file.and_then(|f| f.tol) {
        cfg.tol = tol;
    }
    if let Some(m) = mode {
        cfg.mode = Mode::from_str(m)?;
    }
    if let Some(id) = id {
        cfg.integrand = id.clone();
    } else if file.and_then(|f| f.simulate.as_ref()).is_none() {
        return Err(Error::Usage("simulate needs a mode and an integrand id".into()));
    }
    if let Some(t) = t {
        cfg.t_schedule = parse_t_range(t)?;
    }
    if let Some(r) = reps {
        cfg.replicates = *r;
    }
    if let Some(e) = eps {
        cfg.epsilon = *e;
    }
    if let Some(p) = p {
        cfg.p_list = parse_list(p)?;
    }
    if let Some(s) = s {
        cfg.s_list = parse_list(s)?;
    }
    if step.is_some() {
        cfg.grid_step = *step;
    }
    if let Some(c) = cell {
        cfg.bridge_cell = *c;
    }
    if let Some(w) = weights {
        cfg.bridge_weights = serde_json::from_value::<BridgeWeights>(serde_json::Value::String(w.clone()))
            .map_err(|_| Error::Parse(format!("unknown bridge weights `{w}`")))?;
    }
    if let Some(l) = spike_levels {
        cfg.spike_levels = *l;
    }
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(tol) = cli.tol {
        cfg.tol = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report_plot(rep: &ConvergenceReport) -> Option<String> {
    let mut names: Vec<&str> = Vec::new();
    for e in &rep.estimates {
        if !names.contains(&e.statistic.as_str()) {
            names.push(&e.statistic);
        }
    }
    let series: Vec<svg::Series> = names
        .into_iter()
        .map(|n| svg::Series { name: n, points: rep.series(n) })
        .filter(|s| s.points.len() >= 2)
        .take(6)
        .collect();
    svg::log_log_plot(&format!("{} {}", rep.mode, rep.integrand), &series)
}

fn simulate(cli: &Cli, file: Option<&ConfigFile>) -> Result<()> {
    let cfg = simulation_config(cli, file)?;
    let started = now_utc();
    let rep = cfg.run()?;
    let mut w = Writer::new(&cli.out)?;
    let s = format!("{}.{}", stem(&cfg.integrand), cfg.mode);
    w.put(&format!("{s}.report.json"), &rep.to_json())?;
    w.put(&format!("{s}.report.csv"), &rep.to_csv())?;
    if cli.svg {
        if let Some(p) = report_plot(&rep) {
            w.put(&format!("{s}.svg"), &p)?;
        }
    }
    for v in &rep.verdicts {
        println!("{:>28}: {:?} ({})", v.name, v.verdict, v.reason);
    }
    let config = serde_json::to_value(&cfg).map_err(|e| Error::Execution(e.to_string()))?;
    w.finish(RunManifest::new("simulate", Some(cfg.master_seed), config, started))
}

fn table_cmd(cli: &Cli) -> Result<()> {
    let started = now_utc();
    let rows = table::compute_table()?;
    let mut w = Writer::new(&cli.out)?;
    w.put("table.csv", &table::table_csv(&rows))?;
    w.put("table.report.json", &json(&rows)?)?;
    for r in &rows {
        let mark = if r.passes() { "pass" } else { "FAIL" };
        let mut extra = String::new();
        if r.pattern_breaking {
            extra.push_str(&format!("  h/b ~ ln^{:.2} t", r.h_over_b_log_exponent));
        }
        if r.wlln_fails {
            extra.push_str("  wlln fails");
        }
        println!("{:<22} {mark}{extra}", r.id);
    }
    let config = serde_json::json!({
        "rows": crate::integrands::TABLE_ROWS,
        "t_range": table::TABLE_RANGE,
        "points": table::TABLE_POINTS,
        "slope_tol": table::TABLE_SLOPE_TOL,
    });
    w.finish(RunManifest::new("table", None, config, started))
}

fn list_catalog(as_json: bool) -> Result<()> {
    let entries = catalog_entries();
    if as_json {
        print!("{}", json(&entries)?);
    } else {
        for e in entries {
            println!("{:<34} {:<14} {}", e.id, e.group, e.description);
        }
    }
    Ok(())
}
