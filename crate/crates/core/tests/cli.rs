use gamma_od::cli::manifest::{verify_manifest, RunManifest, MANIFEST_FILE};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gamma-od"))
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn golden(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    fs::read_to_string(p).unwrap()
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string() + "\n"
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn csv_headers_match_golden_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["diagnose", "power:2", "--t", "10:1e4:geom8"], d).status.success());
    assert!(run(&["simulate", "wlln", "const:1", "--t", "10,20", "--reps", "100"], d).status.success());
    assert!(run(&["table"], d).status.success());
    assert_eq!(first_line(&d.join("power_2.diag.csv")), golden("diag.csv.header"));
    assert_eq!(first_line(&d.join("const_1.wlln.report.csv")), golden("report.csv.header"));
    assert_eq!(first_line(&d.join("table.csv")), golden("table.csv.header"));
    assert_eq!(gamma_od::diagnostics::SERIES_CSV_HEADER.to_string() + "\n", golden("diag.csv.header"));
    assert_eq!(gamma_od::montecarlo::REPORT_CSV_HEADER.to_string() + "\n", golden("report.csv.header"));
    assert_eq!(gamma_od::cli::table::TABLE_CSV_HEADER.to_string() + "\n", golden("table.csv.header"));
}

#[test]
fn diagnose_writes_series_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = run(&["diagnose", "power:2", "--t", "10:1e6:geom32", "--svg"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(d.join("power_2.diag.csv")).unwrap();
    assert_eq!(csv.lines().count(), 33);
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("power_2.report.json")).unwrap()).unwrap();
    let v_fit = rep["fits"].as_array().unwrap().iter().find(|f| f[0] == "v").unwrap();
    assert!((v_fit[1]["exponent"].as_f64().unwrap() + 1.0).abs() < 0.01);
    assert!(d.join("power_2.diag.svg").exists());
    let m = manifest(d);
    assert_eq!(m.outputs.len(), 3);
    assert!(verify_manifest(d).unwrap().is_empty());
}

#[test]
fn diagnose_gates_and_concavity() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["diagnose", "pure_exp"], d).status.success());
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("pure_exp.report.json")).unwrap()).unwrap();
    assert_eq!(rep["classifier"]["status"], "not-applicable");
    assert_eq!(rep["wlln"]["verdict"], "fails");

    assert!(run(&["diagnose", "fstar:power:1@arith:2:1"], d).status.success());
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("fstar_power_1_arith_2_1.report.json")).unwrap()).unwrap();
    assert_eq!(rep["ln_lambda_concavity"]["concave"], false);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(&["diagnose", "nope:1"], d).status.code(), Some(2));
    assert_eq!(run(&["diagnose", "power:2", "--t", "10:1:geom4"], d).status.code(), Some(2));
    assert_eq!(run(&["simulate", "sideways", "const:1"], d).status.code(), Some(2));
    assert_eq!(run(&["simulate", "wlln", "const:1", "--reps", "10"], d).status.code(), Some(2));
    assert_eq!(run(&["simulate", "bridge", "periodic:abs_sin", "--t", "10"], d).status.code(), Some(2));
    assert_eq!(run(&["--bogus"], d).status.code(), Some(2));
    // infeasible grid
    let o = run(&["simulate", "wlln", "const:1", "--t", "1e9", "--step", "0.001"], d);
    assert_eq!(o.status.code(), Some(3));
    // a failing verdict still exits 0
    let o = run(&["simulate", "wlln", "pure_exp", "--t", "5,10", "--reps", "200"], d);
    assert_eq!(o.status.code(), Some(0));
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("pure_exp.wlln.report.json")).unwrap()).unwrap();
    assert_eq!(rep["verdicts"][0]["verdict"], "fails");
}

#[test]
fn reruns_are_bit_identical_and_config_reproduces_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = ["simulate", "wlln", "const:1", "--t", "10,100", "--reps", "500", "--eps", "0.1", "--seed", "42"];
    assert!(run(&args, &a).status.success());
    let mut jobs = args.to_vec();
    jobs.extend(["--jobs", "2"]);
    assert!(run(&jobs, &b).status.success());
    for f in ["const_1.wlln.report.json", "const_1.wlln.report.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    // the recorded config, written as a config file, reproduces the run
    let m = manifest(&a);
    assert_eq!(m.seed, Some(42));
    let sim: gamma_od::montecarlo::ExperimentConfig = serde_json::from_value(m.config.clone()).unwrap();
    let file = gamma_od::cli::config::ConfigFile {
        schema_version: gamma_od::cli::config::SCHEMA_VERSION,
        seed: None,
        tol: None,
        simulate: Some(sim),
        diagnose: None,
    };
    let path = dir.path().join("run.toml");
    fs::write(&path, toml::to_string(&file).unwrap()).unwrap();
    let o =
        bin().args(["--config", path.to_str().unwrap(), "simulate", "--out", c.to_str().unwrap()]).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(a.join("const_1.wlln.report.json")).unwrap(),
        fs::read(c.join("const_1.wlln.report.json")).unwrap()
    );
    assert_eq!(manifest(&c).config_hash, m.config_hash);
    assert!(verify_manifest(&c).unwrap().is_empty());

    // tampering is detected
    fs::write(a.join("const_1.wlln.report.csv"), "t,statistic,value,stderr\n").unwrap();
    assert_eq!(verify_manifest(&a).unwrap().len(), 1);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        "schema_version = 1\nseed = 3\n\n[simulate]\nintegrand = \"power:1\"\nmode = \"lp\"\nt_schedule = [10.0]\nreplicates = 150\np_list = [2.0]\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = bin()
        .args([
            "--config",
            path.to_str().unwrap(),
            "--seed",
            "8",
            "simulate",
            "--reps",
            "120",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m.seed, Some(8));
    assert_eq!(m.config["replicates"], 120);
    assert_eq!(m.config["mode"], "lp");
    fs::write(&path, "schema_version = 9\n").unwrap();
    let o = bin().args(["--config", path.to_str().unwrap(), "table"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bridge_example_has_full_pass_rate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(run(&["simulate", "bridge", "power:1", "--t", "50.5"], d).status.success());
    let csv = fs::read_to_string(d.join("power_1.bridge.report.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("50.5,sandwich_pass_rate,1,")), "{csv}");
}

#[test]
fn list_catalog_prints_every_entry() {
    let o = bin().args(["list-catalog", "--json"]).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), gamma_od::integrands::catalog_entries().len());
    let o = bin().arg("list-catalog").output().unwrap();
    assert!(String::from_utf8_lossy(&o.stdout).lines().any(|l| l.starts_with("pure_exp")));
}
