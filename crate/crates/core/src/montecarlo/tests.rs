use super::*;
use std::time::Instant;

fn cfg(mode: Mode, id: &str, ts: &[f64], reps: usize) -> ExperimentConfig {
    ExperimentConfig { replicates: reps, master_seed: 42, ..ExperimentConfig::new(mode, id, ts) }
}

fn within(e: &Estimate, target: f64, k: f64) -> bool {
    (e.value - target).abs() <= k * e.stderr
}

#[test]
fn constant_wlln_matches_gamma_sums() {
    let c = ExperimentConfig { epsilon: 0.3, ..cfg(Mode::Wlln, "const:1", &[100.0], 10_000) };
    let t0 = Instant::now();
    let rep = run_wlln(&c).unwrap();
    eprintln!("const wlln {:?}", t0.elapsed());
    let tail = rep.get("tail_prob", 100.0).unwrap();
    // 3 SE above zero is ~1e-3 here, far below the Chebyshev bound 1/9
    assert!(tail.value < 0.01, "{tail:?}");
    let m2 = rep.get("moment_2", 100.0).unwrap();
    assert!(within(m2, 0.01, 3.0), "{m2:?}");
}

#[test]
fn exponential_tail_does_not_vanish() {
    let rep = run_wlln(&cfg(Mode::Wlln, "pure_exp", &[5.0, 10.0, 15.0], 1000)).unwrap();
    assert_eq!(rep.verdict("wlln").unwrap().verdict, Verdict::Fails, "{:?}", rep.verdicts);
    let rep = run_wlln(&cfg(Mode::Wlln, "const:1", &[10.0, 100.0, 1000.0], 1000)).unwrap();
    assert_eq!(rep.verdict("wlln").unwrap().verdict, Verdict::Holds, "{:?}", rep.verdicts);
}

#[test]
fn moments_match_cumulants() {
    let c = ExperimentConfig { p_list: vec![2.0, 3.0, 4.0], ..cfg(Mode::Lp, "const:1", &[10.0], 10_000) };
    let rep = run_lp(&c).unwrap();
    for (p, exact) in [(2.0, 0.1), (3.0, 0.02), (4.0, 0.036)] {
        let e = rep.get(&format!("moment_{p}"), 10.0).unwrap();
        assert!(within(e, exact, 3.0), "p={p}: {e:?}");
        let ex = rep.get(&format!("exact_moment_{p}"), 10.0).unwrap();
        assert!((ex.value - exact).abs() < 1e-12);
    }
    let c = ExperimentConfig { p_list: vec![2.0], ..cfg(Mode::Lp, "power:1", &[10.0, 40.0, 160.0], 4000) };
    let rep = run_lp(&c).unwrap();
    for t in [10.0, 40.0, 160.0] {
        let e = rep.get("moment_2", t).unwrap();
        assert!(within(e, 4.0 / (3.0 * t), 3.0), "t={t}: {e:?}");
    }
    assert_eq!(rep.verdict("moment_agreement").unwrap().verdict, Verdict::Holds);
}

#[test]
fn lp_needs_finite_higher_integrals() {
    let c = cfg(Mode::Lp, "periodic:spike:1/2", &[10.0], 100);
    let r = run_lp(&c);
    assert!(matches!(r, Err(Error::Domain(_))), "{r:?}");
}

#[test]
fn slln_tail_sup_shrinks_for_constant() {
    let ts = diagnostics::geometric_schedule(10.0, 1000.0, 8);
    let c = ExperimentConfig { grid_step: Some(0.5), ..cfg(Mode::Slln, "const:1", &ts, 400) };
    let rep = run_slln(&c).unwrap();
    let q = rep.series("tail_sup_q95");
    assert!(q.last().unwrap().1 < q[0].1 / 3.0, "{q:?}");
    // every tail sup dominates the pointwise deviation
    for w in q.windows(2) {
        assert!(w[1].1 <= w[0].1);
    }
}

#[test]
fn slln_path_is_one_extended_path() {
    // the same replicate seen through two schedules agrees at shared points
    let a = ExperimentConfig { grid_step: Some(0.25), ..cfg(Mode::Slln, "power:1", &[10.0, 20.0], 100) };
    let b = ExperimentConfig { t_schedule: vec![10.0, 15.5, 20.0], ..a.clone() };
    let (ra, rb) = (run_slln(&a).unwrap(), run_slln(&b).unwrap());
    assert_eq!(ra.get("tail_prob", 20.0).unwrap().value, rb.get("tail_prob", 20.0).unwrap().value);
}

#[test]
fn laplace_at_zero_is_one_and_limit_is_thorin() {
    let c = ExperimentConfig { s_list: vec![0.0, 1.0], ..cfg(Mode::DistLimit, "pure_exp", &[10.0, 15.0], 4000) };
    let t0 = Instant::now();
    let rep = run_dist_limit_exponential(&c).unwrap();
    eprintln!("dist limit {:?}", t0.elapsed());
    assert_eq!(rep.get("laplace_0", 15.0).unwrap().value, 1.0);
    let l = rep.get("laplace_1", 15.0).unwrap();
    let target = (-std::f64::consts::PI.powi(2) / 12.0).exp();
    assert!((rep.get("laplace_limit_1", 15.0).unwrap().value - target).abs() < 1e-12);
    assert!(within(l, target, 3.0), "{l:?}");
    assert_eq!(rep.verdict("distributional_stabilization").unwrap().verdict, Verdict::Holds);
    let skew = rep.get("centered_skew_exact", 15.0).unwrap().value;
    assert!((skew - 4.0 * 2f64.sqrt() / 3.0).abs() < 1e-6, "{skew}");
    assert!(matches!(run_dist_limit_exponential(&cfg(Mode::DistLimit, "const:1", &[5.0], 100)), Err(Error::Usage(_))));
}

#[test]
fn bridge_sandwich_holds_pathwise() {
    let t0 = Instant::now();
    for id in ["power:1", "power:2", "bounded:recip", "bounded:inv_log", "const:2"] {
        let rep = run_bridge(&cfg(Mode::Bridge, id, &[10.0, 50.5], 300)).unwrap();
        assert_eq!(rep.verdict("sandwich").unwrap().verdict, Verdict::Holds, "{id}: {:?}", rep.estimates);
        assert_eq!(rep.get("sandwich_pass_rate", 50.5).unwrap().value, 1.0);
    }
    eprintln!("bridge {:?}", t0.elapsed());
    assert!(matches!(run_bridge(&cfg(Mode::Bridge, "periodic:abs_sin", &[10.0], 100)), Err(Error::Usage(_))));
}

#[test]
fn bridge_lag_two_agrees_with_unit_cells() {
    let ts = [10.0, 100.0, 1000.0];
    let one = run_bridge(&cfg(Mode::Bridge, "power:1", &ts, 400)).unwrap();
    let two = run_bridge(&ExperimentConfig { bridge_cell: 2.0, ..cfg(Mode::Bridge, "power:1", &ts, 400) }).unwrap();
    let v = |r: &ConvergenceReport| r.verdict("wlln_discrete").unwrap().verdict;
    assert_eq!(v(&one), v(&two));
    assert_eq!(one.verdict("wlln_agreement").unwrap().verdict, Verdict::Holds);
}

#[test]
fn reports_are_bit_identical_across_thread_counts() {
    let c = cfg(Mode::Wlln, "power:2", &[5.0, 20.0], 200);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_wlln(&c).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_csv(), b.to_csv());
    let other = run_wlln(&ExperimentConfig { master_seed: 43, ..c.clone() }).unwrap();
    assert_ne!(a.to_csv(), other.to_csv());
}

#[test]
fn grid_keeps_schedule_points_and_grades_spikes() {
    let f = parse_id("periodic:spike:1/2").unwrap();
    let g = simulation_grid(&f, 3.3, 0.1, &[1.05, 3.3], 10).unwrap();
    let n = g.nodes();
    assert!(n.contains(&1.05) && n.contains(&3.3) && n.contains(&2.0));
    assert!(n.iter().any(|&x| (x - (2.0 + 0.1 / 1024.0)).abs() < 1e-15));
    let huge = simulation_grid(&parse_id("power:1").unwrap(), 1e9, 1e-3, &[], 0);
    assert!(matches!(huge, Err(Error::Execution(_))));
}

#[test]
fn config_validation() {
    let mut c = cfg(Mode::Wlln, "const:1", &[10.0], 99);
    assert!(matches!(c.validate(), Err(Error::Domain(_))));
    c.replicates = 100;
    c.epsilon = 0.0;
    assert!(c.validate().is_err());
    c.epsilon = 0.1;
    c.t_schedule = vec![10.0, 5.0];
    assert!(c.validate().is_err());
    c.t_schedule = vec![5.0];
    c.integrand = "nope".into();
    assert!(matches!(c.validate(), Err(Error::Parse(_))));
    assert_eq!("dist-limit".parse::<Mode>().unwrap(), Mode::DistLimit);
}
