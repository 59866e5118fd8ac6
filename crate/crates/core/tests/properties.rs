use gamma_od::cli::config::parse_t_range;
use gamma_od::diagnostics::{diagnostic_series, exact_central_moments, ln_increment, DEFAULT_TOL};
use gamma_od::gamma::{
    extend_path, integral_bracket, integral_estimate, refine, sample_increments, sample_lattice_path, Grid,
};
use gamma_od::integrands::{catalog_entries, parse_id, IntegrandSpec};
use gamma_od::montecarlo::{ExperimentConfig, Mode};
use gamma_od::rng::PathSeed;
use proptest::prelude::*;

fn catalog_ids() -> Vec<&'static str> {
    catalog_entries().into_iter().map(|e| e.id).collect()
}

fn monotone_ids() -> Vec<&'static str> {
    catalog_ids().into_iter().filter(|id| parse_id(id).unwrap().monotone().is_monotone()).collect()
}

fn ln_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn catalog_ids_round_trip(i in 0usize..64) {
        let ids = catalog_ids();
        let id = ids[i % ids.len()];
        let f = parse_id(id).unwrap();
        let again = parse_id(&f.to_string()).unwrap();
        prop_assert_eq!(&again, &f);
        prop_assert_eq!(again.to_string(), f.to_string());
    }

    #[test]
    fn path_deltas_add_up(master in any::<u64>(), t in 0.5f64..40.0, h in 0.05f64..1.0) {
        let path = sample_lattice_path(t, h, PathSeed::new(master)).unwrap();
        let n = path.deltas().len();
        prop_assert_eq!(n, path.grid().cells());
        let total: f64 = path.deltas().iter().sum();
        prop_assert_eq!(total, path.total());
        prop_assert_eq!(path.mass_upto(path.horizon()), Some(total));
        prop_assert!(path.deltas().iter().all(|d| *d >= 0.0 && d.is_finite()));
        let fine = refine(&path);
        let fine_total: f64 = fine.deltas().iter().sum();
        prop_assert!((fine_total - total).abs() <= 1e-12 * total.max(1.0));
    }

    #[test]
    fn extension_keeps_materialized_cells(master in any::<u64>(), t in 1.0f64..20.0, extra in 0.1f64..20.0, h in 0.1f64..1.0) {
        let seed = PathSeed::new(master);
        let short = sample_lattice_path(t, h, seed).unwrap();
        let long = extend_path(&short, t + extra).unwrap();
        prop_assert_eq!(&long.deltas()[..short.deltas().len()], short.deltas());
        prop_assert_eq!(&long.grid().nodes()[..short.grid().nodes().len()], short.grid().nodes());
        let again = sample_lattice_path(t, h, seed).unwrap();
        prop_assert_eq!(again.deltas(), short.deltas());
    }

    #[test]
    fn monotone_estimates_are_bracketed(i in 0usize..64, master in any::<u64>(), t in 2.0f64..60.0, h in 0.05f64..0.5) {
        let ids = monotone_ids();
        let f = parse_id(ids[i % ids.len()]).unwrap();
        let path = sample_increments(Grid::uniform(t, h).unwrap(), PathSeed::new(master));
        let est = integral_estimate(&f, &path);
        let br = integral_bracket(&f, &path, false).unwrap();
        let slack = 1e-12 * br.upper.abs().max(1e-300);
        prop_assert!(br.lower - slack <= est && est <= br.upper + slack, "{} {} {:?}", f, est, br);
    }

    #[test]
    fn lambda_is_additive(i in 0usize..64, a in 0.0f64..50.0, w1 in 0.01f64..50.0, w2 in 0.01f64..50.0) {
        let ids = catalog_ids();
        let f = parse_id(ids[i % ids.len()]).unwrap();
        let (b, c) = (a + w1, a + w1 + w2);
        let l = |x: f64, y: f64| ln_increment(&f, 1.0, x, y, DEFAULT_TOL).unwrap();
        let (ab, bc, ac) = (l(a, b), l(b, c), l(a, c));
        let sum = ln_add(ab, bc);
        if ac.is_finite() {
            prop_assert!((sum - ac).abs() <= 1e-7 * ac.abs().max(1.0), "{}: {} vs {}", f, sum, ac);
        } else {
            prop_assert_eq!(sum, ac);
        }
    }

    #[test]
    fn v_is_the_exact_variance(i in 0usize..64, t in 2.0f64..500.0) {
        let ids = catalog_ids();
        let f = parse_id(ids[i % ids.len()]).unwrap();
        let s = diagnostic_series(&f, &[t]).unwrap();
        match exact_central_moments(&f, t, 2, DEFAULT_TOL) {
            Ok(m) => prop_assert!((m[0] - s.v[0]).abs() <= 1e-12 * s.v[0].max(1.0), "{}: {} vs {}", f, m[0], s.v[0]),
            Err(_) => prop_assert!(s.v[0].is_infinite()),
        }
    }

    #[test]
    fn diagnostics_are_scale_invariant(i in 0usize..64, c in 0.01f64..100.0, t in 2.0f64..1e4) {
        let ids = catalog_ids();
        let f = parse_id(ids[i % ids.len()]).unwrap();
        let g = IntegrandSpec::scaled(c, f.clone()).unwrap();
        let (sf, sg) = (diagnostic_series(&f, &[t]).unwrap(), diagnostic_series(&g, &[t]).unwrap());
        let close = |x: f64, y: f64| x == y || (x - y).abs() <= 1e-9 * x.abs().max(1e-300);
        prop_assert!(close(sf.v[0], sg.v[0]) && close(sf.b[0], sg.b[0]) && close(sf.ell[0], sg.ell[0]), "{}", f);
    }

    #[test]
    fn geometric_ranges_have_the_asked_length(a in 0.1f64..100.0, r in 1.5f64..1e4, n in 2usize..200) {
        let ts = parse_t_range(&format!("{a}:{}:geom{n}", a * r)).unwrap();
        prop_assert_eq!(ts.len(), n);
        prop_assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn reruns_are_bit_identical(master in any::<u64>(), mode in prop::sample::select(vec![Mode::Wlln, Mode::Lp, Mode::Slln, Mode::Bridge])) {
        let mut cfg = ExperimentConfig::new(mode, "power:1", &[5.0, 20.0]);
        cfg.replicates = 100;
        cfg.master_seed = master;
        let (a, b) = (cfg.run().unwrap(), cfg.run().unwrap());
        prop_assert_eq!(a.to_json(), b.to_json());
        prop_assert_eq!(a.to_csv(), b.to_csv());
    }
}
