use dqd::config::Method;
use dqd::sweep::{sweep, to_csv, CSV_HEADER};
use dqd_core::expfit::ExpFit;
use dqd_core::pipeline::BathFits;
use dqd_core::steady::SteadyOptions;
use dqd_core::{ModelParams, C64};

fn relaxing_fits() -> BathFits {
    let fit = |a: f64, g: f64| ExpFit { terms: vec![(C64::new(a, 0.0), C64::new(g, 0.0))], residual: 0.0 };
    BathFits {
        eta: 0.8,
        eta_second_order: 0.8,
        lorfit: Default::default(),
        weak: ExpFit { terms: vec![(C64::new(0.05, -0.02), C64::new(-0.5, 1.3))], residual: 0.0 },
        c11: fit(0.06, -0.5),
        c22: fit(0.2, -0.8),
    }
}

fn grid() -> Vec<f64> {
    vec![0.8, 0.9887, 1.2]
}

fn opts() -> SteadyOptions {
    SteadyOptions { max_periods: 300, ..Default::default() }
}

#[test]
fn rows_cover_every_point_and_method_in_order() {
    let p = ModelParams::reference();
    let rows = sweep(&p, &relaxing_fits(), &grid(), &[Method::Weak, Method::Polaron], 2, &opts());
    assert_eq!(rows.len(), 6);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r.epsilon, grid()[i / 2]);
        assert_eq!(r.method, if i % 2 == 0 { Method::Weak } else { Method::Polaron });
        assert!(r.failure.is_none());
        assert!(r.result.m0.is_finite());
    }
    let csv = to_csv(&rows);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("8.0000000000000004e-1,weak,"));
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let p = ModelParams::reference();
    let fits = relaxing_fits();
    let run = |w| to_csv(&sweep(&p, &fits, &grid(), &[Method::Weak, Method::Polaron], w, &opts()));
    assert_eq!(run(1), run(8));
}

#[test]
fn failures_stay_in_their_row() {
    let p = ModelParams::reference();
    let bad = BathFits { eta: 1.5, ..relaxing_fits() };
    let rows = sweep(&p, &bad, &grid(), &[Method::Weak, Method::Polaron], 1, &opts());
    assert_eq!(rows.len(), 6);
    for r in rows.iter().filter(|r| r.method == Method::Polaron) {
        assert!(r.failure.as_deref().unwrap().contains("eta"));
        assert!(!r.result.converged && r.result.m0.is_nan());
    }
    assert!(rows.iter().filter(|r| r.method == Method::Weak).all(|r| r.failure.is_none()));
}
