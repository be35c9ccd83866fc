use dqd_core::expfit::ExpFit;
use dqd_core::steady::{asymmetry_report, run_to_steady, stationary_state, AsymmetryOptions, SteadyOptions};
use dqd_core::weak::WeakSolver;
use dqd_core::{ModelParams, Op2, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn weak_kernel() -> ExpFit {
    ExpFit { terms: vec![(c(0.05, -0.02), c(-0.5, 1.3)), (c(0.03, 0.01), c(-0.2, -0.7))], residual: 0.0 }
}

#[test]
fn closed_system_never_settles() {
    let p = ModelParams { coupling: 0.0, drive_amplitude: 0.0, ..ModelParams::reference().with_bias(0.4) };
    let solver = WeakSolver::new(p, &ExpFit::default(), 25.0);
    let r = run_to_steady(&solver, &Op2::LEFT, &SteadyOptions { max_periods: 200, ..Default::default() }).unwrap();
    assert!(!r.converged);
    assert_eq!(r.periods_used, 200);
    assert!(r.residual > 1e-6);
}

#[test]
fn static_weak_run_reaches_the_stationary_state() {
    let p = ModelParams { drive_amplitude: 0.0, ..ModelParams::reference().with_bias(0.8) };
    let solver = WeakSolver::new(p, &weak_kernel(), 25.0);
    let y = stationary_state(&solver).unwrap();
    let rho = Op2([y[0], y[1], y[2], y[3]]);
    assert!((rho.trace() - 1.0).norm() < 1e-12 && rho.herm_defect() < 1e-12);
    let opts = SteadyOptions { steady_tol: 1e-9, max_periods: 5000, ..Default::default() };
    let r = run_to_steady(&solver, &Op2::LEFT, &opts).unwrap();
    assert!(r.converged);
    assert!(r.residual <= opts.steady_tol);
    assert!((r.m0 - rho.0[3].re).abs() < 1e-6, "{} vs {}", r.m0, rho.0[3].re);
    assert!(r.max_trace_defect < 1e-8 && r.max_herm_defect < 1e-8);
}

#[test]
fn driven_steady_state_forgets_the_initial_state() {
    let p = ModelParams::reference().with_bias(0.95);
    let solver = WeakSolver::new(p, &weak_kernel(), 25.0);
    let opts = SteadyOptions { steady_tol: 1e-8, ..Default::default() };
    let a = run_to_steady(&solver, &Op2::LEFT, &opts).unwrap();
    let b = run_to_steady(&solver, &Op2::RIGHT, &opts).unwrap();
    assert!(a.converged && b.converged, "{a:?} {b:?}");
    assert!((a.m0 - b.m0).abs() < 1e-6);
    assert_eq!(a.positivity_violation(), a.min_eig_steady < 0.0);
}

fn curve(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
    (0..=100).map(|k| 0.5 + 0.01 * k as f64).map(|e| (e, f(e))).collect()
}

fn peak(e: f64) -> f64 {
    0.45 / (1.0 + ((e - 1.0) / 0.02).powi(2))
}

#[test]
fn symmetric_peak_has_no_shoulder() {
    let r = asymmetry_report(&curve(peak), 1.0, &AsymmetryOptions::default());
    assert!(r.applicable);
    assert!((r.blue_mean - r.red_mean).abs() < 1e-12);
    assert!(!r.shoulder_detected);
}

#[test]
fn blue_plateau_is_detected() {
    // Steep blue-side rise with a short flat step, sharper fall on the red side.
    let mut pts = vec![(0.5, 0.02)];
    for k in 1..=100 {
        let (e0, m0) = pts[k - 1];
        let e = 0.5 + 0.01 * k as f64;
        let slope = if e0 < 1.0 { if (0.82..0.86).contains(&e0) { 0.01 } else { 1.0 } } else { -2.0 };
        pts.push((e, (m0 + slope * (e - e0)).max(0.02)));
    }
    let r = asymmetry_report(&pts, 1.0, &AsymmetryOptions::default());
    assert!(r.applicable);
    assert!(r.blue_mean > r.red_mean);
    assert!(r.shoulder_detected);
    let mean = r.plateau_mean.unwrap();
    assert!((mean - 0.34).abs() < 0.01, "plateau mean {mean}");
}

#[test]
fn narrow_grid_is_not_applicable() {
    let pts: Vec<(f64, f64)> = (0..10).map(|k| (0.5 + 0.01 * k as f64, 0.1)).collect();
    let r = asymmetry_report(&pts, 1.0, &AsymmetryOptions::default());
    assert!(!r.applicable && !r.shoulder_detected);
}
