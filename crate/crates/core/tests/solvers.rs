use std::f64::consts::PI;

use dqd_core::dynamics::{closed_system_populations, final_state, integrate, uniform_times, Dynamics};
use dqd_core::expfit::ExpFit;
use dqd_core::ode::OdeOptions;
use dqd_core::ops::{I, ONE, ZERO};
use dqd_core::polaron::{
    integrate_polaron, integrate_polaron_frozen, polaron_rhs, population_right, PolaronSolver, PolaronState,
};
use dqd_core::weak::{integrate_weak, weak_rhs, WeakSolver, WeakState};
use dqd_core::{ModelParams, Op2, C64};

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn weak_kernel() -> ExpFit {
    ExpFit { terms: vec![(c(0.05, -0.02), c(-0.5, 1.3)), (c(0.03, 0.01), c(-0.2, -0.7)), (c(0.01, 0.0), c(-40.0, 0.0))], residual: 0.0 }
}

fn polaron_kernels() -> (ExpFit, ExpFit) {
    let x = ExpFit { terms: vec![(c(0.04, 0.01), c(-0.4, 0.9)), (c(0.02, -0.03), c(-1.1, -0.2))], residual: 0.0 };
    let y = ExpFit { terms: vec![(c(-0.1, 0.02), c(-0.6, -0.3)), (c(0.03, 0.0), c(-0.15, 0.0))], residual: 0.0 };
    (x, y)
}

fn closed(bias: f64) -> ModelParams {
    ModelParams { coupling: 0.0, ..ModelParams::reference().with_bias(bias) }
}

fn pseudo_op(seed: f64) -> Op2 {
    let v = |k: f64| (seed * 12.9898 + k * 78.233).sin();
    Op2::new(c(v(1.0), v(2.0)), c(v(3.0), v(4.0)), c(v(5.0), v(6.0)), c(v(7.0), v(8.0)))
}

fn pseudo_density(seed: f64) -> Op2 {
    let a = pseudo_op(seed);
    let h = a * a.adjoint();
    h.scale_re(1.0 / h.trace().re)
}

fn max_population_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn uncoupled_methods_follow_the_closed_system() {
    let p = closed(0.7);
    let times = uniform_times(500.0, 1000);
    let oracle = closed_system_populations(&p, [ONE, ZERO], &times, 1e-4).unwrap();
    let empty = ExpFit::default();
    let weak = integrate_weak(&p, &empty, &Op2::LEFT, &times, 1e-10, 1e-12).unwrap();
    let pol = integrate_polaron(&p, 1.0, &empty, &empty, &Op2::LEFT, &times, 1e-10, 1e-12).unwrap();
    for traj in [&weak, &pol] {
        let pops: Vec<f64> = traj.points.iter().map(|pt| pt.population_right).collect();
        assert!(max_population_gap(&pops, &oracle) <= 1e-6);
    }
}

#[test]
fn rabi_transfer_at_half_period() {
    let p = ModelParams { drive_amplitude: 0.0, ..closed(0.0) };
    let t = PI / p.tunneling;
    let traj = integrate_weak(&p, &ExpFit::default(), &Op2::LEFT, &[0.0, 0.5 * t, t], 1e-11, 1e-13).unwrap();
    let pops: Vec<f64> = traj.points.iter().map(|pt| pt.population_right).collect();
    assert!(pops[0].abs() < 1e-15);
    assert!((pops[1] - 0.5).abs() < 1e-8);
    assert!((pops[2] - 1.0).abs() < 1e-8);
}

#[test]
fn weak_rhs_structure() {
    let p = ModelParams::reference().with_bias(0.8);
    let fit = weak_kernel();
    let rho = pseudo_op(1.0);
    let start = WeakState { rho, aux: vec![Op2::ZERO; 3], t: 0.0 };
    let d = weak_rhs(&start, &p, &fit);
    for (k, (alpha, _)) in d.aux.iter().zip(&fit.terms) {
        assert_eq!(*k, (Op2::SIGMA_Z * rho).scale(-I * alpha));
    }
    for s in 0..10 {
        let st = WeakState {
            rho: pseudo_op(s as f64),
            aux: (0..3).map(|m| pseudo_op(100.0 + s as f64 * 3.0 + m as f64)).collect(),
            t: 0.37 * s as f64,
        };
        assert!(weak_rhs(&st, &p, &fit).rho.trace().norm() < 1e-14);
        let h = WeakState { rho: pseudo_density(s as f64), ..st };
        assert!(weak_rhs(&h, &p, &fit).rho.herm_defect() < 1e-14);
    }
}

#[test]
fn weak_solver_agrees_with_the_explicit_form() {
    let p = ModelParams::reference().with_bias(1.1);
    let fit = weak_kernel();
    let solver = WeakSolver::new(p, &fit, f64::INFINITY);
    assert_eq!(solver.explicit_terms(), 3);
    let mut y = Vec::new();
    for m in 0..4 {
        y.extend_from_slice(&pseudo_op(7.0 + m as f64).0);
    }
    let mut dy = vec![ZERO; y.len()];
    solver.rhs(2.5, &y, &mut dy);
    let explicit = weak_rhs(&solver.unpack(2.5, &y), &p, &fit);
    assert!((Op2([dy[0], dy[1], dy[2], dy[3]]) - explicit.rho).max_abs() < 1e-14);
    for (m, k) in explicit.aux.iter().enumerate() {
        let o = 4 + 4 * m;
        assert!((Op2([dy[o], dy[o + 1], dy[o + 2], dy[o + 3]]) - *k).max_abs() < 1e-14);
    }
    assert_eq!(WeakSolver::new(p, &fit, 25.0).explicit_terms(), 2);
}

#[test]
fn weak_trajectory_invariants_and_linearity() {
    let p = ModelParams::reference().with_bias(0.9);
    let fit = weak_kernel();
    let times = uniform_times(60.0, 120);
    let run = |rho: &Op2| integrate_weak(&p, &fit, rho, &times, 1e-10, 1e-12).unwrap();
    let (a, b) = (run(&Op2::LEFT), run(&Op2::RIGHT));
    let mix = run(&Op2::diag(0.3, 0.7));
    for ((x, y), z) in a.points.iter().zip(&b.points).zip(&mix.points) {
        assert!((z.population_right - (0.3 * x.population_right + 0.7 * y.population_right)).abs() < 1e-8);
        for pt in [x, y, z] {
            assert!((pt.trace - 1.0).norm() < 1e-8);
            assert!(pt.herm_defect < 1e-8);
        }
    }
}

#[test]
fn static_weak_generator_is_a_semigroup() {
    let p = ModelParams { drive_amplitude: 0.0, ..ModelParams::reference().with_bias(0.9) };
    let solver = WeakSolver::new(p, &weak_kernel(), 25.0);
    let opts = OdeOptions::new(1e-11, 1e-13);
    let y0 = solver.initial_state(&Op2::LEFT);
    let direct = final_state(&solver, &y0, 0.0, 30.0, opts).unwrap();
    let mid = final_state(&solver, &y0, 0.0, 12.0, opts).unwrap();
    let shifted = final_state(&solver, &mid, 0.0, 18.0, opts).unwrap();
    let gap = direct.iter().zip(&shifted).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    assert!(gap < 1e-7, "gap {gap:e}");
}

#[test]
fn halving_rtol_is_self_consistent() {
    let p = ModelParams::reference().with_bias(0.95);
    let fit = weak_kernel();
    let rtol = 1e-7;
    let end = |r: f64| integrate_weak(&p, &fit, &Op2::LEFT, &[80.0], r, 1e-3 * r).unwrap().points[0].population_right;
    assert!((end(rtol) - end(0.5 * rtol)).abs() < 10.0 * rtol);
}

#[test]
fn polaron_rhs_structure() {
    let p = ModelParams::reference().with_bias(0.6);
    let (fx, fy) = polaron_kernels();
    let eta = 0.67;
    let rho = pseudo_density(3.0);
    let start = PolaronState { rho, aux_x: vec![Op2::ZERO; 2], aux_y: vec![Op2::ZERO; 2], t: 0.0 };
    let d = polaron_rhs(&start, &p, eta, &fx, &fy).unwrap();
    let half = 0.5 * p.tunneling_at(0.0);
    for (dd, (alpha, _)) in d.aux_x.iter().zip(&fx.terms) {
        assert_eq!(*dd, Op2::SIGMA_X.scale(I * alpha * half));
    }
    for (dd, (alpha, _)) in d.aux_y.iter().zip(&fy.terms) {
        assert_eq!(*dd, Op2::SIGMA_Y.scale(I * alpha * half));
    }
    for s in 0..10 {
        let st = PolaronState {
            rho: pseudo_op(s as f64),
            aux_x: (0..2).map(|m| pseudo_op(50.0 + s as f64 + 0.1 * m as f64)).collect(),
            aux_y: (0..2).map(|m| pseudo_op(80.0 + s as f64 + 0.1 * m as f64)).collect(),
            t: 0.9 * s as f64,
        };
        assert!(polaron_rhs(&st, &p, eta, &fx, &fy).unwrap().rho.trace().norm() < 1e-14);
        let h = PolaronState { rho: pseudo_density(s as f64), ..st };
        assert!(polaron_rhs(&h, &p, eta, &fx, &fy).unwrap().rho.herm_defect() < 1e-14);
    }
    assert!(polaron_rhs(&start, &p, 1.2, &fx, &fy).is_err());
}

#[test]
fn polaron_solver_agrees_with_the_explicit_form() {
    let p = ModelParams::reference().with_bias(1.3);
    let (fx, fy) = polaron_kernels();
    let solver = PolaronSolver::new(p, 0.7, &fx, &fy, f64::INFINITY).unwrap();
    let mut y = Vec::new();
    for m in 0..5 {
        y.extend_from_slice(&pseudo_op(20.0 + m as f64).0);
    }
    let mut dy = vec![ZERO; y.len()];
    solver.rhs(1.7, &y, &mut dy);
    let op = |o: usize, v: &[C64]| Op2([v[o], v[o + 1], v[o + 2], v[o + 3]]);
    let st = PolaronState { rho: op(0, &y), aux_x: vec![op(4, &y), op(8, &y)], aux_y: vec![op(12, &y), op(16, &y)], t: 1.7 };
    let explicit = polaron_rhs(&st, &p, 0.7, &fx, &fy).unwrap();
    let blocks = [explicit.rho, explicit.aux_x[0], explicit.aux_x[1], explicit.aux_y[0], explicit.aux_y[1]];
    for (k, b) in blocks.iter().enumerate() {
        assert!((op(4 * k, &dy) - *b).max_abs() < 1e-14);
    }
}

#[test]
fn pure_dephasing_keeps_populations() {
    let p = ModelParams { tunneling: 0.0, drive_amplitude: 0.0, ..ModelParams::reference().with_bias(0.8) };
    let (fx, fy) = polaron_kernels();
    let rho0 = pseudo_density(5.0);
    let times = uniform_times(1000.0, 50);
    let traj = integrate_polaron(&p, 0.67, &fx, &fy, &rho0, &times, 1e-10, 1e-12).unwrap();
    for pt in &traj.points {
        assert!((pt.population_right - rho0.0[3].re).abs() < 1e-10);
    }
}

#[test]
fn frozen_and_joint_polaron_integration_agree() {
    let p = ModelParams::reference().with_bias(0.95);
    let (fx, fy) = polaron_kernels();
    let solver = PolaronSolver::new(p, 0.67, &fx, &fy, 25.0).unwrap();
    let times = uniform_times(100.0, 200);
    let opts = OdeOptions::new(1e-10, 1e-12);
    let joint = integrate(&solver, &Op2::LEFT, &times, opts).unwrap();
    let frozen = integrate_polaron_frozen(&solver, &Op2::LEFT, &times, opts).unwrap();
    let pops = |t: &dqd_core::dynamics::Trajectory| t.points.iter().map(|pt| pt.population_right).collect::<Vec<_>>();
    assert!(max_population_gap(&pops(&joint), &pops(&frozen)) < 1e-6);
    for pt in &joint.points {
        assert!((pt.trace - 1.0).norm() < 1e-8 && pt.herm_defect < 1e-8);
    }
}

#[test]
fn unit_renormalization_reproduces_the_lab_frame() {
    let p = closed(1.1);
    let empty = ExpFit::default();
    let times = uniform_times(40.0, 80);
    let weak = integrate_weak(&p, &empty, &Op2::LEFT, &times, 1e-11, 1e-13).unwrap();
    let pol = integrate_polaron(&p, 1.0, &empty, &empty, &Op2::LEFT, &times, 1e-11, 1e-13).unwrap();
    for (a, b) in weak.points.iter().zip(&pol.points) {
        assert!((a.population_right - b.population_right).abs() < 1e-12);
    }
}

#[test]
fn right_population_readout() {
    assert_eq!(population_right(&Op2::RIGHT), 1.0);
    assert_eq!(population_right(&Op2::LEFT), 0.0);
    assert_eq!(population_right(&Op2::IDENTITY.scale_re(0.5)), 0.5);
}
