use dqd_core::bath::BathSample;
use dqd_core::expfit::{fit_exponentials, fit_lorentzian_spectral, ExpFit, LagGrid, LorFit};
use dqd_core::{Error, ModelParams, C64};

fn samples(grid: LagGrid, f: impl Fn(f64) -> C64) -> Vec<BathSample> {
    (0..grid.points)
        .map(|k| {
            let tau = grid.step() * k as f64;
            BathSample { tau, value: f(tau) }
        })
        .collect()
}

#[test]
fn recovers_synthetic_exponentials() {
    let terms = [(C64::new(0.7, -0.1), C64::new(-0.3, 1.1)), (C64::new(0.2, 0.0), C64::new(-0.05, 0.0))];
    let truth = ExpFit { terms: terms.to_vec(), residual: 0.0 };
    let data = samples(LagGrid::TRAINING, |t| truth.eval(t));
    let fit = fit_exponentials(&data, 1e-8, 8).unwrap();
    assert!(fit.residual <= 1e-8, "residual {}", fit.residual);
    assert_eq!(fit.len(), 2);
    for (a, g) in &terms {
        assert!(fit.terms.iter().any(|(fa, fg)| (fa - a).norm() < 1e-6 && (fg - g).norm() < 1e-6));
    }
    assert!(fit.terms.iter().all(|(_, g)| g.re < 0.0));
    let held = samples(LagGrid::TRAINING.refined(), |t| truth.eval(t));
    assert!(fit.relative_residual(&held) <= 1e-8);
}

#[test]
fn zero_kernel_gives_empty_fit() {
    let data = samples(LagGrid { tau_max: 10.0, points: 64 }, |_| C64::new(0.0, 0.0));
    assert!(fit_exponentials(&data, 1e-4, 4).unwrap().is_empty());
}

#[test]
fn unreachable_tolerance_reports_the_curve() {
    let data = samples(LagGrid { tau_max: 20.0, points: 400 }, |t| C64::new((-(t - 8.0).powi(2)).exp(), 0.0));
    match fit_exponentials(&data, 1e-10, 2) {
        Err(Error::Fit { best_residual, tol, curve, .. }) => {
            assert!(best_residual > tol);
            assert_eq!(curve.len(), 2);
        }
        other => panic!("expected a fit failure, got {other:?}"),
    }
    assert!(fit_exponentials(&data[..3], 1e-3, 2).is_err());
}

#[test]
fn expfit_text_round_trips() {
    let fit = ExpFit {
        terms: vec![(C64::new(0.1, -2e-3), C64::new(-1.5, 0.25)), (C64::new(-3e-5, 7.0), C64::new(-1e-3, -0.5))],
        residual: 4.2e-5,
    };
    let text = fit.to_text("c11");
    let (name, back) = ExpFit::from_text(&text).unwrap();
    assert_eq!(name, "c11");
    assert_eq!(back, fit);
    assert_eq!(back.to_text("c11"), text);
    assert!((fit.slowest_time() - 1000.0).abs() < 1e-9);
}

#[test]
fn expfit_text_rejects_growth_and_bad_counts() {
    let growing = "expfit v1 k 1 0e0\n1e0 0e0 0e0 1e0\n";
    assert!(ExpFit::from_text(growing).is_err());
    let short = "expfit v1 k 2 0e0\n1e0 0e0 -1e0 1e0\n";
    assert!(ExpFit::from_text(short).is_err());
    assert!(ExpFit::from_text("lorfit v1\n").is_err());
}

#[test]
fn lorentzian_fit_tracks_the_smooth_density() {
    let p = ModelParams::reference();
    let lor = fit_lorentzian_spectral(&p, 12, 200.0, 1e-3).unwrap();
    assert!(!lor.terms.is_empty() && lor.terms.len() <= 12);
    assert!(lor.residual <= 1e-3);
    let c = p.cutoff;
    for &w in &[0.05, 0.5, 1.0, 3.0, 20.0] {
        let target = 0.5 * p.coupling * w * c * c / (w * w + c * c);
        assert!((lor.eval(w) - target).abs() <= 1e-3 * target, "w = {w}");
    }
    let back = LorFit::from_text(&lor.to_text()).unwrap();
    assert_eq!(back, lor);
}
