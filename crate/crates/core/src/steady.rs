//! Period-by-period relaxation to the driven steady state, and the
//! blue/red asymmetry analysis of bias sweeps.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{Dynamics, TrajectoryPoint};
use crate::error::Error;
use crate::ode::{Dopri5, OdeOptions, OdeStats};
use crate::ops::{Op2, C64, ZERO};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SteadyOptions {
    /// Largest period-to-period change of the average population.
    pub steady_tol: f64,
    pub max_periods: usize,
    /// Trapezoid intervals per drive period.
    pub samples_per_period: usize,
    /// Consecutive periods that must meet `steady_tol`.
    pub consecutive: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            steady_tol: 1e-6,
            max_periods: 2000,
            samples_per_period: 128,
            consecutive: 3,
            rtol: 1e-8,
            atol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyResult {
    /// Period-averaged right-dot population of the final period.
    pub m0: f64,
    pub periods_used: usize,
    pub converged: bool,
    /// Smallest density-matrix eigenvalue over the final period.
    pub min_eig_steady: f64,
    /// Last period-to-period change of the average.
    pub residual: f64,
    /// Largest `|tr ρ − 1|` over every sample of the run.
    pub max_trace_defect: f64,
    /// Largest hermiticity defect over every sample of the run.
    pub max_herm_defect: f64,
    /// Smallest eigenvalue over every sample of the run.
    pub min_eig_run: f64,
    pub stats: OdeStats,
}

impl SteadyResult {
    pub fn positivity_violation(&self) -> bool {
        self.min_eig_steady < 0.0
    }
}

/// Integrates period by period until the period average settles.
pub fn run_to_steady<D: Dynamics>(dynamics: &D, rho0: &Op2, opts: &SteadyOptions) -> Result<SteadyResult, Error> {
    let period = dynamics.params().period();
    let n = opts.samples_per_period.max(1);
    let y0 = dynamics.initial_state(rho0);
    let ode = OdeOptions::new(opts.rtol, opts.atol);
    let mut solver = Dopri5::new(|t, y: &[C64], dy: &mut [C64]| dynamics.rhs(t, y, dy), 0.0, &y0, ode);
    let mut prev_point = TrajectoryPoint::from_density(0.0, &dynamics.density(&y0));
    let mut max_trace = (prev_point.trace - 1.0).norm();
    let mut max_herm = prev_point.herm_defect;
    let mut min_eig_run = prev_point.eig_min;
    let mut prev_avg: Option<f64> = None;
    let mut streak = 0;
    let mut result = SteadyResult {
        m0: f64::NAN,
        periods_used: 0,
        converged: false,
        min_eig_steady: f64::NAN,
        residual: f64::INFINITY,
        max_trace_defect: 0.0,
        max_herm_defect: 0.0,
        min_eig_run: 0.0,
        stats: OdeStats::default(),
    };
    let mut times = Vec::with_capacity(n);
    for k in 0..opts.max_periods {
        let start = period * k as f64;
        times.clear();
        times.extend((1..=n).map(|j| start + period * j as f64 / n as f64));
        let mut integral = 0.0;
        let mut min_eig = prev_point.eig_min;
        let mut last = prev_point;
        solver.advance_to(start + period, &times, |t, y| {
            let pt = TrajectoryPoint::from_density(t, &dynamics.density(y));
            integral += 0.5 * (last.population_right + pt.population_right) * (pt.t - last.t);
            min_eig = min_eig.min(pt.eig_min);
            max_trace = max_trace.max((pt.trace - 1.0).norm());
            max_herm = max_herm.max(pt.herm_defect);
            min_eig_run = min_eig_run.min(pt.eig_min);
            last = pt;
        })?;
        prev_point = last;
        let avg = integral / period;
        result.m0 = avg;
        result.min_eig_steady = min_eig;
        result.periods_used = k + 1;
        if let Some(p) = prev_avg {
            result.residual = (avg - p).abs();
            if result.residual <= opts.steady_tol {
                streak += 1;
            } else {
                streak = 0;
            }
        }
        prev_avg = Some(avg);
        if !avg.is_finite() {
            break;
        }
        if streak >= opts.consecutive {
            result.converged = true;
            break;
        }
    }
    result.max_trace_defect = max_trace;
    result.max_herm_defect = max_herm;
    result.min_eig_run = min_eig_run;
    result.stats = solver.stats();
    Ok(result)
}

/// Stationary state of a time-independent system: solves `f(y) = 0` with
/// a Hermitian unit-trace density, treating the generator as real-linear
/// plus a constant.
///
/// Valid for the weak-coupling system only; the polaron equation is
/// bilinear in `ρ` and the auxiliary operators.
pub fn stationary_state<D: Dynamics>(dynamics: &D) -> Result<Vec<C64>, Error> {
    let n = dynamics.dim();
    let eval = |y: &[C64]| {
        let mut dy = alloc::vec![ZERO; n];
        dynamics.rhs(0.0, y, &mut dy);
        dy
    };
    let zero = alloc::vec![ZERO; n];
    let offset = eval(&zero);
    let rows = 2 * n + 6;
    let mut m = DMatrix::zeros(rows, 2 * n);
    let mut basis = zero.clone();
    for j in 0..2 * n {
        basis[j / 2] = if j % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
        let col = eval(&basis);
        basis[j / 2] = ZERO;
        for i in 0..n {
            let d = col[i] - offset[i];
            m[(2 * i, j)] = d.re;
            m[(2 * i + 1, j)] = d.im;
        }
    }
    let mut rhs = DVector::zeros(rows);
    for i in 0..n {
        rhs[2 * i] = -offset[i].re;
        rhs[2 * i + 1] = -offset[i].im;
    }
    // tr ρ = ρ₀₀ + ρ₁₁; entries 0 and 3 of the state.
    for idx in [0usize, 3] {
        m[(2 * n, 2 * idx)] = 1.0;
        m[(2 * n + 1, 2 * idx + 1)] = 1.0;
    }
    rhs[2 * n] = 1.0;
    // Im ρ₀₀ = Im ρ₁₁ = 0, ρ₀₁ = conj(ρ₁₀).
    m[(2 * n + 2, 1)] = 1.0;
    m[(2 * n + 3, 7)] = 1.0;
    m[(2 * n + 4, 2)] = 1.0;
    m[(2 * n + 4, 4)] = -1.0;
    m[(2 * n + 5, 3)] = 1.0;
    m[(2 * n + 5, 5)] = 1.0;
    let x = m
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|_| Error::Integration { t: 0.0, reason: "stationary solve failed" })?;
    Ok((0..n).map(|i| C64::new(x[2 * i], x[2 * i + 1])).collect())
}

/// Settings of the shoulder detector; all lengths in bias units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymmetryOptions {
    /// Gap excluded around the resonance.
    pub inner: f64,
    /// Half-width of the averaging windows.
    pub outer: f64,
    /// A plateau interval has slope below this fraction of the neighborhood median.
    pub slope_fraction: f64,
    /// Minimum number of consecutive plateau intervals.
    pub run: usize,
    /// Plateau populations must exceed this multiple of the far-detuned baseline.
    pub baseline_factor: f64,
    /// Intervals on each side forming the slope neighborhood.
    pub neighborhood: usize,
}

impl Default for AsymmetryOptions {
    fn default() -> Self {
        AsymmetryOptions { inner: 0.05, outer: 0.35, slope_fraction: 0.2, run: 3, baseline_factor: 2.0, neighborhood: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsymmetryReport {
    pub applicable: bool,
    pub blue_mean: f64,
    pub red_mean: f64,
    pub shoulder_detected: bool,
    /// Mean population over the detected plateau, if any.
    pub plateau_mean: Option<f64>,
    pub baseline: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len() / 2;
    if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) }
}

/// Compares the blue-detuned (`ε < ε*`) and red-detuned sides of a sweep
/// given as ascending `(ε, M0)` pairs.
pub fn asymmetry_report(points: &[(f64, f64)], resonance: f64, opts: &AsymmetryOptions) -> AsymmetryReport {
    let mean_in = |lo: f64, hi: f64| {
        let v: Vec<f64> = points.iter().filter(|(e, _)| *e >= lo && *e <= hi).map(|p| p.1).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let blue = mean_in(resonance - opts.outer, resonance - opts.inner);
    let red = mean_in(resonance + opts.inner, resonance + opts.outer);
    let far: Vec<f64> = points.iter().filter(|(e, _)| (*e - resonance).abs() >= opts.outer).map(|p| p.1).collect();
    let (Some(blue_mean), Some(red_mean)) = (blue, red) else {
        return AsymmetryReport {
            applicable: false,
            blue_mean: f64::NAN,
            red_mean: f64::NAN,
            shoulder_detected: false,
            plateau_mean: None,
            baseline: f64::NAN,
        };
    };
    let baseline = if far.is_empty() {
        points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
    } else {
        median(far)
    };
    let slopes: Vec<f64> = points.windows(2).map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs()).collect();
    let mut best_run: Option<(usize, usize)> = None;
    let mut run_start: Option<usize> = None;
    for i in 0..=slopes.len() {
        let flat = i < slopes.len() && {
            let (a, b) = (points[i], points[i + 1]);
            let in_blue = b.0 <= resonance - opts.inner && a.0 >= resonance - opts.outer;
            let lo = i.saturating_sub(opts.neighborhood);
            let hi = (i + opts.neighborhood + 1).min(slopes.len());
            let local = median(slopes[lo..hi].to_vec());
            let elevated = a.1.min(b.1) > opts.baseline_factor * baseline;
            in_blue && elevated && slopes[i] < opts.slope_fraction * local
        };
        match (flat, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s >= opts.run && best_run.is_none_or(|(bs, be)| i - s > be - bs) {
                    best_run = Some((s, i));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let plateau_mean = best_run.map(|(s, e)| {
        let v = &points[s..=e];
        v.iter().map(|p| p.1).sum::<f64>() / v.len() as f64
    });
    AsymmetryReport {
        applicable: true,
        blue_mean,
        red_mean,
        shoulder_detected: best_run.is_some(),
        plateau_mean,
        baseline,
    }
}
