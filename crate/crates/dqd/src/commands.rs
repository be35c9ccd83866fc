//! Subcommand bodies. Each returns the text it printed so callers and
//! tests can inspect it.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use dqd_core::bath::{self, gamma_estimate};
use dqd_core::dynamics::{closed_system_populations, integrate, uniform_times, Trajectory};
use dqd_core::ode::OdeOptions;
use dqd_core::pipeline::{certify, fit_bath, BathFits, Kernel};
use dqd_core::steady::{asymmetry_report, SteadyResult};
use dqd_core::{ModelParams, Op2, C64};

use crate::artifacts;
use crate::config::{Method, MethodChoice, RunConfig};
use crate::error::CliError;
use crate::sweep::{run_point, sweep, to_csv, SweepRow};

/// Margin in `max(Ω₀, |δ|) ≥ threshold·Γ`.
pub const WEAK_COUPLING_THRESHOLD: f64 = 10.0;

fn write_output(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Metadata of a fitted bath for the configured model.
pub fn fit_metadata(cfg: &RunConfig, fits: &BathFits) -> String {
    let p = &cfg.params;
    let here = gamma_estimate(p, WEAK_COUPLING_THRESHOLD);
    let mut out = artifacts::meta_text(fits);
    let _ = writeln!(out, "gamma = {:.16e}", here.gamma);
    let _ = writeln!(out, "weak_coupling_ok = {}", here.weak_coupling_ok);
    if let Some(res) = p.resonant_bias() {
        let at_res = gamma_estimate(&p.with_bias(res), WEAK_COUPLING_THRESHOLD);
        let _ = writeln!(out, "resonant_bias = {res:.16e}");
        let _ = writeln!(out, "weak_coupling_ok_at_resonance = {}", at_res.weak_coupling_ok);
    }
    out
}

/// Fits the bath, replaces its cache entry and writes the metadata to the
/// output path.
pub fn cmd_fit_bath(cfg: &RunConfig, cache_dir: &Path) -> Result<String, CliError> {
    let s = cfg.fit_settings();
    let fits = fit_bath(&cfg.params, &s)?;
    let dir = artifacts::entry_dir(cache_dir, &cfg.params, &s);
    artifacts::store(&dir, &fits)?;
    let mut meta = format!("artifacts = {}\n", dir.display());
    meta.push_str(&fit_metadata(cfg, &fits));
    write_output(&cfg.output_path, &meta)?;
    Ok(meta)
}

fn load_fits(cfg: &RunConfig, cache_dir: &Path) -> Result<BathFits, CliError> {
    artifacts::load_or_fit(cache_dir, &cfg.params, &cfg.fit_settings())
}

/// Runs the configured bias grid and writes the sweep CSV.
pub fn cmd_sweep(cfg: &RunConfig, cache_dir: &Path) -> Result<String, CliError> {
    let fits = load_fits(cfg, cache_dir)?;
    let rows = sweep(&cfg.params, &fits, &cfg.eps_grid(), cfg.method.methods(), cfg.workers, &cfg.steady_options());
    write_output(&cfg.output_path, &to_csv(&rows))?;
    Ok(sweep_summary(cfg, &rows))
}

fn sweep_summary(cfg: &RunConfig, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for &m in cfg.method.methods() {
        let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.method == m).collect();
        let unconverged = mine.iter().filter(|r| !r.result.converged).count();
        let negative = mine.iter().filter(|r| r.result.positivity_violation()).count();
        let _ = writeln!(out, "{m}: {} points, {unconverged} unconverged, {negative} with negative eigenvalues", mine.len());
        for r in mine.iter().filter(|r| r.failure.is_some()) {
            let _ = writeln!(out, "  epsilon={} failed: {}", r.epsilon, r.failure.as_deref().unwrap_or(""));
        }
        if let Some(res) = cfg.params.resonant_bias() {
            let curve: Vec<(f64, f64)> = mine.iter().map(|r| (r.epsilon, r.result.m0)).collect();
            let a = asymmetry_report(&curve, res, &cfg.shoulder);
            if a.applicable {
                let _ = writeln!(
                    out,
                    "  blue_mean={:.6} red_mean={:.6} shoulder_detected={}",
                    a.blue_mean, a.red_mean, a.shoulder_detected
                );
            }
        }
    }
    out
}

pub const DYNAMICS_HEADER: &str = "t,population_right,trace_re,trace_im,herm_defect,eig_min";

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::from(DYNAMICS_HEADER);
    out.push('\n');
    for pt in &traj.points {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            pt.t, pt.population_right, pt.trace.re, pt.trace.im, pt.herm_defect, pt.eig_min
        );
    }
    out
}

fn single_method(cfg: &RunConfig) -> Result<Method, CliError> {
    match cfg.method {
        MethodChoice::Weak => Ok(Method::Weak),
        MethodChoice::Polaron => Ok(Method::Polaron),
        MethodChoice::Both => Err(CliError::Config("key `method` must be weak or polaron for dynamics".into())),
    }
}

/// Integrates from `|l⟩` at the configured bias and writes the trajectory CSV.
pub fn cmd_dynamics(cfg: &RunConfig, cache_dir: &Path, t_end: f64, samples: usize) -> Result<String, CliError> {
    let method = single_method(cfg)?;
    if !(t_end > 0.0 && t_end.is_finite()) || samples == 0 {
        return Err(CliError::Config("`t_end` must be positive and `samples` at least 1".into()));
    }
    let fits = load_fits(cfg, cache_dir)?;
    let traj = trajectory(&cfg.params, &fits, method, &Op2::LEFT, &uniform_times(t_end, samples), cfg)?;
    write_output(&cfg.output_path, &trajectory_csv(&traj))?;
    let last = traj.points.last().map(|p| p.population_right).unwrap_or(f64::NAN);
    Ok(format!("{method}: {} samples, final population_right = {last:.16e}\n", traj.points.len()))
}

fn trajectory(
    p: &ModelParams,
    fits: &BathFits,
    method: Method,
    rho0: &Op2,
    times: &[f64],
    cfg: &RunConfig,
) -> Result<Trajectory, CliError> {
    let opts = OdeOptions::new(cfg.rtol, cfg.atol);
    Ok(match method {
        Method::Weak => integrate(&fits.weak_solver(*p), rho0, times, opts)?,
        Method::Polaron => integrate(&fits.polaron_solver(*p)?, rho0, times, opts)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

pub fn format_checks(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "{:width$}  {status}  {}", c.name, c.detail);
    }
    out
}

/// Relative agreement, or absolute when the reference vanishes.
fn agrees(value: f64, reference: f64, tol: f64) -> bool {
    (value - reference).abs() <= tol * reference.abs().max(if reference == 0.0 { 1.0 } else { 0.0 })
}

/// Tolerance of the zero-lag bath identities.
pub const IDENTITY_TOL: f64 = 1e-6;
/// Tolerance of the closed-system comparison.
pub const CLOSED_SYSTEM_TOL: f64 = 1e-6;
/// Largest accepted trace or hermiticity defect.
pub const CONSERVATION_TOL: f64 = 1e-8;
/// Span of the closed-system comparison.
pub const CLOSED_SYSTEM_T_END: f64 = 500.0;

fn identity_checks(cfg: &RunConfig, fits: &BathFits) -> Result<Vec<Check>, CliError> {
    let p = &cfg.params;
    let eta = fits.eta;
    let r0 = if p.coupling == 0.0 { C64::new(0.0, 0.0) } else { bath::r_tau(p, 0.0, cfg.quad_tol)? };
    let (c11, c22) = if p.coupling == 0.0 {
        (C64::new(0.0, 0.0), C64::new(0.0, 0.0))
    } else {
        bath::corr_polaron(p, eta, 0.0, cfg.quad_tol)?
    };
    let log_eta = 2.0 * eta.ln();
    let c11_ref = 0.5 * (1.0 - eta * eta).powi(2);
    let c22_ref = 0.5 * (1.0 - eta.powi(4));
    Ok(vec![
        Check::new(
            "eta_identity",
            agrees(r0.re, log_eta, IDENTITY_TOL),
            format!("Re r(0)={:.10e} 2ln(eta)={:.10e}", r0.re, log_eta),
        ),
        Check::new("c11_zero_lag", agrees(c11.re, c11_ref, IDENTITY_TOL), format!("C11(0)={:.10e} expected {c11_ref:.10e}", c11.re)),
        Check::new("c22_zero_lag", agrees(c22.re, c22_ref, IDENTITY_TOL), format!("C22(0)={:.10e} expected {c22_ref:.10e}", c22.re)),
    ])
}

fn closed_system_check(cfg: &RunConfig) -> Result<Check, CliError> {
    let p = ModelParams { coupling: 0.0, ..cfg.params };
    let empty = fit_bath(&p, &cfg.fit_settings())?;
    let times = uniform_times(CLOSED_SYSTEM_T_END, 1000);
    let reference = closed_system_populations(&p, [C64::new(1.0, 0.0), C64::new(0.0, 0.0)], &times, 1e-4)?;
    let mut worst = 0.0f64;
    for method in [Method::Weak, Method::Polaron] {
        let traj = trajectory(&p, &empty, method, &Op2::LEFT, &times, cfg)?;
        for (pt, r) in traj.points.iter().zip(&reference) {
            worst = worst.max((pt.population_right - r).abs());
        }
    }
    Ok(Check::new("closed_system", worst <= CLOSED_SYSTEM_TOL, format!("max deviation {worst:.3e}")))
}

fn steady_checks(cfg: &RunConfig, fits: &BathFits) -> Result<Vec<Check>, CliError> {
    let opts = cfg.steady_options();
    let tol = (10.0 * cfg.steady_tol).max(1e-4);
    let mut checks = Vec::new();
    let mut runs: Vec<SteadyResult> = Vec::new();
    for &method in cfg.method.methods() {
        let from_left = run_point(&cfg.params, fits, method, &Op2::LEFT, &opts)?;
        let from_right = run_point(&cfg.params, fits, method, &Op2::RIGHT, &opts)?;
        let both_converged = from_left.converged && from_right.converged;
        let positive = !from_left.positivity_violation() && !from_right.positivity_violation();
        let applies = both_converged && (method == Method::Polaron || positive);
        let diff = (from_left.m0 - from_right.m0).abs();
        let name = format!("initial_state_{method}");
        checks.push(if applies {
            Check::new(name, diff <= tol, format!("|dM0|={diff:.3e} tol={tol:.1e}"))
        } else {
            Check::new(name, true, format!("skipped: converged={both_converged} positive={positive}"))
        });
        runs.push(from_left);
        runs.push(from_right);
    }
    let trace = runs.iter().map(|r| r.max_trace_defect).fold(0.0, f64::max);
    let herm = runs.iter().map(|r| r.max_herm_defect).fold(0.0, f64::max);
    checks.push(Check::new(
        "conservation",
        trace <= CONSERVATION_TOL && herm <= CONSERVATION_TOL,
        format!("max |tr-1|={trace:.3e} max herm={herm:.3e}"),
    ));
    Ok(checks)
}

/// Runs every check; fails with the names of the failing checks.
pub fn run_checks(cfg: &RunConfig, cache_dir: &Path) -> Result<Vec<Check>, CliError> {
    let s = cfg.fit_settings();
    let mut checks = Vec::new();
    let fits = match load_fits(cfg, cache_dir) {
        Ok(f) => f,
        Err(e @ (CliError::Artifact { .. } | CliError::Numerical(_))) => {
            checks.push(Check::new("fit_certification", false, e.to_string()));
            return Ok(checks);
        }
        Err(e) => return Err(e),
    };
    checks.extend(identity_checks(cfg, &fits)?);
    for k in Kernel::ALL {
        let c = certify(&cfg.params, &fits, k, &s);
        checks.push(Check::new(format!("fit_{}", k.name()), c.passed(), c.describe()));
    }
    checks.push(closed_system_check(cfg)?);
    checks.extend(steady_checks(cfg, &fits)?);
    Ok(checks)
}

pub fn cmd_validate(cfg: &RunConfig, cache_dir: &Path) -> Result<String, CliError> {
    let checks = run_checks(cfg, cache_dir)?;
    let table = format_checks(&checks);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(table)
    } else {
        Err(CliError::Check(format!("{}\n{table}", failed.join(", "))))
    }
}
