//! Parallel bias sweeps over a shared set of bath fits.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use dqd_core::ode::OdeStats;
use dqd_core::pipeline::BathFits;
use dqd_core::steady::{run_to_steady, SteadyOptions, SteadyResult};
use dqd_core::{Error, ModelParams, Op2};

use crate::config::Method;

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub method: Method,
    pub result: SteadyResult,
    /// Set when the point could not be run at all.
    pub failure: Option<String>,
}

pub const CSV_HEADER: &str = "epsilon_over_w0,method,M0,min_eig_steady,converged,periods_used,residual";

impl SweepRow {
    pub fn csv_line(&self) -> String {
        let r = &self.result;
        format!(
            "{:.16e},{},{:.16e},{:.16e},{},{},{:.16e}",
            self.epsilon, self.method, r.m0, r.min_eig_steady, r.converged, r.periods_used, r.residual
        )
    }
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

fn failed_result() -> SteadyResult {
    SteadyResult {
        m0: f64::NAN,
        periods_used: 0,
        converged: false,
        min_eig_steady: f64::NAN,
        residual: f64::NAN,
        max_trace_defect: f64::NAN,
        max_herm_defect: f64::NAN,
        min_eig_run: f64::NAN,
        stats: OdeStats::default(),
    }
}

/// Steady state of one bias point from `rho0`.
pub fn run_point(
    params: &ModelParams,
    fits: &BathFits,
    method: Method,
    rho0: &Op2,
    opts: &SteadyOptions,
) -> Result<SteadyResult, Error> {
    match method {
        Method::Weak => run_to_steady(&fits.weak_solver(*params), rho0, opts),
        Method::Polaron => run_to_steady(&fits.polaron_solver(*params)?, rho0, opts),
    }
}

/// Runs every `(ε, method)` pair starting from `|l⟩`. Rows come back in
/// ascending `ε`, then in the order of `methods`, whatever the worker count.
pub fn sweep(
    params: &ModelParams,
    fits: &BathFits,
    eps_grid: &[f64],
    methods: &[Method],
    workers: usize,
    opts: &SteadyOptions,
) -> Vec<SweepRow> {
    let jobs: Vec<(f64, Method)> = eps_grid.iter().flat_map(|&e| methods.iter().map(move |&m| (e, m))).collect();
    let slots: Vec<Mutex<Option<SweepRow>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        let Some(&(epsilon, method)) = jobs.get(i) else { break };
        let p = params.with_bias(epsilon);
        let row = match run_point(&p, fits, method, &Op2::LEFT, opts) {
            Ok(result) => SweepRow { epsilon, method, result, failure: None },
            Err(e) => SweepRow { epsilon, method, result: failed_result(), failure: Some(e.to_string()) },
        };
        *slots[i].lock().unwrap() = Some(row);
    };
    let n = workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 1..n {
            s.spawn(worker);
        }
        worker();
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every job runs")).collect()
}
