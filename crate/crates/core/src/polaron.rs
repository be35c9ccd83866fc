//! Full-polaron master equation in the transformed frame.
//!
//! With `σ₁ = σ_x`, `σ₂ = σ_y` and one auxiliary operator per exponential
//! of `C₁₁` and `C₂₂`:
//!
//! ```text
//! dρ/dt     = −i[H'(t), ρ] + Σᵢ Σₘ i(Δ(t)/2)[σᵢ, Dᵢₘρ + ρDᵢₘ†]
//! dDᵢₘ/dt  = −i[H'(t), Dᵢₘ] + γᵢₘDᵢₘ + iαᵢₘ(Δ(t)/2)σᵢ,   Dᵢₘ(0) = 0
//! ```
//!
//! The auxiliary operators do not depend on `ρ`, so they can also be
//! integrated first and replayed from their dense output.

use alloc::vec::Vec;

use num_traits::Float;

use crate::dynamics::{self, liouville, op_at, pauli_coeffs, put_op, split_terms, Dynamics, FastTerms, Trajectory, TrajectoryPoint};
use crate::error::Error;
use crate::expfit::ExpFit;
use crate::model::{check_eta, ModelParams};
use crate::ode::{DenseStep, Dopri5, OdeOptions};
use crate::ops::{Op2, C64, I, ZERO};

/// Polaron-frame density matrix and the auxiliary operators of both channels.
#[derive(Clone, Debug, PartialEq)]
pub struct PolaronState {
    pub rho: Op2,
    pub aux_x: Vec<Op2>,
    pub aux_y: Vec<Op2>,
    pub t: f64,
}

/// `i·c·[σ, A·ρ + ρ·A†]`
#[inline]
fn dissipator(sigma: &Op2, a: &Op2, rho: &Op2, c: f64) -> Op2 {
    let m = *a * *rho + *rho * a.adjoint();
    sigma.commutator(&m).scale(I * c)
}

/// Time derivative of the full state, with every kernel term explicit.
pub fn polaron_rhs(
    state: &PolaronState,
    p: &ModelParams,
    eta: f64,
    fit_x: &ExpFit,
    fit_y: &ExpFit,
) -> Result<PolaronState, Error> {
    let h = p.polaron_hamiltonian(eta, state.t)?;
    let lh = |x: &Op2| h.commutator(x).scale(-I);
    let half = 0.5 * p.tunneling_at(state.t);
    let mut rho_dot = lh(&state.rho);
    let mut channel = |sigma: &Op2, aux: &[Op2], fit: &ExpFit| -> Vec<Op2> {
        let mut sum = Op2::ZERO;
        for d in aux {
            sum += *d;
        }
        rho_dot += dissipator(sigma, &sum, &state.rho, half);
        aux.iter()
            .zip(&fit.terms)
            .map(|(d, (alpha, gamma))| lh(d) + d.scale(*gamma) + sigma.scale(I * alpha * half))
            .collect()
    };
    let aux_x = channel(&Op2::SIGMA_X, &state.aux_x, fit_x);
    let aux_y = channel(&Op2::SIGMA_Y, &state.aux_y, fit_y);
    // The time component advances at unit rate.
    Ok(PolaronState { rho: rho_dot, aux_x, aux_y, t: 1.0 })
}

/// Right-dot population; the projector commutes with the polaron dressing.
pub fn population_right(rho: &Op2) -> f64 {
    rho.0[3].re
}

#[derive(Clone, Debug)]
struct Channel {
    sigma: Op2,
    slow: Vec<(C64, C64)>,
    fast: FastTerms,
}

/// Polaron-frame system with the fastest kernel terms eliminated
/// adiabatically. Layout: `ρ`, then the explicit `D₁ₘ`, then the explicit `D₂ₘ`.
#[derive(Clone, Debug)]
pub struct PolaronSolver {
    params: ModelParams,
    eta: f64,
    channels: [Channel; 2],
}

impl PolaronSolver {
    pub fn new(params: ModelParams, eta: f64, fit_x: &ExpFit, fit_y: &ExpFit, rate_cut: f64) -> Result<Self, Error> {
        check_eta(eta)?;
        let channel = |sigma: Op2, fit: &ExpFit| {
            let (slow, fast) = split_terms(&fit.terms, rate_cut);
            Channel { sigma, slow, fast: FastTerms::new(fast) }
        };
        Ok(PolaronSolver { params, eta, channels: [channel(Op2::SIGMA_X, fit_x), channel(Op2::SIGMA_Y, fit_y)] })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn explicit_terms(&self) -> usize {
        self.channels.iter().map(|c| c.slow.len()).sum()
    }

    fn aux_offset(&self, channel: usize) -> usize {
        4 + if channel == 0 { 0 } else { 4 * self.channels[0].slow.len() }
    }

    /// Derivatives of the auxiliary block only; returns the summed
    /// operators `Aᵢ = Σₘ Dᵢₘ` including the eliminated terms.
    fn aux_rhs(&self, t: f64, a: f64, b: f64, y: &[C64], dy: &mut [C64]) -> [Op2; 2] {
        let p = &self.params;
        let half = 0.5 * p.tunneling_at(t);
        let w = p.drive_frequency;
        let half_dot = p.drive_amplitude * w * (w * t).sin();
        let mut sums = [Op2::ZERO; 2];
        for (ci, ch) in self.channels.iter().enumerate() {
            let base = self.aux_offset(ci);
            let source = ch.sigma.scale(I * half);
            let mut sum = Op2::ZERO;
            for (m, (alpha, gamma)) in ch.slow.iter().enumerate() {
                let off = base + 4 * m;
                let d = op_at(y, off);
                sum += d;
                let dd = liouville(a, b, &d) + d.scale(*gamma) + source.scale(*alpha);
                put_op(dy, off, &dd);
            }
            if !ch.fast.is_empty() {
                sum += ch.fast.response(a, b, &source, &ch.sigma.scale(I * half_dot));
            }
            sums[ci] = sum;
        }
        sums
    }

    fn coeffs(&self, t: f64) -> (f64, f64) {
        pauli_coeffs(self.params.bias, self.eta * self.params.tunneling_at(t))
    }

    fn rho_rhs(&self, t: f64, a: f64, b: f64, rho: &Op2, sums: &[Op2; 2]) -> Op2 {
        let half = 0.5 * self.params.tunneling_at(t);
        let mut d = liouville(a, b, rho);
        for (ch, s) in self.channels.iter().zip(sums) {
            d += dissipator(&ch.sigma, s, rho, half);
        }
        d
    }
}

impl Dynamics for PolaronSolver {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn dim(&self) -> usize {
        4 * (1 + self.explicit_terms())
    }

    fn initial_state(&self, rho0: &Op2) -> Vec<C64> {
        let mut y = dynamics::zero_state(self.dim());
        put_op(&mut y, 0, rho0);
        y
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let (a, b) = self.coeffs(t);
        let sums = self.aux_rhs(t, a, b, y, dy);
        let d = self.rho_rhs(t, a, b, &op_at(y, 0), &sums);
        put_op(dy, 0, &d);
    }
}

/// Trajectory from `rho0` with `Dᵢₘ(0) = 0`, sampled at `times`.
#[allow(clippy::too_many_arguments)]
pub fn integrate_polaron(
    p: &ModelParams,
    eta: f64,
    fit_x: &ExpFit,
    fit_y: &ExpFit,
    rho0: &Op2,
    times: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Trajectory, Error> {
    let solver = PolaronSolver::new(*p, eta, fit_x, fit_y, crate::weak::DEFAULT_RATE_CUT)?;
    dynamics::integrate(&solver, rho0, times, OdeOptions::new(rtol, atol))
}

/// Two-pass integration: the auxiliary operators first, then `ρ` driven by
/// their dense interpolant.
pub fn integrate_polaron_frozen(
    solver: &PolaronSolver,
    rho0: &Op2,
    times: &[f64],
    opts: OdeOptions,
) -> Result<Trajectory, Error> {
    dynamics::check_times(times)?;
    let n_aux = solver.dim() - 4;
    let t_end = times.last().copied().unwrap_or(0.0);
    let aux_rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let (a, b) = solver.coeffs(t);
        let mut full_y = alloc::vec![ZERO; n_aux + 4];
        let mut full_dy = alloc::vec![ZERO; n_aux + 4];
        full_y[4..].copy_from_slice(y);
        solver.aux_rhs(t, a, b, &full_y, &mut full_dy);
        dy.copy_from_slice(&full_dy[4..]);
    };
    let mut steps: Vec<DenseStep> = Vec::new();
    if n_aux > 0 {
        let mut first = Dopri5::new(aux_rhs, 0.0, &alloc::vec![ZERO; n_aux], opts);
        first.advance_dense(t_end, |s| steps.push(s.clone()))?;
    }
    let replay = |t: f64, buf: &mut [C64]| {
        if steps.is_empty() {
            return;
        }
        let idx = steps.partition_point(|s| s.t1() < t).min(steps.len() - 1);
        steps[idx].eval_into(t, buf);
    };
    let rho_rhs = |t: f64, y: &[C64], dy: &mut [C64]| {
        let (a, b) = solver.coeffs(t);
        let mut full_y = alloc::vec![ZERO; n_aux + 4];
        let mut scratch = alloc::vec![ZERO; n_aux + 4];
        replay(t, &mut full_y[4..]);
        let sums = solver.aux_rhs(t, a, b, &full_y, &mut scratch);
        let d = solver.rho_rhs(t, a, b, &op_at(y, 0), &sums);
        put_op(dy, 0, &d);
    };
    let mut second = Dopri5::new(rho_rhs, 0.0, &rho0.0, opts);
    let mut points = Vec::with_capacity(times.len());
    second.advance_to(t_end, times, |t, y| points.push(TrajectoryPoint::from_density(t, &op_at(y, 0))))?;
    Ok(Trajectory { points, stats: second.stats() })
}
