//! Weak-coupling master equation in auxiliary-operator form.
//!
//! The memory integral is carried by one operator `Kₘ` per exponential of
//! the correlation function:
//!
//! ```text
//! dρ/dt  = −i[H(t), ρ] − i[σ_z, S + S†],   S = Σₘ Kₘ
//! dKₘ/dt = −i[H(t), Kₘ] + γₘKₘ − iαₘσ_zρ,  Kₘ(0) = 0
//! ```

use alloc::vec::Vec;

use crate::dynamics::{self, liouville, op_at, pauli_coeffs, put_op, split_terms, Dynamics, FastTerms, Trajectory};
use crate::error::Error;
use crate::expfit::ExpFit;
use crate::model::ModelParams;
use crate::ode::OdeOptions;
use crate::ops::{Op2, C64, I};

/// Density matrix and one auxiliary operator per kernel term.
#[derive(Clone, Debug, PartialEq)]
pub struct WeakState {
    pub rho: Op2,
    pub aux: Vec<Op2>,
    pub t: f64,
}

/// `σ_z·X`
#[inline]
fn sz_left(x: &Op2) -> Op2 {
    let [a, b, c, d] = x.0;
    Op2([a, b, -c, -d])
}

/// Time derivative of the full state, with every kernel term explicit.
pub fn weak_rhs(state: &WeakState, p: &ModelParams, fit: &ExpFit) -> WeakState {
    let h = p.lab_hamiltonian(state.t);
    let lh = |x: &Op2| (h.commutator(x)).scale(-I);
    let mut sum = Op2::ZERO;
    for k in &state.aux {
        sum += *k;
    }
    let mix = sum + sum.adjoint();
    let rho_dot = lh(&state.rho) - Op2::SIGMA_Z.commutator(&mix).scale(I);
    let source = (Op2::SIGMA_Z * state.rho).scale(-I);
    let aux = state
        .aux
        .iter()
        .zip(&fit.terms)
        .map(|(k, (alpha, gamma))| lh(k) + k.scale(*gamma) + source.scale(*alpha))
        .collect();
    // The time component advances at unit rate.
    WeakState { rho: rho_dot, aux, t: 1.0 }
}

/// Weak-coupling system with the fastest kernel terms eliminated
/// adiabatically.
#[derive(Clone, Debug)]
pub struct WeakSolver {
    params: ModelParams,
    slow: Vec<(C64, C64)>,
    fast: FastTerms,
}

/// Default decay rate above which kernel terms are eliminated.
pub const DEFAULT_RATE_CUT: f64 = 25.0;

impl WeakSolver {
    pub fn new(params: ModelParams, fit: &ExpFit, rate_cut: f64) -> Self {
        let (slow, fast) = split_terms(&fit.terms, rate_cut);
        WeakSolver { params, slow, fast: FastTerms::new(fast) }
    }

    pub fn explicit_terms(&self) -> usize {
        self.slow.len()
    }

    pub fn unpack(&self, t: f64, y: &[C64]) -> WeakState {
        let aux = (0..self.slow.len()).map(|m| op_at(y, 4 + 4 * m)).collect();
        WeakState { rho: op_at(y, 0), aux, t }
    }
}

impl Dynamics for WeakSolver {
    fn params(&self) -> &ModelParams {
        &self.params
    }

    fn dim(&self) -> usize {
        4 * (1 + self.slow.len())
    }

    fn initial_state(&self, rho0: &Op2) -> Vec<C64> {
        let mut y = dynamics::zero_state(self.dim());
        put_op(&mut y, 0, rho0);
        y
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let (a, b) = pauli_coeffs(self.params.bias, self.params.tunneling_at(t));
        let rho = op_at(y, 0);
        let lrho = liouville(a, b, &rho);
        let source = sz_left(&rho).scale(-I);
        let mut sum = Op2::ZERO;
        for (m, (alpha, gamma)) in self.slow.iter().enumerate() {
            let off = 4 + 4 * m;
            let k = op_at(y, off);
            sum += k;
            let dk = liouville(a, b, &k) + k.scale(*gamma) + source.scale(*alpha);
            put_op(dy, off, &dk);
        }
        if !self.fast.is_empty() {
            let source_dot = sz_left(&lrho).scale(-I);
            sum += self.fast.response(a, b, &source, &source_dot);
        }
        let mix = sum + sum.adjoint();
        // −i[σ_z, M] = −i·2·[[0, m01], [−m10, 0]]
        let [_, m01, m10, _] = mix.0;
        let diss = Op2([C64::new(0.0, 0.0), -I * m01 * 2.0, I * m10 * 2.0, C64::new(0.0, 0.0)]);
        put_op(dy, 0, &(lrho + diss));
    }
}

/// Trajectory from `rho0` with `Kₘ(0) = 0`, sampled at `times`.
pub fn integrate_weak(
    p: &ModelParams,
    fit: &ExpFit,
    rho0: &Op2,
    times: &[f64],
    rtol: f64,
    atol: f64,
) -> Result<Trajectory, Error> {
    let solver = WeakSolver::new(*p, fit, DEFAULT_RATE_CUT);
    dynamics::integrate(&solver, rho0, times, OdeOptions::new(rtol, atol))
}
