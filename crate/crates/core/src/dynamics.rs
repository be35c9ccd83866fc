//! Shared machinery for the stacked master-equation systems.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::Error;
use crate::model::ModelParams;
use crate::ode::{Dopri5, OdeOptions, OdeStats};
use crate::ops::{density_checks, Op2, C64, I, ZERO};

/// A linear or bilinear ODE system whose first four entries hold the
/// density matrix (row-major) and whose tail holds auxiliary operators.
pub trait Dynamics {
    fn params(&self) -> &ModelParams;
    fn dim(&self) -> usize;
    fn initial_state(&self, rho0: &Op2) -> Vec<C64>;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]);

    fn density(&self, y: &[C64]) -> Op2 {
        op_at(y, 0)
    }
}

#[inline]
pub(crate) fn op_at(y: &[C64], offset: usize) -> Op2 {
    Op2([y[offset], y[offset + 1], y[offset + 2], y[offset + 3]])
}

#[inline]
pub(crate) fn put_op(y: &mut [C64], offset: usize, op: &Op2) {
    y[offset..offset + 4].copy_from_slice(&op.0);
}

/// `−i[aσ_z + bσ_x, X]` for real `a`, `b`.
#[inline]
pub(crate) fn liouville(a: f64, b: f64, x: &Op2) -> Op2 {
    let [x00, x01, x10, x11] = x.0;
    // [σ_z, X] = 2·[[0, x01], [−x10, 0]]; [σ_x, X] = [[x10−x01, x11−x00], [x00−x11, x01−x10]]
    let c00 = (x10 - x01) * b;
    let c01 = x01 * (2.0 * a) + (x11 - x00) * b;
    let c10 = x10 * (-2.0 * a) + (x00 - x11) * b;
    Op2([-I * c00, -I * c01, -I * c10, I * c00])
}

/// Coefficients `(a, b)` of `aσ_z + bσ_x = −(bias/2)σ_z − (tunneling/2)σ_x`.
#[inline]
pub(crate) fn pauli_coeffs(bias: f64, tunneling: f64) -> (f64, f64) {
    (-0.5 * bias, -0.5 * tunneling)
}

/// Fast auxiliary terms replaced by their quasi-static response.
///
/// A term obeying `Ẋ = (𝓛 + γ)X + s(t)` with `|Re γ|` far above the
/// system frequencies follows `X ≈ −(𝓛+γ)⁻¹s − (𝓛+γ)⁻²ṡ`. In the
/// eigenbasis of the Hamiltonian both inverses are entry-wise divisions by
/// `γ − iω_ab`.
#[derive(Clone, Debug, Default)]
pub(crate) struct FastTerms {
    terms: Vec<(C64, C64)>,
    /// Sums at `ω = 0`, constant in time.
    zero: (C64, C64),
}

impl FastTerms {
    pub fn new(terms: Vec<(C64, C64)>) -> Self {
        let zero = sums(&terms, 0.0);
        FastTerms { terms, zero }
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Summed quasi-static response to `s` and `ṡ` for the Hamiltonian
    /// `aσ_z + bσ_x`.
    pub fn response(&self, a: f64, b: f64, s: &Op2, s_dot: &Op2) -> Op2 {
        if self.terms.is_empty() {
            return Op2::ZERO;
        }
        let r = a.hypot(b);
        let (c, sn) = if r == 0.0 {
            (1.0, 0.0)
        } else {
            let phi = b.atan2(a);
            ((0.5 * phi).cos(), (0.5 * phi).sin())
        };
        let u = Op2::real(c, -sn, sn, c);
        let ut = Op2::real(c, sn, -sn, c);
        let st = ut * *s * u;
        let sdt = ut * *s_dot * u;
        let up = sums(&self.terms, 2.0 * r);
        let down = sums(&self.terms, -2.0 * r);
        let z = self.zero;
        let pick = |k: usize| match k {
            1 => up,
            2 => down,
            _ => z,
        };
        let mut out = [ZERO; 4];
        for k in 0..4 {
            let (f1, f2) = pick(k);
            out[k] = -(f1 * st.0[k] + f2 * sdt.0[k]);
        }
        u * Op2(out) * ut
    }
}

/// `(Σ α/(γ − iω), Σ α/(γ − iω)²)`
fn sums(terms: &[(C64, C64)], omega: f64) -> (C64, C64) {
    let mut f1 = ZERO;
    let mut f2 = ZERO;
    for (a, g) in terms {
        let inv = C64::new(1.0, 0.0) / (g - I * omega);
        let t = a * inv;
        f1 += t;
        f2 += t * inv;
    }
    (f1, f2)
}

/// Splits fit terms into those integrated explicitly and those whose decay
/// rate exceeds `rate_cut`.
pub(crate) fn split_terms(terms: &[(C64, C64)], rate_cut: f64) -> (Vec<(C64, C64)>, Vec<(C64, C64)>) {
    terms.iter().cloned().partition(|(_, g)| -g.re <= rate_cut)
}

/// Observables of the density matrix at one sample time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub population_right: f64,
    pub trace: C64,
    pub herm_defect: f64,
    pub eig_min: f64,
}

impl TrajectoryPoint {
    pub fn from_density(t: f64, rho: &Op2) -> Self {
        let d = density_checks(rho);
        TrajectoryPoint { t, population_right: rho.0[3].re, trace: d.trace, herm_defect: d.herm_defect, eig_min: d.eig_min }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
    pub stats: OdeStats,
}

/// Uniform sample times `t_end·k/samples`, `k = 0..=samples`.
pub fn uniform_times(t_end: f64, samples: usize) -> Vec<f64> {
    (0..=samples).map(|k| t_end * k as f64 / samples as f64).collect()
}

/// Integrates from `t = 0` and records observables at `times`.
pub fn integrate<D: Dynamics>(
    dynamics: &D,
    rho0: &Op2,
    times: &[f64],
    opts: OdeOptions,
) -> Result<Trajectory, Error> {
    check_times(times)?;
    let y0 = dynamics.initial_state(rho0);
    let mut solver = Dopri5::new(|t, y: &[C64], dy: &mut [C64]| dynamics.rhs(t, y, dy), 0.0, &y0, opts);
    let mut points = Vec::with_capacity(times.len());
    let t_end = times.last().copied().unwrap_or(0.0);
    solver.advance_to(t_end, times, |t, y| points.push(TrajectoryPoint::from_density(t, &dynamics.density(y))))?;
    Ok(Trajectory { points, stats: solver.stats() })
}

pub(crate) fn check_times(times: &[f64]) -> Result<(), Error> {
    if times.first().is_some_and(|t| *t < 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("sample times must be nonnegative and strictly increasing".into()));
    }
    Ok(())
}

/// Full stacked state at the final time, for composition checks.
pub fn final_state<D: Dynamics>(dynamics: &D, y0: &[C64], t0: f64, t_end: f64, opts: OdeOptions) -> Result<Vec<C64>, Error> {
    let mut solver = Dopri5::new(|t, y: &[C64], dy: &mut [C64]| dynamics.rhs(t, y, dy), t0, y0, opts);
    solver.advance_dense(t_end, |_| {})?;
    Ok(solver.state().to_vec())
}

pub(crate) fn zero_state(n: usize) -> Vec<C64> {
    vec![ZERO; n]
}

/// Right-dot population of the closed system from a pure state, by
/// fixed-step RK4 on the Schrödinger equation with step at most `dt`.
pub fn closed_system_populations(p: &ModelParams, psi0: [C64; 2], times: &[f64], dt: f64) -> Result<Vec<f64>, Error> {
    check_times(times)?;
    let deriv = |t: f64, psi: [C64; 2]| {
        let h = p.lab_hamiltonian(t).0;
        [-I * (h[0] * psi[0] + h[1] * psi[1]), -I * (h[2] * psi[0] + h[3] * psi[1])]
    };
    let axpy = |a: [C64; 2], k: [C64; 2], s: f64| [a[0] + k[0] * s, a[1] + k[1] * s];
    let mut psi = psi0;
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        let n = (span / dt).ceil().max(0.0) as usize;
        if n > 0 {
            let h = span / n as f64;
            for _ in 0..n {
                let k1 = deriv(t, psi);
                let k2 = deriv(t + 0.5 * h, axpy(psi, k1, 0.5 * h));
                let k3 = deriv(t + 0.5 * h, axpy(psi, k2, 0.5 * h));
                let k4 = deriv(t + h, axpy(psi, k3, h));
                for i in 0..2 {
                    psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
                }
                t += h;
            }
        }
        t = target;
        out.push(psi[1].norm_sqr());
    }
    Ok(out)
}
