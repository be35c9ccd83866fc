//! Spectral density, tunneling renormalization and bath correlation functions.
//!
//! Frequency integrals run over `[0, 100·ω_c]` with panels no wider than
//! the `1 − sinc` oscillation scale. The weak-coupling correlation function
//! instead uses a fitted Lorentzian envelope, which is integrable on the
//! whole half line and is evaluated partly in closed form.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::error::Error;
use crate::expfit::LorFit;
use crate::model::ModelParams;
use crate::ops::{C64, I, ZERO};
use crate::quad::{self, QuadOptions};

/// A correlation function value at a time lag.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathSample {
    pub tau: f64,
    pub value: C64,
}

/// Upper frequency limit of the renormalization integrals.
pub fn frequency_limit(p: &ModelParams) -> f64 {
    100.0 * p.cutoff
}

/// `(1 − sin x / x) / x²`, accurate down to `x = 0`.
pub fn one_minus_sinc_over_sq(x: f64) -> f64 {
    let x2 = x * x;
    if x2 < 1e-2 {
        // 1/6 − x²/120 + x⁴/5040 − x⁶/362880 + x⁸/39916800
        1.0 / 6.0 - x2 * (1.0 / 120.0 - x2 * (1.0 / 5040.0 - x2 * (1.0 / 362880.0 - x2 / 39916800.0)))
    } else {
        (1.0 - x.sin() / x) / x2
    }
}

/// `sin x / x`
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `ω·coth(βω/2)`, which tends to `2kT` as `ω → 0` and to `ω` at zero temperature.
pub fn omega_coth(omega: f64, beta: f64) -> f64 {
    if beta.is_infinite() {
        return omega;
    }
    let x = 0.5 * beta * omega;
    if x.abs() < 1e-4 {
        (2.0 / beta) * (1.0 + x * x / 3.0)
    } else if x > 40.0 {
        omega
    } else {
        omega / x.tanh()
    }
}

/// `coth(βω/2)` for `ω > 0`.
fn coth(omega: f64, beta: f64) -> f64 {
    omega_coth(omega, beta) / omega
}

/// Spectral density `J(ω) = (P/2)·ω·ω_c²/(ω²+ω_c²)·[1 − sinc(d ω)]`.
pub fn spectral_density(omega: f64, p: &ModelParams) -> Result<f64, Error> {
    if !(omega >= 0.0) {
        return Err(Error::Domain("spectral density needs a nonnegative frequency"));
    }
    Ok(drude(omega, p) * (1.0 - sinc(p.delay * omega)))
}

/// Lorentz–Drude envelope `(P/2)·ω·ω_c²/(ω²+ω_c²)`.
pub fn drude(omega: f64, p: &ModelParams) -> f64 {
    let c2 = p.cutoff * p.cutoff;
    0.5 * p.coupling * omega * c2 / (omega * omega + c2)
}

/// `J(ω)/ω³`, finite at the origin.
fn density_over_cube(omega: f64, p: &ModelParams) -> f64 {
    let c2 = p.cutoff * p.cutoff;
    0.5 * p.coupling * c2 / (omega * omega + c2) * p.delay * p.delay * one_minus_sinc_over_sq(p.delay * omega)
}

/// Panel breakpoints over `[0, upper]` resolving both the `1 − sinc`
/// factor and an additional phase rate `rate`.
fn panels(p: &ModelParams, upper: f64, rate: f64) -> Vec<f64> {
    let scale = (p.delay + rate).max(1.0 / p.cutoff);
    quad::uniform_breaks(0.0, upper, PI / scale)
}

/// `2∫ J(ω)/ω² coth(βω/2) dω`
fn log_eta_integral(p: &ModelParams, zero_temperature: bool, quad_tol: f64) -> Result<f64, Error> {
    if p.coupling == 0.0 || p.delay == 0.0 {
        return Ok(0.0);
    }
    let beta = if zero_temperature { f64::INFINITY } else { p.beta() };
    let breaks = panels(p, frequency_limit(p), 0.0);
    let res = quad::integrate_real(
        |w| density_over_cube(w, p) * omega_coth(w, beta),
        &breaks,
        &QuadOptions::relative(quad_tol),
    )?;
    Ok(2.0 * res.value.re)
}

/// Renormalization constant `η = exp(−2∫ J/ω² coth(βω/2) dω)`.
pub fn eta(p: &ModelParams, quad_tol: f64) -> Result<f64, Error> {
    Ok((-log_eta_integral(p, false, quad_tol)?).exp())
}

/// Weak-coupling expansion `1 − 2∫ J/ω² dω` of `η` at zero temperature.
pub fn eta_second_order(p: &ModelParams, quad_tol: f64) -> Result<f64, Error> {
    Ok(1.0 - log_eta_integral(p, true, quad_tol)?)
}

/// Phonon propagator `r(τ) = −4∫ (J/ω²)[cos(ωτ) coth(βω/2) − i sin(ωτ)] dω`.
pub fn r_tau(p: &ModelParams, tau: f64, quad_tol: f64) -> Result<C64, Error> {
    if !(tau >= 0.0) {
        return Err(Error::Domain("time lag must be nonnegative"));
    }
    if p.coupling == 0.0 || p.delay == 0.0 {
        return Ok(ZERO);
    }
    let beta = p.beta();
    let breaks = panels(p, frequency_limit(p), tau);
    let mut opts = QuadOptions::relative(quad_tol);
    // Absolute floor well below the full-strength value, so that small
    // late-time values do not chase rounding noise.
    opts.abs_tol = 1e-3 * quad_tol * log_eta_integral(p, false, 1e-6)?;
    let res = quad::integrate(
        |w| {
            let a = density_over_cube(w, p);
            let (s, c) = (w * tau).sin_cos();
            C64::new(a * c * omega_coth(w, beta), -a * s * w)
        },
        &breaks,
        &opts,
    )?;
    Ok(res.value * -4.0)
}

/// `C₁₁ = η²(cosh r − 1)` and `C₂₂ = −η² sinh r` from a propagator value.
pub fn polaron_correlations(eta: f64, r: C64) -> (C64, C64) {
    let e2 = eta * eta;
    ((r.cosh() - 1.0) * e2, -r.sinh() * e2)
}

/// Polaron-frame correlation functions at a single lag.
pub fn corr_polaron(p: &ModelParams, eta: f64, tau: f64, quad_tol: f64) -> Result<(C64, C64), Error> {
    crate::model::check_eta(eta)?;
    Ok(polaron_correlations(eta, r_tau(p, tau, quad_tol)?))
}

/// Accumulates `Σ_j a_j cos(ω_j τ_k) + i Σ_j b_j sin(ω_j τ_k)` on the uniform
/// grid `τ_k = k·dt`, using an incremental rotation per node.
fn cos_sin_sums(nodes: &[f64], cos_w: &[f64], sin_w: &[f64], dt: f64, n: usize) -> Vec<C64> {
    let mut acc = alloc::vec![ZERO; n];
    const RESYNC: usize = 128;
    for ((&w, &a), &b) in nodes.iter().zip(cos_w).zip(sin_w) {
        let rot = C64::from_polar(1.0, w * dt);
        let mut z = C64::new(1.0, 0.0);
        for (k, slot) in acc.iter_mut().enumerate() {
            if k % RESYNC == 0 {
                z = C64::from_polar(1.0, w * dt * k as f64);
            }
            *slot += C64::new(a * z.re, b * z.im);
            z *= rot;
        }
    }
    acc
}

/// Nodes and weights of a fixed composite rule over `[0, upper]`, tight
/// enough for phases up to `max_lag` on every panel.
fn batch_rule(p: &ModelParams, upper: f64, max_lag: f64) -> (Vec<f64>, Vec<f64>) {
    let width = (PI / (p.delay + 1.0 / p.cutoff)).min(8.0 / (max_lag + p.delay).max(1e-12));
    let breaks = quad::uniform_breaks(0.0, upper, width);
    quad::composite_rule(&breaks, 20)
}

/// `r(τ_k)` on the uniform grid `τ_k = k·dt`, `k < n`.
pub fn r_grid(p: &ModelParams, dt: f64, n: usize) -> Vec<C64> {
    if p.coupling == 0.0 || p.delay == 0.0 {
        return alloc::vec![ZERO; n];
    }
    let beta = p.beta();
    let (nodes, weights) = batch_rule(p, frequency_limit(p), dt * n as f64);
    let mut a = Vec::with_capacity(nodes.len());
    let mut b = Vec::with_capacity(nodes.len());
    for (&w, &q) in nodes.iter().zip(weights.iter()) {
        let base = -4.0 * q * density_over_cube(w, p);
        a.push(base * omega_coth(w, beta));
        b.push(-base * w);
    }
    cos_sin_sums(&nodes, &a, &b, dt, n)
}

/// `C₁₁` and `C₂₂` on the uniform grid `τ_k = k·dt`.
pub fn polaron_grid(p: &ModelParams, eta: f64, dt: f64, n: usize) -> (Vec<BathSample>, Vec<BathSample>) {
    let r = r_grid(p, dt, n);
    let mut c11 = Vec::with_capacity(n);
    let mut c22 = Vec::with_capacity(n);
    for (k, rk) in r.iter().enumerate() {
        let tau = dt * k as f64;
        let (a, b) = polaron_correlations(eta, *rk);
        c11.push(BathSample { tau, value: a });
        c22.push(BathSample { tau, value: b });
    }
    (c11, c22)
}

/// Exponential terms `(α, γ)` of the closed-form part of the weak-coupling
/// correlation function: poles of the Lorentzian envelope and thermal poles.
#[derive(Clone, Debug, Default)]
pub struct LorentzianPart {
    /// One term per pole of the envelope in the lower half plane.
    pub poles: Vec<(C64, C64)>,
    /// Thermal contributions `c·e^{−ντ}` with real `c`, `ν`; at zero
    /// temperature these are quadrature nodes of the branch integral.
    pub thermal: Vec<(f64, f64)>,
}

/// Thermal frequencies kept as individual terms before band compression.
const THERMAL_DIRECT: usize = 4096;
/// Gauss–Legendre order for continuous thermal bands.
const BAND_ORDER: usize = 8;

impl LorentzianPart {
    /// Value at lag `tau ≥ 0`.
    pub fn eval(&self, tau: f64) -> C64 {
        let mut s = ZERO;
        for (a, g) in &self.poles {
            s += a * (g * tau).exp();
        }
        let mut t = 0.0;
        for &(c, nu) in &self.thermal {
            let x = nu * tau;
            if x < 745.0 {
                t += c * (-x).exp();
            }
        }
        s + t
    }

    /// Sum of all amplitudes, the value at zero lag.
    pub fn at_zero(&self) -> C64 {
        self.eval(0.0)
    }
}

/// `L(−iν)·i` for the Lorentzian envelope, a real number.
fn envelope_imag_axis(lor: &LorFit, nu: f64) -> f64 {
    let z = C64::new(0.0, -nu);
    (lor.eval_complex(z) * I).re
}

/// Poles and thermal series of `∫ L(ω) n(ω) e^{−iωτ} dω` over the real line,
/// with `L` the odd extension of the Lorentzian envelope and
/// `n(ω) = 1/(1 − e^{−βω})`.
pub fn lorentzian_part(p: &ModelParams, lor: &LorFit) -> LorentzianPart {
    let mut part = LorentzianPart::default();
    if lor.terms.is_empty() {
        return part;
    }
    let beta = p.beta();
    for &(amp, omega, gamma) in &lor.terms {
        // Residues ±i p/(2Γ) at ω = ±Ω − iΓ.
        for (sign, pole) in [(1.0, C64::new(omega, -gamma)), (-1.0, C64::new(-omega, -gamma))] {
            let residue = I * (sign * amp / (2.0 * gamma));
            let occupation = if beta.is_infinite() {
                if pole.re > 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            } else {
                C64::new(1.0, 0.0) / (C64::new(1.0, 0.0) - (-pole * beta).exp())
            };
            let alpha = C64::new(0.0, -2.0 * PI) * residue * occupation;
            part.poles.push((alpha, -I * pole));
        }
    }
    if beta.is_infinite() {
        // Branch integral −i ∫₀^∞ L(−iν) e^{−ντ} dν, split in doubling bands.
        let (gx, gw) = quad::gauss_legendre(BAND_ORDER * 2);
        let gmin = lor.terms.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
        let mut lo = 0.0;
        let mut hi = gmin / 8.0;
        loop {
            let mut weight = 0.0;
            for (x, w) in gx.iter().zip(gw.iter()) {
                let nu = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                let c = -0.5 * (hi - lo) * w * envelope_imag_axis(lor, nu);
                weight += c.abs();
                part.thermal.push((c, nu));
            }
            if weight < 1e-17 && hi > 1e3 * gmin {
                break;
            }
            lo = hi;
            hi *= 2.0;
        }
    } else {
        let nu1 = 2.0 * PI / beta;
        for m in 1..=THERMAL_DIRECT {
            let nu = nu1 * m as f64;
            part.thermal.push((-2.0 * PI / beta * envelope_imag_axis(lor, nu), nu));
        }
        // Remaining sum as a midpoint-rule integral over m in doubling bands.
        let (gx, gw) = quad::gauss_legendre(BAND_ORDER);
        let mut lo = THERMAL_DIRECT as f64 + 0.5;
        loop {
            let hi = 2.0 * lo;
            let mut weight = 0.0;
            for (x, w) in gx.iter().zip(gw.iter()) {
                let m = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                let nu = nu1 * m;
                let c = -0.5 * (hi - lo) * w * (2.0 * PI / beta) * envelope_imag_axis(lor, nu);
                weight += c.abs();
                part.thermal.push((c, nu));
            }
            if weight < 1e-17 {
                break;
            }
            lo = hi;
        }
    }
    part
}

/// Integration limit for the `sinc` part of the weak correlation function.
fn sinc_part_limit(p: &ModelParams, lor: &LorFit) -> f64 {
    let _ = lor;
    frequency_limit(p)
}

/// `−∫₀^Λ L(ω) sinc(dω)[cos(ωτ)coth(βω/2) − i sin(ωτ)] dω` at one lag.
fn sinc_part(p: &ModelParams, lor: &LorFit, tau: f64, quad_tol: f64) -> Result<C64, Error> {
    if lor.terms.is_empty() {
        return Ok(ZERO);
    }
    let beta = p.beta();
    let limit = sinc_part_limit(p, lor);
    let breaks = panels(p, limit, tau);
    let mut opts = QuadOptions::relative(quad_tol);
    opts.abs_tol = quad_tol * 1e-6;
    let res = quad::integrate(
        |w| {
            if w == 0.0 {
                return C64::new(-lor.eval_over_omega(0.0) * omega_coth(0.0, beta), 0.0);
            }
            let base = lor.eval(w) * sinc(p.delay * w);
            let (s, c) = (w * tau).sin_cos();
            C64::new(-base * c * coth(w, beta), base * s)
        },
        &breaks,
        &opts,
    )?;
    Ok(res.value)
}

/// Weak-coupling bath correlation function with the Lorentzian envelope.
pub fn corr_weak(p: &ModelParams, lor: &LorFit, tau: f64, quad_tol: f64) -> Result<C64, Error> {
    if !(tau >= 0.0) {
        return Err(Error::Domain("time lag must be nonnegative"));
    }
    if lor.terms.is_empty() {
        return Ok(ZERO);
    }
    Ok(lorentzian_part(p, lor).eval(tau) + sinc_part(p, lor, tau, quad_tol)?)
}

/// The `sinc` part of the weak correlation function on `τ_k = k·dt`.
pub fn weak_sinc_grid(p: &ModelParams, lor: &LorFit, dt: f64, n: usize) -> Vec<C64> {
    if lor.terms.is_empty() || p.delay == 0.0 && lor.terms.is_empty() {
        return alloc::vec![ZERO; n];
    }
    let beta = p.beta();
    let (nodes, weights) = batch_rule(p, sinc_part_limit(p, lor), dt * n as f64);
    let mut a = Vec::with_capacity(nodes.len());
    let mut b = Vec::with_capacity(nodes.len());
    for (&w, &q) in nodes.iter().zip(weights.iter()) {
        let base = q * lor.eval(w) * sinc(p.delay * w);
        a.push(-base * coth(w, beta));
        b.push(base);
    }
    cos_sin_sums(&nodes, &a, &b, dt, n)
}

/// Weak correlation function on `τ_k = k·dt`.
pub fn weak_grid(p: &ModelParams, lor: &LorFit, part: &LorentzianPart, dt: f64, n: usize) -> Vec<BathSample> {
    let s = weak_sinc_grid(p, lor, dt, n);
    s.iter()
        .enumerate()
        .map(|(k, v)| {
            let tau = dt * k as f64;
            BathSample { tau, value: part.eval(tau) + v }
        })
        .collect()
}

/// Relaxation-rate scale and the weak-coupling validity verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaEstimate {
    pub gamma: f64,
    pub weak_coupling_ok: bool,
    pub report: String,
}

/// `Γ = P·ω_c/2`, compared against `max(Ω₀, |δ|)` with margin `threshold`.
pub fn gamma_estimate(p: &ModelParams, threshold: f64) -> GammaEstimate {
    use core::fmt::Write;
    let gamma = 0.5 * p.coupling * p.cutoff;
    let (_, detuning) = p.splitting_and_detuning();
    let scale = p.drive_amplitude.max(detuning.abs());
    let weak_coupling_ok = scale >= threshold * gamma;
    let mut report = String::new();
    let _ = write!(
        report,
        "gamma={} max(Omega0,|detuning|)={} threshold={} weak_coupling_ok={}",
        gamma, scale, threshold, weak_coupling_ok
    );
    GammaEstimate { gamma, weak_coupling_ok, report }
}
