//! Physical parameters and system Hamiltonians.
//!
//! Units: frequencies in units of the drive frequency, times in its inverse.
//! Basis index 0 is the left dot, index 1 the right dot.

use core::f64::consts::PI;

use num_traits::Float;

use crate::error::Error;
use crate::ops::Op2;

/// Physical constants of the driven double dot and its phonon bath.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Bias between the localized states.
    pub bias: f64,
    /// Bare interdot tunneling.
    pub tunneling: f64,
    /// Angular frequency of the drive.
    pub drive_frequency: f64,
    /// Amplitude of the tunneling modulation.
    pub drive_amplitude: f64,
    /// Dimensionless deformation-potential coupling.
    pub coupling: f64,
    /// Bath cutoff frequency.
    pub cutoff: f64,
    /// Phonon travel time between the dots (separation over sound speed).
    pub delay: f64,
    /// Thermal energy; zero selects the zero-temperature limit.
    pub temperature: f64,
}

impl ModelParams {
    /// Parameter block of the measured resonance sweeps at 28 dB.
    pub fn reference() -> Self {
        ModelParams {
            bias: 0.0,
            tunneling: 0.15,
            drive_frequency: 1.0,
            drive_amplitude: 0.034,
            coupling: 0.09,
            cutoff: 2.0,
            delay: 16.0,
            temperature: 0.12,
        }
    }

    pub fn with_bias(self, bias: f64) -> Self {
        ModelParams { bias, ..self }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let checks: [(&'static str, f64, bool); 8] = [
            ("epsilon", self.bias, true),
            ("omega0", self.drive_frequency, self.drive_frequency > 0.0),
            ("delta", self.tunneling, self.tunneling >= 0.0),
            ("Omega0", self.drive_amplitude, self.drive_amplitude >= 0.0),
            ("P", self.coupling, self.coupling >= 0.0),
            ("omega_c", self.cutoff, self.cutoff > 0.0),
            ("d_cs", self.delay, self.delay >= 0.0),
            ("kT", self.temperature, self.temperature >= 0.0),
        ];
        for (name, value, ok) in checks {
            if !value.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
            if !ok {
                return Err(Error::param(name, "out of range"));
            }
        }
        Ok(())
    }

    /// Inverse temperature, `+∞` at zero temperature.
    pub fn beta(&self) -> f64 {
        if self.temperature == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.temperature
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.drive_frequency
    }

    /// Modulated tunneling `Δ − 2Ω₀ cos(ω₀ t)`.
    pub fn tunneling_at(&self, t: f64) -> f64 {
        self.tunneling - 2.0 * self.drive_amplitude * (self.drive_frequency * t).cos()
    }

    /// Lab-frame system Hamiltonian at time `t`.
    pub fn lab_hamiltonian(&self, t: f64) -> Op2 {
        hamiltonian(self.bias, self.tunneling_at(t))
    }

    /// Polaron-frame system Hamiltonian with tunneling renormalized by `eta`.
    ///
    /// The constant energy shift of the transformed frame is omitted.
    pub fn polaron_hamiltonian(&self, eta: f64, t: f64) -> Result<Op2, Error> {
        check_eta(eta)?;
        Ok(hamiltonian(self.bias, eta * self.tunneling_at(t)))
    }

    /// Qubit splitting `W = √(ε²+Δ²)` and the detuning `W − ω₀`.
    pub fn splitting_and_detuning(&self) -> (f64, f64) {
        let w = self.bias.hypot(self.tunneling);
        (w, w - self.drive_frequency)
    }

    /// Bias at which the splitting matches the drive frequency, if any.
    pub fn resonant_bias(&self) -> Option<f64> {
        let s = self.drive_frequency * self.drive_frequency - self.tunneling * self.tunneling;
        (s >= 0.0).then(|| s.sqrt())
    }
}

pub(crate) fn check_eta(eta: f64) -> Result<(), Error> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(Error::param("eta", "must lie in [0, 1]"))
    }
}

/// `−(ε/2)σ_z − (x/2)σ_x`
#[inline]
pub(crate) fn hamiltonian(bias: f64, tunneling: f64) -> Op2 {
    Op2::real(-0.5 * bias, -0.5 * tunneling, -0.5 * tunneling, 0.5 * bias)
}
