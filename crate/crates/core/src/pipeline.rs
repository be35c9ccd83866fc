//! Bath preparation shared by every bias point of a parameter set.

use alloc::string::String;

use crate::bath;
use crate::error::Error;
use crate::expfit::{self, ExpFit, LagGrid, LorFit};
use crate::model::ModelParams;
use crate::polaron::PolaronSolver;
use crate::weak::{WeakSolver, DEFAULT_RATE_CUT};

/// Upper bound on Lorentzian terms tried for the spectral envelope.
pub const LORENTZ_TERMS_MAX: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitSettings {
    pub quad_tol: f64,
    pub fit_tol_spectral: f64,
    pub fit_tol_kernel: f64,
    pub fit_tol_weak_kernel: f64,
    pub n_terms_max: usize,
    pub grid: LagGrid,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            quad_tol: 1e-8,
            fit_tol_spectral: 1e-3,
            fit_tol_kernel: 1e-4,
            fit_tol_weak_kernel: 3e-3,
            n_terms_max: 40,
            grid: LagGrid::TRAINING,
        }
    }
}

/// Renormalization constants and all fitted kernels of one bath.
#[derive(Clone, Debug, PartialEq)]
pub struct BathFits {
    pub eta: f64,
    pub eta_second_order: f64,
    pub lorfit: LorFit,
    pub weak: ExpFit,
    pub c11: ExpFit,
    pub c22: ExpFit,
}

/// Which kernel to certify or refit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Weak,
    C11,
    C22,
}

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Weak, Kernel::C11, Kernel::C22];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Weak => "weak",
            Kernel::C11 => "c11",
            Kernel::C22 => "c22",
        }
    }
}

impl BathFits {
    pub fn kernel(&self, k: Kernel) -> &ExpFit {
        match k {
            Kernel::Weak => &self.weak,
            Kernel::C11 => &self.c11,
            Kernel::C22 => &self.c22,
        }
    }

    pub fn weak_solver(&self, p: ModelParams) -> WeakSolver {
        WeakSolver::new(p, &self.weak, DEFAULT_RATE_CUT)
    }

    pub fn polaron_solver(&self, p: ModelParams) -> Result<PolaronSolver, Error> {
        PolaronSolver::new(p, self.eta, &self.c11, &self.c22, DEFAULT_RATE_CUT)
    }
}

/// `(C₁₁, C₂₂)` samples on a lag grid.
pub fn polaron_samples(p: &ModelParams, eta: f64, grid: LagGrid) -> (alloc::vec::Vec<bath::BathSample>, alloc::vec::Vec<bath::BathSample>) {
    bath::polaron_grid(p, eta, grid.step(), grid.points)
}

/// Samples of one kernel on a lag grid. The weak kernel needs the
/// Lorentzian fit.
pub fn kernel_samples(p: &ModelParams, fits: &BathFits, kernel: Kernel, grid: LagGrid) -> alloc::vec::Vec<bath::BathSample> {
    match kernel {
        Kernel::Weak => {
            if fits.lorfit.terms.is_empty() {
                return grid_zeros(grid);
            }
            let part = bath::lorentzian_part(p, &fits.lorfit);
            expfit::weak_samples(p, &fits.lorfit, &part, grid)
        }
        Kernel::C11 => polaron_samples(p, fits.eta, grid).0,
        Kernel::C22 => polaron_samples(p, fits.eta, grid).1,
    }
}

fn grid_zeros(grid: LagGrid) -> alloc::vec::Vec<bath::BathSample> {
    (0..grid.points)
        .map(|k| bath::BathSample { tau: grid.step() * k as f64, value: crate::ops::ZERO })
        .collect()
}

/// Computes `η` and fits all kernels.
pub fn fit_bath(p: &ModelParams, s: &FitSettings) -> Result<BathFits, Error> {
    p.validate()?;
    if p.coupling == 0.0 {
        return Ok(BathFits {
            eta: 1.0,
            eta_second_order: 1.0,
            lorfit: LorFit::default(),
            weak: ExpFit::default(),
            c11: ExpFit::default(),
            c22: ExpFit::default(),
        });
    }
    let eta = bath::eta(p, s.quad_tol)?;
    let eta_second_order = bath::eta_second_order(p, s.quad_tol)?;
    let lorfit =
        expfit::fit_lorentzian_spectral(p, LORENTZ_TERMS_MAX, bath::frequency_limit(p), s.fit_tol_spectral)?;
    let (c11s, c22s) = polaron_samples(p, eta, s.grid);
    let c11 = expfit::fit_kernel("c11", &c11s, s.fit_tol_kernel, s.n_terms_max)?;
    let c22 = expfit::fit_kernel("c22", &c22s, s.fit_tol_kernel, s.n_terms_max)?;
    let weak = expfit::fit_weak_kernel(p, &lorfit, s.grid, s.fit_tol_weak_kernel, s.n_terms_max)?;
    Ok(BathFits { eta, eta_second_order, lorfit, weak, c11, c22 })
}

/// Training and held-out residuals of one kernel, plus its tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct Certification {
    pub kernel: Kernel,
    pub terms: usize,
    pub training: f64,
    pub held_out: f64,
    pub tol: f64,
    pub decaying: bool,
}

/// Held-out grids may exceed the training tolerance by this factor.
pub const HELD_OUT_FACTOR: f64 = 5.0;

impl Certification {
    pub fn passed(&self) -> bool {
        self.decaying && self.training <= self.tol && self.held_out <= HELD_OUT_FACTOR * self.tol
    }

    pub fn describe(&self) -> String {
        alloc::format!(
            "{} terms={} training={:.3e} held_out={:.3e} tol={:.1e} decaying={}",
            self.kernel.name(),
            self.terms,
            self.training,
            self.held_out,
            self.tol,
            self.decaying
        )
    }
}

/// Recomputes the residuals of a fitted kernel against fresh samples.
pub fn certify(p: &ModelParams, fits: &BathFits, kernel: Kernel, s: &FitSettings) -> Certification {
    let fit = fits.kernel(kernel);
    let train = kernel_samples(p, fits, kernel, s.grid);
    let held = kernel_samples(p, fits, kernel, s.grid.refined());
    let tol = if kernel == Kernel::Weak { s.fit_tol_weak_kernel } else { s.fit_tol_kernel };
    Certification {
        kernel,
        terms: fit.len(),
        training: fit.relative_residual(&train),
        held_out: fit.relative_residual(&held),
        tol,
        decaying: fit.terms.iter().all(|(_, g)| g.re < 0.0),
    }
}
