//! Lorentzian fits of the spectral envelope and sum-of-exponentials fits of
//! correlation functions.
//!
//! Exponential fits start from a matrix pencil on the uniform samples and
//! are refined by variable projection: only the rates are iterated, the
//! amplitudes follow from a linear least-squares solve at every step.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

use crate::bath::{self, BathSample, LorentzianPart};
use crate::error::Error;
use crate::lsq::{self, LmOptions, Residuals};
use crate::model::ModelParams;
use crate::ops::{C64, I, ZERO};

/// Sum of anti-symmetrized Lorentzians
/// `Σ 4pΩω / [(ω²−Ω²)² + 2(ω²+Ω²)Γ² + Γ⁴]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LorFit {
    /// `(p, Ω, Γ)` per term.
    pub terms: Vec<(f64, f64, f64)>,
    /// Relative L∞ deviation from the fitted target over the fit window.
    pub residual: f64,
}

#[inline]
fn lorentz_denominator(w2: f64, om: f64, g: f64) -> f64 {
    let d = w2 - om * om;
    d * d + 2.0 * (w2 + om * om) * g * g + g * g * g * g
}

impl LorFit {
    pub fn eval(&self, omega: f64) -> f64 {
        omega * self.eval_over_omega(omega)
    }

    /// Value divided by `ω`, finite at the origin.
    pub fn eval_over_omega(&self, omega: f64) -> f64 {
        let w2 = omega * omega;
        self.terms.iter().map(|&(p, om, g)| 4.0 * p * om / lorentz_denominator(w2, om, g)).sum()
    }

    /// Analytic continuation to complex frequency.
    pub fn eval_complex(&self, z: C64) -> C64 {
        let z2 = z * z;
        let mut s = ZERO;
        for &(p, om, g) in &self.terms {
            let d = z2 - om * om;
            let den = d * d + (z2 + om * om) * (2.0 * g * g) + g * g * g * g;
            s += z * (4.0 * p * om) / den;
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "lorfit v1 {} {:.16e}", self.terms.len(), self.residual);
        for &(p, om, g) in &self.terms {
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", p, om, g);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<LorFit, Error> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Input("empty lorfit file".to_string()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "lorfit" || h[1] != "v1" {
            return Err(Error::Input(format!("bad lorfit header `{header}`")));
        }
        let n: usize = parse_field(h[2])?;
        let residual: f64 = parse_field(h[3])?;
        let mut terms = Vec::with_capacity(n);
        for line in lines.by_ref().take(n) {
            let f = parse_fields::<3>(line)?;
            if !(f[1] > 0.0 && f[2] > 0.0) {
                return Err(Error::Input(format!("lorfit term needs positive Omega and Gamma: `{line}`")));
            }
            terms.push((f[0], f[1], f[2]));
        }
        if terms.len() != n || lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Input("lorfit term count does not match header".to_string()));
        }
        Ok(LorFit { terms, residual })
    }
}

fn parse_field<T: core::str::FromStr>(s: &str) -> Result<T, Error> {
    s.parse().map_err(|_| Error::Input(format!("cannot parse `{s}`")))
}

fn parse_fields<const N: usize>(line: &str) -> Result<[f64; N], Error> {
    let mut out = [0.0; N];
    let mut it = line.split_whitespace();
    for slot in out.iter_mut() {
        let tok = it.next().ok_or_else(|| Error::Input(format!("short line `{line}`")))?;
        *slot = parse_field(tok)?;
    }
    if it.next().is_some() {
        return Err(Error::Input(format!("extra fields in `{line}`")));
    }
    Ok(out)
}

/// Lower bound on `Ω/Γ`; without it pole pairs drift onto the imaginary
/// axis and cancel each other.
const MIN_ASPECT: f64 = 0.1;

fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![(lo * hi).sqrt()];
    }
    let r = (hi / lo).ln() / (n - 1) as f64;
    (0..n).map(|k| lo * (r * k as f64).exp()).collect()
}

struct LorentzProblem<'a> {
    x: &'a [f64],
    f: &'a [f64],
}

fn unpack_lorentz(theta: &DVector<f64>) -> Vec<(f64, f64, f64)> {
    let n = theta.len() / 3;
    (0..n)
        .map(|k| {
            let g = theta[2 * n + k].exp();
            (theta[k].exp(), g * (MIN_ASPECT + theta[n + k].exp()), g)
        })
        .collect()
}

impl Residuals for LorentzProblem<'_> {
    fn eval(&mut self, theta: &DVector<f64>, with_jacobian: bool) -> Option<(DVector<f64>, Option<DMatrix<f64>>)> {
        if theta.iter().any(|t| !t.is_finite() || t.abs() > 60.0) {
            return None;
        }
        let terms = unpack_lorentz(theta);
        let n = terms.len();
        let rows = self.x.len();
        let mut r = DVector::zeros(rows);
        let mut jac = with_jacobian.then(|| DMatrix::zeros(rows, 3 * n));
        for (i, (&x, &f)) in self.x.iter().zip(self.f).enumerate() {
            let x2 = x * x;
            let mut s = 0.0;
            for (k, &(p, om, g)) in terms.iter().enumerate() {
                let den = lorentz_denominator(x2, om, g);
                let a = 4.0 * p * om * x / den;
                s += a;
                if let Some(j) = jac.as_mut() {
                    let d_om = -4.0 * om * (x2 - om * om) + 4.0 * om * g * g;
                    let d_g = 4.0 * (x2 + om * om) * g + 4.0 * g * g * g;
                    let da_dom = 4.0 * p * x / den - a * d_om / den;
                    let da_dg = -a * d_g / den;
                    let e = theta[n + k].exp();
                    j[(i, k)] = a / f;
                    j[(i, n + k)] = da_dom * g * e / f;
                    j[(i, 2 * n + k)] = g * (da_dg + da_dom * (MIN_ASPECT + e)) / f;
                }
            }
            r[i] = s / f - 1.0;
        }
        Some((r, jac))
    }
}

fn lorentz_linf(terms: &[(f64, f64, f64)], x: &[f64], f: &[f64]) -> f64 {
    let fit = LorFit { terms: terms.to_vec(), residual: 0.0 };
    x.iter().zip(f).fold(0.0, |m, (&xi, &fi)| m.max((fit.eval(xi) / fi - 1.0).abs()))
}

/// Best `n`-term fit of positive `target` samples, by relative least squares.
fn fit_lorentz_terms(x: &[f64], f: &[f64], n: usize, span: (f64, f64)) -> Option<(Vec<(f64, f64, f64)>, f64)> {
    let mut best: Option<(Vec<(f64, f64, f64)>, f64)> = None;
    for ratio in [0.5, 1.0, 2.0] {
        let gammas = geomspace(span.0, span.1, n);
        let omegas: Vec<f64> = gammas.iter().map(|g| g * ratio).collect();
        let mut a = DMatrix::zeros(x.len(), n);
        for (i, (&xi, &fi)) in x.iter().zip(f).enumerate() {
            for k in 0..n {
                a[(i, k)] = 4.0 * omegas[k] * xi / lorentz_denominator(xi * xi, omegas[k], gammas[k]) / fi;
            }
        }
        let ones = DVector::from_element(x.len(), 1.0);
        let Ok(amp) = a.svd(true, true).solve(&ones, 1e-14) else { continue };
        let mut theta = DVector::zeros(3 * n);
        for k in 0..n {
            theta[k] = (amp[k].abs() + 1e-6).ln();
            theta[n + k] = (ratio - MIN_ASPECT).max(1e-3).ln();
            theta[2 * n + k] = gammas[k].ln();
        }
        let mut prob = LorentzProblem { x, f };
        let opts = LmOptions { max_iter: 2000, ftol: 1e-15, xtol: 1e-15 };
        let Some(res) = lsq::levenberg_marquardt(&mut prob, theta, &opts) else { continue };
        let terms = unpack_lorentz(&res.x);
        let err = lorentz_linf(&terms, x, f);
        if best.as_ref().is_none_or(|b| err < b.1) {
            best = Some((terms, err));
        }
    }
    best
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Fits arbitrary positive samples `target(ω)` on a log grid with up to
/// `n_terms` Lorentzians; the returned residual is the relative L∞ error.
pub fn fit_lorentzian_samples(omegas: &[f64], target: &[f64], n_terms: usize, tol: f64) -> Result<LorFit, Error> {
    if omegas.len() != target.len() || omegas.len() < 4 {
        return Err(Error::Input("lorentzian fit needs at least four paired samples".to_string()));
    }
    if omegas.iter().zip(target).any(|(w, f)| !(*w > 0.0 && *f > 0.0)) {
        return Err(Error::Input("lorentzian fit needs positive frequencies and values".to_string()));
    }
    let lo = omegas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = omegas.iter().cloned().fold(0.0, f64::max);
    let span = ((lo * hi).sqrt().min(hi / 100.0).max(lo), 1.5 * hi);
    fit_lorentz_sequence(omegas, target, n_terms, tol, span)
}

/// Lorentzian representation of the Lorentz–Drude envelope over `(0, omega_max]`.
pub fn fit_lorentzian_spectral(p: &ModelParams, n_terms: usize, omega_max: f64, tol: f64) -> Result<LorFit, Error> {
    p.validate()?;
    if p.coupling == 0.0 {
        return Ok(LorFit::default());
    }
    if n_terms == 0 || !(omega_max > 0.0) {
        return Err(Error::Input("lorentzian fit needs n_terms >= 1 and omega_max > 0".to_string()));
    }
    // Fit the shape x/(1+x²) in units of the cutoff, then rescale.
    let xmax = omega_max / p.cutoff;
    let x = log_grid(5e-6 * xmax, xmax, 800);
    let f: Vec<f64> = x.iter().map(|x| x / (1.0 + x * x)).collect();
    let mut shape = fit_lorentz_sequence(&x, &f, n_terms, tol, (0.8, 1.5 * xmax))?;
    let check = log_grid(5e-6 * xmax, xmax, 3200);
    let fc: Vec<f64> = check.iter().map(|x| x / (1.0 + x * x)).collect();
    shape.residual = lorentz_linf(&shape.terms, &check, &fc);
    let c = p.cutoff;
    let amp = 0.5 * p.coupling * c * c * c;
    Ok(LorFit {
        terms: shape.terms.iter().map(|&(a, om, g)| (amp * a, c * om, c * g)).collect(),
        residual: shape.residual,
    })
}

/// Fits with 1, 2, … terms until the L∞ residual meets `tol`.
fn fit_lorentz_sequence(x: &[f64], f: &[f64], n_terms: usize, tol: f64, span: (f64, f64)) -> Result<LorFit, Error> {
    let mut curve = Vec::new();
    let mut best: Option<LorFit> = None;
    for n in 1..=n_terms {
        let Some((terms, err)) = fit_lorentz_terms(x, f, n, span) else { continue };
        curve.push((n, err));
        if best.as_ref().is_none_or(|b| err < b.residual) {
            best = Some(LorFit { terms, residual: err });
        }
        if err <= tol {
            break;
        }
    }
    match best {
        Some(fit) if fit.residual <= tol => Ok(fit),
        other => Err(Error::Fit {
            kernel: "spectral".to_string(),
            best_residual: other.map_or(f64::INFINITY, |f| f.residual),
            tol,
            curve,
        }),
    }
}

/// `Σ αₘ e^{γₘ τ}` with `Re γₘ < 0`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpFit {
    /// `(α, γ)` per term.
    pub terms: Vec<(C64, C64)>,
    /// Relative L² residual on the training samples.
    pub residual: f64,
}

impl ExpFit {
    pub fn eval(&self, tau: f64) -> C64 {
        self.terms.iter().map(|(a, g)| a * (g * tau).exp()).sum()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Longest relaxation time `1/min|Re γ|`.
    pub fn slowest_time(&self) -> f64 {
        self.terms.iter().map(|(_, g)| -1.0 / g.re).fold(0.0, f64::max)
    }

    /// Relative L² deviation from `samples`.
    pub fn relative_residual(&self, samples: &[BathSample]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for s in samples {
            num += (self.eval(s.tau) - s.value).norm_sqr();
            den += s.value.norm_sqr();
        }
        if den == 0.0 {
            if num == 0.0 { 0.0 } else { f64::INFINITY }
        } else {
            (num / den).sqrt()
        }
    }

    pub fn to_text(&self, name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "expfit v1 {} {} {:.16e}", name, self.terms.len(), self.residual);
        for (a, g) in &self.terms {
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e} {:.16e}", a.re, a.im, g.re, g.im);
        }
        s
    }

    /// Parses the text form, returning the kernel name with the fit.
    pub fn from_text(text: &str) -> Result<(String, ExpFit), Error> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Input("empty expfit file".to_string()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 || h[0] != "expfit" || h[1] != "v1" {
            return Err(Error::Input(format!("bad expfit header `{header}`")));
        }
        let n: usize = parse_field(h[3])?;
        let residual: f64 = parse_field(h[4])?;
        let mut terms = Vec::with_capacity(n);
        for line in lines.by_ref().take(n) {
            let f = parse_fields::<4>(line)?;
            if !(f[2] < 0.0) {
                return Err(Error::Input(format!("expfit term does not decay: `{line}`")));
            }
            terms.push((C64::new(f[0], f[1]), C64::new(f[2], f[3])));
        }
        if terms.len() != n || lines.any(|l| !l.trim().is_empty()) {
            return Err(Error::Input("expfit term count does not match header".to_string()));
        }
        Ok((h[2].to_string(), ExpFit { terms, residual }))
    }
}

/// Sum of the terms at `tau`.
pub fn eval_expfit(fit: &ExpFit, tau: f64) -> C64 {
    fit.eval(tau)
}

/// Uniform lag grid `τ_k = k·τ_max/(n−1)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LagGrid {
    pub tau_max: f64,
    pub points: usize,
}

impl LagGrid {
    pub const TRAINING: LagGrid = LagGrid { tau_max: 50.0, points: 2048 };

    pub fn step(&self) -> f64 {
        self.tau_max / (self.points - 1) as f64
    }

    /// The grid at twice the density, sharing every training point.
    pub fn refined(&self) -> LagGrid {
        LagGrid { tau_max: self.tau_max, points: 2 * self.points - 1 }
    }
}

fn uniform_step(samples: &[BathSample]) -> Result<f64, Error> {
    if samples.len() < 4 {
        return Err(Error::Input("need at least four samples".to_string()));
    }
    let t0 = samples[0].tau;
    let dt = (samples[samples.len() - 1].tau - t0) / (samples.len() - 1) as f64;
    if !(dt > 0.0) || t0 < 0.0 {
        return Err(Error::Input("sample lags must be nonnegative and increasing".to_string()));
    }
    let span = samples[samples.len() - 1].tau;
    for (k, s) in samples.iter().enumerate() {
        if (s.tau - (t0 + dt * k as f64)).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::Input(format!("non-uniform lag grid at index {k}")));
        }
    }
    Ok(dt)
}

/// Largest decay rate the refinement may reach, relative to the grid step.
const RATE_CAP_STEPS: f64 = 20.0;
/// Smallest decay rate, relative to the inverse grid span.
const RATE_FLOOR_SPANS: f64 = 1e-3;

/// Largest oscillation frequency as a fraction of the grid's Nyquist
/// frequency, so that the doubled grid cannot see aliases.
const FREQ_CAP_NYQUIST: f64 = 0.5;

struct RateBounds {
    lo: f64,
    hi: f64,
    freq: f64,
}

impl RateBounds {
    fn new(dt: f64, span: f64) -> Self {
        RateBounds {
            lo: (RATE_FLOOR_SPANS / span).ln(),
            hi: (RATE_CAP_STEPS / dt).ln(),
            freq: FREQ_CAP_NYQUIST * core::f64::consts::PI / dt,
        }
    }

    fn clamp_rate(&self, g: C64) -> C64 {
        let re = (-g.re.abs()).clamp(-self.hi.exp(), -self.lo.exp());
        C64::new(re, g.im.clamp(-self.freq, self.freq))
    }
}

/// Rates from a matrix pencil on (decimated) uniform samples.
fn pencil_rates(y: &[C64], dt: f64, m: usize) -> Vec<C64> {
    const TARGET: usize = 600;
    let stride = y.len().div_ceil(TARGET).max(1);
    let yd: Vec<C64> = y.iter().step_by(stride).cloned().collect();
    let nd = yd.len();
    let h = dt * stride as f64;
    let l = (nd / 3).max(m).min(nd - 1 - m.min(nd - 2));
    let rows = nd - l;
    if l < m || rows < m {
        return Vec::new();
    }
    let hankel = DMatrix::from_fn(rows, l + 1, |i, j| yd[i + j]);
    let svd = hankel.svd(false, true);
    let Some(v_t) = svd.v_t else { return Vec::new() };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let w = DMatrix::from_fn(m, l + 1, |i, j| v_t[(order[i], j)]);
    let w1 = w.columns(0, l).into_owned();
    let w2 = w.columns(1, l).into_owned();
    let Ok(pinv) = w1.pseudo_inverse(1e-14) else { return Vec::new() };
    let a = &w2 * pinv;
    let Some(schur) = a.try_schur(1e-14, 10_000) else { return Vec::new() };
    let Some(eig) = schur.eigenvalues() else { return Vec::new() };
    eig.iter().filter(|z| z.norm() > 1e-300).map(|z| z.ln() / h).collect()
}

struct VarPro<'a> {
    tau: &'a [f64],
    y: &'a [C64],
    bounds: &'a RateBounds,
}

fn rates_from(theta: &DVector<f64>) -> Vec<C64> {
    let m = theta.len() / 2;
    (0..m).map(|j| C64::new(-theta[j].exp(), theta[m + j])).collect()
}

fn theta_from(rates: &[C64], bounds: &RateBounds) -> DVector<f64> {
    let m = rates.len();
    let mut theta = DVector::zeros(2 * m);
    for (j, g) in rates.iter().enumerate() {
        let g = bounds.clamp_rate(*g);
        theta[j] = (-g.re).ln();
        theta[m + j] = g.im;
    }
    theta
}

impl VarPro<'_> {
    fn basis(&self, rates: &[C64]) -> DMatrix<C64> {
        DMatrix::from_fn(self.tau.len(), rates.len(), |k, j| (rates[j] * self.tau[k]).exp())
    }

    /// Amplitudes and residual vector for fixed rates.
    fn solve(&self, rates: &[C64]) -> Option<(DMatrix<C64>, DMatrix<C64>, DVector<C64>, DVector<C64>)> {
        let phi = self.basis(rates);
        let qr = phi.clone().qr();
        let q = qr.q();
        let r = qr.r();
        let y = DVector::from_column_slice(self.y);
        let qty = q.adjoint() * &y;
        let alpha = r.solve_upper_triangular(&qty)?;
        if alpha.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return None;
        }
        let resid = y - &phi * &alpha;
        Some((phi, q, alpha, resid))
    }
}

impl Residuals for VarPro<'_> {
    fn eval(&mut self, theta: &DVector<f64>, with_jacobian: bool) -> Option<(DVector<f64>, Option<DMatrix<f64>>)> {
        let m = theta.len() / 2;
        let b = self.bounds;
        if (0..m).any(|j| !(theta[j] >= b.lo && theta[j] <= b.hi && theta[m + j].abs() <= b.freq)) {
            return None;
        }
        let rates = rates_from(theta);
        let (phi, q, alpha, resid) = self.solve(&rates)?;
        let n = self.tau.len();
        let mut r = DVector::zeros(2 * n);
        for k in 0..n {
            r[k] = resid[k].re;
            r[n + k] = resid[k].im;
        }
        if !with_jacobian {
            return Some((r, None));
        }
        // Kaufman's approximation: ∂r/∂θ ≈ −P⊥ (∂Φ/∂θ) α.
        let mut t = DMatrix::from_fn(n, m, |k, j| phi[(k, j)] * self.tau[k]);
        let proj = &q * (q.adjoint() * &t);
        t -= proj;
        let mut jac = DMatrix::zeros(2 * n, 2 * m);
        for j in 0..m {
            let scale_q = theta[j].exp() * alpha[j];
            let scale_w = -I * alpha[j];
            for k in 0..n {
                let u = t[(k, j)];
                let dq = u * scale_q;
                let dw = u * scale_w;
                jac[(k, j)] = dq.re;
                jac[(n + k, j)] = dq.im;
                jac[(k, m + j)] = dw.re;
                jac[(n + k, m + j)] = dw.im;
            }
        }
        Some((r, Some(jac)))
    }
}

/// Refines `rates` against the samples and returns the fit with its
/// relative residual.
fn refine(tau: &[f64], y: &[C64], bounds: &RateBounds, rates: &[C64], norm: f64) -> Option<(ExpFit, f64)> {
    let mut prob = VarPro { tau, y, bounds };
    let theta0 = theta_from(rates, bounds);
    let opts = LmOptions { max_iter: 300, ftol: 1e-10, xtol: 1e-12 };
    let res = lsq::levenberg_marquardt(&mut prob, theta0, &opts)?;
    let rates = rates_from(&res.x);
    let (_, _, alpha, resid) = prob.solve(&rates)?;
    let err = resid.norm() / norm;
    let terms = alpha.iter().cloned().zip(rates).collect();
    Some((ExpFit { terms, residual: err }, err))
}

/// Deterministic starting points for an `m`-term fit.
fn starts(y: &[C64], dt: f64, span: f64, m: usize, previous: Option<&ExpFit>, tau: &[f64]) -> Vec<Vec<C64>> {
    let mut out = Vec::new();
    let pencil = pencil_rates(y, dt, m);
    if pencil.len() == m {
        out.push(pencil);
    }
    if let Some(prev) = previous {
        // Previous optimum plus the dominant rates of its residual.
        let extra = m - prev.len();
        let resid: Vec<C64> = tau.iter().zip(y).map(|(t, v)| v - prev.eval(*t)).collect();
        let mut add = pencil_rates(&resid, dt, extra);
        if add.len() == extra {
            let mut r: Vec<C64> = prev.terms.iter().map(|t| t.1).collect();
            r.append(&mut add);
            out.push(r);
        }
    }
    // Fourier-like grids of slowly decaying oscillations.
    for (decay, band) in [(4.0, 4.0), (4.0, 8.0), (1.0, 2.0)] {
        let re = -decay / span;
        out.push(
            (0..m)
                .map(|j| {
                    let w = if m == 1 { 0.0 } else { -band + 2.0 * band * j as f64 / (m - 1) as f64 };
                    C64::new(re, w)
                })
                .collect(),
        );
    }
    out
}

fn term_schedule(m_max: usize) -> Vec<usize> {
    let mut s = Vec::new();
    let mut m = 1;
    while m <= m_max {
        s.push(m);
        m += if m < 8 { 1 } else if m < 16 { 2 } else { 4 };
    }
    if s.last() != Some(&m_max) && m_max > 0 {
        s.push(m_max);
    }
    s
}

/// Sum-of-exponentials fit of uniformly spaced samples, certified to a
/// relative L² residual of at most `tol` with at most `m_max` terms.
pub fn fit_exponentials(samples: &[BathSample], tol: f64, m_max: usize) -> Result<ExpFit, Error> {
    fit_kernel("kernel", samples, tol, m_max)
}

/// As [`fit_exponentials`], naming the kernel in failure reports.
pub fn fit_kernel(name: &str, samples: &[BathSample], tol: f64, m_max: usize) -> Result<ExpFit, Error> {
    let dt = uniform_step(samples)?;
    let tau: Vec<f64> = samples.iter().map(|s| s.tau).collect();
    let y: Vec<C64> = samples.iter().map(|s| s.value).collect();
    let norm = y.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(ExpFit::default());
    }
    let span = tau[tau.len() - 1] - tau[0];
    let bounds = RateBounds::new(dt, span);
    let mut curve = Vec::new();
    let mut best: Option<ExpFit> = None;
    let mut previous: Option<ExpFit> = None;
    for m in term_schedule(m_max) {
        let mut best_m: Option<ExpFit> = None;
        for start in starts(&y, dt, span, m, previous.as_ref(), &tau) {
            if let Some((fit, err)) = refine(&tau, &y, &bounds, &start, norm) {
                if best_m.as_ref().is_none_or(|b| err < b.residual) {
                    best_m = Some(fit);
                }
            }
        }
        let Some(fit) = best_m else { continue };
        curve.push((m, fit.residual));
        if best.as_ref().is_none_or(|b| fit.residual < b.residual) {
            best = Some(fit.clone());
        }
        if fit.residual <= tol {
            return Ok(fit);
        }
        previous = Some(fit);
    }
    Err(Error::Fit {
        kernel: name.to_string(),
        best_residual: best.map_or(f64::INFINITY, |b| b.residual),
        tol,
        curve,
    })
}

/// Thermal frequencies kept exactly before compression.
const THERMAL_EXACT: usize = 4;
/// Nodes per compressed frequency octave.
const OCTAVE_NODES: usize = 4;
/// Thermal frequencies above this are merged into one term that keeps the
/// total weight and the time integral.
const THERMAL_LUMP_RATE: f64 = 1e4;

/// Gauss rule with `q` nodes for the discrete measure `Σ wᵢ δ(x − xᵢ)`
/// with positive weights, via the discretized Stieltjes procedure.
pub(crate) fn discrete_gauss(x: &[f64], w: &[f64], q: usize) -> Vec<(f64, f64)> {
    if x.len() <= q {
        return x.iter().cloned().zip(w.iter().cloned()).collect();
    }
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo).max(f64::MIN_POSITIVE));
    let t: Vec<f64> = x.iter().map(|v| (v - c) / h).collect();
    let n = t.len();
    let mut a = alloc::vec![0.0; q];
    let mut b = alloc::vec![0.0; q];
    let mut p_prev = alloc::vec![0.0; n];
    let mut p = alloc::vec![1.0; n];
    let mut norm_prev = 1.0;
    let mu0: f64 = w.iter().sum();
    for k in 0..q {
        let norm: f64 = (0..n).map(|i| w[i] * p[i] * p[i]).sum();
        a[k] = (0..n).map(|i| w[i] * t[i] * p[i] * p[i]).sum::<f64>() / norm;
        b[k] = if k == 0 { mu0 } else { norm / norm_prev };
        let next: Vec<f64> = (0..n).map(|i| (t[i] - a[k]) * p[i] - if k == 0 { 0.0 } else { b[k] * p_prev[i] }).collect();
        // Rescale to keep the recurrence in range; the ratio b stays exact.
        let s = next.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        p_prev = p.iter().map(|v| v / s).collect();
        p = next.iter().map(|v| v / s).collect();
        norm_prev = norm / (s * s);
    }
    let mut jac = DMatrix::zeros(q, q);
    for k in 0..q {
        jac[(k, k)] = a[k];
        if k + 1 < q {
            let off = b[k + 1].sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = jac.symmetric_eigen();
    (0..q)
        .map(|j| {
            let v0 = eig.eigenvectors[(0, j)];
            (c + h * eig.eigenvalues[j], mu0 * v0 * v0)
        })
        .collect()
}

/// Compresses the thermal series into exact leading terms and
/// Gauss-compressed octaves; all amplitudes share one sign.
pub fn compress_thermal(thermal: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> = thermal.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out: Vec<(f64, f64)> = sorted.iter().take(THERMAL_EXACT).cloned().collect();
    let rest = &sorted[out.len()..];
    let split = rest.partition_point(|t| t.1 <= THERMAL_LUMP_RATE);
    let (mid, tail) = rest.split_at(split);
    let mut start = 0;
    while start < mid.len() {
        let edge = 2.0 * mid[start].1;
        let mut end = start;
        while end < mid.len() && mid[end].1 < edge {
            end += 1;
        }
        let group = &mid[start..end];
        let sign = if group[0].0 < 0.0 { -1.0 } else { 1.0 };
        let x: Vec<f64> = group.iter().map(|g| g.1).collect();
        let w: Vec<f64> = group.iter().map(|g| g.0.abs()).collect();
        for (nu, weight) in discrete_gauss(&x, &w, OCTAVE_NODES) {
            out.push((sign * weight, nu));
        }
        start = end;
    }
    let weight: f64 = tail.iter().map(|t| t.0).sum();
    let integral: f64 = tail.iter().map(|t| t.0 / t.1).sum();
    if weight != 0.0 && integral != 0.0 {
        out.push((weight, weight / integral));
    }
    out
}

/// Weak-coupling correlation function samples on a lag grid.
pub fn weak_samples(p: &ModelParams, lor: &LorFit, part: &LorentzianPart, grid: LagGrid) -> Vec<BathSample> {
    bath::weak_grid(p, lor, part, grid.step(), grid.points)
}

/// Exponential representation of the weak-coupling correlation function:
/// closed-form poles and compressed thermal terms, plus a fitted remainder
/// covering the `sinc` part.
pub fn fit_weak_kernel(p: &ModelParams, lor: &LorFit, grid: LagGrid, tol: f64, m_max: usize) -> Result<ExpFit, Error> {
    if lor.terms.is_empty() {
        return Ok(ExpFit::default());
    }
    let part = bath::lorentzian_part(p, lor);
    let mut terms: Vec<(C64, C64)> = part.poles.clone();
    for (c, nu) in compress_thermal(&part.thermal) {
        terms.push((C64::new(c, 0.0), C64::new(-nu, 0.0)));
    }
    let closed = ExpFit { terms, residual: 0.0 };
    let samples = weak_samples(p, lor, &part, grid);
    let norm = samples.iter().map(|s| s.value.norm_sqr()).sum::<f64>().sqrt();
    let remainder: Vec<BathSample> =
        samples.iter().map(|s| BathSample { tau: s.tau, value: s.value - closed.eval(s.tau) }).collect();
    let rem_norm = remainder.iter().map(|s| s.value.norm_sqr()).sum::<f64>().sqrt();
    let rem_tol = tol * norm / rem_norm.max(f64::MIN_POSITIVE);
    let (rem_fit, failure) = match fit_kernel("weak", &remainder, rem_tol, m_max) {
        Ok(f) => (f, None),
        Err(Error::Fit { best_residual, curve, .. }) => {
            let curve = curve.into_iter().map(|(m, r)| (m, r * rem_norm / norm)).collect();
            (ExpFit::default(), Some((best_residual * rem_norm / norm, curve)))
        }
        Err(e) => return Err(e),
    };
    if let Some((best_residual, curve)) = failure {
        return Err(Error::Fit { kernel: "weak".to_string(), best_residual, tol, curve });
    }
    let mut fit = closed;
    fit.terms.extend(rem_fit.terms);
    fit.residual = fit.relative_residual(&samples);
    Ok(fit)
}
