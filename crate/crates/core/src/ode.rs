//! Dormand–Prince 5(4) integration of complex ODE systems with dense output.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::Error;
use crate::ops::{C64, ZERO};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Largest admissible step; `∞` leaves it free.
    pub h_max: f64,
    /// Accepted plus rejected steps before giving up.
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn new(rtol: f64, atol: f64) -> Self {
        OdeOptions { rtol, atol, h_max: f64::INFINITY, max_steps: 50_000_000 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Quartic interpolant over one accepted step.
#[derive(Clone, Debug)]
pub struct DenseStep {
    pub t0: f64,
    pub h: f64,
    coeffs: [Vec<C64>; 5],
}

impl DenseStep {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Interpolated state at `t` within the step.
    pub fn eval_into(&self, t: f64, out: &mut [C64]) {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        for i in 0..out.len() {
            out[i] = r1[i] + (r2[i] + (r3[i] + (r4[i] + r5[i] * s1) * s) * s1) * s;
        }
    }
}

/// Adaptive integrator state, advanced in segments.
pub struct Dopri5<F> {
    f: F,
    t: f64,
    y: Vec<C64>,
    k: [Vec<C64>; 7],
    scratch: Vec<C64>,
    y_new: Vec<C64>,
    h: f64,
    opts: OdeOptions,
    stats: OdeStats,
    last: Option<DenseStep>,
}

impl<F: FnMut(f64, &[C64], &mut [C64])> Dopri5<F> {
    pub fn new(mut f: F, t0: f64, y0: &[C64], opts: OdeOptions) -> Self {
        let n = y0.len();
        let mut k: [Vec<C64>; 7] = core::array::from_fn(|_| vec![ZERO; n]);
        f(t0, y0, &mut k[0]);
        let mut s = Dopri5 {
            f,
            t: t0,
            y: y0.to_vec(),
            k,
            scratch: vec![ZERO; n],
            y_new: vec![ZERO; n],
            h: 0.0,
            opts,
            stats: OdeStats { evaluations: 1, ..OdeStats::default() },
            last: None,
        };
        s.h = s.initial_step();
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &[C64] {
        &self.y
    }

    pub fn stats(&self) -> OdeStats {
        self.stats
    }

    /// Replaces the state at the current time, discarding step history.
    pub fn reset_state(&mut self, y: &[C64]) {
        self.y.copy_from_slice(y);
        (self.f)(self.t, &self.y, &mut self.k[0]);
        self.stats.evaluations += 1;
        self.last = None;
    }

    fn scale(&self, a: C64, b: C64) -> (f64, f64) {
        let o = &self.opts;
        (o.atol + o.rtol * a.re.abs().max(b.re.abs()), o.atol + o.rtol * a.im.abs().max(b.im.abs()))
    }

    fn norm(&self, v: &[C64], reference: &[C64]) -> f64 {
        let mut s = 0.0;
        for (x, y) in v.iter().zip(reference) {
            let (sr, si) = self.scale(*y, *y);
            s += (x.re / sr).powi(2) + (x.im / si).powi(2);
        }
        (s / (2 * v.len()).max(1) as f64).sqrt()
    }

    fn initial_step(&mut self) -> f64 {
        let d0 = self.norm(&self.y, &self.y);
        let d1 = self.norm(&self.k[0], &self.y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(self.opts.h_max);
        for i in 0..self.y.len() {
            self.scratch[i] = self.y[i] + self.k[0][i] * h0;
        }
        let (k0, rest) = self.k.split_at_mut(1);
        (self.f)(self.t + h0, &self.scratch, &mut rest[0]);
        self.stats.evaluations += 1;
        let diff: Vec<C64> = rest[0].iter().zip(k0[0].iter()).map(|(a, b)| a - b).collect();
        let d2 = self.norm(&diff, &self.y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
        (100.0 * h0).min(h1).min(self.opts.h_max)
    }

    /// One attempted step of size `h`; returns the error norm.
    fn attempt(&mut self, h: f64) -> f64 {
        let n = self.y.len();
        let t = self.t;
        let y = &self.y;
        let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
        let s = &mut self.scratch;
        let f = &mut self.f;
        for i in 0..n {
            s[i] = y[i] + k1[i] * (h * A21);
        }
        f(t + C2 * h, s, k2);
        for i in 0..n {
            s[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
        }
        f(t + C3 * h, s, k3);
        for i in 0..n {
            s[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
        }
        f(t + C4 * h, s, k4);
        for i in 0..n {
            s[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
        }
        f(t + C5 * h, s, k5);
        for i in 0..n {
            s[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
        }
        f(t + h, s, k6);
        let yn = &mut self.y_new;
        for i in 0..n {
            yn[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
        }
        f(t + h, yn, k7);
        self.stats.evaluations += 6;
        let o = self.opts;
        let mut acc = 0.0;
        for i in 0..n {
            let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
            let (sr, si) = (
                o.atol + o.rtol * y[i].re.abs().max(yn[i].re.abs()),
                o.atol + o.rtol * y[i].im.abs().max(yn[i].im.abs()),
            );
            acc += (e.re / sr).powi(2) + (e.im / si).powi(2);
        }
        (acc / (2 * n).max(1) as f64).sqrt()
    }

    fn dense_step(&self, h: f64) -> DenseStep {
        let n = self.y.len();
        let [k1, _, k3, k4, k5, k6, k7] = &self.k;
        let mut r = core::array::from_fn::<Vec<C64>, 5, _>(|_| vec![ZERO; n]);
        for i in 0..n {
            let dy = self.y_new[i] - self.y[i];
            let bspl = k1[i] * h - dy;
            r[0][i] = self.y[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - k7[i] * h - bspl;
            r[4][i] = (k1[i] * D1 + k3[i] * D3 + k4[i] * D4 + k5[i] * D5 + k6[i] * D6 + k7[i] * D7) * h;
        }
        DenseStep { t0: self.t, h, coeffs: r }
    }

    /// Takes accepted steps until `t_end`, handing each step's interpolant to `on_step`.
    pub fn advance_dense(&mut self, t_end: f64, mut on_step: impl FnMut(&DenseStep)) -> Result<(), Error> {
        let mut reject_streak = false;
        while self.t < t_end {
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(Error::Integration { t: self.t, reason: "step budget exhausted" });
            }
            let remaining = t_end - self.t;
            let mut h = self.h.min(self.opts.h_max);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return Err(Error::Stiffness { t: self.t, h, steps: self.stats.accepted });
            }
            let err = self.attempt(h);
            if !err.is_finite() {
                self.stats.rejected += 1;
                self.h = 0.2 * h;
                reject_streak = true;
                continue;
            }
            let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
            if err <= 1.0 {
                self.stats.accepted += 1;
                let step = self.dense_step(h);
                self.t = if last { t_end } else { self.t + h };
                core::mem::swap(&mut self.y, &mut self.y_new);
                let (k1, rest) = self.k.split_at_mut(1);
                core::mem::swap(&mut k1[0], &mut rest[5]);
                on_step(&step);
                self.last = Some(step);
                let grow = if reject_streak { fac.min(1.0) } else { fac };
                reject_streak = false;
                // Keep the proposal from collapsing after a short final step.
                if !last || h * grow > self.h {
                    self.h = h * grow;
                }
            } else {
                self.stats.rejected += 1;
                self.h = h * fac;
                reject_streak = true;
            }
        }
        Ok(())
    }

    /// Advances to `t_end`, reporting the interpolated state at each of the
    /// ascending `samples` inside `(t, t_end]`; a sample equal to the start
    /// time is reported from the current state.
    pub fn advance_to(
        &mut self,
        t_end: f64,
        samples: &[f64],
        mut observe: impl FnMut(f64, &[C64]),
    ) -> Result<(), Error> {
        let mut next = 0;
        while next < samples.len() && samples[next] <= self.t {
            if samples[next] == self.t {
                observe(self.t, &self.y);
            }
            next += 1;
        }
        let mut buf = vec![ZERO; self.y.len()];
        self.advance_dense(t_end, |step| {
            while next < samples.len() && samples[next] <= step.t1() {
                step.eval_into(samples[next], &mut buf);
                observe(samples[next], &buf);
                next += 1;
            }
        })?;
        // Samples at exactly t_end after rounding land here.
        while next < samples.len() && samples[next] <= t_end {
            observe(samples[next], &self.y);
            next += 1;
        }
        Ok(())
    }
}
