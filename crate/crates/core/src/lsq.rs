//! Dense Levenberg–Marquardt for small nonlinear least-squares problems.

use nalgebra::{DMatrix, DVector};

/// A residual vector with an optional Jacobian, produced on demand.
pub trait Residuals {
    /// Residuals at `x`, plus the Jacobian when `with_jacobian` is set.
    /// Returns `None` when `x` lies outside the admissible region.
    fn eval(&mut self, x: &DVector<f64>, with_jacobian: bool) -> Option<(DVector<f64>, Option<DMatrix<f64>>)>;
}

#[derive(Clone, Copy, Debug)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop when the step is this small relative to the parameters.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions { max_iter: 400, ftol: 1e-12, xtol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct LmResult {
    pub x: DVector<f64>,
    /// Half the squared residual norm.
    pub cost: f64,
    pub iterations: usize,
}

pub fn levenberg_marquardt<R: Residuals>(problem: &mut R, x0: DVector<f64>, opts: &LmOptions) -> Option<LmResult> {
    let (mut r, j) = problem.eval(&x0, true)?;
    let mut jac = j?;
    let mut x = x0;
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda: Option<f64> = None;
    let mut quiet = 0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let diag: DVector<f64> = jtj.diagonal().map(|d| d.max(1e-30));
        let lam = *lambda.get_or_insert_with(|| 1e-3 * diag.max());
        let mut a = jtj.clone();
        for k in 0..a.nrows() {
            a[(k, k)] += lam * diag[k];
        }
        let step = match a.cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => {
                lambda = Some(lam * 10.0);
                continue;
            }
        };
        let trial = &x + &step;
        let accepted = match problem.eval(&trial, false) {
            Some((rt, _)) => {
                let ct = 0.5 * rt.norm_squared();
                if ct.is_finite() && ct < cost {
                    Some(ct)
                } else {
                    None
                }
            }
            None => None,
        };
        match accepted {
            Some(ct) => {
                let gain = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                let small_step = step.norm() <= opts.xtol * (x.norm() + opts.xtol);
                x = trial;
                cost = ct;
                let (rn, jn) = problem.eval(&x, true)?;
                r = rn;
                jac = jn?;
                lambda = Some((lam / 3.0).max(1e-15));
                if gain < opts.ftol || small_step {
                    quiet += 1;
                    if quiet >= 3 {
                        break;
                    }
                } else {
                    quiet = 0;
                }
                if cost == 0.0 {
                    break;
                }
            }
            None => {
                if lam > 1e16 {
                    break;
                }
                lambda = Some(lam * 4.0);
            }
        }
    }
    Some(LmResult { x, cost, iterations })
}
