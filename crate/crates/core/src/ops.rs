//! Two-level operator algebra.
//!
//! [`Op2`] is stored row-major. Vectorization is column-major and every
//! superoperator is built through [`commutator_superop`] so the layout is
//! fixed in one place.

use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use num_traits::Float;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// 2×2 complex operator, row-major: `[a00, a01, a10, a11]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Op2(pub [C64; 4]);

/// Column-major vectorization of an [`Op2`]: `[a00, a10, a01, a11]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec4(pub [C64; 4]);

/// Linear map on [`Vec4`], stored as `rows[r][c]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Superop(pub [[C64; 4]; 4]);

impl Op2 {
    pub const ZERO: Op2 = Op2([ZERO; 4]);
    pub const IDENTITY: Op2 = Op2([ONE, ZERO, ZERO, ONE]);
    pub const SIGMA_X: Op2 = Op2([ZERO, ONE, ONE, ZERO]);
    pub const SIGMA_Y: Op2 = Op2([ZERO, C64::new(0.0, -1.0), I, ZERO]);
    pub const SIGMA_Z: Op2 = Op2([ONE, ZERO, ZERO, C64::new(-1.0, 0.0)]);
    /// `|l><l|`
    pub const LEFT: Op2 = Op2([ONE, ZERO, ZERO, ZERO]);
    /// `|r><r|`
    pub const RIGHT: Op2 = Op2([ZERO, ZERO, ZERO, ONE]);

    pub const fn new(a00: C64, a01: C64, a10: C64, a11: C64) -> Self {
        Op2([a00, a01, a10, a11])
    }

    pub fn real(a00: f64, a01: f64, a10: f64, a11: f64) -> Self {
        Op2([a00.into(), a01.into(), a10.into(), a11.into()])
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Op2::real(a, 0.0, 0.0, b)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[2 * row + col]
    }

    #[inline]
    pub fn trace(&self) -> C64 {
        self.0[0] + self.0[3]
    }

    #[inline]
    pub fn adjoint(&self) -> Op2 {
        let [a, b, c, d] = self.0;
        Op2([a.conj(), c.conj(), b.conj(), d.conj()])
    }

    #[inline]
    pub fn scale(&self, s: C64) -> Op2 {
        let [a, b, c, d] = self.0;
        Op2([a * s, b * s, c * s, d * s])
    }

    #[inline]
    pub fn scale_re(&self, s: f64) -> Op2 {
        let [a, b, c, d] = self.0;
        Op2([a * s, b * s, c * s, d * s])
    }

    /// `self·rhs − rhs·self`
    #[inline]
    pub fn commutator(&self, rhs: &Op2) -> Op2 {
        *self * *rhs - *rhs * *self
    }

    /// Largest entry-wise modulus of `self − self†`.
    pub fn herm_defect(&self) -> f64 {
        let d = *self - self.adjoint();
        d.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Largest entry-wise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for Op2 {
    type Output = Op2;
    #[inline]
    fn add(self, r: Op2) -> Op2 {
        Op2([self.0[0] + r.0[0], self.0[1] + r.0[1], self.0[2] + r.0[2], self.0[3] + r.0[3]])
    }
}

impl Sub for Op2 {
    type Output = Op2;
    #[inline]
    fn sub(self, r: Op2) -> Op2 {
        Op2([self.0[0] - r.0[0], self.0[1] - r.0[1], self.0[2] - r.0[2], self.0[3] - r.0[3]])
    }
}

impl AddAssign for Op2 {
    #[inline]
    fn add_assign(&mut self, r: Op2) {
        for (a, b) in self.0.iter_mut().zip(r.0) {
            *a += b;
        }
    }
}

impl SubAssign for Op2 {
    #[inline]
    fn sub_assign(&mut self, r: Op2) {
        for (a, b) in self.0.iter_mut().zip(r.0) {
            *a -= b;
        }
    }
}

impl Neg for Op2 {
    type Output = Op2;
    #[inline]
    fn neg(self) -> Op2 {
        Op2([-self.0[0], -self.0[1], -self.0[2], -self.0[3]])
    }
}

impl Mul for Op2 {
    type Output = Op2;
    #[inline]
    fn mul(self, r: Op2) -> Op2 {
        let [a, b, c, d] = self.0;
        let [e, f, g, h] = r.0;
        Op2([a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h])
    }
}

impl Mul<C64> for Op2 {
    type Output = Op2;
    #[inline]
    fn mul(self, s: C64) -> Op2 {
        self.scale(s)
    }
}

impl Mul<f64> for Op2 {
    type Output = Op2;
    #[inline]
    fn mul(self, s: f64) -> Op2 {
        self.scale_re(s)
    }
}

pub fn vectorize(op: &Op2) -> Vec4 {
    let [a00, a01, a10, a11] = op.0;
    Vec4([a00, a10, a01, a11])
}

pub fn devectorize(v: &Vec4) -> Op2 {
    let [a00, a10, a01, a11] = v.0;
    Op2([a00, a01, a10, a11])
}

impl Superop {
    pub fn apply(&self, v: &Vec4) -> Vec4 {
        let mut out = [ZERO; 4];
        for (r, row) in self.0.iter().enumerate() {
            out[r] = row.iter().zip(v.0.iter()).map(|(a, b)| a * b).sum();
        }
        Vec4(out)
    }

    /// Applies the map to an operator through the vectorized layout.
    pub fn apply_op(&self, op: &Op2) -> Op2 {
        devectorize(&self.apply(&vectorize(op)))
    }
}

/// Matrix of `A ↦ scale·(op·A − A·op)` in the column-major layout.
///
/// With column-major `vec`, `vec(X·A·Y) = (Yᵀ ⊗ X)·vec(A)`, so the map is
/// `scale·(I ⊗ op − opᵀ ⊗ I)`.
pub fn commutator_superop(op: &Op2, scale: C64) -> Superop {
    let mut m = [[ZERO; 4]; 4];
    // Index of vec entry (row i, col j) is 2j + i.
    for j in 0..2 {
        for i in 0..2 {
            let r = 2 * j + i;
            for l in 0..2 {
                for k in 0..2 {
                    let c = 2 * l + k;
                    let mut v = ZERO;
                    if j == l {
                        v += op.get(i, k);
                    }
                    if i == k {
                        v -= op.get(l, j);
                    }
                    m[r][c] = scale * v;
                }
            }
        }
    }
    Superop(m)
}

/// Trace, hermiticity defect and eigenvalue bounds of a density matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityReport {
    pub trace: C64,
    pub herm_defect: f64,
    pub eig_min: f64,
    pub eig_max: f64,
}

/// Eigenvalues are taken from the Hermitian part in closed form.
pub fn density_checks(rho: &Op2) -> DensityReport {
    let h = (*rho + rho.adjoint()).scale_re(0.5);
    let a = h.0[0].re;
    let d = h.0[3].re;
    let mean = 0.5 * (a + d);
    let half_gap = (0.25 * (a - d) * (a - d) + h.0[1].norm_sqr()).sqrt();
    DensityReport {
        trace: rho.trace(),
        herm_defect: rho.herm_defect(),
        eig_min: mean - half_gap,
        eig_max: mean + half_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn superop_matches_direct_commutator() {
        let h = Op2::new(C64::new(0.3, 0.0), C64::new(0.1, -0.7), C64::new(0.1, 0.7), C64::new(-1.2, 0.0));
        let a = Op2::new(C64::new(0.5, 0.2), C64::new(-0.4, 1.1), C64::new(2.0, -0.3), C64::new(0.9, 0.6));
        let s = C64::new(0.2, -1.3);
        let direct = h.commutator(&a).scale(s);
        let via = commutator_superop(&h, s).apply_op(&a);
        assert!((direct - via).max_abs() < 1e-14);
    }
}
