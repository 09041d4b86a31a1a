//! Minimal 2D vector and symmetric 2x2 matrix types.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// A point or vector in the plane (bohr, or a.u. of momentum/velocity).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        self.x -= o.x;
        self.y -= o.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<(f64, f64)> for Vec2 {
    fn from((x, y): (f64, f64)) -> Self {
        Vec2::new(x, y)
    }
}

/// Symmetric 2x2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub fn determinant(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = half_diff.hypot(self.xy);
        (mean - r, mean + r)
    }

    /// Unit eigenvector for the given eigenvalue.
    pub fn eigenvector(&self, lambda: f64) -> Vec2 {
        // rows of (H - lambda I); pick the better-conditioned one
        let a = Vec2::new(self.xy, lambda - self.xx);
        let b = Vec2::new(lambda - self.yy, self.xy);
        let v = if a.norm_sq() >= b.norm_sq() { a } else { b };
        let n = v.norm();
        if n == 0.0 {
            // isotropic: any direction is an eigenvector
            Vec2::new(1.0, 0.0)
        } else {
            v * (1.0 / n)
        }
    }

    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// Solve `H d = rhs`; `None` when singular.
    pub fn solve(&self, rhs: Vec2) -> Option<Vec2> {
        let det = self.determinant();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Vec2::new(
            (self.yy * rhs.x - self.xy * rhs.y) / det,
            (self.xx * rhs.y - self.xy * rhs.x) / det,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_decomposition_of_diagonal_and_rotated() {
        let h = Sym2 { xx: 2.0, xy: 0.0, yy: -1.0 };
        assert_eq!(h.eigenvalues(), (-1.0, 2.0));
        let v = h.eigenvector(-1.0);
        assert!((v.y.abs() - 1.0).abs() < 1e-15);

        let h = Sym2 { xx: 1.0, xy: 2.0, yy: 1.0 };
        let (lo, hi) = h.eigenvalues();
        assert!((lo + 1.0).abs() < 1e-14 && (hi - 3.0).abs() < 1e-14);
        for lambda in [lo, hi] {
            let v = h.eigenvector(lambda);
            let r = h.mul_vec(v) - v * lambda;
            assert!(r.norm() < 1e-13);
        }
    }

    #[test]
    fn solve_inverts_mul() {
        let h = Sym2 { xx: 3.0, xy: -0.5, yy: 2.0 };
        let x = Vec2::new(0.3, -1.7);
        let back = h.solve(h.mul_vec(x)).unwrap();
        assert!((back - x).norm() < 1e-14);
        assert!(Sym2 { xx: 1.0, xy: 1.0, yy: 1.0 }.solve(x).is_none());
    }
}
