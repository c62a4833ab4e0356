//! Complex 2x2 matrices.

use serde::{Deserialize, Serialize};
use std::ops::Mul;

use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2(pub [[C64; 2]; 2]);

impl Mat2 {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Self([[a, b], [c, d]])
    }

    pub fn identity() -> Self {
        let (o, z) = (C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        Self::new(o, z, z, o)
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = self.0;
        Self::new(m[0][0] * s, m[0][1] * s, m[1][0] * s, m[1][1] * s)
    }

    pub fn det(&self) -> C64 {
        let m = self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn adjoint(&self) -> Self {
        let m = self.0;
        Self::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == C64::new(0.0, 0.0) {
            return None;
        }
        let m = self.0;
        Some(Self::new(m[1][1], -m[0][1], -m[1][0], m[0][0]).scale(d.inv()))
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = self.0;
        [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.iter().flatten().map(|x| x.norm_sqr()).sum()
    }

    /// Spectral norm from the eigenvalues of `M* M`.
    /// Spectral norm as `(sqrt(f + 2|det|) + sqrt(f - 2|det|)) / 2`, with the
    /// difference written as a sum of squares so nearly unitary inputs stay accurate.
    pub fn norm(&self) -> f64 {
        let [[a, b], [c, d]] = self.0;
        let det = self.det();
        let u = if det.norm() > 0.0 { det / det.norm() } else { C64::new(1.0, 0.0) };
        let lo = (a - u * d.conj()).norm_sqr() + (b + u * c.conj()).norm_sqr();
        let hi = self.frobenius_sq() + 2.0 * det.norm();
        (hi.sqrt() + lo.sqrt()) / 2.0
    }

    pub fn sub(&self, other: &Self) -> Self {
        let (a, b) = (self.0, other.0);
        Self::new(a[0][0] - b[0][0], a[0][1] - b[0][1], a[1][0] - b[1][0], a[1][1] - b[1][1])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}
