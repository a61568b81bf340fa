//! Symmetric second-order tensors in three dimensions.
//!
//! Components are stored in the fixed order `(11, 22, 33, 12, 13, 23)` as
//! true tensor components. Shear entries are *not* engineering shears, so the
//! double contraction counts every off-diagonal entry twice.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// A 3×3 matrix in row-major nested-array form.
pub type Mat3 = [[f64; 3]; 3];

/// Index pairs for the six stored components.
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor3(pub [f64; 6]);

impl SymTensor3 {
    pub const ZERO: SymTensor3 = SymTensor3([0.0; 6]);

    pub fn identity() -> Self {
        SymTensor3([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        SymTensor3([a, b, c, 0.0, 0.0, 0.0])
    }

    /// Builds a tensor from the six components `(11, 22, 33, 12, 13, 23)`.
    pub fn new(c: [f64; 6]) -> Self {
        SymTensor3(c)
    }

    /// Symmetric part of an arbitrary 3×3 matrix.
    pub fn sym_part(m: &Mat3) -> Self {
        SymTensor3([
            m[0][0],
            m[1][1],
            m[2][2],
            0.5 * (m[0][1] + m[1][0]),
            0.5 * (m[0][2] + m[2][0]),
            0.5 * (m[1][2] + m[2][1]),
        ])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let c = &self.0;
        match (i.min(j), i.max(j)) {
            (0, 0) => c[0],
            (1, 1) => c[1],
            (2, 2) => c[2],
            (0, 1) => c[3],
            (0, 2) => c[4],
            (1, 2) => c[5],
            _ => panic!("tensor index ({i}, {j}) out of range"),
        }
    }

    pub fn to_matrix(&self) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[1] + self.0[2]
    }

    /// Full double contraction `A : B = Σ_ij A_ij B_ij`.
    #[inline]
    pub fn ddot(&self, other: &SymTensor3) -> f64 {
        let (a, b) = (&self.0, &other.0);
        a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + 2.0 * (a[3] * b[3] + a[4] * b[4] + a[5] * b[5])
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.0;
        out.iter_mut().for_each(|v| *v *= s);
        SymTensor3(out)
    }

    /// `R · A · Rᵀ`
    pub fn rotate(&self, r: &Mat3) -> Self {
        let a = self.to_matrix();
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        s += r[i][k] * a[k][l] * r[j][l];
                    }
                }
                out[i][j] = s;
            }
        }
        SymTensor3::sym_part(&out)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Add for SymTensor3 {
    type Output = SymTensor3;
    fn add(self, rhs: SymTensor3) -> SymTensor3 {
        let mut out = self.0;
        out.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
        SymTensor3(out)
    }
}

impl AddAssign for SymTensor3 {
    fn add_assign(&mut self, rhs: SymTensor3) {
        self.0.iter_mut().zip(rhs.0).for_each(|(a, b)| *a += b);
    }
}

impl Sub for SymTensor3 {
    type Output = SymTensor3;
    fn sub(self, rhs: SymTensor3) -> SymTensor3 {
        let mut out = self.0;
        out.iter_mut().zip(rhs.0).for_each(|(a, b)| *a -= b);
        SymTensor3(out)
    }
}

impl Neg for SymTensor3 {
    type Output = SymTensor3;
    fn neg(self) -> SymTensor3 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for SymTensor3 {
    type Output = SymTensor3;
    fn mul(self, s: f64) -> SymTensor3 {
        self.scale(s)
    }
}

impl Mul<SymTensor3> for f64 {
    type Output = SymTensor3;
    fn mul(self, t: SymTensor3) -> SymTensor3 {
        t.scale(self)
    }
}
