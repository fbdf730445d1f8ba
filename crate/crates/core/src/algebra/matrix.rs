//! 3×3 colour matrices, colour vectors and Dirac spinors.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;

pub type Complex = Complex64;

pub const ZERO: Complex = Complex::new(0.0, 0.0);
pub const ONE: Complex = Complex::new(1.0, 0.0);

pub type ColorVector = [Complex; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorMatrix(pub [[Complex; 3]; 3]);

impl ColorMatrix {
    pub const ZERO: ColorMatrix = ColorMatrix([[ZERO; 3]; 3]);
    pub const IDENTITY: ColorMatrix = ColorMatrix([[ONE, ZERO, ZERO], [ZERO, ONE, ZERO], [ZERO, ZERO, ONE]]);

    pub fn adjoint(&self) -> ColorMatrix {
        let m = &self.0;
        ColorMatrix(std::array::from_fn(|i| std::array::from_fn(|j| m[j][i].conj())))
    }

    pub fn mul(&self, rhs: &ColorMatrix) -> ColorMatrix {
        let (a, b) = (&self.0, &rhs.0);
        ColorMatrix(std::array::from_fn(|i| {
            std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j])
        }))
    }

    pub fn determinant(&self) -> Complex {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry of `|U†U − 1|`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.adjoint().mul(self);
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { ONE } else { ZERO };
                worst = worst.max((p.0[i][j] - target).norm());
            }
        }
        worst
    }

    pub fn scale(&self, s: f64) -> ColorMatrix {
        ColorMatrix(self.0.map(|row| row.map(|z| z * s)))
    }
}

#[inline(always)]
pub fn matvec(m: &ColorMatrix, v: &ColorVector) -> ColorVector {
    let m = &m.0;
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// `m† v` without forming the adjoint.
#[inline(always)]
pub fn adjoint_matvec(m: &ColorMatrix, v: &ColorVector) -> ColorVector {
    let m = &m.0;
    [
        m[0][0].conj() * v[0] + m[1][0].conj() * v[1] + m[2][0].conj() * v[2],
        m[0][1].conj() * v[0] + m[1][1].conj() * v[1] + m[2][1].conj() * v[2],
        m[0][2].conj() * v[0] + m[1][2].conj() * v[1] + m[2][2].conj() * v[2],
    ]
}

/// Four spin components of a colour vector, spin outer and colour inner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spinor(pub [ColorVector; 4]);

impl Default for Spinor {
    fn default() -> Self {
        Spinor::ZERO
    }
}

impl Spinor {
    pub const ZERO: Spinor = Spinor([[ZERO; 3]; 4]);
    pub const COMPONENTS: usize = 12;

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Complex) -> Spinor {
        Spinor(std::array::from_fn(|s| std::array::from_fn(|c| f(s, c))))
    }

    pub fn components(&self) -> impl Iterator<Item = &Complex> {
        self.0.iter().flatten()
    }

    pub fn scale(&self, a: Complex) -> Spinor {
        Spinor(self.0.map(|v| v.map(|z| a * z)))
    }

    pub fn norm2(&self) -> f64 {
        self.components().map(|z| z.norm_sqr()).sum()
    }

    /// `conj(self) · other`, summed in storage order.
    pub fn dot(&self, other: &Spinor) -> Complex {
        let mut acc = ZERO;
        for (a, b) in self.components().zip(other.components()) {
            acc += a.conj() * b;
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.components().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for Spinor {
    type Output = Spinor;
    fn add(self, rhs: Spinor) -> Spinor {
        Spinor(std::array::from_fn(|s| std::array::from_fn(|c| self.0[s][c] + rhs.0[s][c])))
    }
}

impl AddAssign for Spinor {
    fn add_assign(&mut self, rhs: Spinor) {
        for (a, b) in self.0.iter_mut().flatten().zip(rhs.components()) {
            *a += b;
        }
    }
}

impl Sub for Spinor {
    type Output = Spinor;
    fn sub(self, rhs: Spinor) -> Spinor {
        Spinor(std::array::from_fn(|s| std::array::from_fn(|c| self.0[s][c] - rhs.0[s][c])))
    }
}

impl Neg for Spinor {
    type Output = Spinor;
    fn neg(self) -> Spinor {
        Spinor(self.0.map(|v| v.map(|z| -z)))
    }
}

impl Mul<Spinor> for f64 {
    type Output = Spinor;
    fn mul(self, rhs: Spinor) -> Spinor {
        Spinor(rhs.0.map(|v| v.map(|z| z * self)))
    }
}
