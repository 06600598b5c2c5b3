//! Small fixed-size vector, matrix and quaternion types generic over [`Real`].

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use crate::error::{invalid, Result};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    /// Lift an `f64` vector into `T` as constants.
    #[inline]
    pub fn lift(v: Vec3<f64>) -> Self {
        Self::new(T::cst(v.x), T::cst(v.y), T::cst(v.z))
    }

    #[inline]
    pub fn re(&self) -> Vec3<f64> {
        Vec3::new(self.x.re(), self.y.re(), self.z.re())
    }

    #[inline]
    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    #[inline]
    pub fn scale(&self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    #[inline]
    pub fn scale_f(&self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn normalized(&self) -> Self {
        self.scale(self.norm().recip())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_slice(s: &[T]) -> Self {
        Self::new(s[0], s[1], s[2])
    }
}

impl Vec3<f64> {
    pub const fn from_array(a: [f64; 3]) -> Self {
        Self { x: a[0], y: a[1], z: a[2] }
    }

    pub fn unit(axis: usize) -> Self {
        let mut a = [0.0; 3];
        a[axis] = 1.0;
        Self::from_array(a)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T> IndexMut<usize> for Vec3<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        match i {
            0 => &mut self.x,
            1 => &mut self.y,
            2 => &mut self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    #[inline]
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

/// Row-major 3×3 matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self { m }
    }

    pub fn zeros() -> Self {
        Self { m: [[T::zero(); 3]; 3] }
    }

    pub fn identity() -> Self {
        Self::diag(T::one(), T::one(), T::one())
    }

    pub fn diag(a: T, b: T, c: T) -> Self {
        let z = T::zero();
        Self { m: [[a, z, z], [z, b, z], [z, z, c]] }
    }

    pub fn lift(o: &Mat3<f64>) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (r, row) in m.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = T::cst(o.m[r][c]);
            }
        }
        Self { m }
    }

    /// Cross-product matrix: `skew(a)·b = a × b`.
    pub fn skew(a: &Vec3<T>) -> Self {
        let z = T::zero();
        Self { m: [[z, -a.z, a.y], [a.z, z, -a.x], [-a.y, a.x, z]] }
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        let r = &self.m;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut m = [[T::zero(); 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        Self { m }
    }

    pub fn transpose(&self) -> Self {
        let mut m = self.m;
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[j][i];
            }
        }
        Self { m }
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Solve `self · x = b` by the adjugate; rejects (near-)singular matrices.
    pub fn solve(&self, b: &Vec3<T>) -> Result<Vec3<T>> {
        let m = &self.m;
        let det = self.determinant();
        let scale = m.iter().flatten().map(|v| v.re().abs()).fold(0.0, f64::max);
        if !det.re().is_finite() || det.re().abs() <= 1e-14 * scale * scale * scale {
            return Err(invalid("singular 3x3 matrix"));
        }
        let inv = det.recip();
        let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
        let c01 = m[0][2] * m[2][1] - m[0][1] * m[2][2];
        let c02 = m[0][1] * m[1][2] - m[0][2] * m[1][1];
        let c10 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
        let c11 = m[0][0] * m[2][2] - m[0][2] * m[2][0];
        let c12 = m[0][2] * m[1][0] - m[0][0] * m[1][2];
        let c20 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
        let c21 = m[0][1] * m[2][0] - m[0][0] * m[2][1];
        let c22 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        Ok(Vec3::new(
            (c00 * b.x + c01 * b.y + c02 * b.z) * inv,
            (c10 * b.x + c11 * b.y + c12 * b.z) * inv,
            (c20 * b.x + c21 * b.y + c22 * b.z) * inv,
        ))
    }
}

impl Mat3<f64> {
    /// Symmetric positive-definite test by leading principal minors.
    pub fn is_symmetric_positive_definite(&self) -> bool {
        let m = &self.m;
        let scale = m.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
        let sym_tol = 1e-12 * scale.max(1e-300);
        let symmetric = (m[0][1] - m[1][0]).abs() <= sym_tol
            && (m[0][2] - m[2][0]).abs() <= sym_tol
            && (m[1][2] - m[2][1]).abs() <= sym_tol;
        let d1 = m[0][0];
        let d2 = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        symmetric && d1 > 0.0 && d2 > 0.0 && self.determinant() > 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }
}

impl<T: Real> Mul<Vec3<T>> for Mat3<T> {
    type Output = Vec3<T>;
    fn mul(self, v: Vec3<T>) -> Vec3<T> {
        self.mul_vec(&v)
    }
}

/// Quaternion `w + xi + yj + zk`; rotations use unit quaternions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quat<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quat<T> {
    pub const fn new(w: T, x: T, y: T, z: T) -> Self {
        Self { w, x, y, z }
    }

    pub fn identity() -> Self {
        Self::new(T::one(), T::zero(), T::zero(), T::zero())
    }

    pub fn lift(q: &Quat<f64>) -> Self {
        Self::new(T::cst(q.w), T::cst(q.x), T::cst(q.y), T::cst(q.z))
    }

    pub fn re(&self) -> Quat<f64> {
        Quat::new(self.w.re(), self.x.re(), self.y.re(), self.z.re())
    }

    pub fn norm_squared(&self) -> T {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn normalized(&self) -> Self {
        let inv = self.norm_squared().sqrt().recip();
        Self::new(self.w * inv, self.x * inv, self.y * inv, self.z * inv)
    }

    /// Hamilton product `self ⊗ o`.
    pub fn mul(&self, o: &Self) -> Self {
        Self::new(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )
    }

    /// Rotation matrix of a unit quaternion.
    pub fn to_rotation(&self) -> Mat3<T> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let one = T::one();
        Mat3::from_rows([
            [
                one - (y * y + z * z) * 2.0,
                (x * y - w * z) * 2.0,
                (x * z + w * y) * 2.0,
            ],
            [
                (x * y + w * z) * 2.0,
                one - (x * x + z * z) * 2.0,
                (y * z - w * x) * 2.0,
            ],
            [
                (x * z - w * y) * 2.0,
                (y * z + w * x) * 2.0,
                one - (x * x + y * y) * 2.0,
            ],
        ])
    }

    /// Smooth local chart around the identity: `normalize(1, δ/2)`.
    ///
    /// Agrees with the exponential map to second order and is differentiable
    /// at `δ = 0`, which the exponential map's `|δ|` is not.
    pub fn from_tangent(delta: &Vec3<T>) -> Self {
        Self::new(T::one(), delta.x * 0.5, delta.y * 0.5, delta.z * 0.5).normalized()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Quat<f64> {
    /// Exponential map of a rotation vector.
    pub fn from_rotation_vector(theta: &Vec3<f64>) -> Self {
        let angle = theta.norm();
        if angle < 1e-12 {
            // second-order Taylor expansion
            let q = Self::new(1.0 - angle * angle / 8.0, theta.x * 0.5, theta.y * 0.5, theta.z * 0.5);
            return q.normalized();
        }
        let half = 0.5 * angle;
        let s = half.sin() / angle;
        Self::new(half.cos(), theta.x * s, theta.y * s, theta.z * s)
    }

    pub fn from_axis_angle(axis: &Vec3<f64>, angle: f64) -> Self {
        Self::from_rotation_vector(&axis.normalized().scale(angle))
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }
}

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(format!(
                "matrix data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[T]) {
        for (r, &v) in values.iter().enumerate() {
            self[(r, c)] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (r, c): (usize, usize)) -> &T {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        &mut self.data[r * self.cols + c]
    }
}
