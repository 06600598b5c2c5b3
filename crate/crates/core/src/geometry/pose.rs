//! Posing local AOPCs into the world frame with point velocities and Jacobians.

use super::aopc::LocalAopc;
use crate::error::{invalid, Result};
use crate::linalg::{Mat3, Matrix, Quat, Vec3};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose<T> {
    pub translation: Vec3<T>,
    pub orientation: Quat<T>,
}

impl<T: Real> Pose<T> {
    pub fn new(translation: Vec3<T>, orientation: Quat<T>) -> Self {
        Self { translation, orientation }
    }

    pub fn identity() -> Self {
        Self::new(Vec3::zeros(), Quat::identity())
    }

    pub fn lift(p: &Pose<f64>) -> Self {
        Self::new(Vec3::lift(p.translation), Quat::lift(&p.orientation))
    }

    pub fn re(&self) -> Pose<f64> {
        Pose::new(self.translation.re(), self.orientation.re())
    }

    pub fn rotation(&self) -> Mat3<T> {
        self.orientation.to_rotation()
    }

    pub fn transform_point(&self, p: &Vec3<f64>) -> Vec3<T> {
        self.rotation().mul_vec(&Vec3::lift(*p)) + self.translation
    }
}

impl Pose<f64> {
    pub fn from_translation(t: Vec3<f64>) -> Self {
        Self::new(t, Quat::identity())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.translation.is_finite() || !self.orientation.is_finite() {
            return Err(invalid("pose must be finite"));
        }
        let n = self.orientation.norm_squared().sqrt();
        if (n - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("pose quaternion norm {n} is not 1")));
        }
        Ok(())
    }
}

/// Velocity of a posed body: free bodies own six generalized coordinates
/// starting at `offset`, kinematic bodies carry a prescribed twist.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BodyMotion<T> {
    Free { offset: usize, linear: Vec3<T>, angular: Vec3<T> },
    Kinematic { linear: Vec3<T>, angular: Vec3<T> },
}

impl<T: Real> BodyMotion<T> {
    /// Read `[linear; angular]` from the generalized velocity at `offset`.
    pub fn free(offset: usize, v: &[T]) -> Self {
        BodyMotion::Free {
            offset,
            linear: Vec3::from_slice(&v[offset..offset + 3]),
            angular: Vec3::from_slice(&v[offset + 3..offset + 6]),
        }
    }

    pub fn at_rest() -> Self {
        BodyMotion::Kinematic { linear: Vec3::zeros(), angular: Vec3::zeros() }
    }

    pub fn offset(&self) -> Option<usize> {
        match self {
            BodyMotion::Free { offset, .. } => Some(*offset),
            BodyMotion::Kinematic { .. } => None,
        }
    }

    pub fn linear(&self) -> Vec3<T> {
        match self {
            BodyMotion::Free { linear, .. } | BodyMotion::Kinematic { linear, .. } => *linear,
        }
    }

    pub fn angular(&self) -> Vec3<T> {
        match self {
            BodyMotion::Free { angular, .. } | BodyMotion::Kinematic { angular, .. } => *angular,
        }
    }

    /// Velocity of the material point at offset `r` from the body origin.
    pub fn velocity_at(&self, r: &Vec3<T>) -> Vec3<T> {
        self.linear() + self.angular().cross(r)
    }
}

/// `J = [I₃ | −skew(r)]` in a free body's block, or zero for kinematic bodies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointJacobian<T> {
    pub offset: Option<usize>,
    pub r: Vec3<T>,
}

impl<T: Real> PointJacobian<T> {
    pub fn apply(&self, v: &[T]) -> Vec3<T> {
        match self.offset {
            Some(o) => {
                let lin = Vec3::from_slice(&v[o..o + 3]);
                let ang = Vec3::from_slice(&v[o + 3..o + 6]);
                lin + ang.cross(&self.r)
            }
            None => Vec3::zeros(),
        }
    }

    /// `out += Jᵀ·λ`.
    pub fn add_transpose(&self, lambda: &Vec3<T>, out: &mut [T]) {
        if let Some(o) = self.offset {
            let m = self.r.cross(lambda);
            for a in 0..3 {
                out[o + a] += lambda[a];
                out[o + 3 + a] += m[a];
            }
        }
    }

    pub fn to_dense(&self, n: usize) -> Matrix<T> {
        let mut j = Matrix::zeros(3, n);
        if let Some(o) = self.offset {
            let s = Mat3::skew(&self.r);
            for a in 0..3 {
                j[(a, o + a)] = T::one();
                for b in 0..3 {
                    j[(a, o + 3 + b)] = -s.m[a][b];
                }
            }
        }
        j
    }
}

/// A [`LocalAopc`] posed in the world frame.
#[derive(Clone, Debug)]
pub struct WorldAopc<'a, T> {
    local: &'a LocalAopc,
    body_id: usize,
    origin: Vec3<T>,
    motion: BodyMotion<T>,
    points: Vec<Vec3<T>>,
    normals: Vec<Vec3<T>>,
    vertices: Vec<Vec3<T>>,
    velocities: Vec<Vec3<T>>,
}

impl<'a, T: Real> WorldAopc<'a, T> {
    pub fn local(&self) -> &'a LocalAopc {
        self.local
    }

    pub fn body_id(&self) -> usize {
        self.body_id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn origin(&self) -> Vec3<T> {
        self.origin
    }

    pub fn motion(&self) -> &BodyMotion<T> {
        &self.motion
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3<T>] {
        &self.normals
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn faces(&self) -> &'a [[usize; 4]] {
        self.local.faces()
    }

    pub fn velocities(&self) -> &[Vec3<T>] {
        &self.velocities
    }

    pub fn jacobian(&self, i: usize) -> PointJacobian<T> {
        PointJacobian { offset: self.motion.offset(), r: self.points[i] - self.origin }
    }
}

pub fn pose_aopc<'a, T: Real>(
    aopc: &'a LocalAopc,
    pose: &Pose<T>,
    body_id: usize,
    motion: BodyMotion<T>,
) -> WorldAopc<'a, T> {
    let rot = pose.rotation();
    let t = pose.translation;
    let points: Vec<Vec3<T>> = aopc.points().iter().map(|p| rot.mul_vec(&Vec3::lift(*p)) + t).collect();
    let normals = aopc.normals().iter().map(|n| rot.mul_vec(&Vec3::lift(*n))).collect();
    let vertices = aopc.vertices().iter().map(|y| rot.mul_vec(&Vec3::lift(*y)) + t).collect();
    let velocities = points.iter().map(|p| motion.velocity_at(&(*p - t))).collect();
    WorldAopc { local: aopc, body_id, origin: t, motion, points, normals, vertices, velocities }
}
