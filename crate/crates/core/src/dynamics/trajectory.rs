//! Prescribed motion of kinematic bodies.

use crate::error::{invalid, Result};
use crate::geometry::Pose;
use crate::linalg::{Quat, Vec3};

/// Pose and twist of a kinematic body at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicSample {
    pub pose: Pose<f64>,
    pub linear: Vec3<f64>,
    pub angular: Vec3<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Trajectory {
    Static(Pose<f64>),
    /// Constant velocity from `start` at t = 0.
    Linear { start: Pose<f64>, velocity: Vec3<f64> },
    /// Clamped cubic through waypoints with zero end velocities; the pose is
    /// held at the first/last waypoint outside the time span.
    Spline(CubicSpline),
}

impl Trajectory {
    pub fn sample(&self, t: f64) -> KinematicSample {
        match self {
            Trajectory::Static(pose) => KinematicSample { pose: *pose, linear: Vec3::zeros(), angular: Vec3::zeros() },
            Trajectory::Linear { start, velocity } => KinematicSample {
                pose: Pose::new(start.translation + velocity.scale(t), start.orientation),
                linear: *velocity,
                angular: Vec3::zeros(),
            },
            Trajectory::Spline(s) => {
                let (p, v) = s.evaluate(t);
                KinematicSample { pose: Pose::new(p, s.orientation), linear: v, angular: Vec3::zeros() }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CubicSpline {
    times: Vec<f64>,
    positions: Vec<Vec3<f64>>,
    second: Vec<Vec3<f64>>,
    orientation: Quat<f64>,
}

impl CubicSpline {
    pub fn new(times: Vec<f64>, positions: Vec<Vec3<f64>>, orientation: Quat<f64>) -> Result<Self> {
        let m = times.len();
        if m < 2 || positions.len() != m {
            return Err(invalid("spline needs at least two waypoints with one time each"));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("spline timestamps must be finite and strictly increasing"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(invalid("spline waypoints must be finite"));
        }
        let h: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let mut second = vec![Vec3::zeros(); m];
        for axis in 0..3 {
            let y: Vec<f64> = positions.iter().map(|p| p[axis]).collect();
            let slope = |i: usize| (y[i + 1] - y[i]) / h[i];
            let mut sub = vec![0.0; m];
            let mut diag = vec![0.0; m];
            let mut sup = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            diag[0] = 2.0 * h[0];
            sup[0] = h[0];
            rhs[0] = 6.0 * slope(0);
            for i in 1..m - 1 {
                sub[i] = h[i - 1];
                diag[i] = 2.0 * (h[i - 1] + h[i]);
                sup[i] = h[i];
                rhs[i] = 6.0 * (slope(i) - slope(i - 1));
            }
            sub[m - 1] = h[m - 2];
            diag[m - 1] = 2.0 * h[m - 2];
            rhs[m - 1] = -6.0 * slope(m - 2);
            for i in 1..m {
                let f = sub[i] / diag[i - 1];
                diag[i] -= f * sup[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            let mut x = vec![0.0; m];
            x[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
            }
            for (s, v) in second.iter_mut().zip(x) {
                s[axis] = v;
            }
        }
        Ok(Self { times, positions, second, orientation: orientation.normalized() })
    }

    pub fn duration(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("non-empty"))
    }

    /// Position and velocity at time `t`.
    pub fn evaluate(&self, t: f64) -> (Vec3<f64>, Vec3<f64>) {
        let (t0, t1) = self.duration();
        if t <= t0 {
            return (self.positions[0], Vec3::zeros());
        }
        if t >= t1 {
            return (*self.positions.last().expect("non-empty"), Vec3::zeros());
        }
        let i = self.times.partition_point(|&s| s <= t) - 1;
        let h = self.times[i + 1] - self.times[i];
        let a = self.times[i + 1] - t;
        let b = t - self.times[i];
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let (y0, y1) = (self.positions[i], self.positions[i + 1]);
        let c0 = y0.scale(1.0 / h) - m0.scale(h / 6.0);
        let c1 = y1.scale(1.0 / h) - m1.scale(h / 6.0);
        let pos = m0.scale(a * a * a / (6.0 * h)) + m1.scale(b * b * b / (6.0 * h)) + c0.scale(a) + c1.scale(b);
        let vel = m1.scale(b * b / (2.0 * h)) - m0.scale(a * a / (2.0 * h)) + c1 - c0;
        (pos, vel)
    }
}
