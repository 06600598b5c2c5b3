//! Explicit time integration.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{evaluate_contacts, forward_dynamics_with, Scene, SceneState};
use crate::error::{invalid, Error, Result};
use crate::geometry::Pose;
use crate::linalg::{Quat, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    Rk4,
}

impl FromStr for Integrator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Integrator::Euler),
            "rk4" => Ok(Integrator::Rk4),
            other => Err(invalid(format!("unknown integrator '{other}' (expected euler or rk4)"))),
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Integrator::Euler => "euler",
            Integrator::Rk4 => "rk4",
        })
    }
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub state: SceneState<f64>,
    /// Smallest separation-field entry over all pairs at the start of the step.
    pub min_separation: f64,
}

fn acceleration(scene: &Scene, s: &SceneState<f64>, dt: f64) -> Result<(Vec<f64>, f64)> {
    if let Some(coordinate) = first_non_finite(scene, s) {
        let step = (s.t / dt).ceil() as usize;
        return Err(Error::Diverged { step, coordinate });
    }
    let contacts = evaluate_contacts(scene, s);
    let tau = scene.controls(s.t);
    let vdot = forward_dynamics_with(scene, s, &tau, &contacts.force)?;
    Ok((vdot, contacts.min_separation()))
}

/// Move positions with `vel`, velocities with `acc`, over `dt` from `s`.
fn advance(s: &SceneState<f64>, dt: f64, vel: &[f64], acc: &[f64]) -> SceneState<f64> {
    let poses = s
        .poses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let o = 6 * k;
            let lin = Vec3::from_slice(&vel[o..o + 3]);
            let ang = Vec3::from_slice(&vel[o + 3..o + 6]);
            let q = Quat::from_rotation_vector(&ang.scale(dt)).mul(&p.orientation).normalized();
            Pose::new(p.translation + lin.scale(dt), q)
        })
        .collect();
    let v = s.v.iter().zip(acc).map(|(v, a)| v + dt * a).collect();
    SceneState { t: s.t + dt, poses, v }
}

fn first_non_finite(scene: &Scene, s: &SceneState<f64>) -> Option<String> {
    let names: Vec<&str> = scene.free_bodies().map(|b| scene.bodies()[b].name.as_str()).collect();
    const POSE: [&str; 7] = ["px", "py", "pz", "qw", "qx", "qy", "qz"];
    const VEL: [&str; 6] = ["vx", "vy", "vz", "wx", "wy", "wz"];
    for (k, p) in s.poses.iter().enumerate() {
        let t = p.translation;
        let q = p.orientation;
        let values = [t.x, t.y, t.z, q.w, q.x, q.y, q.z];
        if let Some(i) = values.iter().position(|x| !x.is_finite()) {
            return Some(format!("{}.{}", names[k], POSE[i]));
        }
        if let Some(i) = s.v[6 * k..6 * k + 6].iter().position(|x| !x.is_finite()) {
            return Some(format!("{}.{}", names[k], VEL[i]));
        }
    }
    None
}

/// Advance the scene by `dt`; kinematic bodies follow their trajectories at
/// every stage time.
pub fn step(scene: &Scene, state: &SceneState<f64>, dt: f64, integrator: Integrator) -> Result<StepReport> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid(format!("dt must be > 0, got {dt}")));
    }
    let (a1, min_separation) = acceleration(scene, state, dt)?;
    let next = match integrator {
        Integrator::Euler => advance(state, dt, &state.v, &a1),
        Integrator::Rk4 => {
            let s2 = advance(state, 0.5 * dt, &state.v, &a1);
            let (a2, _) = acceleration(scene, &s2, dt)?;
            let s3 = advance(state, 0.5 * dt, &s2.v, &a2);
            let (a3, _) = acceleration(scene, &s3, dt)?;
            let s4 = advance(state, dt, &s3.v, &a3);
            let (a4, _) = acceleration(scene, &s4, dt)?;
            let combine = |x1: &[f64], x2: &[f64], x3: &[f64], x4: &[f64]| -> Vec<f64> {
                (0..x1.len()).map(|i| (x1[i] + 2.0 * x2[i] + 2.0 * x3[i] + x4[i]) / 6.0).collect()
            };
            let vel = combine(&state.v, &s2.v, &s3.v, &s4.v);
            let acc = combine(&a1, &a2, &a3, &a4);
            advance(state, dt, &vel, &acc)
        }
    };
    if let Some(coordinate) = first_non_finite(scene, &next) {
        let step = (next.t / dt).round() as usize;
        return Err(Error::Diverged { step, coordinate });
    }
    Ok(StepReport { state: next, min_separation })
}
