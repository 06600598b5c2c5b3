//! Scene assembly, forward and inverse dynamics, and time stepping.

mod integrate;
mod trajectory;

pub use integrate::{step, Integrator, StepReport};
pub use trajectory::{CubicSpline, KinematicSample, Trajectory};

use crate::collision::soft_separation_distance;
use crate::contact::{pair_contact, ContactParams, GeneralizedForce};
use crate::error::{invalid, Result};
use crate::geometry::{pose_aopc, BodyMotion, LocalAopc, Pose, WorldAopc};
use crate::linalg::{Mat3, Matrix, Vec3};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum BodyKind {
    Free { mass: f64, inertia: Mat3<f64> },
    Kinematic(Trajectory),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Body {
    pub name: String,
    pub aopc: LocalAopc,
    pub kind: BodyKind,
}

/// Source of the applied generalized force τ.
#[derive(Clone, Debug, PartialEq, Default)]
pub enum Controls {
    #[default]
    Zero,
    Constant(Vec<f64>),
}

#[derive(Clone, Debug)]
pub struct Scene {
    bodies: Vec<Body>,
    pairs: Vec<(usize, usize)>,
    gravity: Vec3<f64>,
    params: ContactParams,
    controls: Controls,
    offsets: Vec<Option<usize>>,
    dof: usize,
}

impl Scene {
    pub fn new(
        bodies: Vec<Body>,
        pairs: Vec<(usize, usize)>,
        gravity: Vec3<f64>,
        params: ContactParams,
        controls: Controls,
    ) -> Result<Self> {
        params.validate()?;
        if !gravity.is_finite() {
            return Err(invalid("gravity must be finite"));
        }
        let mut offsets = Vec::with_capacity(bodies.len());
        let mut dof = 0;
        for b in &bodies {
            match &b.kind {
                BodyKind::Free { mass, inertia } => {
                    if !(mass.is_finite() && *mass > 0.0) {
                        return Err(invalid(format!("body {}: mass must be > 0", b.name)));
                    }
                    if !inertia.is_symmetric_positive_definite() {
                        return Err(invalid(format!("body {}: inertia must be symmetric positive definite", b.name)));
                    }
                    offsets.push(Some(dof));
                    dof += 6;
                }
                BodyKind::Kinematic(_) => offsets.push(None),
            }
        }
        for (k, &(a, b)) in pairs.iter().enumerate() {
            if a >= bodies.len() || b >= bodies.len() {
                return Err(invalid(format!("pair {k} references a missing body")));
            }
            if a == b {
                return Err(invalid(format!("pair {k} references body {} twice", bodies[a].name)));
            }
            let repeated = pairs[..k].iter().any(|&(c, d)| (c, d) == (a, b) || (c, d) == (b, a));
            if repeated {
                return Err(invalid(format!("pair ({}, {}) is repeated", bodies[a].name, bodies[b].name)));
            }
        }
        if let Controls::Constant(tau) = &controls {
            if tau.len() != dof || tau.iter().any(|v| !v.is_finite()) {
                return Err(invalid(format!("controls must hold {dof} finite values")));
            }
        }
        Ok(Self { bodies, pairs, gravity, params, controls, offsets, dof })
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn gravity(&self) -> Vec3<f64> {
        self.gravity
    }

    pub fn params(&self) -> &ContactParams {
        &self.params
    }

    pub fn set_params(&mut self, params: ContactParams) -> Result<()> {
        params.validate()?;
        self.params = params;
        Ok(())
    }

    /// Generalized dimension `n = 6·(free bodies)`.
    pub fn dof(&self) -> usize {
        self.dof
    }

    /// First generalized coordinate of body `b`, if it is free.
    pub fn offset(&self, b: usize) -> Option<usize> {
        self.offsets[b]
    }

    /// Indices of free bodies in generalized-coordinate order.
    pub fn free_bodies(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.bodies.len()).filter(|&b| self.offsets[b].is_some())
    }

    pub fn controls(&self, _t: f64) -> Vec<f64> {
        match &self.controls {
            Controls::Zero => vec![0.0; self.dof],
            Controls::Constant(tau) => tau.clone(),
        }
    }
}

/// Poses of the free bodies (in generalized order), their stacked
/// `[linear; angular]` velocities, and time.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneState<T> {
    pub t: f64,
    pub poses: Vec<Pose<T>>,
    pub v: Vec<T>,
}

impl<T: Real> SceneState<T> {
    pub fn lift(s: &SceneState<f64>) -> Self {
        Self { t: s.t, poses: s.poses.iter().map(Pose::lift).collect(), v: s.v.iter().map(|x| T::cst(*x)).collect() }
    }

    pub fn re(&self) -> SceneState<f64> {
        SceneState { t: self.t, poses: self.poses.iter().map(Pose::re).collect(), v: self.v.iter().map(Real::re).collect() }
    }
}

impl SceneState<f64> {
    pub fn validate(&self, scene: &Scene) -> Result<()> {
        if self.poses.len() * 6 != scene.dof() || self.v.len() != scene.dof() {
            return Err(invalid(format!(
                "state has {} poses and {} velocities for {} generalized coordinates",
                self.poses.len(),
                self.v.len(),
                scene.dof()
            )));
        }
        for p in &self.poses {
            p.validate()?;
        }
        if self.v.iter().any(|x| !x.is_finite()) || !self.t.is_finite() {
            return Err(invalid("state must be finite"));
        }
        Ok(())
    }
}

fn free_blocks<'s>(scene: &'s Scene) -> impl Iterator<Item = (usize, f64, &'s Mat3<f64>)> + 's {
    scene.bodies.iter().filter_map(|b| match &b.kind {
        BodyKind::Free { mass, inertia } => Some((mass, inertia)),
        BodyKind::Kinematic(_) => None,
    })
    .enumerate()
    .map(|(k, (m, i))| (k, *m, i))
}

fn world_inertia<T: Real>(pose: &Pose<T>, inertia: &Mat3<f64>) -> Mat3<T> {
    let r = pose.rotation();
    r.mul_mat(&Mat3::lift(inertia)).mul_mat(&r.transpose())
}

pub fn mass_matrix<T: Real>(scene: &Scene, state: &SceneState<T>) -> Matrix<T> {
    let n = scene.dof();
    let mut m = Matrix::zeros(n, n);
    for (k, mass, inertia) in free_blocks(scene) {
        let o = 6 * k;
        let iw = world_inertia(&state.poses[k], inertia);
        for a in 0..3 {
            m[(o + a, o + a)] = T::cst(mass);
            for b in 0..3 {
                m[(o + 3 + a, o + 3 + b)] = iw.m[a][b];
            }
        }
    }
    m
}

/// `c(q, v)`: `−m·g` on the linear block and `ω × (I_w ω)` on the angular block.
pub fn bias_force<T: Real>(scene: &Scene, state: &SceneState<T>) -> Vec<T> {
    let mut c = vec![T::zero(); scene.dof()];
    for (k, mass, inertia) in free_blocks(scene) {
        let o = 6 * k;
        let w = Vec3::from_slice(&state.v[o + 3..o + 6]);
        let gyro = w.cross(&world_inertia(&state.poses[k], inertia).mul_vec(&w));
        for a in 0..3 {
            c[o + a] = T::cst(-mass * scene.gravity[a]);
            c[o + 3 + a] = gyro[a];
        }
    }
    c
}

/// Every body posed at the state's time.
pub fn posed_aopcs<'s, T: Real>(scene: &'s Scene, state: &SceneState<T>) -> Vec<WorldAopc<'s, T>> {
    let mut k = 0;
    scene
        .bodies
        .iter()
        .enumerate()
        .map(|(id, b)| match &b.kind {
            BodyKind::Free { .. } => {
                let offset = 6 * k;
                let w = pose_aopc(&b.aopc, &state.poses[k], id, BodyMotion::free(offset, &state.v));
                k += 1;
                w
            }
            BodyKind::Kinematic(tr) => {
                let s = tr.sample(state.t);
                let motion = BodyMotion::Kinematic { linear: Vec3::lift(s.linear), angular: Vec3::lift(s.angular) };
                pose_aopc(&b.aopc, &Pose::lift(&s.pose), id, motion)
            }
        })
        .collect()
}

/// Summed contact force with per-pair separation diagnostics.
#[derive(Clone, Debug)]
pub struct ContactEvaluation<T> {
    pub force: GeneralizedForce<T>,
    /// Smallest separation-field entry of each pair.
    pub min_values: Vec<f64>,
    pub soft_distances: Vec<T>,
}

impl<T> ContactEvaluation<T> {
    pub fn min_separation(&self) -> f64 {
        self.min_values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn evaluate_contacts<T: Real>(scene: &Scene, state: &SceneState<T>) -> ContactEvaluation<T> {
    let world = posed_aopcs(scene, state);
    let mut force = GeneralizedForce::zeros(scene.dof());
    let mut min_values = Vec::with_capacity(scene.pairs.len());
    let mut soft_distances = Vec::with_capacity(scene.pairs.len());
    for &(a, b) in &scene.pairs {
        let (field, f) = pair_contact(&world[a], &world[b], scene.dof(), &scene.params);
        force.add_assign(&f);
        min_values.push(field.min_value());
        soft_distances.push(soft_separation_distance(&field));
    }
    ContactEvaluation { force, min_values, soft_distances }
}

pub fn total_contact_force<T: Real>(scene: &Scene, state: &SceneState<T>) -> GeneralizedForce<T> {
    evaluate_contacts(scene, state).force
}

fn check_len<T>(what: &str, x: &[T], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(invalid(format!("{what} has length {}, expected {n}", x.len())));
    }
    Ok(())
}

/// `τ = M v̇ + c − Σ Λ`.
pub fn inverse_dynamics<T: Real>(scene: &Scene, state: &SceneState<T>, vdot: &[T]) -> Result<Vec<T>> {
    check_len("acceleration", vdot, scene.dof())?;
    let m = mass_matrix(scene, state);
    let c = bias_force(scene, state);
    let lambda = total_contact_force(scene, state);
    let mv = block_mul(&m, vdot);
    Ok(mv.iter().zip(&c).zip(&lambda.values).map(|((a, b), l)| *a + *b - *l).collect())
}

fn block_mul<T: Real>(m: &Matrix<T>, x: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for o in (0..x.len()).step_by(6) {
        for r in o..o + 6 {
            out[r] = (o..o + 6).map(|c| m[(r, c)] * x[c]).sum();
        }
    }
    out
}

/// `v̇ = M⁻¹ (τ − c + Σ Λ)` with a given contact force.
pub fn forward_dynamics_with<T: Real>(
    scene: &Scene,
    state: &SceneState<T>,
    tau: &[T],
    contact: &GeneralizedForce<T>,
) -> Result<Vec<T>> {
    check_len("control", tau, scene.dof())?;
    let c = bias_force(scene, state);
    let rhs: Vec<T> = tau.iter().zip(&c).zip(&contact.values).map(|((t, c), l)| *t - *c + *l).collect();
    let mut vdot = vec![T::zero(); scene.dof()];
    for (k, mass, inertia) in free_blocks(scene) {
        let o = 6 * k;
        for a in 0..3 {
            vdot[o + a] = rhs[o + a] / mass;
        }
        let iw = world_inertia(&state.poses[k], inertia);
        let w = iw.solve(&Vec3::from_slice(&rhs[o + 3..o + 6]))?;
        vdot[o + 3..o + 6].copy_from_slice(&w.to_array());
    }
    Ok(vdot)
}

pub fn forward_dynamics<T: Real>(scene: &Scene, state: &SceneState<T>, tau: &[T]) -> Result<Vec<T>> {
    let contact = total_contact_force(scene, state);
    forward_dynamics_with(scene, state, tau, &contact)
}

/// `F(a) = ∫_a^∞ ln(1 + e^{−u}) du`, so that `k ε² F(φ/ε)` is the potential of
/// the force magnitude `k·softplus(−φ, ε)`.
fn softplus_tail_integral(a: f64) -> f64 {
    const F0: f64 = std::f64::consts::PI * std::f64::consts::PI / 12.0;
    if a < 0.0 {
        return 0.5 * a * a + 2.0 * F0 - softplus_tail_integral(-a);
    }
    if a > 40.0 {
        return (-a).exp();
    }
    let n = 400;
    let h = 40.0 / n as f64;
    let f = |u: f64| (-u).exp().ln_1p();
    let mut s = f(a) + f(a + 40.0);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Energy {
    pub kinetic: f64,
    pub gravitational: f64,
    /// Spring potential evaluated at each pair's soft separation distance.
    pub contact: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.kinetic + self.gravitational + self.contact
    }
}

pub fn mechanical_energy(scene: &Scene, state: &SceneState<f64>) -> Energy {
    let mut kinetic = 0.0;
    let mut gravitational = 0.0;
    for (k, mass, inertia) in free_blocks(scene) {
        let o = 6 * k;
        let lin = Vec3::from_slice(&state.v[o..o + 3]);
        let w = Vec3::from_slice(&state.v[o + 3..o + 6]);
        kinetic += 0.5 * mass * lin.norm_squared() + 0.5 * w.dot(&world_inertia(&state.poses[k], inertia).mul_vec(&w));
        gravitational -= mass * scene.gravity.dot(&state.poses[k].translation);
    }
    let eps = scene.params.eps3.value();
    let contact = evaluate_contacts(scene, state)
        .soft_distances
        .iter()
        .map(|d| scene.params.k * eps * eps * softplus_tail_integral(d / eps))
        .sum();
    Energy { kinetic, gravitational, contact }
}
