//! Finite-difference and algorithmic-differentiation checks, and hard oracles.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::collision::Side;
use crate::contact::{point_plane_force, GeneralizedForce};
use crate::dynamics::{evaluate_contacts, forward_dynamics_with, posed_aopcs, Scene, SceneState};
use crate::error::{invalid, Error, Result};
use crate::geometry::Pose;
use crate::linalg::{Matrix, Quat, Vec3};
use crate::real::{Dual, HyperDual, Real};
use crate::ssdf::hard_sdf;

/// `|a − b| / max(1e-8, |a|, |b|)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

fn step_for(h: f64, x: f64) -> f64 {
    h * (1.0 + x.abs())
}

/// Central differences, one column per input coordinate, with step `h·(1 + |x_i|)`.
pub fn fd_gradient<F>(f: F, x: &[f64], h: f64) -> Result<Matrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid(format!("finite-difference step must be > 0, got {h}")));
    }
    let columns: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let hi = step_for(h, x[i]);
            let mut xp = x.to_vec();
            xp[i] += hi;
            let fp = f(&xp)?;
            xp[i] = x[i] - hi;
            let fm = f(&xp)?;
            if fp.iter().chain(&fm).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * hi)).collect())
        })
        .collect::<Result<_>>()?;
    let rows = columns.first().map_or(0, Vec::len);
    let mut m = Matrix::zeros(rows, x.len());
    for (c, col) in columns.iter().enumerate() {
        m.set_column(c, col);
    }
    Ok(m)
}

/// Second differences `(f(x+h) − 2f(x) + f(x−h)) / h²` of a scalar function.
pub fn fd_hessian_diagonal<F>(f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    let f0 = f(x)?;
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let hi = step_for(h, x[i]);
            let mut xp = x.to_vec();
            xp[i] += hi;
            let fp = f(&xp)?;
            xp[i] = x[i] - hi;
            let fm = f(&xp)?;
            if !(fp.is_finite() && fm.is_finite()) {
                return Err(Error::NonFinite { index: i });
            }
            Ok((fp - 2.0 * f0 + fm) / (hi * hi))
        })
        .collect()
}

/// Forward-mode Jacobian, one dual seed per column.
pub fn ad_jacobian<F>(f: F, x: &[f64]) -> Result<Matrix<f64>>
where
    F: Fn(&[Dual]) -> Result<Vec<Dual>> + Sync,
{
    let columns: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let xd: Vec<Dual> = x.iter().enumerate().map(|(i, v)| Dual::new(*v, if i == j { 1.0 } else { 0.0 })).collect();
            Ok(f(&xd)?.iter().map(|d| d.du).collect())
        })
        .collect::<Result<_>>()?;
    let rows = columns.first().map_or(0, Vec::len);
    let mut m = Matrix::zeros(rows, x.len());
    for (c, col) in columns.iter().enumerate() {
        m.set_column(c, col);
    }
    Ok(m)
}

/// Exact Hessian diagonal of a scalar function via hyper-dual seeds.
pub fn ad_hessian_diagonal<F>(f: F, x: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[HyperDual]) -> Result<HyperDual> + Sync,
{
    (0..x.len())
        .into_par_iter()
        .map(|j| {
            let xh: Vec<HyperDual> = x
                .iter()
                .enumerate()
                .map(|(i, v)| if i == j { HyperDual::new(*v, 1.0, 1.0, 0.0) } else { HyperDual::new(*v, 0.0, 0.0, 0.0) })
                .collect();
            Ok(f(&xh)?.e12)
        })
        .collect()
}

/// Pipeline inputs: per free body a pose perturbation `(δt, δθ)` followed by
/// the absolute generalized velocity.
pub fn pipeline_inputs(base: &SceneState<f64>) -> Vec<f64> {
    let mut x = vec![0.0; 6 * base.poses.len()];
    x.extend_from_slice(&base.v);
    x
}

/// State at chart coordinates `x` around `base`: `t = t₀ + δt`, `q = q(δθ) ⊗ q₀`.
pub fn perturbed_state<T: Real>(base: &SceneState<f64>, x: &[T]) -> SceneState<T> {
    let poses = base
        .poses
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let o = 6 * k;
            let dt = Vec3::from_slice(&x[o..o + 3]);
            let dq = Quat::from_tangent(&Vec3::from_slice(&x[o + 3..o + 6]));
            Pose::new(Vec3::lift(p.translation) + dt, dq.mul(&Quat::lift(&p.orientation)))
        })
        .collect();
    SceneState { t: base.t, poses, v: x[6 * base.poses.len()..].to_vec() }
}

/// The three checked quantities, concatenated: soft separation distance per
/// pair, total contact force, and forward-dynamics acceleration under the
/// scene's controls.
pub fn pipeline_outputs<T: Real>(scene: &Scene, base: &SceneState<f64>, x: &[T]) -> Result<Vec<T>> {
    let state = perturbed_state(base, x);
    let contacts = evaluate_contacts(scene, &state);
    let tau: Vec<T> = scene.controls(state.t).into_iter().map(T::cst).collect();
    let vdot = forward_dynamics_with(scene, &state, &tau, &contacts.force)?;
    let mut out = contacts.soft_distances.clone();
    out.extend_from_slice(&contacts.force.values);
    out.extend(vdot);
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    SeparationDistance,
    ContactForce,
    Acceleration,
}

impl Quantity {
    pub fn name(&self) -> &'static str {
        match self {
            Quantity::SeparationDistance => "separation_distance",
            Quantity::ContactForce => "contact_force",
            Quantity::Acceleration => "acceleration",
        }
    }
}

/// Error of one input column of one quantity's Jacobian block.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckEntry {
    pub sample: usize,
    pub quantity: Quantity,
    /// Input coordinate (column).
    pub input: usize,
    /// Output row of the largest discrepancy within the block.
    pub output: usize,
    pub analytic_norm: f64,
    pub fd_norm: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// `(output row, input column)` of the worst entry.
    pub worst_coordinate: (usize, usize),
    pub worst_quantity: Quantity,
    pub step: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error < self.tolerance
    }

    /// Combine reports of independent samples.
    pub fn merge(reports: Vec<GradCheckReport>) -> Result<GradCheckReport> {
        let mut it = reports.into_iter();
        let mut acc = it.next().ok_or_else(|| invalid("no gradient-check samples"))?;
        for (k, mut r) in it.enumerate() {
            for e in &mut r.entries {
                e.sample = k + 1;
            }
            if r.max_relative_error > acc.max_relative_error {
                acc.max_relative_error = r.max_relative_error;
                acc.worst_coordinate = r.worst_coordinate;
                acc.worst_quantity = r.worst_quantity;
            }
            acc.samples += r.samples;
            acc.entries.extend(r.entries);
        }
        Ok(acc)
    }

    pub fn write_text(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "gradient check: {}", if self.passed() { "PASS" } else { "FAIL" })?;
        writeln!(w, "samples: {}", self.samples)?;
        writeln!(w, "step: {:e}", self.step)?;
        writeln!(w, "tolerance: {:e}", self.tolerance)?;
        writeln!(w, "max relative error: {:e}", self.max_relative_error)?;
        writeln!(
            w,
            "worst coordinate: {} output {} / input {}",
            self.worst_quantity.name(),
            self.worst_coordinate.0,
            self.worst_coordinate.1
        )
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "sample,quantity,input,output,analytic_norm,fd_norm,relative_error")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{:e},{:e},{:e}",
                e.sample,
                e.quantity.name(),
                e.input,
                e.output,
                e.analytic_norm,
                e.fd_norm,
                e.relative_error
            )?;
        }
        Ok(())
    }
}

/// Compare forward-mode derivatives of the pipeline against central
/// differences at one state.
///
/// Errors are measured per input column over each quantity's block as
/// `‖a − b‖ / max(1e-8, ‖a‖, ‖b‖)`.
pub fn check_pipeline_gradients(scene: &Scene, state: &SceneState<f64>, h: f64, tol: f64) -> Result<GradCheckReport> {
    state.validate(scene)?;
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(invalid("tolerance must be >= 0"));
    }
    let x = pipeline_inputs(state);
    let ad = ad_jacobian(|x| pipeline_outputs(scene, state, x), &x)?;
    let fd = fd_gradient(|x| pipeline_outputs(scene, state, x), &x, h)?;
    let pairs = scene.pairs().len();
    let n = scene.dof();
    let blocks = [
        (Quantity::SeparationDistance, 0..pairs),
        (Quantity::ContactForce, pairs..pairs + n),
        (Quantity::Acceleration, pairs + n..pairs + 2 * n),
    ];
    let mut entries = Vec::new();
    for (quantity, rows) in blocks {
        if rows.is_empty() {
            continue;
        }
        for input in 0..x.len() {
            let mut diff = 0.0;
            let mut na = 0.0;
            let mut nf = 0.0;
            let mut output = rows.start;
            let mut worst = -1.0;
            for r in rows.clone() {
                let (a, b) = (ad[(r, input)], fd[(r, input)]);
                diff += (a - b) * (a - b);
                na += a * a;
                nf += b * b;
                if (a - b).abs() > worst {
                    worst = (a - b).abs();
                    output = r;
                }
            }
            let (na, nf) = (na.sqrt(), nf.sqrt());
            entries.push(GradCheckEntry {
                sample: 0,
                quantity,
                input,
                output,
                analytic_norm: na,
                fd_norm: nf,
                relative_error: diff.sqrt() / na.max(nf).max(1e-8),
            });
        }
    }
    let worst = entries
        .iter()
        .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
        .cloned()
        .ok_or_else(|| invalid("scene has nothing to differentiate"))?;
    Ok(GradCheckReport {
        max_relative_error: worst.relative_error,
        worst_coordinate: (worst.output, worst.input),
        worst_quantity: worst.quantity,
        step: h,
        samples: 1,
        tolerance: tol,
        entries,
    })
}

/// Hyper-dual versus second-difference Hessian diagonal of the summed soft
/// separation distance; returns the largest relative error.
pub fn check_separation_hessian(scene: &Scene, state: &SceneState<f64>, h: f64) -> Result<(f64, usize)> {
    let x = pipeline_inputs(state);
    let poses = 6 * state.poses.len();
    let distance = |x: &[f64]| -> Result<f64> {
        let s = perturbed_state(state, x);
        Ok(evaluate_contacts(scene, &s).soft_distances.iter().sum())
    };
    let exact = ad_hessian_diagonal(
        |x: &[HyperDual]| {
            let s = perturbed_state(state, x);
            Ok(evaluate_contacts(scene, &s).soft_distances.into_iter().sum())
        },
        &x,
    )?;
    let fd = fd_hessian_diagonal(distance, &x, h)?;
    let scale = exact[..poses].iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut worst = (0.0, 0);
    for i in 0..poses {
        // coordinates whose curvature is negligible against the largest entry
        // are compared in absolute terms at that scale
        let err = (exact[i] - fd[i]).abs() / exact[i].abs().max(fd[i].abs()).max(1e-3 * scale).max(1e-8);
        if err > worst.0 {
            worst = (err, i);
        }
    }
    Ok(worst)
}

/// Brute-force limit of one pair: exact minimum over hard signed distances
/// and the single point-plane force at the winning pair.
#[derive(Clone, Debug, PartialEq)]
pub struct HardPairResult {
    pub pair: (usize, usize),
    pub distance: f64,
    /// Joint field index of the winning query point.
    pub joint_index: usize,
    pub side: Side,
    pub face: usize,
    pub plane: usize,
    pub force: GeneralizedForce<f64>,
}

pub fn hard_pipeline_oracle(scene: &Scene, state: &SceneState<f64>) -> Result<Vec<HardPairResult>> {
    state.validate(scene)?;
    let world = posed_aopcs(scene, state);
    let mut out = Vec::new();
    for &(ia, ib) in scene.pairs() {
        let (a, b) = (&world[ia], &world[ib]);
        let mut best: Option<(f64, usize, Side, usize, usize)> = None;
        let blocks = [(b, a, Side::Second, 0), (a, b, Side::First, b.len())];
        for (queries, planes, side, shift) in blocks {
            for (f, p) in queries.points().iter().enumerate() {
                let (d, plane) = hard_sdf(planes, p);
                if best.is_none_or(|(bd, ..)| d < bd) {
                    best = Some((d, shift + f, side, f, plane));
                }
            }
        }
        let (distance, joint_index, side, face, plane) = best.expect("non-empty AOPCs");
        let (queries, planes) = match side {
            Side::Second => (b, a),
            Side::First => (a, b),
        };
        let p = queries.points()[face];
        let v = queries.velocities()[face] - planes.velocities()[plane];
        let lambda = point_plane_force(&p, &v, &planes.points()[plane], &planes.normals()[plane], scene.params());
        let mut force = GeneralizedForce::zeros(scene.dof());
        queries.jacobian(face).add_transpose(&lambda, &mut force.values);
        planes.jacobian(plane).add_transpose(&-lambda, &mut force.values);
        out.push(HardPairResult { pair: (ia, ib), distance, joint_index, side, face, plane, force });
    }
    Ok(out)
}

/// Ranges of a randomized state around a base state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jitter {
    /// Translation offset per axis (m).
    pub translation: f64,
    /// Rotation-vector component (rad).
    pub rotation: f64,
    /// Linear velocity per axis (m/s).
    pub linear: f64,
    /// Angular velocity per axis (rad/s).
    pub angular: f64,
}

impl Default for Jitter {
    fn default() -> Self {
        Self { translation: 2e-3, rotation: 0.05, linear: 0.3, angular: 1.0 }
    }
}

/// Draw a state uniformly within `jitter` of `base`; velocities replace the base's.
pub fn random_state(base: &SceneState<f64>, jitter: &Jitter, rng: &mut impl Rng) -> SceneState<f64> {
    let mut u = |s: f64| if s > 0.0 { rng.random_range(-s..s) } else { 0.0 };
    let mut x = Vec::with_capacity(12 * base.poses.len());
    for _ in &base.poses {
        x.extend((0..3).map(|_| u(jitter.translation)));
        x.extend((0..3).map(|_| u(jitter.rotation)));
    }
    for _ in &base.poses {
        x.extend((0..3).map(|_| u(jitter.linear)));
        x.extend((0..3).map(|_| u(jitter.angular)));
    }
    perturbed_state(base, &x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contact::{damping, ContactParams};
    use crate::dynamics::{Body, BodyKind, Controls};
    use crate::geometry::{generate_primitive, Primitive};
    use crate::smooth::Temperature;
    use crate::ssdf::{ssdf, PlaneSet};

    #[test]
    fn quadratic_gradient() {
        let g = fd_gradient(|x| Ok(vec![x[0] * x[0] + x[1] * x[1]]), &[1.0, 2.0], 1e-6).unwrap();
        assert!((g[(0, 0)] - 2.0).abs() < 1e-8);
        assert!((g[(0, 1)] - 4.0).abs() < 1e-8);
        let g = fd_gradient(|_| Ok(vec![3.0, -1.0]), &[0.5, 0.1, 7.0], 1e-6).unwrap();
        assert!(g.as_slice().iter().all(|v| v.abs() < 1e-10 / 1e-6));
        assert!(fd_gradient(|x| Ok(vec![x[0]]), &[1.0], 0.0).is_err());
    }

    #[test]
    fn non_finite_names_coordinate() {
        let r = fd_gradient(|x| Ok(vec![if x[1] > 1.0 { f64::NAN } else { 0.0 }]), &[0.0, 1.0], 1e-3);
        match r {
            Err(Error::NonFinite { index }) => assert_eq!(index, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    struct TwoPlanes;

    impl PlaneSet<f64> for TwoPlanes {
        fn plane_points(&self) -> &[Vec3<f64>] {
            const P: [Vec3<f64>; 2] = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 1.0)];
            &P
        }
        fn plane_normals(&self) -> &[Vec3<f64>] {
            const N: [Vec3<f64>; 2] = [Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0)];
            &N
        }
    }

    #[test]
    fn symmetric_two_plane_gradient() {
        // at z = 0.5 both planes read 0.5 and the weights are equal; the
        // weight derivative 2/ε·w(1−w)·(±1) exactly cancels the plane-value
        // difference of zero, leaving d/dz = ½(1) + ½(−1) = 0 and d/dx = 0
        let eps = Temperature::new(0.3).unwrap();
        let g = fd_gradient(|x| Ok(vec![ssdf(&TwoPlanes, &Vec3::from_slice(x), eps).value]), &[0.0, 0.0, 0.5], 1e-6).unwrap();
        for c in 0..3 {
            assert!(g[(0, c)].abs() < 1e-8);
        }
        // off the midpoint, φ(z) = w₀ z + (1 − w₀)(1 − z) with w₀ = σ((1 − 2z)/ε)
        let z: f64 = 0.6;
        let s = 1.0 / (1.0 + (-(1.0 - 2.0 * z) / 0.3).exp());
        let exact = s - (1.0 - s) - (2.0 / 0.3) * s * (1.0 - s) * (z - (1.0 - z));
        let g = fd_gradient(|x| Ok(vec![ssdf(&TwoPlanes, &Vec3::from_slice(x), eps).value]), &[0.0, 0.0, z], 1e-6).unwrap();
        assert!((g[(0, 2)] - exact).abs() < 1e-8);
    }

    #[test]
    fn hessian_tools_agree_on_smooth_function() {
        let f = |x: &[f64]| Ok(x[0].sin() * x[1].exp() + x[1] * x[1] * x[0]);
        let fh = |x: &[HyperDual]| Ok(x[0].sin() * x[1].exp() + x[1] * x[1] * x[0]);
        let x = [0.3, -0.4];
        let a = ad_hessian_diagonal(fh, &x).unwrap();
        let b = fd_hessian_diagonal(f, &x, 1e-4).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!(relative_error(*u, *v) < 1e-6);
        }
    }

    #[test]
    fn kink_elevates_second_derivative_error() {
        // the damping factor is C¹ but not C² at x = 0
        let f = |x: &[f64]| Ok(damping(x[0]));
        let fh = |x: &[HyperDual]| Ok(damping(x[0]));
        let on = relative_error(ad_hessian_diagonal(fh, &[0.0]).unwrap()[0], fd_hessian_diagonal(f, &[0.0], 1e-4).unwrap()[0]);
        let off = relative_error(ad_hessian_diagonal(fh, &[0.7]).unwrap()[0], fd_hessian_diagonal(f, &[0.7], 1e-4).unwrap()[0]);
        assert!(on > 0.1);
        assert!(off < 1e-6);
    }

    fn sphere_pair(gap: f64) -> (Scene, SceneState<f64>) {
        let prim = Primitive::Sphere { radius: 0.1 };
        let mp = prim.mass_properties(1.0).unwrap();
        let body = |name: &str| Body {
            name: name.into(),
            aopc: generate_primitive(&prim, 54).unwrap(),
            kind: BodyKind::Free { mass: 1.0, inertia: mp.inertia },
        };
        let params = ContactParams {
            eps1: Temperature::new(1e-3).unwrap(),
            eps2: Temperature::new(1e-2).unwrap(),
            ..Default::default()
        };
        let scene = Scene::new(vec![body("a"), body("b")], vec![(0, 1)], Vec3::zeros(), params, Controls::Zero).unwrap();
        let state = SceneState {
            t: 0.0,
            poses: vec![
                Pose::identity(),
                Pose::new(Vec3::new(0.2 + gap, 0.03, -0.02), Quat::from_axis_angle(&Vec3::new(0.0, 1.0, 1.0), 0.4)),
            ],
            v: vec![0.0; 12],
        };
        (scene, state)
    }

    #[test]
    fn pipeline_gradients_pass_in_smooth_region() {
        let (scene, mut state) = sphere_pair(-0.004);
        state.v = vec![0.01, -0.02, 0.015, 0.3, -0.2, 0.1, -0.02, 0.01, 0.0, 0.0, 0.4, -0.1];
        let report = check_pipeline_gradients(&scene, &state, 1e-6, 1e-3).unwrap();
        assert!(report.passed(), "{report:?}");
        let failing = check_pipeline_gradients(&scene, &state, 1e-6, 0.0).unwrap();
        assert!(!failing.passed());
        let mut text = Vec::new();
        failing.write_text(&mut text).unwrap();
        assert!(String::from_utf8(text).unwrap().starts_with("gradient check: FAIL"));
    }

    #[test]
    fn separated_scene_has_gradients() {
        let (scene, state) = sphere_pair(0.08);
        let x = pipeline_inputs(&state);
        let out = pipeline_outputs(&scene, &state, &x).unwrap();
        let force_norm: f64 = out[1..13].iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(force_norm < 1e-6, "{force_norm} at separation {}", out[0]);
        let jac = ad_jacobian(|x| pipeline_outputs(&scene, &state, x), &x).unwrap();
        let grad_norm: f64 = (0..x.len()).flat_map(|c| (1..13).map(move |r| (r, c))).map(|(r, c)| jac[(r, c)].powi(2)).sum::<f64>().sqrt();
        assert!(grad_norm > 0.0);
    }

    #[test]
    fn hessian_of_separation() {
        let (scene, state) = sphere_pair(-0.002);
        let (err, _) = check_separation_hessian(&scene, &state, 1e-4).unwrap();
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn hard_oracle_far_spheres() {
        let prim = Primitive::Sphere { radius: 1.0 };
        let mp = prim.mass_properties(1.0).unwrap();
        let aopc = generate_primitive(&prim, 600).unwrap();
        let (_, spacing) = aopc.nearest_neighbor_spacing();
        let body = |name: &str| Body { name: name.into(), aopc: aopc.clone(), kind: BodyKind::Free { mass: 1.0, inertia: mp.inertia } };
        let scene = Scene::new(vec![body("a"), body("b")], vec![(0, 1)], Vec3::zeros(), ContactParams::default(), Controls::Zero).unwrap();
        let state = SceneState { t: 0.0, poses: vec![Pose::identity(), Pose::from_translation(Vec3::new(0.0, 0.0, 3.0))], v: vec![0.0; 12] };
        let hard = hard_pipeline_oracle(&scene, &state).unwrap();
        assert!((hard[0].distance - 1.0).abs() < spacing);
        // mirror-symmetric configuration: the lowest joint index (second surface) wins
        assert_eq!(hard[0].side, Side::Second);
    }
}
