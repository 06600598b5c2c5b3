//! Soft and hard signed distance queries against an AOPC.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{LocalAopc, WorldAopc};
use crate::linalg::{Mat3, Vec3};
use crate::real::Real;
use crate::smooth::{softmax_into, Temperature};

/// Anything exposing oriented planes `(p_i, n_i)`.
pub trait PlaneSet<T> {
    fn plane_points(&self) -> &[Vec3<T>];
    fn plane_normals(&self) -> &[Vec3<T>];
}

impl PlaneSet<f64> for LocalAopc {
    fn plane_points(&self) -> &[Vec3<f64>] {
        self.points()
    }
    fn plane_normals(&self) -> &[Vec3<f64>] {
        self.normals()
    }
}

impl<T: Real> PlaneSet<T> for WorldAopc<'_, T> {
    fn plane_points(&self) -> &[Vec3<T>] {
        self.points()
    }
    fn plane_normals(&self) -> &[Vec3<T>] {
        self.normals()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SsdfQueryResult<T> {
    pub value: T,
    pub weights: Vec<T>,
    pub squared_distances: Vec<T>,
}

/// Weights and value of one query, written into caller-owned buffers.
pub(crate) fn ssdf_into<T: Real>(
    points: &[Vec3<T>],
    normals: &[Vec3<T>],
    p: &Vec3<T>,
    eps1: f64,
    neg_d: &mut [T],
    weights: &mut [T],
) -> T {
    for (slot, pi) in neg_d.iter_mut().zip(points) {
        *slot = -(*p - *pi).norm_squared();
    }
    softmax_into(neg_d, eps1, weights);
    let mut value = T::zero();
    for ((w, pi), ni) in weights.iter().zip(points).zip(normals) {
        value += *w * ni.dot(&(*p - *pi));
    }
    value
}

pub fn ssdf<T: Real>(planes: &impl PlaneSet<T>, p: &Vec3<T>, eps1: Temperature) -> SsdfQueryResult<T> {
    let points = planes.plane_points();
    let mut neg_d = vec![T::zero(); points.len()];
    let mut weights = vec![T::zero(); points.len()];
    let value = ssdf_into(points, planes.plane_normals(), p, eps1.value(), &mut neg_d, &mut weights);
    let squared_distances = neg_d.into_iter().map(|d| -d).collect();
    SsdfQueryResult { value, weights, squared_distances }
}

/// Nearest plane center (lowest index on ties) and its signed distance.
pub fn hard_sdf(planes: &impl PlaneSet<f64>, p: &Vec3<f64>) -> (f64, usize) {
    let points = planes.plane_points();
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, pi) in points.iter().enumerate() {
        let d = (*p - *pi).norm_squared();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (planes.plane_normals()[best].dot(&(*p - points[best])), best)
}

/// Gaussian kernels `B_i(r) = exp(−rᵀ P_i r)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Kernel {
    /// Per-point bandwidth `h_i` in m², `P_i = I/h_i`.
    Isotropic(Vec<f64>),
    /// Per-point symmetric positive-definite precision, 1/m².
    Anisotropic(Vec<Mat3<f64>>),
}

impl Kernel {
    pub fn uniform(n: usize, eps1: Temperature) -> Self {
        Kernel::Isotropic(vec![eps1.value(); n])
    }

    fn len(&self) -> usize {
        match self {
            Kernel::Isotropic(h) => h.len(),
            Kernel::Anisotropic(p) => p.len(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(invalid(format!("kernel has {} entries for {n} points", self.len())));
        }
        match self {
            Kernel::Isotropic(h) => {
                if let Some(i) = h.iter().position(|h| !(h.is_finite() && *h > 0.0)) {
                    return Err(invalid(format!("bandwidth {i} must be positive")));
                }
            }
            Kernel::Anisotropic(p) => {
                if let Some(i) = p.iter().position(|m| !m.is_symmetric_positive_definite()) {
                    return Err(invalid(format!("precision matrix {i} is not positive definite")));
                }
            }
        }
        Ok(())
    }
}

/// Kernel-weighted plane average `Σ B_i n_i·(p−p_i) / Σ B_i`.
pub fn ssdf_general<T: Real>(
    planes: &impl PlaneSet<T>,
    p: &Vec3<T>,
    kernel: &Kernel,
) -> Result<SsdfQueryResult<T>> {
    let points = planes.plane_points();
    kernel.validate(points.len())?;
    let squared_distances: Vec<T> = points.iter().map(|pi| (*p - *pi).norm_squared()).collect();
    let log_b: Vec<T> = match kernel {
        Kernel::Isotropic(h) => squared_distances.iter().zip(h).map(|(d, h)| -*d / *h).collect(),
        Kernel::Anisotropic(prec) => points
            .iter()
            .zip(prec)
            .map(|(pi, m)| {
                let r = *p - *pi;
                -r.dot(&Mat3::lift(m).mul_vec(&r))
            })
            .collect(),
    };
    let mut weights = vec![T::zero(); points.len()];
    softmax_into(&log_b, 1.0, &mut weights);
    let mut value = T::zero();
    for ((w, pi), ni) in weights.iter().zip(points).zip(planes.plane_normals()) {
        value += *w * ni.dot(&(*p - *pi));
    }
    Ok(SsdfQueryResult { value, weights, squared_distances })
}

/// Axis-aligned sampling region; a `slice` pins one axis to a fixed value.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub resolution: [usize; 3],
    pub slice: Option<(usize, f64)>,
}

impl GridSpec {
    fn counts(&self) -> [usize; 3] {
        let mut c = self.resolution;
        if let Some((axis, _)) = self.slice {
            c[axis] = 1;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((axis, value)) = self.slice {
            if axis > 2 || !value.is_finite() {
                return Err(invalid("slice must name an axis 0..=2 and a finite value"));
            }
        }
        for a in 0..3 {
            if self.slice.is_some_and(|(axis, _)| axis == a) {
                continue;
            }
            if !(self.lower[a].is_finite() && self.upper[a].is_finite() && self.upper[a] > self.lower[a]) {
                return Err(invalid(format!("grid bounds along axis {a} are empty")));
            }
            if self.resolution[a] < 2 {
                return Err(invalid(format!("grid resolution along axis {a} must be >= 2")));
            }
        }
        Ok(())
    }

    /// Lattice nodes in row-major order (x slowest, z fastest).
    pub fn nodes(&self) -> Vec<Vec3<f64>> {
        let c = self.counts();
        let coord = |a: usize, k: usize| match self.slice {
            Some((axis, value)) if axis == a => value,
            _ => self.lower[a] + (self.upper[a] - self.lower[a]) * k as f64 / (c[a] - 1) as f64,
        };
        let mut out = Vec::with_capacity(c[0] * c[1] * c[2]);
        for i in 0..c[0] {
            for j in 0..c[1] {
                for k in 0..c[2] {
                    out.push(Vec3::new(coord(0, i), coord(1, j), coord(2, k)));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdfGrid {
    pub dims: [usize; 3],
    pub nodes: Vec<Vec3<f64>>,
    pub values: Vec<f64>,
}

impl SdfGrid {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "x,y,z,phi")?;
        for (p, v) in self.nodes.iter().zip(&self.values) {
            writeln!(w, "{},{},{},{}", p.x, p.y, p.z, v)?;
        }
        Ok(())
    }
}

pub fn sample_sdf_grid(planes: &(impl PlaneSet<f64> + Sync), spec: &GridSpec, eps1: Temperature) -> Result<SdfGrid> {
    spec.validate()?;
    let nodes = spec.nodes();
    let points = planes.plane_points();
    let normals = planes.plane_normals();
    let values = nodes
        .par_iter()
        .map_init(
            || (vec![0.0; points.len()], vec![0.0; points.len()]),
            |(d, w), p| ssdf_into(points, normals, p, eps1.value(), d, w),
        )
        .collect();
    Ok(SdfGrid { dims: spec.counts(), nodes, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_primitive, pose_aopc, BodyMotion, Pose, Primitive};
    use crate::linalg::Quat;
    use crate::real::{Dual, HyperDual};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Planes<T>(Vec<Vec3<T>>, Vec<Vec3<T>>);

    impl<T> PlaneSet<T> for Planes<T> {
        fn plane_points(&self) -> &[Vec3<T>] {
            &self.0
        }
        fn plane_normals(&self) -> &[Vec3<T>] {
            &self.1
        }
    }

    fn two_planes() -> Planes<f64> {
        Planes(
            vec![Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0)],
            vec![Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.0, 0.0, -1.0)],
        )
    }

    fn t(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    #[test]
    fn single_plane() {
        let s = Planes(vec![Vec3::zeros()], vec![Vec3::new(0.0, 0.0, 1.0)]);
        for eps in [1e-6, 1.0, 1e3] {
            let r = ssdf(&s, &Vec3::new(0.0, 0.0, 0.3), t(eps));
            assert_eq!(r.value, 0.3);
            assert_eq!(r.weights, vec![1.0]);
        }
    }

    #[test]
    fn two_plane_examples() {
        let s = two_planes();
        let r = ssdf(&s, &Vec3::new(0.0, 0.0, 0.5), t(0.1));
        assert_eq!(r.weights, vec![0.5, 0.5]);
        assert_eq!(r.value, 0.5);
        assert_eq!(r.squared_distances, vec![0.25, 0.25]);
        assert_eq!(hard_sdf(&s, &Vec3::new(0.0, 0.0, 0.4)), (0.4, 0));
        assert_eq!(hard_sdf(&s, &Vec3::new(0.0, 0.0, 0.5)).1, 0);
    }

    #[test]
    fn unit_box_top_face() {
        let a = generate_primitive(&Primitive::Box { size: [1.0; 3] }, 6).unwrap();
        assert_eq!(hard_sdf(&a, &Vec3::new(0.0, 0.0, 5.0)).0, 4.5);
    }

    #[test]
    fn sphere_far_query() {
        let a = generate_primitive(&Primitive::Sphere { radius: 1.0 }, 4096).unwrap();
        let (_, max_spacing) = a.nearest_neighbor_spacing();
        let r = ssdf(&a, &Vec3::new(0.0, 0.0, 3.0), t(1e-6));
        assert!((r.value - 2.0).abs() < 2.0 * max_spacing);
    }

    #[test]
    fn general_kernel_equivalences() {
        let a = generate_primitive(&Primitive::Box { size: [1.0, 0.6, 0.4] }, 80).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let eps = rng.random_range(1e-3..1.0);
            let base = ssdf(&a, &p, t(eps)).value;
            let iso = ssdf_general(&a, &p, &Kernel::uniform(a.len(), t(eps))).unwrap().value;
            let prec = Mat3::diag(1.0 / eps, 1.0 / eps, 1.0 / eps);
            let aniso = ssdf_general(&a, &p, &Kernel::Anisotropic(vec![prec; a.len()])).unwrap().value;
            assert!((base - iso).abs() < 1e-12);
            assert!((base - aniso).abs() < 1e-12);
        }
        let one = Planes(vec![Vec3::new(1.0, 0.0, 0.0)], vec![Vec3::new(1.0, 0.0, 0.0)]);
        let aniso = Kernel::Anisotropic(vec![Mat3::diag(3.0, 1.0, 0.2)]);
        let r = ssdf_general(&one, &Vec3::new(3.0, 1.0, 1.0), &aniso).unwrap();
        assert_eq!(r.value, 2.0);
    }

    #[test]
    fn general_rejects_indefinite_precision() {
        let one = Planes(vec![Vec3::zeros()], vec![Vec3::new(1.0, 0.0, 0.0)]);
        let bad = Kernel::Anisotropic(vec![Mat3::diag(1.0, -1.0, 1.0)]);
        assert!(ssdf_general(&one, &Vec3::zeros(), &bad).is_err());
        assert!(ssdf_general(&one, &Vec3::zeros(), &Kernel::Isotropic(vec![1.0, 1.0])).is_err());
    }

    #[test]
    fn rigid_invariance() {
        let a = generate_primitive(&Primitive::Cylinder { radius: 0.3, height: 0.8 }, 200).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let axis = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 1.0);
            let pose = Pose::new(Vec3::new(0.3, -2.0, 1.0), Quat::from_axis_angle(&axis, rng.random_range(-3.0..3.0)));
            let w = pose_aopc(&a, &pose, 0, BodyMotion::<f64>::at_rest());
            let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let q = pose.transform_point(&p);
            let before = ssdf(&a, &p, t(1e-2)).value;
            let after = ssdf(&w, &q, t(1e-2)).value;
            assert!((before - after).abs() < 1e-9);
        }
    }

    #[test]
    fn converges_to_hard_oracle() {
        let a = generate_primitive(&Primitive::Box { size: [1.0, 0.7, 0.5] }, 120).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        while checked < 50 {
            let p = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let mut d: Vec<f64> = a.points().iter().map(|pi| (p - *pi).norm_squared()).collect();
            d.sort_by(f64::total_cmp);
            if d[1] - d[0] <= 1e-3 {
                continue;
            }
            let median = d[d.len() / 2];
            let soft = ssdf(&a, &p, t(1e-9 * median)).value;
            assert!((soft - hard_sdf(&a, &p).0).abs() < 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let a = generate_primitive(&Primitive::Box { size: [1.0, 0.7, 0.5] }, 60).unwrap();
        let eps = 0.05;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = |p: Vec3<f64>| ssdf(&a, &p, t(eps)).value;
        let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1e-8);
        for _ in 0..100 {
            let p = Vec3::new(rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8), rng.random_range(-0.8..0.8));
            let wa: Vec<Vec3<Dual>> = a.points().iter().map(|v| Vec3::lift(*v)).collect();
            let na: Vec<Vec3<Dual>> = a.normals().iter().map(|v| Vec3::lift(*v)).collect();
            let ha: Vec<Vec3<HyperDual>> = a.points().iter().map(|v| Vec3::lift(*v)).collect();
            let hn: Vec<Vec3<HyperDual>> = a.normals().iter().map(|v| Vec3::lift(*v)).collect();
            for axis in 0..3 {
                let e = Vec3::unit(axis);
                let h = 1e-5;
                let fd = (f(p + e.scale(h)) - f(p - e.scale(h))) / (2.0 * h);
                let mut pd = Vec3::<Dual>::lift(p);
                pd[axis].du = 1.0;
                let planes = Planes(wa.clone(), na.clone());
                let ad = ssdf(&planes, &pd, t(eps)).value.du;
                assert!(rel(ad, fd) < 1e-4, "{ad} vs {fd}");

                let h2 = 1e-3;
                let fd2 = (f(p + e.scale(h2)) - 2.0 * f(p) + f(p - e.scale(h2))) / (h2 * h2);
                let mut ph = Vec3::<HyperDual>::lift(p);
                ph[axis] = HyperDual::new(p[axis], 1.0, 1.0, 0.0);
                let planes = Planes(ha.clone(), hn.clone());
                let hd = ssdf(&planes, &ph, t(eps)).value.e12;
                assert!((hd - fd2).abs() < 1e-4 * hd.abs().max(fd2.abs()).max(1.0), "{hd} vs {fd2}");
            }
        }
    }

    #[test]
    fn grid_symmetry_and_oracle() {
        let a = generate_primitive(&Primitive::Box { size: [1.0; 3] }, 54).unwrap();
        let spec = GridSpec { lower: [-1.0; 3], upper: [1.0; 3], resolution: [2, 2, 2], slice: None };
        let g = sample_sdf_grid(&a, &spec, t(0.1)).unwrap();
        for v in &g.values {
            assert!((v - g.values[0]).abs() < 1e-9);
        }

        let spec = GridSpec { lower: [-1.0; 3], upper: [1.0; 3], resolution: [9, 9, 9], slice: None };
        let eps = 1e-6;
        let g = sample_sdf_grid(&a, &spec, t(eps)).unwrap();
        for (p, v) in g.nodes.iter().zip(&g.values) {
            let mut d: Vec<f64> = a.points().iter().map(|pi| (*p - *pi).norm_squared()).collect();
            d.sort_by(f64::total_cmp);
            if d[1] - d[0] < 10.0 * eps {
                continue;
            }
            assert!((v - hard_sdf(&a, p).0).abs() < 1e-6);
        }
    }

    #[test]
    fn grid_slice_and_validation() {
        let a = generate_primitive(&Primitive::Box { size: [1.0; 3] }, 6).unwrap();
        let spec = GridSpec { lower: [-1.0; 3], upper: [1.0; 3], resolution: [5, 4, 7], slice: Some((2, 0.0)) };
        let g = sample_sdf_grid(&a, &spec, t(0.01)).unwrap();
        assert_eq!(g.dims, [5, 4, 1]);
        assert!(g.nodes.iter().all(|p| p.z == 0.0));
        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 21);
        assert!(text.starts_with("x,y,z,phi\n"));

        let empty = GridSpec { lower: [0.0; 3], upper: [0.0, 1.0, 1.0], resolution: [3; 3], slice: None };
        assert!(sample_sdf_grid(&a, &empty, t(0.01)).is_err());
        let coarse = GridSpec { lower: [0.0; 3], upper: [1.0; 3], resolution: [1, 3, 3], slice: None };
        assert!(sample_sdf_grid(&a, &coarse, t(0.01)).is_err());
    }

    proptest! {
        #[test]
        fn value_is_convex_combination(px in -2f64..2.0, py in -2f64..2.0, pz in -2f64..2.0, eps in 1e-4f64..10.0) {
            let a = generate_primitive(&Primitive::Box { size: [1.0, 0.5, 0.8] }, 40).unwrap();
            let p = Vec3::new(px, py, pz);
            let r = ssdf(&a, &p, t(eps));
            let planes: Vec<f64> = a.points().iter().zip(a.normals()).map(|(pi, ni)| ni.dot(&(p - *pi))).collect();
            let lo = planes.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = planes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r.value >= lo - 1e-12 && r.value <= hi + 1e-12);
            prop_assert!((r.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
