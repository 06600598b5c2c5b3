//! Soft collision detection between two posed AOPCs.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::WorldAopc;
use crate::linalg::{Matrix, Vec3};
use crate::real::Real;
use crate::smooth::{softmax_into, Temperature};
use crate::ssdf::ssdf_into;

/// Which AOPC of a pair a field entry's query point belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    First,
    Second,
}

/// SSDF values of `b`'s points against `a`, followed by `a`'s points against `b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparationField<T> {
    values: Vec<T>,
    distribution: Vec<T>,
    first_len: usize,
    second_len: usize,
}

impl<T: Real> SeparationField<T> {
    /// Assemble from already concatenated values (`second_len` entries first).
    pub fn from_values(values: Vec<T>, first_len: usize, second_len: usize, eps2: Temperature) -> Result<Self> {
        if values.len() != first_len + second_len || values.is_empty() {
            return Err(invalid(format!(
                "field of length {} does not match {first_len} + {second_len} points",
                values.len()
            )));
        }
        let neg: Vec<T> = values.iter().map(|v| -*v).collect();
        let mut distribution = vec![T::zero(); values.len()];
        softmax_into(&neg, eps2.value(), &mut distribution);
        Ok(Self { values, distribution, first_len, second_len })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn distribution(&self) -> &[T] {
        &self.distribution
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Point counts `(I₁, I₂)` of the first and second AOPC.
    pub fn sizes(&self) -> (usize, usize) {
        (self.first_len, self.second_len)
    }

    /// Owning surface and face index of entry `f`.
    pub fn provenance(&self, f: usize) -> (Side, usize) {
        if f < self.second_len {
            (Side::Second, f)
        } else {
            (Side::First, f - self.second_len)
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().map(Real::re).fold(f64::INFINITY, f64::min)
    }
}

/// SSDF of every point of `queries` against the planes of `planes`.
pub(crate) fn query_values<T: Real>(planes: &WorldAopc<'_, T>, queries: &WorldAopc<'_, T>, eps1: f64) -> Vec<T> {
    let n = planes.len();
    queries
        .points()
        .par_iter()
        .map_init(
            || (vec![T::zero(); n], vec![T::zero(); n]),
            |(d, w), p| ssdf_into(planes.points(), planes.normals(), p, eps1, d, w),
        )
        .collect()
}

pub fn separation_field<T: Real>(
    a: &WorldAopc<'_, T>,
    b: &WorldAopc<'_, T>,
    eps1: Temperature,
    eps2: Temperature,
) -> SeparationField<T> {
    let (mut values, rest) = rayon::join(|| query_values(a, b, eps1.value()), || query_values(b, a, eps1.value()));
    values.extend(rest);
    SeparationField::from_values(values, a.len(), b.len(), eps2).expect("non-empty AOPCs")
}

/// `distribution · values`.
pub fn soft_separation_distance<T: Real>(field: &SeparationField<T>) -> T {
    field.distribution.iter().zip(&field.values).map(|(w, v)| *w * *v).sum()
}

fn check_pair<T: Real>(field: &SeparationField<T>, a: &WorldAopc<'_, T>, b: &WorldAopc<'_, T>) -> Result<()> {
    if field.sizes() != (a.len(), b.len()) {
        return Err(invalid(format!(
            "field sizes {:?} do not match AOPCs with {} and {} points",
            field.sizes(),
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Face masses moved onto the joint vertex set (vertices of `a`, then of `b`).
pub fn vertex_weights<T: Real>(field: &SeparationField<T>, a: &WorldAopc<'_, T>, b: &WorldAopc<'_, T>) -> Result<Vec<T>> {
    check_pair(field, a, b)?;
    let offset = a.vertices().len();
    let mut z = vec![T::zero(); offset + b.vertices().len()];
    for (f, w) in field.distribution.iter().enumerate() {
        let (corners, shift) = match field.provenance(f) {
            (Side::First, i) => (a.faces()[i], 0),
            (Side::Second, j) => (b.faces()[j], offset),
        };
        for v in corners {
            z[v + shift] += *w;
        }
    }
    Ok(z)
}

/// Iterative masked softmax: each row is `softmax(z + m, τ)`, after which the
/// selected mass is pushed down by `LARGE·Γ_k`.
pub fn soft_top_k<T: Real>(z: &[T], k: usize, tau: Temperature) -> Result<Matrix<T>> {
    if k == 0 || k > z.len() {
        return Err(invalid(format!("top-k needs 1 <= K <= {}, got {k}", z.len())));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(crate::error::Error::NonFinite { index: i });
    }
    let hi = z.iter().map(Real::re).fold(f64::NEG_INFINITY, f64::max);
    let lo = z.iter().map(Real::re).fold(f64::INFINITY, f64::min);
    let large = 1e6 * (hi - lo).max(tau.value());
    let mut masked = z.to_vec();
    let mut gamma = Matrix::zeros(k, z.len());
    for row in 0..k {
        softmax_into(&masked, tau.value(), gamma.row_mut(row));
        for (m, g) in masked.iter_mut().zip(gamma.row(row)) {
            *m -= *g * large;
        }
    }
    Ok(gamma)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContactPointSet<T> {
    pub points: Vec<Vec3<T>>,
    pub selection: Matrix<T>,
    pub vertex_weights: Vec<T>,
}

pub fn contact_points<T: Real>(
    a: &WorldAopc<'_, T>,
    b: &WorldAopc<'_, T>,
    field: &SeparationField<T>,
    k: usize,
    tau: Temperature,
) -> Result<ContactPointSet<T>> {
    let z = vertex_weights(field, a, b)?;
    let selection = soft_top_k(&z, k, tau)?;
    let joint: Vec<&Vec3<T>> = a.vertices().iter().chain(b.vertices()).collect();
    let points = (0..k)
        .map(|r| {
            selection
                .row(r)
                .iter()
                .zip(&joint)
                .fold(Vec3::zeros(), |acc, (g, y)| acc + y.scale(*g))
        })
        .collect();
    Ok(ContactPointSet { points, selection, vertex_weights: z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{generate_primitive, pose_aopc, BodyMotion, LocalAopc, Pose, Primitive};
    use crate::linalg::Quat;
    use proptest::prelude::*;

    fn t(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    fn at<'a>(a: &'a LocalAopc, x: f64, y: f64, z: f64) -> WorldAopc<'a, f64> {
        pose_aopc(a, &Pose::from_translation(Vec3::new(x, y, z)), 0, BodyMotion::at_rest())
    }

    fn cube() -> LocalAopc {
        generate_primitive(&Primitive::Box { size: [1.0; 3] }, 96).unwrap()
    }

    #[test]
    fn separated_boxes_gap() {
        let c = cube();
        let (a, b) = (at(&c, 0.0, 0.0, 0.0), at(&c, 0.0, 0.0, 2.0));
        let f = separation_field(&a, &b, t(1e-4), t(1e-3));
        let (_, spacing) = c.nearest_neighbor_spacing();
        assert!((f.min_value() - 1.0).abs() < spacing);
        assert_eq!(f.len(), 2 * c.len());
        assert!((f.distribution().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(f.provenance(0), (Side::Second, 0));
        assert_eq!(f.provenance(c.len()), (Side::First, 0));
    }

    #[test]
    fn swap_permutes_blocks() {
        let c = cube();
        let s = generate_primitive(&Primitive::Sphere { radius: 0.4 }, 150).unwrap();
        let (a, b) = (at(&c, 0.0, 0.0, 0.0), at(&s, 0.3, 0.1, 0.8));
        let ab = separation_field(&a, &b, t(1e-3), t(1e-2));
        let ba = separation_field(&b, &a, t(1e-3), t(1e-2));
        let (i1, i2) = ab.sizes();
        assert_eq!(&ab.values()[..i2], &ba.values()[i1..]);
        assert_eq!(&ab.values()[i2..], &ba.values()[..i1]);
        for f in 0..i2 {
            assert!((ab.distribution()[f] - ba.distribution()[i1 + f]).abs() < 1e-15);
        }
        let d1 = soft_separation_distance(&ab);
        let d2 = soft_separation_distance(&ba);
        assert!((d1 - d2).abs() < 1e-12);
    }

    #[test]
    fn overlapping_unit_spheres() {
        let s = generate_primitive(&Primitive::Sphere { radius: 1.0 }, 1500).unwrap();
        let (a, b) = (at(&s, 0.0, 0.0, 0.0), at(&s, 1.5, 0.0, 0.0));
        let f = separation_field(&a, &b, t(1e-6), t(1e-9));
        let (_, spacing) = s.nearest_neighbor_spacing();
        assert!((f.min_value() + 0.5).abs() < spacing, "{}", f.min_value());
        assert!((soft_separation_distance(&f) - f.min_value()).abs() < 1e-6);
    }

    #[test]
    fn soft_distance_limits() {
        let values = vec![0.3, -0.2, 0.7, -0.1];
        let f = SeparationField::from_values(values, 2, 2, t(1e-9 * 0.9)).unwrap();
        assert!((soft_separation_distance(&f) + 0.2).abs() < 1e-9);
        let f = SeparationField::from_values(vec![0.25; 5], 2, 3, t(1.0)).unwrap();
        assert_eq!(soft_separation_distance(&f), 0.25);
        assert!(SeparationField::from_values(vec![0.0; 3], 2, 2, t(1.0)).is_err());
    }

    #[test]
    fn vertex_weight_transfer() {
        let c = generate_primitive(&Primitive::Box { size: [1.0; 3] }, 6).unwrap();
        let (a, b) = (at(&c, 0.0, 0.0, 0.0), at(&c, 0.0, 0.0, 3.0));
        // one-hot on b's face 2 (entry 2 comes from the second AOPC)
        let mut values = vec![1.0; 12];
        values[2] = -1.0;
        let f = SeparationField::from_values(values, 6, 6, t(1e-6)).unwrap();
        let z = vertex_weights(&f, &a, &b).unwrap();
        assert_eq!(z.len(), 16);
        for (v, w) in z.iter().enumerate() {
            let expected = if v >= 8 && c.faces()[2].contains(&(v - 8)) { 1.0 } else { 0.0 };
            assert_eq!(*w, expected);
        }

        let f = SeparationField::from_values(vec![0.0; 12], 6, 6, t(1.0)).unwrap();
        let z = vertex_weights(&f, &a, &b).unwrap();
        // every cube corner belongs to 3 of the 12 faces
        assert!(z.iter().all(|w| (w - 3.0 / 12.0).abs() < 1e-15));
        assert!((z.iter().sum::<f64>() - 4.0).abs() < 1e-10);
    }

    #[test]
    fn top_k_examples() {
        let g = soft_top_k(&[10.0, 0.0, 0.0], 1, t(1e-3)).unwrap();
        assert_eq!(g.row(0), &[1.0, 0.0, 0.0]);
        let g = soft_top_k(&[3.0, 2.0, 1.0], 2, t(1e-3)).unwrap();
        assert_eq!(g.row(0), &[1.0, 0.0, 0.0]);
        assert_eq!(g.row(1), &[0.0, 1.0, 0.0]);
        let g = soft_top_k(&[0.5; 4], 1, t(1e-3)).unwrap();
        assert_eq!(g.row(0), &[0.25; 4]);
        assert!(soft_top_k(&[1.0, 2.0], 3, t(1e-3)).is_err());
        assert!(soft_top_k(&[1.0, 2.0], 0, t(1e-3)).is_err());
    }

    #[test]
    fn uniform_selection_gives_centroid() {
        let c = generate_primitive(&Primitive::Box { size: [1.0; 3] }, 6).unwrap();
        let (a, b) = (at(&c, 0.0, 0.0, 0.0), at(&c, 0.0, 0.0, 3.0));
        let f = SeparationField::from_values(vec![0.0; 12], 6, 6, t(1.0)).unwrap();
        let set = contact_points(&a, &b, &f, 1, t(1e3)).unwrap();
        let centroid = Vec3::new(0.0, 0.0, 1.5);
        assert!((set.points[0] - centroid).norm() < 1e-12);
    }

    #[test]
    fn one_hot_rows_select_vertices() {
        let c = generate_primitive(&Primitive::Box { size: [1.0; 3] }, 6).unwrap();
        let (a, b) = (at(&c, 0.0, 0.0, 0.0), at(&c, 0.0, 0.0, 3.0));
        let values: Vec<f64> = (0..12).map(|i| 0.1 * ((i * 7) % 12) as f64).collect();
        let f = SeparationField::from_values(values, 6, 6, t(0.1)).unwrap();
        let set = contact_points(&a, &b, &f, 8, t(1e-9)).unwrap();
        let joint: Vec<Vec3<f64>> = a.vertices().iter().chain(b.vertices()).copied().collect();
        let mut order: Vec<usize> = (0..16).collect();
        order.sort_by(|&i, &j| set.vertex_weights[j].total_cmp(&set.vertex_weights[i]));
        for (k, p) in set.points.iter().enumerate() {
            assert_eq!(*p, joint[order[k]]);
        }
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(z in prop::collection::vec(0f64..1.0, 2..30), tau in 1e-4f64..1.0) {
            let k = z.len().min(5);
            let g = soft_top_k(&z, k, t(tau)).unwrap();
            for r in 0..k {
                prop_assert!((g.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-10);
            }
        }

        #[test]
        fn soft_distance_symmetric(dx in -1.5f64..1.5, dy in -1.5f64..1.5, dz in -1.5f64..1.5, angle in -3f64..3.0) {
            let c = generate_primitive(&Primitive::Box { size: [0.8, 0.5, 0.4] }, 40).unwrap();
            let s = generate_primitive(&Primitive::Sphere { radius: 0.3 }, 54).unwrap();
            let a = pose_aopc(&c, &Pose::new(Vec3::zeros(), Quat::from_axis_angle(&Vec3::new(1.0, 1.0, 0.0), angle)), 0, BodyMotion::at_rest());
            let b = at(&s, dx, dy, dz);
            let d1 = soft_separation_distance(&separation_field(&a, &b, t(1e-3), t(1e-2)));
            let d2 = soft_separation_distance(&separation_field(&b, &a, t(1e-3), t(1e-2)));
            prop_assert!((d1 - d2).abs() < 1e-12);
        }
    }
}
