//! Analytic AOPC generators for primitive shapes.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI};
use std::hash::Hash;

use super::aopc::LocalAopc;
use crate::error::{invalid, Result};
use crate::linalg::{Mat3, Vec3};

/// Axis-aligned box member of a composite shape.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxMember {
    pub size: [f64; 3],
    pub center: [f64; 3],
}

impl BoxMember {
    fn contains_strictly(&self, p: &Vec3<f64>, margin: f64) -> bool {
        (0..3).all(|a| (p[a] - self.center[a]).abs() < 0.5 * self.size[a] - margin)
    }

    /// Signed distance of the solid box.
    pub fn signed_distance(&self, p: &Vec3<f64>) -> f64 {
        let q: Vec<f64> = (0..3)
            .map(|a| (p[a] - self.center[a]).abs() - 0.5 * self.size[a])
            .collect();
        let outside = Vec3::new(q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)).norm();
        outside + q[0].max(q[1]).max(q[2]).min(0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Primitive {
    Sphere { radius: f64 },
    /// Axis-aligned box centered at the origin.
    Box { size: [f64; 3] },
    /// Cylinder along z centered at the origin.
    Cylinder { radius: f64, height: f64 },
    Composite { members: Vec<BoxMember> },
}

/// Mass, center of mass and inertia about the center of mass (body axes).
#[derive(Clone, Debug, PartialEq)]
pub struct MassProperties {
    pub mass: f64,
    pub center_of_mass: Vec3<f64>,
    pub inertia: Mat3<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

impl Primitive {
    pub fn validate(&self) -> Result<()> {
        match self {
            Primitive::Sphere { radius } => positive("sphere radius", *radius),
            Primitive::Box { size } => size.iter().try_for_each(|&s| positive("box size", s)),
            Primitive::Cylinder { radius, height } => {
                positive("cylinder radius", *radius)?;
                positive("cylinder height", *height)
            }
            Primitive::Composite { members } => {
                if members.is_empty() {
                    return Err(invalid("composite needs at least one member"));
                }
                for m in members {
                    m.size.iter().try_for_each(|&s| positive("composite member size", s))?;
                    if m.center.iter().any(|c| !c.is_finite()) {
                        return Err(invalid("composite member center must be finite"));
                    }
                }
                Ok(())
            }
        }
    }

    fn surface_area(&self) -> f64 {
        match self {
            Primitive::Sphere { radius } => 4.0 * PI * radius * radius,
            Primitive::Box { size } => box_area(size),
            Primitive::Cylinder { radius, height } => 2.0 * PI * radius * (radius + height),
            Primitive::Composite { members } => members.iter().map(|m| box_area(&m.size)).sum(),
        }
    }

    /// Exact signed distance of the solid (union for composites).
    pub fn signed_distance(&self, p: &Vec3<f64>) -> f64 {
        match self {
            Primitive::Sphere { radius } => p.norm() - radius,
            Primitive::Box { size } => BoxMember { size: *size, center: [0.0; 3] }.signed_distance(p),
            Primitive::Cylinder { radius, height } => {
                let dr = (p.x * p.x + p.y * p.y).sqrt() - radius;
                let dz = p.z.abs() - 0.5 * height;
                let outside = (dr.max(0.0).powi(2) + dz.max(0.0).powi(2)).sqrt();
                outside + dr.max(dz).min(0.0)
            }
            Primitive::Composite { members } => members
                .iter()
                .map(|m| m.signed_distance(p))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Solid mass properties at uniform density.
    pub fn mass_properties(&self, mass: f64) -> Result<MassProperties> {
        positive("mass", mass)?;
        self.validate()?;
        let (center_of_mass, inertia) = match self {
            Primitive::Sphere { radius } => {
                let i = 0.4 * mass * radius * radius;
                (Vec3::zeros(), Mat3::diag(i, i, i))
            }
            Primitive::Box { size } => (Vec3::zeros(), box_inertia(mass, size)),
            Primitive::Cylinder { radius, height } => {
                let ixx = mass * (3.0 * radius * radius + height * height) / 12.0;
                (Vec3::zeros(), Mat3::diag(ixx, ixx, 0.5 * mass * radius * radius))
            }
            Primitive::Composite { members } => composite_inertia(mass, members),
        };
        Ok(MassProperties { mass, center_of_mass, inertia })
    }

    /// Copy shifted so that its center of mass is at the origin.
    pub fn centered(&self) -> Result<(Primitive, Vec3<f64>)> {
        let com = self.mass_properties(1.0)?.center_of_mass;
        let shifted = match self {
            Primitive::Composite { members } => Primitive::Composite {
                members: members
                    .iter()
                    .map(|m| BoxMember {
                        size: m.size,
                        center: [m.center[0] - com.x, m.center[1] - com.y, m.center[2] - com.z],
                    })
                    .collect(),
            },
            other => other.clone(),
        };
        Ok((shifted, com))
    }
}

fn box_area(s: &[f64; 3]) -> f64 {
    2.0 * (s[0] * s[1] + s[1] * s[2] + s[0] * s[2])
}

fn box_inertia(mass: f64, s: &[f64; 3]) -> Mat3<f64> {
    let k = mass / 12.0;
    Mat3::diag(
        k * (s[1] * s[1] + s[2] * s[2]),
        k * (s[0] * s[0] + s[2] * s[2]),
        k * (s[0] * s[0] + s[1] * s[1]),
    )
}

/// Midpoint-rule integration of the union over its bounding box.
fn composite_inertia(mass: f64, members: &[BoxMember]) -> (Vec3<f64>, Mat3<f64>) {
    const N: usize = 64;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for m in members {
        for a in 0..3 {
            lo[a] = lo[a].min(m.center[a] - 0.5 * m.size[a]);
            hi[a] = hi[a].max(m.center[a] + 0.5 * m.size[a]);
        }
    }
    let step: Vec<f64> = (0..3).map(|a| (hi[a] - lo[a]) / N as f64).collect();
    let mut samples = Vec::new();
    for i in 0..N {
        for j in 0..N {
            for k in 0..N {
                let p = Vec3::new(
                    lo[0] + (i as f64 + 0.5) * step[0],
                    lo[1] + (j as f64 + 0.5) * step[1],
                    lo[2] + (k as f64 + 0.5) * step[2],
                );
                if members.iter().any(|m| m.contains_strictly(&p, 0.0)) {
                    samples.push(p);
                }
            }
        }
    }
    let dm = mass / samples.len() as f64;
    let com = samples.iter().fold(Vec3::zeros(), |a, &p| a + p).scale(1.0 / samples.len() as f64);
    let mut inertia = Mat3::zeros();
    for p in &samples {
        let r = *p - com;
        let r2 = r.norm_squared();
        for a in 0..3 {
            for b in 0..3 {
                let delta = if a == b { r2 } else { 0.0 };
                inertia.m[a][b] += dm * (delta - r[a] * r[b]);
            }
        }
    }
    // the midpoint rule misses the d²/12 self-inertia of each voxel
    let d2: Vec<f64> = step.iter().map(|s| s * s / 12.0).collect();
    inertia.m[0][0] += mass * (d2[1] + d2[2]);
    inertia.m[1][1] += mass * (d2[0] + d2[2]);
    inertia.m[2][2] += mass * (d2[0] + d2[1]);
    (com, inertia)
}

struct Builder<K> {
    points: Vec<Vec3<f64>>,
    normals: Vec<Vec3<f64>>,
    vertices: Vec<Vec3<f64>>,
    faces: Vec<[usize; 4]>,
    index: HashMap<K, usize>,
}

impl<K: Hash + Eq> Builder<K> {
    fn new() -> Self {
        Self {
            points: Vec::new(),
            normals: Vec::new(),
            vertices: Vec::new(),
            faces: Vec::new(),
            index: HashMap::new(),
        }
    }

    fn vertex(&mut self, key: K, position: impl FnOnce() -> Vec3<f64>) -> usize {
        let next = self.vertices.len();
        let idx = *self.index.entry(key).or_insert(next);
        if idx == next {
            self.vertices.push(position());
        }
        idx
    }

    fn face(&mut self, center: Vec3<f64>, normal: Vec3<f64>, corners: [usize; 4]) {
        self.points.push(center);
        self.normals.push(normal);
        self.faces.push(corners);
    }

    fn finish(self, name: &str) -> Result<LocalAopc> {
        LocalAopc::new(name, self.points, self.normals, self.vertices, self.faces)
    }
}

/// Generate an AOPC for `kind` with roughly `resolution` points.
pub fn generate_primitive(kind: &Primitive, resolution: usize) -> Result<LocalAopc> {
    if resolution < 6 {
        return Err(invalid(format!("resolution must be >= 6, got {resolution}")));
    }
    kind.validate()?;
    let spacing = (kind.surface_area() / resolution as f64).sqrt();
    let aopc = match kind {
        Primitive::Sphere { radius } => sphere(*radius, resolution)?,
        Primitive::Box { size } => box_surface("box", size, [0.0; 3], spacing)?,
        Primitive::Cylinder { radius, height } => cylinder(*radius, *height, spacing)?,
        Primitive::Composite { members } => return composite(members, spacing),
    };
    let centroid = aopc.centroid();
    for (i, (p, n)) in aopc.points().iter().zip(aopc.normals()).enumerate() {
        if n.dot(&(*p - centroid)) <= 0.0 {
            return Err(invalid(format!("generated normal {i} does not point outward")));
        }
    }
    Ok(aopc)
}

/// Equi-angular cube-sphere.
fn sphere(radius: f64, resolution: usize) -> Result<LocalAopc> {
    let n = ((resolution as f64 / 6.0).sqrt().round() as i64).max(1);
    let warp = |k: f64| (FRAC_PI_4 * (2.0 * k / n as f64 - 1.0)).tan();
    let mut b = Builder::<[i64; 3]>::new();
    for axis in 0..3 {
        for sign in [1i64, -1] {
            // tangent axes ordered so that e_u × e_v points outward
            let (u, v) = if sign > 0 { ((axis + 1) % 3, (axis + 2) % 3) } else { ((axis + 2) % 3, (axis + 1) % 3) };
            let lattice = |i: i64, j: i64| {
                let mut key = [0i64; 3];
                key[axis] = if sign > 0 { n } else { 0 };
                key[u] = i;
                key[v] = j;
                key
            };
            let cube_point = |fi: f64, fj: f64| {
                let mut c = [0.0; 3];
                c[axis] = sign as f64;
                c[u] = warp(fi);
                c[v] = warp(fj);
                Vec3::from_array(c)
            };
            for i in 0..n {
                for j in 0..n {
                    let mut corners = [0usize; 4];
                    for (c, (di, dj)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                        let (ii, jj) = (i + di, j + dj);
                        corners[c] = b.vertex(lattice(ii, jj), || {
                            cube_point(ii as f64, jj as f64).normalized().scale(radius)
                        });
                    }
                    let center = cube_point(i as f64 + 0.5, j as f64 + 0.5).normalized().scale(radius);
                    let normal = center.scale(1.0 / center.norm());
                    b.face(center, normal, corners);
                }
            }
        }
    }
    b.finish("sphere")
}

fn edge_counts(size: &[f64; 3], spacing: f64) -> [i64; 3] {
    let mut n = [1i64; 3];
    for a in 0..3 {
        n[a] = ((size[a] / spacing).round() as i64).max(1);
    }
    n
}

/// Per-face grids on an axis-aligned box centered at `center`.
fn box_surface(name: &str, size: &[f64; 3], center: [f64; 3], spacing: f64) -> Result<LocalAopc> {
    let counts = edge_counts(size, spacing);
    let position = |key: [i64; 3]| {
        let mut c = [0.0; 3];
        for a in 0..3 {
            c[a] = center[a] - 0.5 * size[a] + key[a] as f64 * size[a] / counts[a] as f64;
        }
        Vec3::from_array(c)
    };
    let mut b = Builder::<[i64; 3]>::new();
    for axis in 0..3 {
        for sign in [1i64, -1] {
            let (u, v) = if sign > 0 { ((axis + 1) % 3, (axis + 2) % 3) } else { ((axis + 2) % 3, (axis + 1) % 3) };
            let level = if sign > 0 { counts[axis] } else { 0 };
            for i in 0..counts[u] {
                for j in 0..counts[v] {
                    let mut corners = [0usize; 4];
                    for (c, (di, dj)) in [(0, 0), (1, 0), (1, 1), (0, 1)].into_iter().enumerate() {
                        let mut key = [0i64; 3];
                        key[axis] = level;
                        key[u] = i + di;
                        key[v] = j + dj;
                        corners[c] = b.vertex(key, || position(key));
                    }
                    let mut cc = [0.0; 3];
                    cc[axis] = center[axis] + 0.5 * sign as f64 * size[axis];
                    cc[u] = center[u] - 0.5 * size[u] + (i as f64 + 0.5) * size[u] / counts[u] as f64;
                    cc[v] = center[v] - 0.5 * size[v] + (j as f64 + 0.5) * size[v] / counts[v] as f64;
                    let mut normal = Vec3::zeros();
                    normal[axis] = sign as f64;
                    b.face(Vec3::from_array(cc), normal, corners);
                }
            }
        }
    }
    b.finish(name)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum CylKey {
    /// Lateral lattice: angular index around the rim, height row.
    Ring(i64, i64),
    /// Interior cap lattice point.
    Cap(bool, i64, i64),
}

/// Cylinder along z: square-to-disk mapped cap grids plus a lateral grid
/// sharing the cap rims.
fn cylinder(radius: f64, height: f64, spacing: f64) -> Result<LocalAopc> {
    let m = ((radius * PI.sqrt() / spacing).round() as i64).max(1);
    let ring = 4 * m;
    let rows = ((height / (2.0 * PI * radius / ring as f64)).round() as i64).max(1);
    let disk = |a: f64, b: f64| {
        (
            radius * a * (1.0 - 0.5 * b * b).sqrt(),
            radius * b * (1.0 - 0.5 * a * a).sqrt(),
        )
    };
    let square = |i: i64| -1.0 + 2.0 * i as f64 / m as f64;
    let ring_index = |i: i64, j: i64| -> Option<i64> {
        if i == m {
            Some(j)
        } else if j == m {
            Some(m + (m - i))
        } else if i == 0 {
            Some(2 * m + (m - j))
        } else if j == 0 {
            Some((3 * m + i) % ring)
        } else {
            None
        }
    };
    let mut rim = vec![(0.0, 0.0); ring as usize];
    for i in 0..=m {
        for j in 0..=m {
            if let Some(k) = ring_index(i, j) {
                rim[k as usize] = disk(square(i), square(j));
            }
        }
    }
    let z_of = |row: i64| -0.5 * height + row as f64 * height / rows as f64;
    let mut b = Builder::<CylKey>::new();

    for k in 0..ring {
        let k1 = (k + 1) % ring;
        for row in 0..rows {
            let mut corners = [0usize; 4];
            for (c, (kk, rr)) in [(k, row), (k1, row), (k1, row + 1), (k, row + 1)].into_iter().enumerate() {
                let (x, y) = rim[kk as usize];
                corners[c] = b.vertex(CylKey::Ring(kk, rr), || Vec3::new(x, y, z_of(rr)));
            }
            let (x0, y0) = rim[k as usize];
            let (x1, y1) = rim[k1 as usize];
            let dir = Vec3::new(x0 + x1, y0 + y1, 0.0).normalized();
            let center = Vec3::new(radius * dir.x, radius * dir.y, 0.5 * (z_of(row) + z_of(row + 1)));
            b.face(center, dir, corners);
        }
    }

    for top in [true, false] {
        let z = if top { 0.5 * height } else { -0.5 * height };
        let level = if top { rows } else { 0 };
        for i in 0..m {
            for j in 0..m {
                let mut order = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
                if !top {
                    order.reverse();
                }
                let mut corners = [0usize; 4];
                for (c, (ii, jj)) in order.into_iter().enumerate() {
                    let key = match ring_index(ii, jj) {
                        Some(k) => CylKey::Ring(k, level),
                        None => CylKey::Cap(top, ii, jj),
                    };
                    corners[c] = b.vertex(key, || {
                        let (x, y) = disk(square(ii), square(jj));
                        Vec3::new(x, y, z)
                    });
                }
                let (cx, cy) = disk(
                    -1.0 + (2 * i + 1) as f64 / m as f64,
                    -1.0 + (2 * j + 1) as f64 / m as f64,
                );
                let normal = Vec3::new(0.0, 0.0, if top { 1.0 } else { -1.0 });
                b.face(Vec3::new(cx, cy, z), normal, corners);
            }
        }
    }
    b.finish("cylinder")
}

const INSIDE_MARGIN: f64 = 1e-9;

/// Union of boxes; faces whose centers lie strictly inside another member are dropped.
fn composite(members: &[BoxMember], spacing: f64) -> Result<LocalAopc> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (k, member) in members.iter().enumerate() {
        let part = box_surface("member", &member.size, member.center, spacing)?;
        let mut remap = vec![usize::MAX; part.vertex_count()];
        let mut kept = 0;
        for (f, (p, n)) in part.points().iter().zip(part.normals()).enumerate() {
            let buried = members
                .iter()
                .enumerate()
                .any(|(o, other)| o != k && other.contains_strictly(p, INSIDE_MARGIN));
            if buried {
                continue;
            }
            kept += 1;
            let mut corners = [0usize; 4];
            for (c, &v) in part.faces()[f].iter().enumerate() {
                if remap[v] == usize::MAX {
                    remap[v] = vertices.len();
                    vertices.push(part.vertices()[v]);
                }
                corners[c] = remap[v];
            }
            points.push(*p);
            normals.push(*n);
            faces.push(corners);
        }
        if kept == 0 {
            return Err(invalid(format!("composite member {k} is fully overlapped by the others")));
        }
    }
    LocalAopc::new("composite", points, normals, vertices, faces)
}

/// T-shaped composite: a crossbar centered at the origin and a stem hanging
/// along −y from the bar's center line. Not centered at its center of mass.
pub fn t_shape(bar: [f64; 3], stem: [f64; 3]) -> Primitive {
    Primitive::Composite {
        members: vec![
            BoxMember { size: bar, center: [0.0; 3] },
            BoxMember { size: stem, center: [0.0, -0.5 * stem[1], 0.0] },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_one_quad_per_face() {
        let a = generate_primitive(&Primitive::Box { size: [1.0; 3] }, 6).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.vertex_count(), 8);
        for (p, n) in a.points().iter().zip(a.normals()) {
            assert!((p.norm() - 0.5).abs() < 1e-15);
            assert!((*p - n.scale(0.5)).norm() < 1e-15);
            assert_eq!(n.x.abs() + n.y.abs() + n.z.abs(), 1.0);
        }
    }

    #[test]
    fn sphere_points_on_surface_with_radial_normals() {
        let a = generate_primitive(&Primitive::Sphere { radius: 1.0 }, 600).unwrap();
        assert_eq!(a.len(), 600);
        // 6·n² faces, 6·n² + 2 vertices on a closed quad sphere (Euler)
        assert_eq!(a.vertex_count(), 602);
        for (p, n) in a.points().iter().zip(a.normals()) {
            assert!((p.norm() - 1.0).abs() < 1e-14);
            assert_eq!(*n, p.scale(1.0 / p.norm()));
        }
        let (lo, hi) = a.nearest_neighbor_spacing();
        assert!(hi / lo < 2.5, "isotropy ratio {}", hi / lo);
    }

    #[test]
    fn cylinder_is_closed() {
        let a = generate_primitive(&Primitive::Cylinder { radius: 0.5, height: 1.0 }, 300).unwrap();
        // closed genus-0 quad mesh: V = F + 2
        assert_eq!(a.vertex_count(), a.len() + 2);
        for (p, n) in a.points().iter().zip(a.normals()) {
            let sdf = Primitive::Cylinder { radius: 0.5, height: 1.0 }.signed_distance(p);
            assert!(sdf.abs() < 1e-12);
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(generate_primitive(&Primitive::Sphere { radius: 0.0 }, 100).is_err());
        assert!(generate_primitive(&Primitive::Box { size: [1.0, -1.0, 1.0] }, 100).is_err());
        assert!(generate_primitive(&Primitive::Sphere { radius: 1.0 }, 5).is_err());
        let nested = Primitive::Composite {
            members: vec![
                BoxMember { size: [1.0; 3], center: [0.0; 3] },
                BoxMember { size: [0.5; 3], center: [0.0; 3] },
            ],
        };
        assert!(generate_primitive(&nested, 200).is_err());
    }

    #[test]
    fn t_shape_has_no_buried_points() {
        let t = t_shape([0.2, 0.05, 0.05], [0.05, 0.15, 0.05]);
        let a = generate_primitive(&t, 400).unwrap();
        let Primitive::Composite { members } = &t else { unreachable!() };
        for p in a.points() {
            assert!(t.signed_distance(p) > -1e-9, "point {p:?} inside the union");
            assert!(members.iter().all(|m| !m.contains_strictly(p, INSIDE_MARGIN)));
        }
    }

    #[test]
    fn mass_properties_of_t_shape() {
        let t = t_shape([0.2, 0.05, 0.05], [0.05, 0.15, 0.05]);
        let mp = t.mass_properties(1.0).unwrap();
        // bar volume 5e-4 centered at y = 0, stem 3.75e-4 at y = -0.075 minus overlap 6.25e-5 at y = -0.0125
        let (vb, vs, vo) = (5e-4, 3.75e-4, 0.05 * 0.025 * 0.05);
        let expected_y = (vs * -0.075 - vo * -0.0125) / (vb + vs - vo);
        assert!((mp.center_of_mass.y - expected_y).abs() < 1e-4);
        assert!(mp.inertia.is_symmetric_positive_definite());
        let (centered, com) = t.centered().unwrap();
        assert_eq!(com, mp.center_of_mass);
        assert!(centered.mass_properties(1.0).unwrap().center_of_mass.norm() < 1e-9);
    }

    #[test]
    fn box_mass_properties_are_analytic() {
        let mp = Primitive::Box { size: [1.0, 2.0, 3.0] }.mass_properties(12.0).unwrap();
        assert_eq!(mp.inertia, Mat3::diag(13.0, 10.0, 5.0));
    }
}
