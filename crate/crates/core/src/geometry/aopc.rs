use std::fmt::Write as _;

use log::warn;

use crate::error::{invalid, Error, Result};
use crate::linalg::{Mat3, Vec3};

/// Body-frame oriented point cloud: quad face centers with outward normals,
/// plus the quad corner vertices and face-to-vertex incidence.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalAopc {
    name: String,
    points: Vec<Vec3<f64>>,
    normals: Vec<Vec3<f64>>,
    vertices: Vec<Vec3<f64>>,
    faces: Vec<[usize; 4]>,
}

const UNIT_TOL: f64 = 1e-9;

impl LocalAopc {
    pub fn new(
        name: impl Into<String>,
        points: Vec<Vec3<f64>>,
        normals: Vec<Vec3<f64>>,
        vertices: Vec<Vec3<f64>>,
        faces: Vec<[usize; 4]>,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(invalid(format!("AOPC name {name:?} must be non-empty without whitespace")));
        }
        if points.is_empty() {
            return Err(invalid("AOPC needs at least one point"));
        }
        if normals.len() != points.len() || faces.len() != points.len() {
            return Err(invalid(format!(
                "AOPC {name}: {} points, {} normals, {} faces must agree",
                points.len(),
                normals.len(),
                faces.len()
            )));
        }
        for (i, (p, n)) in points.iter().zip(&normals).enumerate() {
            if !p.is_finite() || !n.is_finite() {
                return Err(invalid(format!("AOPC {name}: point {i} is not finite")));
            }
            if (n.norm() - 1.0).abs() > UNIT_TOL {
                return Err(invalid(format!("AOPC {name}: normal {i} is not unit length")));
            }
        }
        if let Some(v) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("AOPC {name}: vertex {v} is not finite")));
        }
        let mut used = vec![false; vertices.len()];
        for (f, face) in faces.iter().enumerate() {
            for (k, &v) in face.iter().enumerate() {
                if v >= vertices.len() {
                    return Err(invalid(format!(
                        "AOPC {name}: face {f} references vertex {v} of {}",
                        vertices.len()
                    )));
                }
                if face[..k].contains(&v) {
                    return Err(invalid(format!("AOPC {name}: face {f} repeats vertex {v}")));
                }
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(invalid(format!("AOPC {name}: vertex {v} belongs to no face")));
        }
        Ok(Self { name, points, normals, vertices, faces })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn points(&self) -> &[Vec3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> &[Vec3<f64>] {
        &self.normals
    }

    pub fn vertices(&self) -> &[Vec3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 4]] {
        &self.faces
    }

    /// Number of points (faces).
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn centroid(&self) -> Vec3<f64> {
        let sum = self.points.iter().fold(Vec3::zeros(), |a, &p| a + p);
        sum.scale(1.0 / self.points.len() as f64)
    }

    /// Largest distance from the body origin to any vertex or point.
    pub fn bounding_radius(&self) -> f64 {
        self.points
            .iter()
            .chain(&self.vertices)
            .map(|p| p.norm())
            .fold(0.0, f64::max)
    }

    /// Minimum and maximum over points of the distance to the nearest other point.
    pub fn nearest_neighbor_spacing(&self) -> (f64, f64) {
        if self.points.len() < 2 {
            return (0.0, 0.0);
        }
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for (i, p) in self.points.iter().enumerate() {
            let nearest = self
                .points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (*p - *q).norm_squared())
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            lo = lo.min(nearest);
            hi = hi.max(nearest);
        }
        (lo, hi)
    }

    /// Rigidly transformed copy `x ↦ R·x + t`.
    pub fn transformed(&self, rotation: &Mat3<f64>, translation: &Vec3<f64>) -> Self {
        let map = |p: &Vec3<f64>| rotation.mul_vec(p) + *translation;
        Self {
            name: self.name.clone(),
            points: self.points.iter().map(map).collect(),
            normals: self.normals.iter().map(|n| rotation.mul_vec(n)).collect(),
            vertices: self.vertices.iter().map(map).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(invalid(format!("AOPC name {name:?} must be non-empty without whitespace")));
        }
        self.name = name;
        Ok(self)
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serialize to the line-oriented AOPC text format (17 significant digits).
pub fn export_aopc(aopc: &LocalAopc) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "aopc {} {} {}", aopc.name, aopc.len(), aopc.vertex_count());
    for (p, n) in aopc.points.iter().zip(&aopc.normals) {
        let _ = writeln!(
            s,
            "p {} {} {} {} {} {}",
            fmt17(p.x),
            fmt17(p.y),
            fmt17(p.z),
            fmt17(n.x),
            fmt17(n.y),
            fmt17(n.z)
        );
    }
    for v in &aopc.vertices {
        let _ = writeln!(s, "v {} {} {}", fmt17(v.x), fmt17(v.y), fmt17(v.z));
    }
    for f in &aopc.faces {
        let _ = writeln!(s, "f {} {} {} {}", f[0], f[1], f[2], f[3]);
    }
    s
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_floats<const N: usize>(fields: &[&str], line: usize) -> Result<[f64; N]> {
    if fields.len() != N {
        return Err(parse_err(line, format!("expected {N} numbers, found {}", fields.len())));
    }
    let mut out = [0.0; N];
    for (o, f) in out.iter_mut().zip(fields) {
        *o = f
            .parse::<f64>()
            .map_err(|_| parse_err(line, format!("bad number {f:?}")))?;
        if !o.is_finite() {
            return Err(parse_err(line, format!("non-finite number {f:?}")));
        }
    }
    Ok(out)
}

/// Parse the AOPC text format. Normals off unit length are renormalized
/// (with a warning beyond 1e-6).
pub fn import_aopc(text: &str) -> Result<LocalAopc> {
    let mut header: Option<(String, usize, usize, usize)> = None;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut vertices = Vec::new();
    let mut faces: Vec<[usize; 4]> = Vec::new();
    let mut face_lines = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let (kind, rest) = (fields[0], &fields[1..]);
        if kind != "aopc" && header.is_none() {
            return Err(parse_err(line, "expected 'aopc <name> <I> <V>' header first"));
        }
        match kind {
            "aopc" => {
                if header.is_some() {
                    return Err(parse_err(line, "duplicate header"));
                }
                if rest.len() != 3 {
                    return Err(parse_err(line, "header needs <name> <I> <V>"));
                }
                let count = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| parse_err(line, format!("bad count {s:?}")))
                };
                header = Some((rest[0].to_string(), count(rest[1])?, count(rest[2])?, line));
            }
            "p" => {
                let [px, py, pz, nx, ny, nz] = parse_floats::<6>(rest, line)?;
                let n = Vec3::new(nx, ny, nz);
                let len = n.norm();
                if len == 0.0 {
                    return Err(parse_err(line, "zero normal"));
                }
                let deviation = (len - 1.0).abs();
                if deviation > 1e-6 {
                    warn!("line {line}: normal norm {len} renormalized");
                }
                points.push(Vec3::new(px, py, pz));
                normals.push(if deviation > 1e-12 { n.scale(1.0 / len) } else { n });
            }
            "v" => {
                let [x, y, z] = parse_floats::<3>(rest, line)?;
                vertices.push(Vec3::new(x, y, z));
            }
            "f" => {
                if rest.len() != 4 {
                    return Err(parse_err(line, "face needs 4 vertex indices"));
                }
                let mut f = [0usize; 4];
                for (o, s) in f.iter_mut().zip(rest) {
                    *o = s
                        .parse::<usize>()
                        .map_err(|_| parse_err(line, format!("bad vertex index {s:?}")))?;
                }
                faces.push(f);
                face_lines.push(line);
            }
            other => return Err(parse_err(line, format!("unknown record {other:?}"))),
        }
    }

    let (name, n_points, n_vertices, header_line) =
        header.ok_or_else(|| parse_err(0, "missing 'aopc' header"))?;
    if points.len() != n_points {
        return Err(parse_err(header_line, format!("header declares {n_points} points, found {}", points.len())));
    }
    if faces.len() != n_points {
        return Err(parse_err(header_line, format!("header declares {n_points} faces, found {}", faces.len())));
    }
    if vertices.len() != n_vertices {
        return Err(parse_err(
            header_line,
            format!("header declares {n_vertices} vertices, found {}", vertices.len()),
        ));
    }
    for (f, line) in faces.iter().zip(&face_lines) {
        if let Some(bad) = f.iter().find(|&&v| v >= n_vertices) {
            return Err(parse_err(*line, format!("vertex index {bad} out of range (V = {n_vertices})")));
        }
    }
    LocalAopc::new(name, points, normals, vertices, faces).map_err(|e| match e {
        Error::InvalidArgument(m) => parse_err(header_line, m),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> LocalAopc {
        LocalAopc::new(
            "sq",
            vec![Vec3::new(0.0, 0.0, 0.0)],
            vec![Vec3::new(0.0, 0.0, 1.0)],
            vec![
                Vec3::new(-0.5, -0.5, 0.0),
                Vec3::new(0.5, -0.5, 0.0),
                Vec3::new(0.5, 0.5, 0.0),
                Vec3::new(-0.5, 0.5, 0.0),
            ],
            vec![[0, 1, 2, 3]],
        )
        .unwrap()
    }

    #[test]
    fn round_trip() {
        let a = square();
        let text = export_aopc(&a);
        assert!(text.starts_with("aopc sq 1 4\n"));
        assert_eq!(import_aopc(&text).unwrap(), a);
    }

    #[test]
    fn bad_index_names_line() {
        let text = "aopc sq 1 4\np 0 0 0 0 0 1\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 0 1 2 5\n";
        match import_aopc(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_normal_rejected() {
        let text = "# comment\naopc sq 1 4\np 0 0 0 0 0 0\n";
        match import_aopc(text) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("zero normal"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn normals_are_renormalized() {
        let text = "aopc sq 1 4\np 0 0 0 0 0 2\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 0 1 2 3\n";
        let a = import_aopc(text).unwrap();
        assert_eq!(a.normals()[0], Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(import_aopc("p 0 0 0 0 0 1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(
            import_aopc("aopc sq 1 4\np 0 0 zero 0 0 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(import_aopc("aopc sq 2 4\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn invariants_enforced() {
        let n = vec![Vec3::new(0.0, 0.0, 1.0)];
        let p = vec![Vec3::zeros()];
        let v = vec![Vec3::zeros(); 5];
        // vertex 4 unused
        assert!(LocalAopc::new("x", p.clone(), n.clone(), v.clone(), vec![[0, 1, 2, 3]]).is_err());
        assert!(LocalAopc::new("x", p.clone(), n.clone(), v[..4].to_vec(), vec![[0, 1, 1, 3]]).is_err());
        assert!(LocalAopc::new("x y", p, n, v[..4].to_vec(), vec![[0, 1, 2, 3]]).is_err());
    }
}
