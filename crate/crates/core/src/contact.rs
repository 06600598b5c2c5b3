//! Soft-minimum contact model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collision::SeparationField;
use crate::error::{invalid, Result};
use crate::geometry::{PointJacobian, WorldAopc};
use crate::linalg::Vec3;
use crate::real::Real;
use crate::smooth::{softmax_into, softplus_raw, Temperature};

/// Spring-damper, friction and smoothing constants.
///
/// `eps1` is in m² (it divides squared distances); `eps2` and `eps3` are in m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    pub k: f64,
    pub mu: f64,
    pub v_d: f64,
    pub v_s: f64,
    pub eps1: Temperature,
    pub eps2: Temperature,
    pub eps3: Temperature,
}

impl Default for ContactParams {
    fn default() -> Self {
        let t = |v| Temperature::new(v).expect("positive default");
        Self { k: 1e4, mu: 0.5, v_d: 0.1, v_s: 1e-3, eps1: t(1e-4), eps2: t(1e-3), eps3: t(1e-3) }
    }
}

impl ContactParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("contact.{name} must be > 0, got {v}")))
            }
        };
        positive("k", self.k)?;
        positive("v_d", self.v_d)?;
        positive("v_s", self.v_s)?;
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(invalid(format!("contact.mu must be >= 0, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Generalized force over the scene's free coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneralizedForce<T> {
    pub values: Vec<T>,
}

impl<T: Real> GeneralizedForce<T> {
    pub fn zeros(n: usize) -> Self {
        Self { values: vec![T::zero(); n] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.re() * v.re()).sum::<f64>().sqrt()
    }

    pub fn add_assign(&mut self, o: &Self) {
        for (a, b) in self.values.iter_mut().zip(&o.values) {
            *a += *b;
        }
    }
}

/// Normal damping factor of the normalized approach velocity `x = v_n/v_d`.
pub fn damping<T: Real>(x: T) -> T {
    let r = x.re();
    if r <= 0.0 {
        T::one() - x
    } else if r <= 2.0 {
        let s = x - 2.0;
        s * s * 0.25
    } else {
        T::zero()
    }
}

/// Force on a point at `p` moving with relative velocity `v` against the plane `(plane_p, plane_n)`.
pub fn point_plane_force<T: Real>(
    p: &Vec3<T>,
    v: &Vec3<T>,
    plane_p: &Vec3<T>,
    plane_n: &Vec3<T>,
    params: &ContactParams,
) -> Vec3<T> {
    let phi = plane_n.dot(&(*p - *plane_p));
    let c = softplus_raw(-phi, params.eps3.value()) * params.k;
    let vn = plane_n.dot(v);
    let lambda_n = c * damping(vn / params.v_d);
    let vt = *v - plane_n.scale(vn);
    let slip = (vt.norm_squared() + params.v_s * params.v_s).sqrt();
    plane_n.scale(lambda_n) - vt.scale(lambda_n * params.mu / slip)
}

/// Per-query result of the fused SSDF and force pass.
///
/// `s = Σ w_i λ_i` acts on the query body at the query point and `−s` on the
/// plane body, whose moment about its origin is `−m` with `m = Σ w_i r_i × λ_i`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct QueryTerm<T> {
    pub value: T,
    pub s: Vec3<T>,
    pub m: Vec3<T>,
}

struct Scratch<T> {
    neg_d: Vec<T>,
    weights: Vec<T>,
}

fn query_term<T: Real>(
    planes: &WorldAopc<'_, T>,
    p: &Vec3<T>,
    v: &Vec3<T>,
    params: &ContactParams,
    scratch: &mut Scratch<T>,
) -> QueryTerm<T> {
    let pts = planes.points();
    let normals = planes.normals();
    for (slot, pi) in scratch.neg_d.iter_mut().zip(pts) {
        *slot = -(*p - *pi).norm_squared();
    }
    softmax_into(&scratch.neg_d, params.eps1.value(), &mut scratch.weights);
    let origin = planes.origin();
    let mut value = T::zero();
    let mut s = Vec3::zeros();
    let mut m = Vec3::zeros();
    for (i, w) in scratch.weights.iter().enumerate() {
        value += *w * normals[i].dot(&(*p - pts[i]));
        let lambda = point_plane_force(p, &(*v - planes.velocities()[i]), &pts[i], &normals[i], params).scale(*w);
        s += lambda;
        m += (pts[i] - origin).cross(&lambda);
    }
    QueryTerm { value, s, m }
}

/// Fused SSDF values and force terms for every point of `queries` against `planes`.
pub(crate) fn query_block<T: Real>(
    planes: &WorldAopc<'_, T>,
    queries: &WorldAopc<'_, T>,
    params: &ContactParams,
) -> Vec<QueryTerm<T>> {
    let n = planes.len();
    queries
        .points()
        .par_iter()
        .zip(queries.velocities().par_iter())
        .map_init(
            || Scratch { neg_d: vec![T::zero(); n], weights: vec![T::zero(); n] },
            |scratch, (p, v)| query_term(planes, p, v, params, scratch),
        )
        .collect()
}

fn apply_term<T: Real>(
    term: &QueryTerm<T>,
    scale: T,
    query_jacobian: &PointJacobian<T>,
    plane_offset: Option<usize>,
    out: &mut [T],
) {
    let s = term.s.scale(scale);
    query_jacobian.add_transpose(&s, out);
    if let Some(o) = plane_offset {
        let m = term.m.scale(scale);
        for a in 0..3 {
            out[o + a] -= s[a];
            out[o + 3 + a] -= m[a];
        }
    }
}

/// `Λ_S(p, v, J) = Σ_i w_i (J − J_i)ᵀ λ(p, v − v_i, p_i, n_i)`.
pub fn point_ssdf_force<T: Real>(
    aopc: &WorldAopc<'_, T>,
    p: &Vec3<T>,
    v: &Vec3<T>,
    j: &PointJacobian<T>,
    n: usize,
    params: &ContactParams,
) -> GeneralizedForce<T> {
    let mut scratch = Scratch { neg_d: vec![T::zero(); aopc.len()], weights: vec![T::zero(); aopc.len()] };
    let term = query_term(aopc, p, v, params, &mut scratch);
    let mut out = GeneralizedForce::zeros(n);
    apply_term(&term, T::one(), j, aopc.motion().offset(), &mut out.values);
    out
}

fn combine<T: Real>(
    a: &WorldAopc<'_, T>,
    b: &WorldAopc<'_, T>,
    b_terms: &[QueryTerm<T>],
    a_terms: &[QueryTerm<T>],
    distribution: &[T],
    n: usize,
) -> GeneralizedForce<T> {
    let mut out = GeneralizedForce::zeros(n);
    for (j, term) in b_terms.iter().enumerate() {
        apply_term(term, distribution[j], &b.jacobian(j), a.motion().offset(), &mut out.values);
    }
    let shift = b_terms.len();
    for (i, term) in a_terms.iter().enumerate() {
        apply_term(term, distribution[shift + i], &a.jacobian(i), b.motion().offset(), &mut out.values);
    }
    out
}

/// `Λ₁₂ = Σ_f σ_f Λ_S(p_f)` over the field's entries.
pub fn ssdf_ssdf_force<T: Real>(
    a: &WorldAopc<'_, T>,
    b: &WorldAopc<'_, T>,
    field: &SeparationField<T>,
    n: usize,
    params: &ContactParams,
) -> Result<GeneralizedForce<T>> {
    if field.sizes() != (a.len(), b.len()) {
        return Err(invalid(format!(
            "separation field sizes {:?} do not match AOPCs with {} and {} points",
            field.sizes(),
            a.len(),
            b.len()
        )));
    }
    let (b_terms, a_terms) = rayon::join(|| query_block(a, b, params), || query_block(b, a, params));
    Ok(combine(a, b, &b_terms, &a_terms, field.distribution(), n))
}

/// Separation field and contact force of one pair from a single pass over
/// all point-plane interactions.
pub fn pair_contact<T: Real>(
    a: &WorldAopc<'_, T>,
    b: &WorldAopc<'_, T>,
    n: usize,
    params: &ContactParams,
) -> (SeparationField<T>, GeneralizedForce<T>) {
    let (b_terms, a_terms) = rayon::join(|| query_block(a, b, params), || query_block(b, a, params));
    let values = b_terms.iter().chain(&a_terms).map(|t| t.value).collect();
    let field = SeparationField::from_values(values, a.len(), b.len(), params.eps2).expect("non-empty AOPCs");
    let force = combine(a, b, &b_terms, &a_terms, field.distribution(), n);
    (field, force)
}
