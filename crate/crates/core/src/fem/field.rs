use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::{ref_basis_eval, QuadratureCache};
use super::FemError;
use crate::mesh::Mesh2D;
use crate::quadrature::gauss_legendre_unit;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Complex vector field in the lowest-order edge space: one circulation per
/// global edge, taken along the edge's global orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldFE {
    pub dofs: Vec<Complex64>,
}

impl FieldFE {
    pub fn zeros(mesh: &Mesh2D) -> Self {
        FieldFE { dofs: vec![ZERO; mesh.n_edges()] }
    }

    pub fn new(mesh: &Mesh2D, dofs: Vec<Complex64>) -> Result<Self, FemError> {
        if dofs.len() != mesh.n_edges() {
            return Err(FemError::DimensionMismatch {
                expected: mesh.n_edges(),
                found: dofs.len(),
            });
        }
        Ok(FieldFE { dofs })
    }

    pub fn len(&self) -> usize {
        self.dofs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dofs.is_empty()
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        FieldFE { dofs: self.dofs.iter().map(|d| d * s).collect() }
    }

    pub fn add(&self, other: &FieldFE) -> Self {
        assert_eq!(self.len(), other.len());
        FieldFE { dofs: self.dofs.iter().zip(&other.dofs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &FieldFE) -> Self {
        assert_eq!(self.len(), other.len());
        FieldFE { dofs: self.dofs.iter().zip(&other.dofs).map(|(a, b)| a - b).collect() }
    }

    /// Field values at every cache point.
    pub fn sample(&self, cache: &QuadratureCache) -> Vec<[Complex64; 2]> {
        (0..cache.n_points())
            .map(|p| {
                let t = cache.triangle_of(p);
                let ids = cache.edges[t];
                let b = &cache.basis[p];
                let mut v = [ZERO; 2];
                for k in 0..3 {
                    v[0] += self.dofs[ids[k]] * b[k][0];
                    v[1] += self.dofs[ids[k]] * b[k][1];
                }
                v
            })
            .collect()
    }

    /// Constant curl in each triangle.
    pub fn curl_per_triangle(&self, cache: &QuadratureCache) -> Vec<Complex64> {
        (0..cache.n_triangles())
            .map(|t| {
                let ids = cache.edges[t];
                (0..3).map(|k| self.dofs[ids[k]] * cache.curls[t][k]).sum()
            })
            .collect()
    }

    /// Curl at every cache point.
    pub fn sample_curl(&self, cache: &QuadratureCache) -> Vec<Complex64> {
        let per_t = self.curl_per_triangle(cache);
        (0..cache.n_points()).map(|p| per_t[cache.triangle_of(p)]).collect()
    }
}

fn local_dofs(mesh: &Mesh2D, u: &FieldFE, t: usize) -> [Complex64; 3] {
    let te = mesh.triangle_edges()[t];
    [
        u.dofs[te[0].0] * te[0].1,
        u.dofs[te[1].0] * te[1].1,
        u.dofs[te[2].0] * te[2].1,
    ]
}

/// Field values at (triangle, barycentric) locations.
pub fn evaluate_field(mesh: &Mesh2D, u: &FieldFE, points: &[(usize, [f64; 3])]) -> Vec<[Complex64; 2]> {
    points
        .iter()
        .map(|&(t, bary)| {
            let (vals, _) = ref_basis_eval(&mesh.barycentric_gradients(t), bary);
            let d = local_dofs(mesh, u, t);
            let mut v = [ZERO; 2];
            for k in 0..3 {
                v[0] += d[k] * vals[k][0];
                v[1] += d[k] * vals[k][1];
            }
            v
        })
        .collect()
}

pub fn evaluate_curl(mesh: &Mesh2D, u: &FieldFE, points: &[(usize, [f64; 3])]) -> Vec<Complex64> {
    points
        .iter()
        .map(|&(t, bary)| {
            let (_, curls) = ref_basis_eval(&mesh.barycentric_gradients(t), bary);
            let d = local_dofs(mesh, u, t);
            (0..3).map(|k| d[k] * curls[k]).sum()
        })
        .collect()
}

/// Edge interpolant: circulations of `f` along each globally oriented edge,
/// computed with `n_gauss` Gauss points per edge.
pub fn interpolate<F>(mesh: &Mesh2D, f: F, n_gauss: usize) -> FieldFE
where
    F: Fn([f64; 2]) -> [Complex64; 2],
{
    let (s, w) = gauss_legendre_unit(n_gauss);
    let dofs = mesh
        .edges()
        .iter()
        .map(|&[a, b]| {
            let (p, q) = (mesh.vertices()[a], mesh.vertices()[b]);
            let d = [q[0] - p[0], q[1] - p[1]];
            s.iter()
                .zip(&w)
                .map(|(s, w)| {
                    let v = f([p[0] + s * d[0], p[1] + s * d[1]]);
                    (v[0] * d[0] + v[1] * d[1]) * *w
                })
                .sum()
        })
        .collect();
    FieldFE { dofs }
}

/// Exact edge interpolant of the gradient of a nodal P1 function.
pub fn interpolate_gradient(mesh: &Mesh2D, nodal: &[Complex64]) -> FieldFE {
    assert_eq!(nodal.len(), mesh.n_vertices());
    FieldFE {
        dofs: mesh.edges().iter().map(|&[a, b]| nodal[b] - nodal[a]).collect(),
    }
}

/// ‖v‖_{L²} from samples at the cache points.
pub fn l2_norm_samples(cache: &QuadratureCache, v: &[[Complex64; 2]]) -> f64 {
    v.iter()
        .zip(&cache.weights)
        .map(|(v, w)| w * (v[0].norm_sqr() + v[1].norm_sqr()))
        .sum::<f64>()
        .sqrt()
}

pub fn l2_norm_scalar(cache: &QuadratureCache, v: &[Complex64]) -> f64 {
    v.iter()
        .zip(&cache.weights)
        .map(|(v, w)| w * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn l2_norm(cache: &QuadratureCache, u: &FieldFE) -> f64 {
    l2_norm_samples(cache, &u.sample(cache))
}

pub fn hcurl_norm(cache: &QuadratureCache, u: &FieldFE) -> f64 {
    let l2 = l2_norm(cache, u);
    let c = l2_norm_scalar(cache, &u.sample_curl(cache));
    l2.hypot(c)
}

/// ‖u − v‖_{L²} / ‖v‖_{L²} for sampled fields.
pub fn relative_l2_error_samples(
    cache: &QuadratureCache,
    u: &[[Complex64; 2]],
    v: &[[Complex64; 2]],
) -> Result<f64, FemError> {
    let diff: Vec<[Complex64; 2]> = u.iter().zip(v).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
    let denom = l2_norm_samples(cache, v);
    if denom == 0.0 {
        return Err(FemError::ZeroNorm);
    }
    Ok(l2_norm_samples(cache, &diff) / denom)
}

pub fn relative_l2_error(cache: &QuadratureCache, u: &FieldFE, v: &FieldFE) -> Result<f64, FemError> {
    relative_l2_error_samples(cache, &u.sample(cache), &v.sample(cache))
}

/// Relative H(curl) error of `u` against an analytic field and its curl.
pub fn relative_hcurl_error<F, C>(cache: &QuadratureCache, u: &FieldFE, exact: F, exact_curl: C) -> Result<f64, FemError>
where
    F: Fn([f64; 2]) -> [Complex64; 2],
    C: Fn([f64; 2]) -> Complex64,
{
    let vals = u.sample(cache);
    let curls = u.sample_curl(cache);
    let mut err = 0.0;
    let mut norm = 0.0;
    for (p, x) in cache.points.iter().enumerate() {
        let w = cache.weights[p];
        let e = exact(*x);
        let c = exact_curl(*x);
        err += w * ((vals[p][0] - e[0]).norm_sqr() + (vals[p][1] - e[1]).norm_sqr() + (curls[p] - c).norm_sqr());
        norm += w * (e[0].norm_sqr() + e[1].norm_sqr() + c.norm_sqr());
    }
    if norm == 0.0 {
        return Err(FemError::ZeroNorm);
    }
    Ok((err / norm).sqrt())
}
