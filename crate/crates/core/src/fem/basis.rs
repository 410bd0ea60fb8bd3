//! Whitney edge basis on a single triangle and the per-mesh quadrature cache.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::mesh::{Mesh2D, LOCAL_EDGES};
use crate::quadrature::TriangleRule;

/// Values of the three local edge functions at a barycentric point.
///
/// Local edge `k` joins local vertices `LOCAL_EDGES[k] = (a, b)` and its
/// function is `λ_a ∇λ_b − λ_b ∇λ_a` with constant curl `2 ∇λ_a × ∇λ_b`.
/// No global orientation sign is applied here.
pub fn ref_basis_eval(grads: &[[f64; 2]; 3], bary: [f64; 3]) -> ([[f64; 2]; 3], [f64; 3]) {
    let mut values = [[0.0; 2]; 3];
    let mut curls = [0.0; 3];
    for (k, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
        let (ga, gb) = (grads[a], grads[b]);
        values[k] = [
            bary[a] * gb[0] - bary[b] * ga[0],
            bary[a] * gb[1] - bary[b] * ga[1],
        ];
        curls[k] = 2.0 * (ga[0] * gb[1] - ga[1] * gb[0]);
    }
    (values, curls)
}

/// Index of a quadrature point: `triangle * points_per_triangle + local`.
pub type PointId = usize;

/// Interior quadrature points of every triangle with the globally signed
/// basis values and curls evaluated there.
#[derive(Debug, Clone)]
pub struct QuadratureCache {
    rule: TriangleRule,
    /// Physical coordinates, flattened by triangle.
    pub points: Vec<[f64; 2]>,
    /// Physical weights; per triangle they sum to its area.
    pub weights: Vec<f64>,
    /// Signed basis values of the three local edges at each point.
    pub basis: Vec<[[f64; 2]; 3]>,
    /// Signed constant curls of the three local edges, per triangle.
    pub curls: Vec<[f64; 3]>,
    /// Global edge index of each local edge, per triangle.
    pub edges: Vec<[usize; 3]>,
}

impl QuadratureCache {
    pub fn new(mesh: &Mesh2D, degree: usize) -> Option<Self> {
        let rule = TriangleRule::with_degree(degree)?;
        let nq = rule.len();
        let per_triangle: Vec<_> = (0..mesh.n_triangles())
            .into_par_iter()
            .map(|t| {
                let grads = mesh.barycentric_gradients(t);
                let area = mesh.triangle_area(t);
                let te = mesh.triangle_edges()[t];
                let mut pts = Vec::with_capacity(nq);
                let mut wts = Vec::with_capacity(nq);
                let mut vals = Vec::with_capacity(nq);
                let mut curl = [0.0; 3];
                for (bary, w) in rule.points.iter().zip(&rule.weights) {
                    let (v, c) = ref_basis_eval(&grads, *bary);
                    let mut signed = [[0.0; 2]; 3];
                    for k in 0..3 {
                        let s = te[k].1;
                        signed[k] = [s * v[k][0], s * v[k][1]];
                        curl[k] = s * c[k];
                    }
                    pts.push(mesh.point_in_triangle(t, *bary));
                    wts.push(w * area);
                    vals.push(signed);
                }
                (pts, wts, vals, curl, [te[0].0, te[1].0, te[2].0])
            })
            .collect();

        let nt = mesh.n_triangles();
        let mut cache = QuadratureCache {
            rule,
            points: Vec::with_capacity(nt * nq),
            weights: Vec::with_capacity(nt * nq),
            basis: Vec::with_capacity(nt * nq),
            curls: Vec::with_capacity(nt),
            edges: Vec::with_capacity(nt),
        };
        for (pts, wts, vals, curl, edges) in per_triangle {
            cache.points.extend(pts);
            cache.weights.extend(wts);
            cache.basis.extend(vals);
            cache.curls.push(curl);
            cache.edges.push(edges);
        }
        Some(cache)
    }

    /// Default cache: the 6-point degree-4 rule.
    pub fn default_for(mesh: &Mesh2D) -> Self {
        Self::new(mesh, 4).expect("degree 4 rule exists")
    }

    pub fn points_per_triangle(&self) -> usize {
        self.rule.len()
    }

    pub fn degree(&self) -> usize {
        self.rule.degree
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.curls.len()
    }

    pub fn triangle_of(&self, p: PointId) -> usize {
        p / self.rule.len()
    }

    /// Point ids belonging to triangle `t`.
    pub fn triangle_points(&self, t: usize) -> std::ops::Range<PointId> {
        let nq = self.rule.len();
        t * nq..(t + 1) * nq
    }

    /// Barycentric coordinates of the rule's points.
    pub fn reference_points(&self) -> &[[f64; 3]] {
        &self.rule.points
    }

    /// ∫ f dx from samples at the cache points.
    pub fn integrate(&self, samples: &[Complex64]) -> Complex64 {
        samples.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn integrate_real(&self, samples: &[f64]) -> f64 {
        samples.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}
