use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use super::basis::QuadratureCache;
use super::sparse::{SparseMatrix, SparsityPattern};
use super::FemError;
use crate::mesh::{BoundaryQuadrature, Mesh2D};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Material coefficients sampled at the cache points.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCoefficients {
    pub eps: Vec<f64>,
    pub sigma: Vec<f64>,
    pub inv_mu: Vec<f64>,
}

/// Assembled bilinear forms of the weak formulation, all on one pattern.
#[derive(Debug, Clone)]
pub struct Forms {
    /// ∫ μ⁻¹ curl φ_a curl φ_b
    pub curl_curl: SparseMatrix,
    /// ∫ ε φ_a·φ_b
    pub mass_eps: SparseMatrix,
    /// ∫ σ φ_a·φ_b
    pub mass_sigma: SparseMatrix,
    /// ∫ φ_a·φ_b
    pub mass: SparseMatrix,
    /// ∮ λ (φ_a·t)(φ_b·t)
    pub boundary: SparseMatrix,
}

impl Forms {
    /// `S − ω²M_ε − iωM_σ − iωB_λ`.
    pub fn impedance_system(&self, omega: f64) -> SparseMatrix {
        let mut a = self.curl_curl.clone();
        a.axpy(Complex64::new(-omega * omega, 0.0), &self.mass_eps);
        a.axpy(Complex64::new(0.0, -omega), &self.mass_sigma);
        a.axpy(Complex64::new(0.0, -omega), &self.boundary);
        a
    }
}

pub fn assemble_forms(
    mesh: &Mesh2D,
    cache: &QuadratureCache,
    coeffs: &PointCoefficients,
    lambda: f64,
) -> Result<Forms, FemError> {
    let pattern = Arc::new(SparsityPattern::for_edges(mesh));
    let inv_mu: Vec<Complex64> = coeffs.inv_mu.iter().map(|&v| v.into()).collect();
    let eps: Vec<Complex64> = coeffs.eps.iter().map(|&v| v.into()).collect();
    let sigma: Vec<Complex64> = coeffs.sigma.iter().map(|&v| v.into()).collect();
    Ok(Forms {
        curl_curl: assemble_curl_curl(cache, &pattern, &inv_mu)?,
        mass_eps: assemble_mass(cache, &pattern, &eps)?,
        mass_sigma: assemble_mass(cache, &pattern, &sigma)?,
        mass: assemble_mass(cache, &pattern, &vec![Complex64::new(1.0, 0.0); cache.n_points()])?,
        boundary: assemble_boundary_mass(mesh, &pattern, lambda)?,
    })
}

fn check_finite(cache: &QuadratureCache, coef: &[Complex64]) -> Result<(), FemError> {
    assert_eq!(coef.len(), cache.n_points(), "coefficient samples must match the cache");
    match coef.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        Some(p) => Err(FemError::NonFiniteCoefficient { element: cache.triangle_of(p) }),
        None => Ok(()),
    }
}

fn scatter(pattern: &Arc<SparsityPattern>, cache: &QuadratureCache, locals: &[[[Complex64; 3]; 3]]) -> SparseMatrix {
    let mut m = SparseMatrix::zeros(pattern.clone());
    for (t, local) in locals.iter().enumerate() {
        let ids = cache.edges[t];
        for i in 0..3 {
            for j in 0..3 {
                m.add(ids[i], ids[j], local[i][j]);
            }
        }
    }
    m
}

/// `∫ c φ_a·φ_b` for a complex coefficient sampled at the cache points.
pub fn assemble_mass(
    cache: &QuadratureCache,
    pattern: &Arc<SparsityPattern>,
    coef: &[Complex64],
) -> Result<SparseMatrix, FemError> {
    check_finite(cache, coef)?;
    let locals: Vec<[[Complex64; 3]; 3]> = (0..cache.n_triangles())
        .into_par_iter()
        .map(|t| {
            let mut local = [[ZERO; 3]; 3];
            for p in cache.triangle_points(t) {
                let w = coef[p] * cache.weights[p];
                let b = &cache.basis[p];
                for i in 0..3 {
                    for j in 0..3 {
                        local[i][j] += w * (b[i][0] * b[j][0] + b[i][1] * b[j][1]);
                    }
                }
            }
            local
        })
        .collect();
    Ok(scatter(pattern, cache, &locals))
}

/// `∫ c curl φ_a curl φ_b` for a coefficient sampled at the cache points.
pub fn assemble_curl_curl(
    cache: &QuadratureCache,
    pattern: &Arc<SparsityPattern>,
    coef: &[Complex64],
) -> Result<SparseMatrix, FemError> {
    check_finite(cache, coef)?;
    let locals: Vec<[[Complex64; 3]; 3]> = (0..cache.n_triangles())
        .into_par_iter()
        .map(|t| {
            let integral: Complex64 = cache.triangle_points(t).map(|p| coef[p] * cache.weights[p]).sum();
            let c = cache.curls[t];
            let mut local = [[ZERO; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    local[i][j] = integral * (c[i] * c[j]);
                }
            }
            local
        })
        .collect();
    Ok(scatter(pattern, cache, &locals))
}

/// `∮ λ (φ_a·t)(φ_b·t)`. Only the basis function of a boundary edge has a
/// tangential trace on it, equal to ±1/length, so the form is diagonal.
pub fn assemble_boundary_mass(
    mesh: &Mesh2D,
    pattern: &Arc<SparsityPattern>,
    lambda: f64,
) -> Result<SparseMatrix, FemError> {
    if !lambda.is_finite() {
        return Err(FemError::NonFiniteCoefficient {
            element: mesh.boundary_edges().first().map_or(0, |b| b.triangle),
        });
    }
    let mut m = SparseMatrix::zeros(pattern.clone());
    for b in mesh.boundary_edges() {
        m.add(b.edge, b.edge, Complex64::new(lambda / b.length, 0.0));
    }
    Ok(m)
}

/// `rhs_a = ∫ f·φ_a` for a vector field sampled at the cache points.
pub fn assemble_load(
    mesh: &Mesh2D,
    cache: &QuadratureCache,
    f: &[[Complex64; 2]],
) -> Result<Vec<Complex64>, FemError> {
    assert_eq!(f.len(), cache.n_points(), "load samples must match the cache");
    if let Some(p) = f
        .iter()
        .position(|v| !v.iter().all(|c| c.re.is_finite() && c.im.is_finite()))
    {
        return Err(FemError::NonFiniteSample { element: cache.triangle_of(p) });
    }
    let locals: Vec<[Complex64; 3]> = (0..cache.n_triangles())
        .into_par_iter()
        .map(|t| {
            let mut local = [ZERO; 3];
            for p in cache.triangle_points(t) {
                let b = &cache.basis[p];
                let w = cache.weights[p];
                for (i, l) in local.iter_mut().enumerate() {
                    *l += (f[p][0] * b[i][0] + f[p][1] * b[i][1]) * w;
                }
            }
            local
        })
        .collect();
    let mut rhs = vec![ZERO; mesh.n_edges()];
    for (t, local) in locals.iter().enumerate() {
        for (i, &e) in cache.edges[t].iter().enumerate() {
            rhs[e] += local[i];
        }
    }
    Ok(rhs)
}

/// `rhs_a = ∮ 𝔤 (φ_a·t)` for a scalar sampled at the boundary quadrature points.
pub fn assemble_boundary_load(
    mesh: &Mesh2D,
    bq: &BoundaryQuadrature,
    g: &[Complex64],
) -> Result<Vec<Complex64>, FemError> {
    assert_eq!(g.len(), bq.len(), "boundary samples must match the boundary quadrature");
    let mut rhs = vec![ZERO; mesh.n_edges()];
    for (i, b) in mesh.boundary_edges().iter().enumerate() {
        let range = i * bq.order..(i + 1) * bq.order;
        let mut integral = ZERO;
        for (pt, v) in bq.points[range.clone()].iter().zip(&g[range]) {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(FemError::NonFiniteSample { element: b.triangle });
            }
            integral += v * pt.weight;
        }
        rhs[b.edge] += integral * (b.orientation() / b.length);
    }
    Ok(rhs)
}

/// Linear system with tangential Dirichlet data eliminated.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<Complex64>,
    free: Vec<usize>,
    fixed: Vec<(usize, Complex64)>,
    n: usize,
}

impl ConstrainedSystem {
    pub fn free_dofs(&self) -> &[usize] {
        &self.free
    }

    pub fn n_constraints(&self) -> usize {
        self.fixed.len()
    }

    /// Full coefficient vector from the solution on the free DOFs.
    pub fn expand(&self, x_free: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x_free.len(), self.free.len());
        let mut x = vec![ZERO; self.n];
        for (&g, &v) in self.free.iter().zip(x_free) {
            x[g] = v;
        }
        for &(g, v) in &self.fixed {
            x[g] = v;
        }
        x
    }
}

/// Fixes every boundary DOF from its circulation `∫_e u·t ds` (counterclockwise
/// tangent, one value per boundary segment in loop order) and moves the known
/// columns to the right-hand side.
pub fn apply_dirichlet_tangential(
    mesh: &Mesh2D,
    a: &SparseMatrix,
    rhs: &[Complex64],
    circulations: &[Complex64],
) -> Result<ConstrainedSystem, FemError> {
    let nb = mesh.boundary_edges().len();
    if circulations.len() != nb {
        return Err(FemError::BoundaryData(format!(
            "expected {nb} boundary circulations, got {}",
            circulations.len()
        )));
    }
    if let Some(i) = circulations.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(FemError::BoundaryData(format!("boundary value {i} is not finite")));
    }
    let n = a.dim();
    let mut value = vec![None; n];
    let mut fixed = Vec::with_capacity(nb);
    for (b, &g) in mesh.boundary_edges().iter().zip(circulations) {
        let dof = g * b.orientation();
        value[b.edge] = Some(dof);
        fixed.push((b.edge, dof));
    }
    fixed.sort_by_key(|&(e, _)| e);
    let free: Vec<usize> = (0..n).filter(|&e| value[e].is_none()).collect();

    let mut lifted = vec![ZERO; n];
    for &(e, v) in &fixed {
        lifted[e] = v;
    }
    let a_lift = a.mul_vec(&lifted);
    let reduced_rhs = free.iter().map(|&e| rhs[e] - a_lift[e]).collect();
    Ok(ConstrainedSystem {
        matrix: a.submatrix(&free),
        rhs: reduced_rhs,
        free,
        fixed,
        n,
    })
}
