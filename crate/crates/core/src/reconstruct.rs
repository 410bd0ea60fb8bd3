//! Case classification, source reconstruction and the energy identities.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{
    apply_dirichlet_tangential, assemble_load, assemble_mass, interpolate, interpolate_gradient, relative_l2_error,
    relative_l2_error_samples, FieldFE,
};
use crate::forward::{BoundaryTrace, Problem};
use crate::linsolve::{Factorization, SolveReport};
use crate::medium::{GradientSource, Material, MediumModel, SourceModel};
use crate::mesh::Mesh2D;

const I: Complex64 = Complex64::new(0.0, 1.0);
pub const DEFAULT_RELATIVE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    UniqueI1,
    NonUniqueI2,
    NonUniqueII1,
    UniqueII2,
    NonUniqueII3,
    UniqueII4,
}

impl CaseLabel {
    pub fn is_unique(self) -> bool {
        matches!(self, CaseLabel::UniqueI1 | CaseLabel::UniqueII2 | CaseLabel::UniqueII4)
    }

    pub fn name(self) -> &'static str {
        match self {
            CaseLabel::UniqueI1 => "UniqueI1",
            CaseLabel::NonUniqueI2 => "NonUniqueI2",
            CaseLabel::NonUniqueII1 => "NonUniqueII1",
            CaseLabel::UniqueII2 => "UniqueII2",
            CaseLabel::NonUniqueII3 => "NonUniqueII3",
            CaseLabel::UniqueII4 => "UniqueII4",
        }
    }
}

/// Label plus `a = ω²ε(1 − γ_ε/γ_J)` and `b = ωσ(1 − γ_σ/γ_J)` per material
/// (background first), present only when `γ_J ≠ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: CaseLabel,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub tol: f64,
}

fn same(x: f64, y: f64) -> bool {
    (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1.0)
}

pub fn coefficient_a(medium: &MediumModel, m: Material) -> f64 {
    let g = medium.gammas;
    medium.omega * medium.omega * m.eps_r * (1.0 - g.eps / g.j)
}

pub fn coefficient_b(medium: &MediumModel, m: Material) -> f64 {
    let g = medium.gammas;
    medium.omega * m.sigma * (1.0 - g.sigma / g.j)
}

/// Decision table over the materials present in the medium. `rel_tol` scales
/// the largest `|ω²ε + iωσ|` into the "bounded away from zero" threshold.
pub fn classify_case(medium: &MediumModel, rel_tol: f64) -> Classification {
    let mats = medium.materials();
    let w = medium.omega;
    let scale = mats
        .iter()
        .map(|m| Complex64::new(w * w * m.eps_r, w * m.sigma).norm())
        .fold(0.0, f64::max);
    let tol = rel_tol * scale;
    let g = medium.gammas;
    if g.j == 0.0 {
        let bounded = mats.iter().all(|&m| medium.gamma_kappa(m).norm() >= tol && tol > 0.0);
        let label = if bounded { CaseLabel::UniqueI1 } else { CaseLabel::NonUniqueI2 };
        return Classification { label, a: None, b: None, tol };
    }
    let label = if same(g.eps, g.j) && same(g.sigma, g.j) {
        CaseLabel::NonUniqueII1
    } else if same(g.eps, g.j) {
        if mats.iter().all(|m| w * m.sigma >= tol && tol > 0.0) {
            CaseLabel::UniqueII2
        } else {
            CaseLabel::NonUniqueII3
        }
    } else {
        CaseLabel::UniqueII4
    };
    Classification {
        label,
        a: Some(mats.iter().map(|&m| coefficient_a(medium, m)).collect()),
        b: Some(mats.iter().map(|&m| coefficient_b(medium, m)).collect()),
        tol,
    }
}

/// Errors against the truth, when it is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthErrors {
    /// ‖J_rec − Π J‖ / ‖Π J‖ with Π the edge interpolant.
    pub j: f64,
    /// ‖E_rec − E‖ / ‖E‖.
    pub e: Option<f64>,
    /// Error of the pointwise formula `J = (𝐐 − (ω²εγ_ε + iωσγ_σ)E)/(iωγ_J)`.
    pub j_pointwise: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub e_rec: FieldFE,
    pub j_rec: FieldFE,
    #[serde(skip)]
    pub j_pointwise: Option<Vec<[Complex64; 2]>>,
    /// ‖J_pointwise − J_rec‖ / ‖J_rec‖.
    pub pointwise_discrepancy: Option<f64>,
    pub errors: Option<TruthErrors>,
    pub solves: Vec<SolveReport>,
}

/// Known solution for closed-loop scoring.
#[derive(Debug, Clone)]
pub struct Truth<'a> {
    pub source: &'a SourceModel,
    pub e: Option<&'a FieldFE>,
}

/// Galerkin recovery `iω M J = A E` with `A` the unmodulated impedance operator.
pub fn recover_j_galerkin(problem: &Problem, e: &FieldFE) -> Result<(FieldFE, SolveReport)> {
    let iw = I * problem.medium.omega;
    let rhs: Vec<Complex64> = problem.system().mul_vec(&e.dofs).iter().map(|v| v / iw).collect();
    let (j, report) = Factorization::new(&problem.forms.mass)?.solve(&rhs)?;
    Ok((FieldFE { dofs: j }, report))
}

/// L² projection of point samples into the edge space.
pub fn project_samples(problem: &Problem, samples: &[[Complex64; 2]]) -> Result<(FieldFE, SolveReport)> {
    let rhs = assemble_load(&problem.mesh, &problem.cache, samples)?;
    let (x, report) = Factorization::new(&problem.forms.mass)?.solve(&rhs)?;
    Ok((FieldFE { dofs: x }, report))
}

/// `ω²εγ_ε + iωσγ_σ` at the cache points.
pub fn gamma_kappa_at_points(problem: &Problem) -> Vec<Complex64> {
    let w = problem.medium.omega;
    let g = problem.medium.gammas;
    problem
        .coeffs
        .eps
        .iter()
        .zip(&problem.coeffs.sigma)
        .map(|(&e, &s)| Complex64::new(w * w * e * g.eps, w * s * g.sigma))
        .collect()
}

fn require(problem: &Problem, allowed: &[CaseLabel], rel_tol: f64) -> Result<Classification> {
    let c = classify_case(&problem.medium, rel_tol);
    if !allowed.contains(&c.label) {
        return Err(Error::Case(format!(
            "reconstruction requires {}, but the medium is classified as {}",
            allowed.iter().map(|l| l.name()).collect::<Vec<_>>().join(" or "),
            c.label.name()
        )));
    }
    Ok(c)
}

fn score(problem: &Problem, result: &mut ReconstructionResult, truth: Option<&Truth>) -> Result<()> {
    let Some(truth) = truth else {
        return Ok(());
    };
    let j_true = interpolate_source(&problem.mesh, truth.source);
    let j = relative_l2_error(&problem.cache, &result.j_rec, &j_true)?;
    let e = truth
        .e
        .map(|e| relative_l2_error(&problem.cache, &result.e_rec, e))
        .transpose()?;
    let j_pointwise = match &result.j_pointwise {
        Some(s) => Some(relative_l2_error_samples(&problem.cache, s, &j_true.sample(&problem.cache))?),
        None => None,
    };
    result.errors = Some(TruthErrors { j, e, j_pointwise });
    Ok(())
}

/// Edge interpolant of the smooth part of a source.
pub fn interpolate_source(mesh: &Mesh2D, source: &SourceModel) -> FieldFE {
    interpolate(mesh, |x| source.eval_bumps(x), 4)
}

/// Subcase I.1: `E = 𝐐/(ω²εγ_ε + iωσγ_σ)` pointwise, L² projection, then
/// Galerkin recovery of `J`.
pub fn reconstruct_i1(
    problem: &Problem,
    qvec: &[[Complex64; 2]],
    rel_tol: f64,
    truth: Option<&Truth>,
) -> Result<ReconstructionResult> {
    let c = require(problem, &[CaseLabel::UniqueI1], rel_tol)?;
    let kg = gamma_kappa_at_points(problem);
    let mut samples = Vec::with_capacity(qvec.len());
    for (p, (q, k)) in qvec.iter().zip(&kg).enumerate() {
        if k.norm() < c.tol {
            let x = problem.cache.points[p];
            return Err(Error::Case(format!(
                "coefficient ω²εγ_ε + iωσγ_σ vanishes at ({:.4}, {:.4})",
                x[0], x[1]
            )));
        }
        samples.push([q[0] / k, q[1] / k]);
    }
    let (e_rec, r1) = project_samples(problem, &samples)?;
    let (j_rec, r2) = recover_j_galerkin(problem, &e_rec)?;
    let mut result = ReconstructionResult {
        e_rec,
        j_rec,
        j_pointwise: None,
        pointwise_discrepancy: None,
        errors: None,
        solves: vec![r1, r2],
    };
    score(problem, &mut result, truth)?;
    Ok(result)
}

/// Boundary condition used by the subcase II.4 solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Tangential Dirichlet data from the measured trace.
    #[default]
    Dirichlet,
    /// Impedance condition with zero data.
    Impedance,
}

/// `(a + ib)` at the cache points.
pub fn ab_at_points(problem: &Problem) -> Vec<Complex64> {
    let w = problem.medium.omega;
    let g = problem.medium.gammas;
    problem
        .coeffs
        .eps
        .iter()
        .zip(&problem.coeffs.sigma)
        .map(|(&e, &s)| Complex64::new(w * w * e * (1.0 - g.eps / g.j), w * s * (1.0 - g.sigma / g.j)))
        .collect()
}

/// Subcases II.2 and II.4: solve `curl curl E − (a + ib)E = 𝐐/γ_J` with the
/// measured tangential trace (or the impedance condition), then recover `J`.
pub fn reconstruct_ii4(
    problem: &Problem,
    qvec: &[[Complex64; 2]],
    trace: &BoundaryTrace,
    mode: BoundaryMode,
    rel_tol: f64,
    truth: Option<&Truth>,
) -> Result<ReconstructionResult> {
    require(problem, &[CaseLabel::UniqueII4, CaseLabel::UniqueII2], rel_tol)?;
    let w = problem.medium.omega;
    let gj = problem.medium.gammas.j;
    let ab = ab_at_points(problem);
    let mut a = problem.forms.curl_curl.clone();
    a.axpy(Complex64::new(-1.0, 0.0), &assemble_mass(&problem.cache, a.pattern(), &ab)?);
    let load: Vec<[Complex64; 2]> = qvec.iter().map(|q| [q[0] / gj, q[1] / gj]).collect();
    let rhs = assemble_load(&problem.mesh, &problem.cache, &load)?;

    let (e_dofs, r1) = match mode {
        BoundaryMode::Dirichlet => {
            let sys = apply_dirichlet_tangential(&problem.mesh, &a, &rhs, &trace.circulation)?;
            let (x, r) = Factorization::new(&sys.matrix)?.solve(&sys.rhs)?;
            (sys.expand(&x), r)
        }
        BoundaryMode::Impedance => {
            a.axpy(Complex64::new(0.0, -w), &problem.forms.boundary);
            Factorization::new(&a)?.solve(&rhs)?
        }
    };
    let e_rec = FieldFE { dofs: e_dofs };
    let (j_rec, r2) = recover_j_galerkin(problem, &e_rec)?;

    let kg = gamma_kappa_at_points(problem);
    let es = e_rec.sample(&problem.cache);
    let denom = I * w * gj;
    let j_pointwise: Vec<[Complex64; 2]> = (0..qvec.len())
        .map(|p| {
            [
                (qvec[p][0] - kg[p] * es[p][0]) / denom,
                (qvec[p][1] - kg[p] * es[p][1]) / denom,
            ]
        })
        .collect();
    let discrepancy = relative_l2_error_samples(&problem.cache, &j_pointwise, &j_rec.sample(&problem.cache)).ok();
    let mut result = ReconstructionResult {
        e_rec,
        j_rec,
        j_pointwise: Some(j_pointwise),
        pointwise_discrepancy: discrepancy,
        errors: None,
        solves: vec![r1, r2],
    };
    score(problem, &mut result, truth)?;
    Ok(result)
}

/// Both sides of the real and imaginary energy identities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyResidual {
    pub real_lhs: f64,
    pub real_rhs: f64,
    pub imag_lhs: f64,
    pub imag_rhs: f64,
    pub real: f64,
    pub imag: f64,
}

fn normalized(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Checks
/// `∫ μ⁻¹|curl u|² − a|u|² = Re ∫ (𝐐 − 𝐐̃)·ū/γ_J` and
/// `∫ b|u|² + ∮ ωλ|g − g̃|² = −Im ∫ (𝐐 − 𝐐̃)·ū/γ_J`.
pub fn energy_identity_residual(
    problem: &Problem,
    u: &FieldFE,
    dq: &[[Complex64; 2]],
    dg: &BoundaryTrace,
) -> Result<EnergyResidual> {
    let gj = problem.medium.gammas.j;
    if gj == 0.0 {
        return Err(Error::Case("energy identities require γ_J ≠ 0".into()));
    }
    let cache = &problem.cache;
    let us = u.sample(cache);
    let curls = u.sample_curl(cache);
    let ab = ab_at_points(problem);
    let mut curl2 = 0.0;
    let mut a_u2 = 0.0;
    let mut b_u2 = 0.0;
    let mut cross = Complex64::new(0.0, 0.0);
    for p in 0..cache.n_points() {
        let w = cache.weights[p];
        let u2 = us[p][0].norm_sqr() + us[p][1].norm_sqr();
        curl2 += w * problem.coeffs.inv_mu[p] * curls[p].norm_sqr();
        a_u2 += w * ab[p].re * u2;
        b_u2 += w * ab[p].im * u2;
        cross += (dq[p][0] * us[p][0].conj() + dq[p][1] * us[p][1].conj()) * (w / gj);
    }
    let g2: Vec<f64> = dg.g.iter().map(|g| g.norm_sqr()).collect();
    let boundary = problem.medium.omega * problem.medium.lambda * problem.bq.integrate(&g2);
    let (real_lhs, real_rhs) = (curl2 - a_u2, cross.re);
    let (imag_lhs, imag_rhs) = (b_u2 + boundary, -cross.im);
    Ok(EnergyResidual {
        real_lhs,
        real_rhs,
        imag_lhs,
        imag_rhs,
        real: normalized(real_lhs, real_rhs),
        imag: normalized(imag_lhs, imag_rhs),
    })
}

/// Nodal P1 interpolant of the bump `(1 − (r/R)²)²`, zero on boundary vertices.
pub fn bump_nodal(mesh: &Mesh2D, center: [f64; 2], radius: f64, margin: f64) -> Result<Vec<f64>> {
    if !(radius > 0.0) {
        return Err(Error::Config("bump radius must be positive".into()));
    }
    let reach = center[0].hypot(center[1]) + radius;
    let limit = mesh.outer_radius() - margin;
    if reach > limit {
        return Err(Error::Config(format!(
            "bump support reaches radius {reach:.4}, beyond the admissible {limit:.4}"
        )));
    }
    let on_boundary = mesh.is_boundary_vertex();
    Ok(mesh
        .vertices()
        .iter()
        .zip(on_boundary)
        .map(|(v, b)| {
            let r2 = ((v[0] - center[0]).powi(2) + (v[1] - center[1]).powi(2)) / (radius * radius);
            if b || r2 >= 1.0 {
                0.0
            } else {
                (1.0 - r2).powi(2)
            }
        })
        .collect())
}

/// Adds `J_φ = (iωε − σ)∇φ_h` to `source`, with `φ_h` the nodal bump.
/// Returns the augmented source and the gradient field `∇φ_h`.
pub fn nonradiating_source(
    mesh: &Mesh2D,
    source: &SourceModel,
    center: [f64; 2],
    radius: f64,
    amplitude: f64,
) -> Result<(SourceModel, FieldFE)> {
    let nodal: Vec<f64> = bump_nodal(mesh, center, radius, source.margin)?
        .into_iter()
        .map(|v| v * amplitude)
        .collect();
    let grad = interpolate_gradient(mesh, &nodal.iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>());
    let mut out = source.clone();
    out.gradient_terms.push(GradientSource { nodal });
    Ok((out, grad))
}
