//! Impedance boundary-value problems: source, modulated and auxiliary solves,
//! plus boundary trace extraction.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fem::{
    assemble_boundary_load, assemble_load, assemble_mass, FieldFE, Forms, PointCoefficients, QuadratureCache,
    SparseMatrix,
};
use crate::linsolve::{Factorization, SolveReport};
use crate::medium::{AcousticWave, MediumModel, SourceModel};
use crate::mesh::{boundary_quadrature, BoundaryQuadrature, Mesh2D};

pub const BOUNDARY_ORDER: usize = 3;
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Mesh, quadrature, coefficients and assembled forms of one medium.
pub struct Problem {
    pub mesh: Arc<Mesh2D>,
    pub cache: QuadratureCache,
    pub bq: BoundaryQuadrature,
    pub medium: MediumModel,
    pub coeffs: PointCoefficients,
    pub forms: Forms,
    system: SparseMatrix,
    factor: OnceLock<Factorization>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("edges", &self.mesh.n_edges())
            .field("points", &self.cache.n_points())
            .finish()
    }
}

impl Problem {
    pub fn new(mesh: Arc<Mesh2D>, medium: MediumModel) -> Result<Self> {
        medium.validate()?;
        let cache = QuadratureCache::default_for(&mesh);
        let bq = boundary_quadrature(&mesh, BOUNDARY_ORDER)?;
        let coeffs = medium.coefficients(&cache);
        let forms = crate::fem::assemble_forms(&mesh, &cache, &coeffs, medium.lambda)?;
        let system = forms.impedance_system(medium.omega);
        Ok(Problem {
            mesh,
            cache,
            bq,
            medium,
            coeffs,
            forms,
            system,
            factor: OnceLock::new(),
        })
    }

    /// The unmodulated impedance operator `S − ω²M_ε − iωM_σ − iωB_λ`.
    pub fn system(&self) -> &SparseMatrix {
        &self.system
    }

    pub fn factorization(&self) -> Result<&Factorization> {
        if let Some(f) = self.factor.get() {
            return Ok(f);
        }
        let f = Factorization::new(&self.system)?;
        Ok(self.factor.get_or_init(|| f))
    }

    /// `ω²ε + iωσ` at the cache points.
    pub fn kappa(&self) -> Vec<Complex64> {
        let w = self.medium.omega;
        self.coeffs
            .eps
            .iter()
            .zip(&self.coeffs.sigma)
            .map(|(&e, &s)| Complex64::new(w * w * e, w * s))
            .collect()
    }

    /// Impedance system with modulated coefficients.
    pub fn modulated_system(&self, wave: &AcousticWave) -> Result<SparseMatrix> {
        let c = self.medium.modulated_coefficients(&self.cache, wave)?;
        let w = self.medium.omega;
        let kappa: Vec<Complex64> = c
            .eps
            .iter()
            .zip(&c.sigma)
            .map(|(&e, &s)| Complex64::new(w * w * e, w * s))
            .collect();
        let mut a = self.forms.curl_curl.clone();
        a.axpy(Complex64::new(-1.0, 0.0), &assemble_mass(&self.cache, a.pattern(), &kappa)?);
        a.axpy(Complex64::new(0.0, -w), &self.forms.boundary);
        Ok(a)
    }

    /// Right-hand side `iω(J, φ) + iω⟨𝔤, φ_t⟩`.
    pub fn rhs(&self, j: Option<&[[Complex64; 2]]>, g: Option<&[Complex64]>) -> Result<Vec<Complex64>> {
        let iw = I * self.medium.omega;
        let mut rhs = vec![Complex64::new(0.0, 0.0); self.mesh.n_edges()];
        if let Some(j) = j {
            for (r, l) in rhs.iter_mut().zip(assemble_load(&self.mesh, &self.cache, j)?) {
                *r += iw * l;
            }
        }
        if let Some(g) = g {
            for (r, l) in rhs.iter_mut().zip(assemble_boundary_load(&self.mesh, &self.bq, g)?) {
                *r += iw * l;
            }
        }
        Ok(rhs)
    }

    /// Source samples at the cache points, modulated by `1 + δγ_J cos(k·x + φ)`.
    pub fn source_samples(&self, source: &SourceModel, wave: Option<&AcousticWave>) -> Vec<[Complex64; 2]> {
        let mut j = source.sample(&self.mesh, &self.cache, &self.medium);
        if let Some(w) = wave {
            for (v, x) in j.iter_mut().zip(&self.cache.points) {
                let f = w.factor(*x, self.medium.gammas.j);
                v[0] *= f;
                v[1] *= f;
            }
        }
        j
    }

    /// Solves the impedance problem
    /// `(curl E, curl φ) − ((ω²ε + iωσ)E, φ) − iω⟨λE_t, φ_t⟩ = iω(J, φ) + iω⟨𝔤, φ_t⟩`
    /// with coefficients and source modulated when `wave` is given.
    pub fn solve_impedance(
        &self,
        source: Option<&SourceModel>,
        g: Option<&[Complex64]>,
        wave: Option<&AcousticWave>,
    ) -> Result<(FieldFE, SolveReport)> {
        let j = source.map(|s| self.source_samples(s, wave));
        let rhs = self.rhs(j.as_deref(), g)?;
        let (x, report) = match wave {
            None => self.factorization()?.solve(&rhs)?,
            Some(w) => Factorization::new(&self.modulated_system(w)?)?.solve(&rhs)?,
        };
        Ok((FieldFE { dofs: x }, report))
    }

    /// Unmodulated solve with a volume load `(f, φ)` given directly.
    pub fn solve_with_load(&self, f: &[[Complex64; 2]], g: Option<&[Complex64]>) -> Result<(FieldFE, SolveReport)> {
        let mut rhs = assemble_load(&self.mesh, &self.cache, f)?;
        if g.is_some() {
            for (r, l) in rhs.iter_mut().zip(self.rhs(None, g)?) {
                *r += l;
            }
        }
        let (x, report) = self.factorization()?.solve(&rhs)?;
        Ok((FieldFE { dofs: x }, report))
    }

    /// Impedance data `𝔤 = curl u/(iω) − λ u·t` of an analytic field at the
    /// boundary quadrature points.
    pub fn impedance_data<F, C>(&self, field: F, curl: C) -> Vec<Complex64>
    where
        F: Fn([f64; 2]) -> [Complex64; 2],
        C: Fn([f64; 2]) -> Complex64,
    {
        let iw = I * self.medium.omega;
        self.bq
            .points
            .iter()
            .map(|p| {
                let u = field(p.point);
                let ut = u[0] * p.tangent[0] + u[1] * p.tangent[1];
                curl(p.point) / iw - ut * self.medium.lambda
            })
            .collect()
    }

    /// Auxiliary source-free solve driven by the plane wave `j ∈ {1, 2}` of
    /// the background medium.
    pub fn auxiliary_plane_wave(&self, j: usize) -> Result<(FieldFE, SolveReport)> {
        let k = self.medium.background_wave_number();
        let g = self.impedance_data(|x| plane_wave(j, k, x).0, |x| plane_wave(j, k, x).1);
        self.solve_impedance(None, Some(&g), None)
    }

    pub fn extract_traces(&self, e: &FieldFE) -> BoundaryTrace {
        extract_traces(&self.mesh, &self.bq, e, &self.medium)
    }
}

/// `E₁ = (e^{−iky}, 0)` or `E₂ = (0, e^{−ikx})` with its scalar curl.
pub fn plane_wave(j: usize, k: Complex64, x: [f64; 2]) -> ([Complex64; 2], Complex64) {
    let zero = Complex64::new(0.0, 0.0);
    match j {
        1 => {
            let e = (-I * k * x[1]).exp();
            ([e, zero], I * k * e)
        }
        2 => {
            let e = (-I * k * x[0]).exp();
            ([zero, e], -I * k * e)
        }
        _ => panic!("auxiliary index must be 1 or 2, got {j}"),
    }
}

/// Tangential traces on the boundary quadrature points.
///
/// `g = E·t` and `h = (n×H)·t = −curl E/(iωμ_r)`, so the impedance condition
/// reads `h = −λg`. `circulation` holds `∫_e E·t ds` per boundary segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTrace {
    pub arclength: Vec<f64>,
    pub points: Vec<[f64; 2]>,
    pub g: Vec<Complex64>,
    pub h: Vec<Complex64>,
    pub circulation: Vec<Complex64>,
}

impl BoundaryTrace {
    /// max |h + λg| / max |g|.
    pub fn impedance_mismatch(&self, lambda: f64) -> f64 {
        let num = self.h.iter().zip(&self.g).map(|(h, g)| (h + g * lambda).norm()).fold(0.0, f64::max);
        let den = self.g.iter().map(|g| g.norm()).fold(0.0, f64::max);
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    pub fn sub(&self, other: &BoundaryTrace) -> BoundaryTrace {
        let d = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        BoundaryTrace {
            arclength: self.arclength.clone(),
            points: self.points.clone(),
            g: d(&self.g, &other.g),
            h: d(&self.h, &other.h),
            circulation: d(&self.circulation, &other.circulation),
        }
    }
}

pub fn extract_traces(mesh: &Mesh2D, bq: &BoundaryQuadrature, e: &FieldFE, medium: &MediumModel) -> BoundaryTrace {
    let iwmu = I * medium.omega * medium.mu_r;
    let curls = triangle_curls(mesh, e);
    let patches = CurlRecovery::new(mesh);
    let mut out = BoundaryTrace {
        arclength: Vec::with_capacity(bq.len()),
        points: Vec::with_capacity(bq.len()),
        g: Vec::with_capacity(bq.len()),
        h: Vec::with_capacity(bq.len()),
        circulation: Vec::with_capacity(mesh.boundary_edges().len()),
    };
    for (i, b) in mesh.boundary_edges().iter().enumerate() {
        // the tangential component of an edge field is constant along its edge
        let circulation = e.dofs[b.edge] * b.orientation();
        let g = circulation / b.length;
        let fit = patches.fit(mesh, &curls, b.triangle);
        for p in bq.segment_points(i) {
            out.arclength.push(p.arclength);
            out.points.push(p.point);
            out.g.push(g);
            out.h.push(-fit.eval(p.point) / iwmu);
        }
        out.circulation.push(circulation);
    }
    out
}

/// Constant curl of `e` in every triangle.
pub fn triangle_curls(mesh: &Mesh2D, e: &FieldFE) -> Vec<Complex64> {
    (0..mesh.n_triangles())
        .map(|t| {
            let grads = mesh.barycentric_gradients(t);
            let (_, c) = crate::fem::ref_basis_eval(&grads, [1.0 / 3.0; 3]);
            mesh.triangle_edges()[t]
                .iter()
                .zip(c)
                .map(|(&(edge, sign), c)| e.dofs[edge] * (sign * c))
                .sum()
        })
        .collect()
}

/// Linear least-squares fit of the piecewise-constant curl over the vertex
/// patch of a triangle, used to evaluate the curl on the boundary.
struct CurlRecovery {
    vertex_triangles: Vec<Vec<usize>>,
}

struct LinearFit {
    origin: [f64; 2],
    coef: [Complex64; 3],
}

impl LinearFit {
    fn eval(&self, x: [f64; 2]) -> Complex64 {
        self.coef[0] + self.coef[1] * (x[0] - self.origin[0]) + self.coef[2] * (x[1] - self.origin[1])
    }
}

impl CurlRecovery {
    fn new(mesh: &Mesh2D) -> Self {
        let mut vertex_triangles = vec![Vec::new(); mesh.n_vertices()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for &v in tri {
                vertex_triangles[v].push(t);
            }
        }
        CurlRecovery { vertex_triangles }
    }

    fn fit(&self, mesh: &Mesh2D, curls: &[Complex64], t: usize) -> LinearFit {
        let mut patch: Vec<usize> = mesh.triangles()[t]
            .iter()
            .flat_map(|&v| self.vertex_triangles[v].iter().copied())
            .collect();
        patch.sort_unstable();
        patch.dedup();
        let centroid = |s: usize| mesh.point_in_triangle(s, [1.0 / 3.0; 3]);
        let origin = centroid(t);
        let mut ata = [[0.0; 3]; 3];
        let mut atb = [Complex64::new(0.0, 0.0); 3];
        for &s in &patch {
            let c = centroid(s);
            let row = [1.0, c[0] - origin[0], c[1] - origin[1]];
            for i in 0..3 {
                for j in 0..3 {
                    ata[i][j] += row[i] * row[j];
                }
                atb[i] += curls[s] * row[i];
            }
        }
        match solve3(ata, atb) {
            Some(coef) => LinearFit { origin, coef },
            None => LinearFit { origin, coef: [curls[t], Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)] },
        }
    }
}

fn solve3(a: [[f64; 3]; 3], b: [Complex64; 3]) -> Option<[Complex64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(a);
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    if d.abs() <= 1e-12 * scale.powi(3) {
        return None;
    }
    // Cramer's rule, applied to real and imaginary parts together
    Some(std::array::from_fn(|k| {
        let mut re = a;
        let mut im = a;
        for i in 0..3 {
            re[i][k] = b[i].re;
            im[i][k] = b[i].im;
        }
        Complex64::new(det(re) / d, det(im) / d)
    }))
}
