//! Forward solve, internal data, noise, vectorization, classification,
//! reconstruction and the report, plus the artifacts each stage writes.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FieldFE;
use crate::forward::{BoundaryTrace, Problem};
use crate::internal::{
    add_noise, measured_q, measurement_trace, scalar_q_direct, vectorize_q, Auxiliary, MeasuredQ, Vectorized,
};
use crate::linsolve::SolveReport;
use crate::medium::Gammas;
use crate::mesh::{write_mesh, Mesh2D};
use crate::output::{
    field_rows, internal_rows, sweep_rows, trace_rows, write_rows, CoefficientRow, FieldRow, InternalRow, SweepRow,
    TraceRow,
};
use crate::reconstruct::{
    classify_case, energy_identity_residual, interpolate_source, reconstruct_i1, reconstruct_ii4, CaseLabel,
    Classification, EnergyResidual, ReconstructionResult, TruthErrors, Truth,
};
use crate::scenario::{CaseSelection, InternalMode, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshStats {
    pub level: Option<u32>,
    pub vertices: usize,
    pub triangles: usize,
    pub edges: usize,
    pub boundary_edges: usize,
    pub h_max: f64,
    pub h_min: f64,
    pub quadrature_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub label: CaseLabel,
    pub selection: CaseSelection,
    pub unique: bool,
    pub tol: f64,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalReport {
    pub mode: String,
    pub modulated_solves: usize,
    pub cond_threshold: f64,
    pub flagged: usize,
    pub flagged_fraction: f64,
    pub max_cond: f64,
    pub median_cond: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseReport {
    pub nu: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSolve {
    pub stage: String,
    pub report: SolveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub path: String,
    pub schema: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub name: String,
    pub case: CaseReport,
    pub gammas: Gammas,
    pub omega: f64,
    pub lambda: f64,
    pub mesh: MeshStats,
    pub noise: NoiseReport,
    pub internal: InternalReport,
    pub errors: Option<TruthErrors>,
    pub pointwise_discrepancy: Option<f64>,
    /// Identities for the difference between the noisy and noise-free II.4 reconstructions.
    pub energy: Option<EnergyResidual>,
    pub solver: Vec<StageSolve>,
    pub timings: Vec<Timing>,
    pub artifacts: Vec<Artifact>,
}

impl Report {
    /// Copy with every wall-clock quantity zeroed.
    pub fn without_timings(&self) -> Report {
        let mut r = self.clone();
        r.timings.iter_mut().for_each(|t| t.seconds = 0.0);
        for s in &mut r.solver {
            s.report.factor_seconds = 0.0;
            s.report.solve_seconds = 0.0;
        }
        r
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn mesh_stats(mesh: &Mesh2D, level: Option<u32>, quadrature_points: usize) -> MeshStats {
    MeshStats {
        level,
        vertices: mesh.n_vertices(),
        triangles: mesh.n_triangles(),
        edges: mesh.n_edges(),
        boundary_edges: mesh.boundary_edges().len(),
        h_max: mesh.max_edge_length(),
        h_min: mesh.min_edge_length(),
        quadrature_points,
    }
}

/// Unmodulated forward solution and its boundary data.
pub struct ForwardStage {
    pub problem: Problem,
    pub e: FieldFE,
    pub trace: BoundaryTrace,
    pub solve: SolveReport,
}

pub fn build_problem(cfg: &ScenarioConfig) -> Result<Problem> {
    cfg.validate()?;
    Problem::new(Arc::new(cfg.mesh.build(None)?), cfg.medium.clone())
}

pub fn forward_stage(cfg: &ScenarioConfig) -> Result<ForwardStage> {
    let problem = build_problem(cfg)?;
    let (e, solve) = problem.solve_impedance(Some(&cfg.source), None, None)?;
    let trace = measurement_trace(&problem, &e);
    Ok(ForwardStage { problem, e, trace, solve })
}

/// Scalar and vector internal data (noise applied to the scalars).
pub struct InternalStage {
    pub aux: [Auxiliary; 2],
    pub q: [Vec<Complex64>; 2],
    pub q_clean: [Vec<Complex64>; 2],
    pub measured: Option<MeasuredQ>,
    pub vectorized: Vectorized,
    pub modulated_solves: usize,
}

impl InternalStage {
    pub fn aux_samples(&self, problem: &Problem) -> [Vec<[Complex64; 2]>; 2] {
        [self.aux[0].field.sample(&problem.cache), self.aux[1].field.sample(&problem.cache)]
    }

    /// Vectorization of the noise-free scalars.
    pub fn clean_vectorized(&self, problem: &Problem, cond_threshold: f64) -> Result<Vectorized> {
        let f = self.aux_samples(problem);
        vectorize_q(&problem.cache.points, [&self.q_clean[0], &self.q_clean[1]], [&f[0], &f[1]], cond_threshold)
    }
}

pub fn internal_stage(cfg: &ScenarioConfig, fwd: &ForwardStage, parallel: bool) -> Result<InternalStage> {
    let p = &fwd.problem;
    let aux = [Auxiliary::plane_wave(p, 1)?, Auxiliary::plane_wave(p, 2)?];
    let (q_clean, measured, modulated_solves) = match &cfg.internal {
        InternalMode::Direct => (
            [
                scalar_q_direct(p, &fwd.e, &aux[0].field, &cfg.source),
                scalar_q_direct(p, &fwd.e, &aux[1].field, &cfg.source),
            ],
            None,
            0,
        ),
        InternalMode::Measured(sweep) => {
            let m = measured_q(p, &cfg.source, &aux, sweep, parallel)?;
            let n = m.samples.len();
            (m.q.clone(), Some(m), n)
        }
    };
    let mut q = q_clean.clone();
    {
        let [q1, q2] = &mut q;
        add_noise(&mut [q1, q2], cfg.noise.nu, cfg.noise.seed)?;
    }
    let f = [aux[0].field.sample(&p.cache), aux[1].field.sample(&p.cache)];
    let vectorized = vectorize_q(&p.cache.points, [&q[0], &q[1]], [&f[0], &f[1]], cfg.cond_threshold)?;
    Ok(InternalStage { aux, q, q_clean, measured, vectorized, modulated_solves })
}

/// Classifies the medium and picks the procedure.
pub fn select_case(cfg: &ScenarioConfig) -> Result<(Classification, CaseSelection)> {
    let c = classify_case(&cfg.medium, cfg.tol);
    let chosen = match (cfg.case, c.label) {
        (CaseSelection::Auto, CaseLabel::UniqueI1) => CaseSelection::I1,
        (CaseSelection::Auto, CaseLabel::UniqueII4 | CaseLabel::UniqueII2) => CaseSelection::Ii4,
        (CaseSelection::Auto, label) => {
            return Err(Error::Case(format!(
                "the source is not uniquely determined in case {}",
                label.name()
            )))
        }
        (CaseSelection::I1, CaseLabel::UniqueI1) => CaseSelection::I1,
        (CaseSelection::Ii4, CaseLabel::UniqueII4 | CaseLabel::UniqueII2) => CaseSelection::Ii4,
        (sel, label) => {
            return Err(Error::Case(format!(
                "requested procedure {sel:?} does not apply to case {}",
                label.name()
            )))
        }
    };
    Ok((c, chosen))
}

pub struct ReconstructStage {
    pub result: ReconstructionResult,
    pub energy: Option<EnergyResidual>,
}

/// Runs the selected procedure on `qvec`. For II.4 with a noise-free
/// reference, the energy identities are evaluated on the difference.
pub fn reconstruct_stage(
    cfg: &ScenarioConfig,
    problem: &Problem,
    selection: CaseSelection,
    qvec: &[[Complex64; 2]],
    trace: &BoundaryTrace,
    reference: Option<&[[Complex64; 2]]>,
    truth: Option<&Truth>,
) -> Result<ReconstructStage> {
    match selection {
        CaseSelection::I1 => Ok(ReconstructStage { result: reconstruct_i1(problem, qvec, cfg.tol, truth)?, energy: None }),
        CaseSelection::Ii4 | CaseSelection::Auto => {
            let result = reconstruct_ii4(problem, qvec, trace, cfg.boundary_mode, cfg.tol, truth)?;
            let energy = match reference {
                Some(clean) => {
                    let base = reconstruct_ii4(problem, clean, trace, cfg.boundary_mode, cfg.tol, None)?;
                    let u = result.e_rec.sub(&base.e_rec);
                    let dq: Vec<[Complex64; 2]> =
                        qvec.iter().zip(clean).map(|(a, b)| [a[0] - b[0], a[1] - b[1]]).collect();
                    let du = problem.extract_traces(&u);
                    Some(energy_identity_residual(problem, &u, &dq, &du)?)
                }
                None => None,
            };
            Ok(ReconstructStage { result, energy })
        }
    }
}

/// Everything the full pipeline produced.
pub struct PipelineRun {
    pub config: ScenarioConfig,
    pub forward: ForwardStage,
    pub internal: InternalStage,
    pub reconstruction: ReconstructStage,
    pub report: Report,
}

pub fn run_pipeline(cfg: &ScenarioConfig, parallel: bool) -> Result<PipelineRun> {
    let total = Instant::now();
    let mut timings = Vec::new();
    let mut lap = |stage: &str, t: Instant| timings.push(Timing { stage: stage.into(), seconds: t.elapsed().as_secs_f64() });

    cfg.validate()?;
    let (classification, selection) = select_case(cfg)?;

    let t = Instant::now();
    let forward = forward_stage(cfg)?;
    lap("forward", t);

    let t = Instant::now();
    let internal = internal_stage(cfg, &forward, parallel)?;
    lap("internal", t);

    let t = Instant::now();
    let p = &forward.problem;
    let clean = if cfg.noise.nu > 0.0 { Some(internal.clean_vectorized(p, cfg.cond_threshold)?) } else { None };
    let truth = Truth { source: &cfg.source, e: Some(&forward.e) };
    let reconstruction = reconstruct_stage(
        cfg,
        p,
        selection,
        &internal.vectorized.qvec,
        &forward.trace,
        clean.as_ref().map(|v| v.qvec.as_slice()),
        Some(&truth),
    )?;
    lap("reconstruct", t);
    lap("total", total);

    let mut solver = vec![StageSolve { stage: "forward".into(), report: forward.solve.clone() }];
    let rec_stages = match selection {
        CaseSelection::I1 => ["projection", "recovery"],
        _ => ["field", "recovery"],
    };
    for (stage, r) in rec_stages.iter().zip(&reconstruction.result.solves) {
        solver.push(StageSolve { stage: (*stage).into(), report: r.clone() });
    }
    let v = &internal.vectorized;
    let report = Report {
        name: cfg.name.clone(),
        case: CaseReport {
            label: classification.label,
            selection,
            unique: classification.label.is_unique(),
            tol: classification.tol,
            a: classification.a.clone(),
            b: classification.b.clone(),
        },
        gammas: cfg.medium.gammas,
        omega: cfg.medium.omega,
        lambda: cfg.medium.lambda,
        mesh: mesh_stats(&p.mesh, cfg.mesh.level, p.cache.n_points()),
        noise: NoiseReport { nu: cfg.noise.nu, seed: cfg.noise.seed },
        internal: InternalReport {
            mode: match cfg.internal {
                InternalMode::Direct => "direct".into(),
                InternalMode::Measured(_) => "measured".into(),
            },
            modulated_solves: internal.modulated_solves,
            cond_threshold: cfg.cond_threshold,
            flagged: v.flagged,
            flagged_fraction: v.flagged_fraction(),
            max_cond: v.max_cond,
            median_cond: v.median_cond,
        },
        errors: reconstruction.result.errors,
        pointwise_discrepancy: reconstruction.result.pointwise_discrepancy,
        energy: reconstruction.energy,
        solver,
        timings,
        artifacts: Vec::new(),
    };
    Ok(PipelineRun { config: cfg.clone(), forward, internal, reconstruction, report })
}

fn artifact(dir: &Path, name: &str, schema: &str) -> (std::path::PathBuf, Artifact) {
    (dir.join(name), Artifact { name: name.into(), path: name.into(), schema: schema.into() })
}

pub fn coefficient_rows(problem: &Problem) -> Vec<CoefficientRow> {
    problem
        .cache
        .points
        .iter()
        .enumerate()
        .map(|(p, x)| CoefficientRow { x: x[0], y: x[1], eps_r: problem.coeffs.eps[p], sigma: problem.coeffs.sigma[p] })
        .collect()
}

/// Mesh, coefficient map, true source, forward field and traces.
pub fn write_forward_artifacts(cfg: &ScenarioConfig, fwd: &ForwardStage, dir: &Path) -> Result<Vec<Artifact>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let p = &fwd.problem;
    let pts = &p.cache.points;
    let mut out = Vec::new();

    let (path, a) = artifact(dir, "mesh.txt", "mesh");
    write_mesh(&p.mesh, &path)?;
    out.push(a);

    let (path, a) = artifact(dir, "coefficients.csv", "coefficients");
    write_rows(&path, &coefficient_rows(p))?;
    out.push(a);

    let (path, a) = artifact(dir, "j_true.csv", "field");
    write_rows(&path, &field_rows(pts, &p.source_samples(&cfg.source, None)))?;
    out.push(a);

    let (path, a) = artifact(dir, "j_true_interpolant.csv", "field");
    write_rows(&path, &field_rows(pts, &interpolate_source(&p.mesh, &cfg.source).sample(&p.cache)))?;
    out.push(a);

    let (path, a) = artifact(dir, "e_forward.csv", "field");
    write_rows(&path, &field_rows(pts, &fwd.e.sample(&p.cache)))?;
    out.push(a);

    let (path, a) = artifact(dir, "traces.csv", "trace");
    write_rows(&path, &trace_rows(&p.extract_traces(&fwd.e)))?;
    out.push(a);
    Ok(out)
}

pub fn write_internal_artifacts(problem: &Problem, stage: &InternalStage, dir: &Path) -> Result<Vec<Artifact>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    let (path, a) = artifact(dir, "internal.csv", "internal");
    write_rows(&path, &internal_rows(&problem.cache.points, [&stage.q[0], &stage.q[1]], &stage.vectorized))?;
    out.push(a);
    if let Some(m) = &stage.measured {
        for j in 0..2 {
            let (path, a) = artifact(dir, &format!("sweep_j{}.csv", j + 1), "sweep");
            write_rows(&path, &sweep_rows(&m.samples, j))?;
            out.push(a);
        }
    }
    Ok(out)
}

pub fn write_reconstruction_artifacts(
    problem: &Problem,
    result: &ReconstructionResult,
    dir: &Path,
) -> Result<Vec<Artifact>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let pts = &problem.cache.points;
    let mut out = Vec::new();
    let (path, a) = artifact(dir, "e_rec.csv", "field");
    write_rows(&path, &field_rows(pts, &result.e_rec.sample(&problem.cache)))?;
    out.push(a);
    let (path, a) = artifact(dir, "j_rec.csv", "field");
    write_rows(&path, &field_rows(pts, &result.j_rec.sample(&problem.cache)))?;
    out.push(a);
    if let Some(jp) = &result.j_pointwise {
        let (path, a) = artifact(dir, "j_pointwise.csv", "field");
        write_rows(&path, &field_rows(pts, jp))?;
        out.push(a);
    }
    Ok(out)
}

pub fn write_report(report: &Report, dir: &Path) -> Result<()> {
    let path = dir.join("report.json");
    std::fs::write(&path, report.to_json()).map_err(|e| Error::io(&path, e))
}

impl PipelineRun {
    /// Writes every artifact and the report listing them.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        let p = &self.forward.problem;
        let mut artifacts = write_forward_artifacts(&self.config, &self.forward, dir)?;
        artifacts.extend(write_internal_artifacts(p, &self.internal, dir)?);
        artifacts.extend(write_reconstruction_artifacts(p, &self.reconstruction.result, dir)?);
        artifacts.push(Artifact { name: "report.json".into(), path: "report.json".into(), schema: "report".into() });
        self.report.artifacts = artifacts;
        write_report(&self.report, dir)
    }
}

/// Parses an artifact under its declared schema and returns the row count.
pub fn check_artifact(dir: &Path, artifact: &Artifact) -> Result<usize> {
    use crate::output::read_rows;
    let path = dir.join(&artifact.path);
    Ok(match artifact.schema.as_str() {
        "field" => read_rows::<FieldRow>(&path)?.len(),
        "trace" => read_rows::<TraceRow>(&path)?.len(),
        "internal" => read_rows::<InternalRow>(&path)?.len(),
        "sweep" => read_rows::<SweepRow>(&path)?.len(),
        "coefficients" => read_rows::<CoefficientRow>(&path)?.len(),
        "mesh" => crate::mesh::load_mesh(&path)?.n_triangles(),
        "report" => {
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            serde_json::from_str::<Report>(&text)
                .map_err(|e| Error::Json { path: path.display().to_string(), source: e })?;
            1
        }
        other => return Err(Error::Config(format!("unknown artifact schema '{other}'"))),
    })
}

/// Rebuilds a trace from its CSV rows on the problem's boundary quadrature.
pub fn trace_from_rows(problem: &Problem, rows: &[TraceRow]) -> Result<BoundaryTrace> {
    let bq = &problem.bq;
    if rows.len() != bq.len() {
        return Err(Error::Config(format!(
            "trace has {} samples, the boundary quadrature has {}",
            rows.len(),
            bq.len()
        )));
    }
    let g: Vec<Complex64> = rows.iter().map(|r| Complex64::new(r.re_g, r.im_g)).collect();
    let h: Vec<Complex64> = rows.iter().map(|r| Complex64::new(r.re_h, r.im_h)).collect();
    let n_seg = problem.mesh.boundary_edges().len();
    let mut circulation = vec![Complex64::new(0.0, 0.0); n_seg];
    for (q, bp) in bq.points.iter().enumerate() {
        circulation[bp.segment] += g[q] * bp.weight;
    }
    Ok(BoundaryTrace {
        arclength: rows.iter().map(|r| r.s).collect(),
        points: rows.iter().map(|r| [r.x, r.y]).collect(),
        g,
        h,
        circulation,
    })
}

/// Reads the vector data of an internal CSV, checking it was sampled on this problem's points.
pub fn qvec_from_rows(problem: &Problem, rows: &[InternalRow]) -> Result<Vec<[Complex64; 2]>> {
    let pts = &problem.cache.points;
    if rows.len() != pts.len() {
        return Err(Error::Config(format!(
            "internal data has {} samples, the mesh has {} quadrature points",
            rows.len(),
            pts.len()
        )));
    }
    for (r, p) in rows.iter().zip(pts) {
        if (r.x - p[0]).abs() > 1e-9 || (r.y - p[1]).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "internal data point ({}, {}) does not match the mesh quadrature",
                r.x, r.y
            )));
        }
    }
    Ok(rows
        .iter()
        .map(|r| [Complex64::new(r.re_Qx, r.im_Qx), Complex64::new(r.re_Qy, r.im_Qy)])
        .collect())
}

/// Outcome of adding the non-radiating source `(iωε − σ)∇φ_h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonRadiatingReport {
    pub center: [f64; 2],
    pub radius: f64,
    pub amplitude: f64,
    /// `max|g₂ − g₁| / max|g₁|` over the boundary quadrature.
    pub trace_difference: f64,
    /// `‖E₂ − E₁‖`.
    pub field_difference: f64,
    /// `‖∇φ_h‖`.
    pub gradient_norm: f64,
    /// `‖E₂ − E₁ − ∇φ_h‖ / ‖∇φ_h‖`.
    pub field_identity: f64,
}

pub fn demo_nonradiating(cfg: &ScenarioConfig, center: [f64; 2], radius: f64, amplitude: f64) -> Result<NonRadiatingReport> {
    let fwd = forward_stage(cfg)?;
    let p = &fwd.problem;
    let (source, grad) = crate::reconstruct::nonradiating_source(&p.mesh, &cfg.source, center, radius, amplitude)?;
    let (e2, _) = p.solve_impedance(Some(&source), None, None)?;
    let t1 = p.extract_traces(&fwd.e);
    let t2 = p.extract_traces(&e2);
    let max = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let dg: Vec<Complex64> = t2.g.iter().zip(&t1.g).map(|(a, b)| a - b).collect();
    let diff = e2.sub(&fwd.e);
    let gradient_norm = crate::fem::l2_norm(&p.cache, &grad);
    Ok(NonRadiatingReport {
        center,
        radius,
        amplitude,
        trace_difference: max(&dg) / max(&t1.g),
        field_difference: crate::fem::l2_norm(&p.cache, &diff),
        gradient_norm,
        field_identity: crate::fem::l2_norm(&p.cache, &diff.sub(&grad)) / gradient_norm,
    })
}
