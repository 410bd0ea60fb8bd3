//! Gate suites: manufactured convergence, impedance-trace consistency and the
//! boundary/volume identity of the modulated problem.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fem::relative_hcurl_error;
use crate::forward::Problem;
use crate::internal::{boundary_functional, measurement_trace, volume_functional, auxiliary_trace, Auxiliary};
use crate::medium::{AcousticWave, Gammas, MediumModel, SourceModel};
use crate::mesh::gen_disk_mesh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl GateResult {
    fn at_most(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        GateResult { name: name.into(), measured, tolerance, passed: measured <= tolerance, detail }
    }

    fn at_least(name: &str, measured: f64, tolerance: f64, detail: String) -> Self {
        GateResult { name: name.into(), measured, tolerance, passed: measured >= tolerance, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<34} {:>12.4e} (tol {:.3e})  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.detail
        )
    }
}

/// Weakly scattering homogeneous medium resolved by level-3 meshes.
pub fn resolved_medium() -> MediumModel {
    MediumModel::homogeneous(PI, 1.0, 1.0, 0.5, Gammas { eps: 0.35, sigma: 0.35, j: 0.65 })
}

/// H(curl) error and max edge length for the manufactured field
/// `E = (1 + i)(sin πy, sin πx)` in the resolved medium.
pub fn manufactured_error(level: u32) -> Result<(f64, f64)> {
    let mesh = Arc::new(gen_disk_mesh(1.0, level)?);
    let h = mesh.max_edge_length();
    let p = Problem::new(mesh, resolved_medium())?;
    let c = Complex64::new(1.0, 1.0);
    let kappa = p.medium.background_kappa();
    let field = move |x: [f64; 2]| [c * (PI * x[1]).sin(), c * (PI * x[0]).sin()];
    let curl = move |x: [f64; 2]| c * PI * ((PI * x[0]).cos() - (PI * x[1]).cos());
    let load: Vec<[Complex64; 2]> = p
        .cache
        .points
        .iter()
        .map(|&x| {
            let e = field(x);
            let s = Complex64::new(PI * PI, 0.0) - kappa;
            [e[0] * s, e[1] * s]
        })
        .collect();
    let g = p.impedance_data(field, curl);
    let (e, _) = p.solve_with_load(&load, Some(&g))?;
    Ok((relative_hcurl_error(&p.cache, &e, field, curl)?, h))
}

pub fn convergence_gates(level: u32) -> Result<Vec<GateResult>> {
    let lo = level.saturating_sub(1);
    let runs: Vec<(u32, f64, f64)> = (lo..=level + 1)
        .map(|l| manufactured_error(l).map(|(e, h)| (l, e, h)))
        .collect::<Result<_>>()?;
    let at = runs.iter().find(|r| r.0 == level).expect("level in range");
    let mut out = vec![GateResult::at_most(
        "manufactured H(curl) error",
        at.1,
        0.05,
        format!("level {level}"),
    )];
    for w in runs.windows(2) {
        let order = (w[0].1 / w[1].1).ln() / (w[0].2 / w[1].2).ln();
        out.push(GateResult::at_least(
            "manufactured convergence order",
            order,
            0.9,
            format!("levels {}→{}", w[0].0, w[1].0),
        ));
    }
    Ok(out)
}

/// `max|h + λg| / max|g|` for the default source in the resolved medium.
pub fn trace_mismatch(level: u32) -> Result<f64> {
    let p = Problem::new(Arc::new(gen_disk_mesh(1.0, level)?), resolved_medium())?;
    let (e, _) = p.solve_impedance(Some(&SourceModel::reference_default()), None, None)?;
    Ok(p.extract_traces(&e).impedance_mismatch(p.medium.lambda))
}

pub fn trace_gates(level: u32) -> Result<Vec<GateResult>> {
    let coarse = trace_mismatch(level.saturating_sub(1))?;
    let fine = trace_mismatch(level)?;
    Ok(vec![
        GateResult::at_most("impedance trace mismatch", fine, 0.05, format!("level {level}")),
        GateResult::at_most(
            "impedance trace mismatch decrease",
            fine,
            coarse,
            format!("level {} gives {coarse:.4e}", level.saturating_sub(1)),
        ),
    ])
}

/// Relative difference between the boundary functional and its volume form
/// for one modulated solve on the three-inclusion phantom.
pub fn identity_residual(level: u32, delta: f64) -> Result<f64> {
    let medium = MediumModel::reference_default(Gammas { eps: 0.35, sigma: 0.35, j: 0.65 });
    let p = Problem::new(Arc::new(gen_disk_mesh(1.0, level)?), medium)?;
    let source = SourceModel::reference_default();
    let wave = AcousticWave::new([2.0 * PI, -PI], 0.3, delta)?;
    let mut worst: f64 = 0.0;
    let (e0, _) = p.solve_impedance(Some(&source), None, None)?;
    let (ed, _) = p.solve_impedance(Some(&source), None, Some(&wave))?;
    for j in 1..=2 {
        let aux = Auxiliary::plane_wave(&p, j)?;
        let at = auxiliary_trace(&p, &aux);
        let w = p.medium.omega;
        let lhs = boundary_functional(&p.bq, &measurement_trace(&p, &ed), &at, w)?
            - boundary_functional(&p.bq, &measurement_trace(&p, &e0), &at, w)?;
        let rhs = volume_functional(&p, &ed, &aux.field, &source, Some(&wave))?
            - volume_functional(&p, &e0, &aux.field, &source, None)?;
        worst = worst.max((lhs - rhs).norm() / rhs.norm());
    }
    Ok(worst)
}

pub fn identity_gates(level: u32) -> Result<Vec<GateResult>> {
    [1e-2, 1e-3]
        .iter()
        .map(|&d| {
            identity_residual(level, d).map(|r| {
                GateResult::at_most("boundary/volume identity", r, 0.02, format!("level {level}, delta {d:e}"))
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Traces,
    Convergence,
    Identity,
    All,
}

pub fn run_suite(suite: Suite, level: u32) -> Result<Vec<GateResult>> {
    let mut out = Vec::new();
    if matches!(suite, Suite::Convergence | Suite::All) {
        out.extend(convergence_gates(level)?);
    }
    if matches!(suite, Suite::Traces | Suite::All) {
        out.extend(trace_gates(level)?);
    }
    if matches!(suite, Suite::Identity | Suite::All) {
        out.extend(identity_gates(level)?);
    }
    Ok(out)
}
