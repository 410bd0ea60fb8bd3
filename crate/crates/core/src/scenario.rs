//! JSON scenario description for the batch pipeline.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::internal::ModulationSweep;
use crate::medium::{Gammas, MediumModel, SourceModel};
use crate::mesh::{gen_disk_mesh, load_mesh, Mesh2D};
use crate::reconstruct::{BoundaryMode, DEFAULT_RELATIVE_TOL};

pub const DEFAULT_COND_THRESHOLD: f64 = 1e8;

/// Either a generated disk (`level`, `radius`) or a mesh file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default = "unit_radius")]
    pub radius: f64,
}

fn unit_radius() -> f64 {
    1.0
}

impl MeshSpec {
    pub fn generated(level: u32) -> Self {
        MeshSpec { level: Some(level), file: None, radius: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.level, &self.file) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => return Err(Error::Config("mesh needs exactly one of `level` or `file`".into())),
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::Config(format!("mesh radius must be positive, got {}", self.radius)));
        }
        Ok(())
    }

    /// Builds or loads the mesh; relative file paths resolve against `base`.
    pub fn build(&self, base: Option<&Path>) -> Result<Mesh2D> {
        self.validate()?;
        match (&self.level, &self.file) {
            (Some(level), _) => Ok(gen_disk_mesh(self.radius, *level)?),
            (None, Some(file)) => {
                let path = match base {
                    Some(b) if file.is_relative() => b.join(file),
                    _ => file.clone(),
                };
                Ok(load_mesh(path)?)
            }
            (None, None) => unreachable!(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InternalMode {
    /// Evaluate `Q` from the forward and auxiliary fields.
    #[default]
    Direct,
    /// Simulate the modulated boundary measurements and invert them.
    Measured(ModulationSweep),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub nu: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Which reconstruction procedure to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseSelection {
    /// Follow the classification; non-unique cases are rejected.
    #[default]
    Auto,
    I1,
    Ii4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub mesh: MeshSpec,
    pub medium: MediumModel,
    #[serde(default = "SourceModel::reference_default")]
    pub source: SourceModel,
    #[serde(default)]
    pub internal: InternalMode,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub case: CaseSelection,
    #[serde(default)]
    pub boundary_mode: BoundaryMode,
    #[serde(default = "default_cond")]
    pub cond_threshold: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_cond() -> f64 {
    DEFAULT_COND_THRESHOLD
}

fn default_tol() -> f64 {
    DEFAULT_RELATIVE_TOL
}

/// The two reference experiments on the three-inclusion phantom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceCase {
    I1,
    II4,
}

impl ScenarioConfig {
    pub fn reference(case: ReferenceCase, level: u32) -> Self {
        let (name, gammas, nu) = match case {
            ReferenceCase::I1 => ("case-i1", Gammas { eps: 0.25, sigma: 0.35, j: 0.0 }, 1e-3),
            ReferenceCase::II4 => ("case-ii4", Gammas { eps: 0.35, sigma: 0.35, j: 0.65 }, 1e-2),
        };
        ScenarioConfig {
            name: name.into(),
            mesh: MeshSpec::generated(level),
            medium: MediumModel::reference_default(gammas),
            source: SourceModel::reference_default(),
            internal: InternalMode::Direct,
            noise: NoiseConfig { nu, seed: 0 },
            case: CaseSelection::Auto,
            boundary_mode: BoundaryMode::Dirichlet,
            cond_threshold: DEFAULT_COND_THRESHOLD,
            tol: DEFAULT_RELATIVE_TOL,
            output_dir: None,
        }
    }

    /// Bounds on the medium, compact support of the source, positive
    /// impedance, unit permeability and the sampling condition of the sweep.
    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        self.medium.validate()?;
        self.source.validate(self.mesh.radius)?;
        if !(self.noise.nu >= 0.0 && self.noise.nu.is_finite()) {
            return Err(Error::Config(format!("noise level must be nonnegative, got {}", self.noise.nu)));
        }
        if !(self.cond_threshold >= 1.0) {
            return Err(Error::Config(format!(
                "condition threshold must be at least 1, got {}",
                self.cond_threshold
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if let InternalMode::Measured(sweep) = &self.internal {
            sweep.validate()?;
            if sweep.support_radius < self.mesh.radius {
                return Err(Error::Config(format!(
                    "sweep support radius {} does not cover the domain radius {}",
                    sweep.support_radius, self.mesh.radius
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| Error::Json { path: origin.into(), source: e })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config. A relative mesh file is resolved against
    /// the config's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text, &path.display().to_string())?;
        if let (Some(file), Some(dir)) = (&cfg.mesh.file, path.parent()) {
            if file.is_relative() {
                cfg.mesh.file = Some(dir.join(file));
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
