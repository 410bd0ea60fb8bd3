//! Materials, sources and acoustic modulation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{PointCoefficients, QuadratureCache};
use crate::mesh::Mesh2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub eps_r: f64,
    /// Scaled conductivity σ̂ (cm⁻¹).
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Shape {
    Disk { center: [f64; 2], radius: f64 },
    /// Simple polygon, vertices in either orientation.
    Polygon { vertices: Vec<[f64; 2]> },
}

impl Shape {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match self {
            Shape::Disk { center, radius } => (p[0] - center[0]).hypot(p[1] - center[1]) <= *radius,
            Shape::Polygon { vertices } => {
                // even-odd rule
                let mut inside = false;
                let n = vertices.len();
                for i in 0..n {
                    let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                    if (a[1] > p[1]) != (b[1] > p[1]) {
                        let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                        if p[0] < x {
                            inside = !inside;
                        }
                    }
                }
                inside
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    #[serde(default)]
    pub name: String,
    pub shape: Shape,
    pub eps_r: f64,
    pub sigma: f64,
}

/// Elasto-electric constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gammas {
    pub eps: f64,
    pub sigma: f64,
    pub j: f64,
}

/// Admissible coefficient range: `k1 > ε_r ≥ k2 > 0`, `k1 > σ̂ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub k1: f64,
    pub k2: f64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { k1: 100.0, k2: 1.0 }
    }
}

fn default_mu() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumModel {
    pub omega: f64,
    pub lambda: f64,
    #[serde(default = "default_mu")]
    pub mu_r: f64,
    pub background: Material,
    /// Later regions take precedence where shapes overlap.
    #[serde(default)]
    pub regions: Vec<Region>,
    pub gammas: Gammas,
    #[serde(default)]
    pub bounds: Bounds,
}

impl MediumModel {
    /// Blood background with fat, nerve and muscle inclusions at ω̂ = π, λ = 1.
    pub fn reference_default(gammas: Gammas) -> Self {
        let disk = |x: f64, y: f64| Shape::Disk { center: [x, y], radius: 0.25 };
        MediumModel {
            omega: std::f64::consts::PI,
            lambda: 1.0,
            mu_r: 1.0,
            background: Material { eps_r: 37.2, sigma: 0.50 },
            regions: vec![
                Region { name: "fat".into(), shape: disk(0.0, 0.5), eps_r: 7.79, sigma: 0.10 },
                Region { name: "nerve".into(), shape: disk(-0.5, -0.15), eps_r: 20.2, sigma: 0.25 },
                Region { name: "muscle".into(), shape: disk(0.5, -0.15), eps_r: 36.4, sigma: 0.45 },
            ],
            gammas,
            bounds: Bounds::default(),
        }
    }

    /// Homogeneous medium.
    pub fn homogeneous(omega: f64, lambda: f64, eps_r: f64, sigma: f64, gammas: Gammas) -> Self {
        MediumModel {
            omega,
            lambda,
            mu_r: 1.0,
            background: Material { eps_r, sigma },
            regions: Vec::new(),
            gammas,
            bounds: Bounds::default(),
        }
    }

    pub fn material_at(&self, p: [f64; 2]) -> Material {
        self.regions
            .iter()
            .rev()
            .find(|r| r.shape.contains(p))
            .map_or(self.background, |r| Material { eps_r: r.eps_r, sigma: r.sigma })
    }

    /// Background followed by every region's material.
    pub fn materials(&self) -> Vec<Material> {
        std::iter::once(self.background)
            .chain(self.regions.iter().map(|r| Material { eps_r: r.eps_r, sigma: r.sigma }))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let Bounds { k1, k2 } = self.bounds;
        if !(k2 > 0.0 && k1 > k2) {
            return Err(Error::Config(format!("bounds must satisfy k1 > k2 > 0, got k1 = {k1}, k2 = {k2}")));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!("frequency must be positive, got {}", self.omega)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("impedance must be positive, got {}", self.lambda)));
        }
        if self.mu_r != 1.0 {
            return Err(Error::Config(format!("relative permeability must be 1, got {}", self.mu_r)));
        }
        let named = std::iter::once(("background", self.background)).chain(
            self.regions
                .iter()
                .map(|r| (r.name.as_str(), Material { eps_r: r.eps_r, sigma: r.sigma })),
        );
        for (name, m) in named {
            if !(m.eps_r >= k2 && m.eps_r < k1) {
                return Err(Error::Config(format!(
                    "region '{name}': eps_r = {} outside [{k2}, {k1})",
                    m.eps_r
                )));
            }
            if !(m.sigma >= 0.0 && m.sigma < k1) {
                return Err(Error::Config(format!(
                    "region '{name}': sigma = {} outside [0, {k1})",
                    m.sigma
                )));
            }
        }
        for r in &self.regions {
            match &r.shape {
                Shape::Disk { radius, .. } if !(*radius > 0.0) => {
                    return Err(Error::Config(format!("region '{}': disk radius must be positive", r.name)));
                }
                Shape::Polygon { vertices } if vertices.len() < 3 => {
                    return Err(Error::Config(format!("region '{}': polygon needs three vertices", r.name)));
                }
                _ => {}
            }
        }
        let g = self.gammas;
        if ![g.eps, g.sigma, g.j].iter().all(|v| v.is_finite()) {
            return Err(Error::Config("elasto-electric constants must be finite".into()));
        }
        Ok(())
    }

    /// Unmodulated coefficients at the cache points.
    pub fn coefficients(&self, cache: &QuadratureCache) -> PointCoefficients {
        let mats: Vec<Material> = cache.points.iter().map(|&p| self.material_at(p)).collect();
        PointCoefficients {
            eps: mats.iter().map(|m| m.eps_r).collect(),
            sigma: mats.iter().map(|m| m.sigma).collect(),
            inv_mu: vec![1.0 / self.mu_r; cache.n_points()],
        }
    }

    /// Coefficients multiplied by `1 + δγ cos(k·x + φ)`.
    pub fn modulated_coefficients(&self, cache: &QuadratureCache, wave: &AcousticWave) -> Result<PointCoefficients> {
        let mut c = self.coefficients(cache);
        for (p, x) in cache.points.iter().enumerate() {
            c.eps[p] *= wave.factor(*x, self.gammas.eps);
            c.sigma[p] *= wave.factor(*x, self.gammas.sigma);
            if !(c.eps[p] > 0.0) {
                return Err(Error::Config(format!(
                    "modulated permittivity {} is not positive at ({}, {}); reduce delta",
                    c.eps[p], x[0], x[1]
                )));
            }
        }
        Ok(c)
    }

    /// `ω²ε_r + iωσ̂` of the background.
    pub fn background_kappa(&self) -> Complex64 {
        Complex64::new(self.omega * self.omega * self.background.eps_r, self.omega * self.background.sigma)
    }

    /// Principal square root of the background `ω²ε_r + iωσ̂` (Re k ≥ 0).
    pub fn background_wave_number(&self) -> Complex64 {
        self.background_kappa().sqrt()
    }

    /// `ω²ε_rγ_ε + iωσ̂γ_σ` for a material.
    pub fn gamma_kappa(&self, m: Material) -> Complex64 {
        Complex64::new(
            self.omega * self.omega * m.eps_r * self.gammas.eps,
            self.omega * m.sigma * self.gammas.sigma,
        )
    }
}

fn default_margin() -> f64 {
    0.05
}

/// Smooth compactly supported bump `amplitude · (1 − (r/R)²)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: [f64; 2],
    pub radius: f64,
    /// Complex 2-vector amplitude, each component written as `[re, im]`.
    pub amplitude: [Complex64; 2],
}

impl Bump {
    pub fn profile(&self, x: [f64; 2]) -> f64 {
        let r2 = ((x[0] - self.center[0]).powi(2) + (x[1] - self.center[1]).powi(2)) / (self.radius * self.radius);
        if r2 < 1.0 {
            (1.0 - r2).powi(2)
        } else {
            0.0
        }
    }

    pub fn eval(&self, x: [f64; 2]) -> [Complex64; 2] {
        let p = self.profile(x);
        [self.amplitude[0] * p, self.amplitude[1] * p]
    }
}

/// Gradient-type source `(iωε − σ)∇φ_h` with `φ_h` a nodal P1 function.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSource {
    pub nodal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    pub bumps: Vec<Bump>,
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(skip)]
    pub gradient_terms: Vec<GradientSource>,
}

impl SourceModel {
    /// Two bumps with x- and y-directed real amplitudes.
    pub fn reference_default() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        SourceModel {
            bumps: vec![
                Bump { center: [0.25, 0.15], radius: 0.35, amplitude: [one, zero] },
                Bump { center: [-0.2, -0.25], radius: 0.35, amplitude: [zero, one] },
            ],
            margin: 0.05,
            gradient_terms: Vec::new(),
        }
    }

    pub fn empty() -> Self {
        SourceModel { bumps: Vec::new(), margin: 0.05, gradient_terms: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude.iter().all(|a| a.norm() == 0.0))
            && self.gradient_terms.iter().all(|g| g.nodal.iter().all(|v| *v == 0.0))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.bumps {
            b.amplitude = [b.amplitude[0] * s, b.amplitude[1] * s];
        }
        for g in &mut out.gradient_terms {
            g.nodal.iter_mut().for_each(|v| *v *= s);
        }
        out
    }

    /// Every bump support must lie inside the disk of radius `domain_radius − margin`.
    pub fn validate(&self, domain_radius: f64) -> Result<()> {
        if !(self.margin >= 0.05) {
            return Err(Error::Config(format!("source margin must be at least 0.05, got {}", self.margin)));
        }
        for (i, b) in self.bumps.iter().enumerate() {
            if !(b.radius > 0.0) {
                return Err(Error::Config(format!("bump {i}: radius must be positive")));
            }
            if !b.amplitude.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::Config(format!("bump {i}: amplitude must be finite")));
            }
            let reach = b.center[0].hypot(b.center[1]) + b.radius;
            if reach > domain_radius - self.margin {
                return Err(Error::Config(format!(
                    "bump {i}: support reaches radius {reach:.4}, beyond the admissible {:.4}",
                    domain_radius - self.margin
                )));
            }
        }
        Ok(())
    }

    /// Smooth part of the source at a point.
    pub fn eval_bumps(&self, x: [f64; 2]) -> [Complex64; 2] {
        self.bumps.iter().fold([Complex64::new(0.0, 0.0); 2], |acc, b| {
            let v = b.eval(x);
            [acc[0] + v[0], acc[1] + v[1]]
        })
    }

    /// Source samples at the cache points, including gradient terms.
    pub fn sample(&self, mesh: &Mesh2D, cache: &QuadratureCache, medium: &MediumModel) -> Vec<[Complex64; 2]> {
        let mut out: Vec<[Complex64; 2]> = cache.points.iter().map(|&x| self.eval_bumps(x)).collect();
        if self.gradient_terms.is_empty() {
            return out;
        }
        let coeffs = medium.coefficients(cache);
        for term in &self.gradient_terms {
            for t in 0..cache.n_triangles() {
                let grads = mesh.barycentric_gradients(t);
                let tri = mesh.triangles()[t];
                let mut g = [0.0; 2];
                for k in 0..3 {
                    g[0] += term.nodal[tri[k]] * grads[k][0];
                    g[1] += term.nodal[tri[k]] * grads[k][1];
                }
                for p in cache.triangle_points(t) {
                    let c = Complex64::new(-coeffs.sigma[p], medium.omega * coeffs.eps[p]);
                    out[p][0] += c * g[0];
                    out[p][1] += c * g[1];
                }
            }
        }
        out
    }
}

/// Acoustic plane wave `δ cos(k·x + φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcousticWave {
    pub k: [f64; 2],
    pub phase: f64,
    pub delta: f64,
}

impl AcousticWave {
    pub fn new(k: [f64; 2], phase: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 0.1) {
            return Err(Error::Config(format!("modulation amplitude must lie in (0, 0.1], got {delta}")));
        }
        Ok(AcousticWave { k, phase, delta })
    }

    /// `1 + δγ cos(k·x + φ)`.
    pub fn factor(&self, x: [f64; 2], gamma: f64) -> f64 {
        1.0 + self.delta * gamma * (self.k[0] * x[0] + self.k[1] * x[1] + self.phase).cos()
    }
}
