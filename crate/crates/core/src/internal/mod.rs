//! Internal functionals: direct evaluation, extraction from modulated boundary
//! data, vectorization and noise.

pub mod fourier;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::FieldFE;
use crate::forward::{BoundaryTrace, Problem};
use crate::medium::{AcousticWave, SourceModel};
use crate::mesh::BoundaryQuadrature;

use fourier::{inverse_transform_grid, k_grid, CartesianGrid};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest fraction of points allowed above the conditioning threshold.
pub const MAX_FLAGGED_FRACTION: f64 = 0.05;

/// Auxiliary field with the impedance data that produced it.
#[derive(Debug, Clone)]
pub struct Auxiliary {
    pub field: FieldFE,
    /// `𝔤` at the boundary quadrature points.
    pub data: Vec<Complex64>,
}

impl Auxiliary {
    /// Plane-wave auxiliary solution `j ∈ {1, 2}`.
    pub fn plane_wave(problem: &Problem, j: usize) -> Result<Self> {
        let k = problem.medium.background_wave_number();
        let data = problem.impedance_data(
            |x| crate::forward::plane_wave(j, k, x).0,
            |x| crate::forward::plane_wave(j, k, x).1,
        );
        let (field, _) = problem.solve_impedance(None, Some(&data), None)?;
        Ok(Auxiliary { field, data })
    }
}

/// `Q = (ω²εγ_ε + iωσγ_σ) F·E + iωγ_J J·F` at the cache points, with `F` the
/// computed auxiliary field (it already plays the role of the conjugate field).
pub fn scalar_q_direct(problem: &Problem, e: &FieldFE, f: &FieldFE, source: &SourceModel) -> Vec<Complex64> {
    let es = e.sample(&problem.cache);
    let fs = f.sample(&problem.cache);
    let js = problem.source_samples(source, None);
    let w = problem.medium.omega;
    let g = problem.medium.gammas;
    (0..problem.cache.n_points())
        .map(|p| {
            let kg = Complex64::new(w * w * problem.coeffs.eps[p] * g.eps, w * problem.coeffs.sigma[p] * g.sigma);
            let fe = fs[p][0] * es[p][0] + fs[p][1] * es[p][1];
            let jf = js[p][0] * fs[p][0] + js[p][1] * fs[p][1];
            kg * fe + I * w * g.j * jf
        })
        .collect()
}

/// Measured trace of a field: `g = E·t` and, by the impedance relation, `h = −λg`.
pub fn measurement_trace(problem: &Problem, e: &FieldFE) -> BoundaryTrace {
    let mut tr = problem.extract_traces(e);
    tr.h = tr.g.iter().map(|g| -g * problem.medium.lambda).collect();
    tr
}

/// Trace of an auxiliary field with `h = −(λ F·t + 𝔤)`.
pub fn auxiliary_trace(problem: &Problem, aux: &Auxiliary) -> BoundaryTrace {
    let mut tr = problem.extract_traces(&aux.field);
    tr.h = tr
        .g
        .iter()
        .zip(&aux.data)
        .map(|(g, d)| -(g * problem.medium.lambda + d))
        .collect();
    tr
}

/// `iω ∮ [h_δ (F·t) − h_F (E_δ·t)] ds`, where `h = (n×H)·t`.
pub fn boundary_functional(
    bq: &BoundaryQuadrature,
    traces: &BoundaryTrace,
    aux: &BoundaryTrace,
    omega: f64,
) -> Result<Complex64> {
    if traces.g.len() != bq.len() || aux.g.len() != bq.len() {
        return Err(Error::Config(format!(
            "trace sample counts ({}, {}) differ from the boundary quadrature ({})",
            traces.g.len(),
            aux.g.len(),
            bq.len()
        )));
    }
    let integrand: Vec<Complex64> = (0..bq.len())
        .map(|q| traces.h[q] * aux.g[q] - aux.h[q] * traces.g[q])
        .collect();
    Ok(I * omega * bq.integrate(&integrand))
}

/// `∫ (κ_δ − κ) F·E_δ + iω J_δ·F dx`, the volume side of the boundary identity.
pub fn volume_functional(
    problem: &Problem,
    e_delta: &FieldFE,
    f: &FieldFE,
    source: &SourceModel,
    wave: Option<&AcousticWave>,
) -> Result<Complex64> {
    let w = problem.medium.omega;
    let es = e_delta.sample(&problem.cache);
    let fs = f.sample(&problem.cache);
    let js = problem.source_samples(source, wave);
    let modulated = match wave {
        Some(wv) => Some(problem.medium.modulated_coefficients(&problem.cache, wv)?),
        None => None,
    };
    let samples: Vec<Complex64> = (0..problem.cache.n_points())
        .map(|p| {
            let dk = match &modulated {
                Some(m) => Complex64::new(
                    w * w * (m.eps[p] - problem.coeffs.eps[p]),
                    w * (m.sigma[p] - problem.coeffs.sigma[p]),
                ),
                None => Complex64::new(0.0, 0.0),
            };
            let fe = fs[p][0] * es[p][0] + fs[p][1] * es[p][1];
            let jf = js[p][0] * fs[p][0] + js[p][1] * fs[p][1];
            dk * fe + I * w * jf
        })
        .collect();
    Ok(problem.cache.integrate(&samples))
}

/// Uniform k-space sweep with phases `{0, −π/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSweep {
    pub k_max: f64,
    pub dk: f64,
    pub delta: f64,
    /// Radius of a disk containing the support of the integrand.
    pub support_radius: f64,
    /// Nodes per side of the Cartesian inversion grid.
    pub grid_points: usize,
}

impl ModulationSweep {
    /// `K_max = 6π`, `Δk = π/1.2`, `δ = 10⁻³` on a 97-point grid over `[−1.2, 1.2]²`.
    pub fn standard() -> Self {
        ModulationSweep {
            k_max: 6.0 * std::f64::consts::PI,
            dk: std::f64::consts::PI / 1.2,
            delta: 1e-3,
            support_radius: 1.2,
            grid_points: 97,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dk > 0.0 && self.k_max >= 0.0) {
            return Err(Error::Config("sweep needs dk > 0 and k_max ≥ 0".into()));
        }
        if !(self.support_radius > 0.0) {
            return Err(Error::Config("sweep support radius must be positive".into()));
        }
        let limit = std::f64::consts::PI / self.support_radius;
        if self.dk > limit * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "sweep spacing dk = {} violates the Nyquist bound π/R = {limit}",
                self.dk
            )));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("inversion grid needs at least 2 points per side".into()));
        }
        AcousticWave::new([0.0, 0.0], 0.0, self.delta)?;
        Ok(())
    }

    pub fn indices(&self) -> Vec<[i64; 2]> {
        k_grid(self.k_max, self.dk)
    }

    pub fn grid(&self) -> CartesianGrid {
        CartesianGrid { n: self.grid_points, half_width: self.support_radius }
    }
}

/// One modulated measurement for both auxiliary indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSample {
    pub kx: f64,
    pub ky: f64,
    pub phase: f64,
    pub m: [Complex64; 2],
}

#[derive(Debug, Clone)]
pub struct MeasuredQ {
    /// `Q_j` at the cache points.
    pub q: [Vec<Complex64>; 2],
    /// Unmodulated measurements `M_j(δ = 0)`.
    pub m0: [Complex64; 2],
    pub samples: Vec<SweepSample>,
}

/// Internal data through simulated measurements: for each `(k, φ)` solve the
/// modulated problem, difference the boundary functional against `δ = 0`,
/// assemble `q̂(k)` from the two phases and invert on a Cartesian grid.
pub fn measured_q(
    problem: &Problem,
    source: &SourceModel,
    aux: &[Auxiliary; 2],
    sweep: &ModulationSweep,
    parallel: bool,
) -> Result<MeasuredQ> {
    sweep.validate()?;
    let aux_traces = [auxiliary_trace(problem, &aux[0]), auxiliary_trace(problem, &aux[1])];
    let measure = |e: &FieldFE| -> Result<[Complex64; 2]> {
        let tr = measurement_trace(problem, e);
        Ok([
            boundary_functional(&problem.bq, &tr, &aux_traces[0], problem.medium.omega)?,
            boundary_functional(&problem.bq, &tr, &aux_traces[1], problem.medium.omega)?,
        ])
    };
    let (e0, _) = problem.solve_impedance(Some(source), None, None)?;
    let m0 = measure(&e0)?;

    let indices = sweep.indices();
    let phases = [0.0, -std::f64::consts::FRAC_PI_2];
    let jobs: Vec<([f64; 2], f64)> = indices
        .iter()
        .flat_map(|m| {
            let k = [m[0] as f64 * sweep.dk, m[1] as f64 * sweep.dk];
            phases.iter().map(move |&ph| (k, ph))
        })
        .collect();
    let run = |&(k, phase): &([f64; 2], f64)| -> Result<SweepSample> {
        let wrap = |e: Error| Error::Sweep { kx: k[0], ky: k[1], phase, source: Box::new(e) };
        let wave = AcousticWave::new(k, phase, sweep.delta).map_err(wrap)?;
        let (e, _) = problem.solve_impedance(Some(source), None, Some(&wave)).map_err(wrap)?;
        Ok(SweepSample { kx: k[0], ky: k[1], phase, m: measure(&e).map_err(wrap)? })
    };
    let samples: Vec<SweepSample> = if parallel {
        jobs.par_iter().map(run).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run).collect::<Result<_>>()?
    };

    let grid = sweep.grid();
    let mut q = [Vec::new(), Vec::new()];
    for (j, qj) in q.iter_mut().enumerate() {
        let qhat: Vec<Complex64> = samples
            .chunks(2)
            .map(|pair| ((pair[0].m[j] - m0[j]) + I * (pair[1].m[j] - m0[j])) / sweep.delta)
            .collect();
        let on_grid = inverse_transform_grid(&indices, &qhat, sweep.dk, &grid);
        *qj = problem.cache.points.iter().map(|&x| grid.bilinear(&on_grid, x)).collect();
    }
    Ok(MeasuredQ { q, m0, samples })
}

/// Condition number of a complex 2×2 matrix in the spectral norm.
pub fn condition_2x2(m: [[Complex64; 2]; 2]) -> f64 {
    let fro2: f64 = m.iter().flatten().map(|z| z.norm_sqr()).sum();
    let det = (m[0][0] * m[1][1] - m[0][1] * m[1][0]).norm();
    if det == 0.0 {
        return f64::INFINITY;
    }
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let s_max2 = 0.5 * (fro2 + disc);
    let s_min2 = det * det / s_max2;
    (s_max2 / s_min2).sqrt()
}

/// Vector internal data with conditioning statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Vectorized {
    pub qvec: Vec<[Complex64; 2]>,
    pub cond: Vec<f64>,
    pub flagged: usize,
    pub max_cond: f64,
    pub median_cond: f64,
}

impl Vectorized {
    pub fn flagged_fraction(&self) -> f64 {
        self.flagged as f64 / self.cond.len().max(1) as f64
    }
}

/// Solves `[F₁; F₂] v = [Q₁; Q₂]` at every point. Points whose matrix is worse
/// conditioned than `cond_threshold` take the value of the nearest accepted point.
pub fn vectorize_q(
    points: &[[f64; 2]],
    q: [&[Complex64]; 2],
    f: [&[[Complex64; 2]]; 2],
    cond_threshold: f64,
) -> Result<Vectorized> {
    let n = points.len();
    if [q[0].len(), q[1].len(), f[0].len(), f[1].len()].iter().any(|&l| l != n) {
        return Err(Error::Config("vectorization inputs are not sampled at identical points".into()));
    }
    let mut qvec = Vec::with_capacity(n);
    let mut cond = Vec::with_capacity(n);
    let mut bad = Vec::new();
    for p in 0..n {
        let m = [f[0][p], f[1][p]];
        let c = condition_2x2(m);
        cond.push(c);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !(c <= cond_threshold) {
            bad.push(p);
            qvec.push([Complex64::new(0.0, 0.0); 2]);
            continue;
        }
        qvec.push([
            (m[1][1] * q[0][p] - m[0][1] * q[1][p]) / det,
            (m[0][0] * q[1][p] - m[1][0] * q[0][p]) / det,
        ]);
    }
    let fraction = bad.len() as f64 / n.max(1) as f64;
    if fraction > MAX_FLAGGED_FRACTION {
        return Err(Error::Hypothesis(format!(
            "{:.2}% of points exceed the conditioning threshold {cond_threshold:e}; \
             the auxiliary fields are not linearly independent enough",
            100.0 * fraction
        )));
    }
    if !bad.is_empty() {
        let mut is_bad = vec![false; n];
        bad.iter().for_each(|&p| is_bad[p] = true);
        for &p in &bad {
            let nearest = (0..n)
                .filter(|&o| !is_bad[o])
                .min_by(|&a, &b| dist2(points[a], points[p]).total_cmp(&dist2(points[b], points[p])))
                .expect("at least one accepted point");
            qvec[p] = qvec[nearest];
        }
    }
    let mut sorted: Vec<f64> = cond.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(Vectorized {
        qvec,
        flagged: bad.len(),
        max_cond: sorted.last().copied().unwrap_or(0.0),
        median_cond: sorted.get(sorted.len() / 2).copied().unwrap_or(0.0),
        cond,
    })
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Multiplicative Gaussian noise `Q ← Q(1 + νξ)`, drawn sequentially from a
/// seeded ChaCha stream over all sample sets in order.
pub fn add_noise(samples: &mut [&mut Vec<Complex64>], nu: f64, seed: u64) -> Result<()> {
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(Error::Config(format!("noise level must be nonnegative, got {nu}")));
    }
    if nu == 0.0 {
        return Ok(());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for set in samples.iter_mut() {
        for q in set.iter_mut() {
            let xi: f64 = StandardNormal.sample(&mut rng);
            *q *= 1.0 + nu * xi;
        }
    }
    Ok(())
}

/// Scalar and vector internal data on the cache points.
#[derive(Debug, Clone)]
pub struct InternalDataSet {
    pub points: Vec<[f64; 2]>,
    pub q: [Vec<Complex64>; 2],
    pub vectorized: Vectorized,
}
