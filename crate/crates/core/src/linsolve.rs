//! Sparse direct solves for complex-symmetric systems.

use std::time::Instant;

use faer::prelude::*;
use faer::sparse::linalg::LuError;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::SparseMatrix;

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;
const MAX_REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("matrix is {rows}x{cols}; right-hand side has length {rhs}")]
    DimensionMismatch { rows: usize, cols: usize, rhs: usize },
    #[error("structurally singular matrix: no pivot available at elimination step {step} of {n}")]
    StructurallySingular { step: usize, n: usize },
    #[error("numerically singular matrix of order {n}: {detail}")]
    NumericallySingular { n: usize, detail: String },
    #[error("relative residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },
    #[error("factorization failed: {0}")]
    Backend(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub dimension: usize,
    pub nonzeros: usize,
    pub relative_residual: f64,
    pub refinement_steps: usize,
    pub factor_seconds: f64,
    pub solve_seconds: f64,
}

/// LU factorization kept for repeated right-hand sides.
pub struct Factorization {
    lu: Lu<usize, Complex64>,
    matrix: SparseMatrix,
    factor_seconds: f64,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("dimension", &self.matrix.dim())
            .field("nonzeros", &self.matrix.values().len())
            .finish()
    }
}

impl Factorization {
    pub fn new(a: &SparseMatrix) -> Result<Self, SolveError> {
        let start = Instant::now();
        let n = a.dim();
        let triplets: Vec<_> = a
            .triplets()
            .filter(|(_, _, v)| *v != Complex64::new(0.0, 0.0))
            .map(|(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let csc = SparseColMat::<usize, Complex64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| SolveError::Backend(format!("{e:?}")))?;
        let lu = csc.sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => SolveError::StructurallySingular { step: index, n },
            other => SolveError::Backend(format!("{other:?}")),
        })?;
        Ok(Factorization {
            lu,
            matrix: a.clone(),
            factor_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn raw_solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let rhs = Mat::<Complex64>::from_fn(b.len(), 1, |i, _| b[i]);
        let x = self.lu.solve(&rhs);
        (0..b.len()).map(|i| x[(i, 0)]).collect()
    }

    /// Solves `A x = b` with up to three steps of iterative refinement and
    /// checks the relative residual.
    pub fn solve(&self, b: &[Complex64]) -> Result<(Vec<Complex64>, SolveReport), SolveError> {
        let n = self.dim();
        if b.len() != n {
            return Err(SolveError::DimensionMismatch { rows: n, cols: n, rhs: b.len() });
        }
        let start = Instant::now();
        let b_norm = norm(b);
        let mut report = SolveReport {
            dimension: n,
            nonzeros: self.matrix.values().len(),
            relative_residual: 0.0,
            refinement_steps: 0,
            factor_seconds: self.factor_seconds,
            solve_seconds: 0.0,
        };
        if b_norm == 0.0 {
            report.solve_seconds = start.elapsed().as_secs_f64();
            return Ok((vec![Complex64::new(0.0, 0.0); n], report));
        }

        let mut x = self.raw_solve(b);
        if !x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Err(SolveError::NumericallySingular {
                n,
                detail: "zero or vanishing pivot produced a non-finite solution".into(),
            });
        }
        let mut r = residual(&self.matrix, &x, b);
        let mut rel = norm(&r) / b_norm;
        while rel > 1e-14 && report.refinement_steps < MAX_REFINEMENT_STEPS {
            let dx = self.raw_solve(&r);
            let candidate: Vec<_> = x.iter().zip(&dx).map(|(x, d)| x + d).collect();
            let r_new = residual(&self.matrix, &candidate, b);
            let rel_new = norm(&r_new) / b_norm;
            report.refinement_steps += 1;
            if !(rel_new < rel) {
                break;
            }
            x = candidate;
            r = r_new;
            rel = rel_new;
        }
        report.relative_residual = rel;
        report.solve_seconds = start.elapsed().as_secs_f64();
        if !(rel <= RESIDUAL_TOLERANCE) {
            return Err(SolveError::Residual { residual: rel, tolerance: RESIDUAL_TOLERANCE });
        }
        Ok((x, report))
    }

    /// Solves for several right-hand sides against the same factorization.
    pub fn solve_many(&self, rhs: &[Vec<Complex64>]) -> Result<Vec<(Vec<Complex64>, SolveReport)>, SolveError> {
        rhs.iter().map(|b| self.solve(b)).collect()
    }
}

/// One-shot factor and solve.
pub fn solve(a: &SparseMatrix, b: &[Complex64]) -> Result<(Vec<Complex64>, SolveReport), SolveError> {
    if b.len() != a.dim() {
        return Err(SolveError::DimensionMismatch { rows: a.dim(), cols: a.dim(), rhs: b.len() });
    }
    Factorization::new(a)?.solve(b)
}

fn residual(a: &SparseMatrix, x: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.mul_vec(x).iter().zip(b).map(|(ax, b)| b - ax).collect()
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_returns_rhs() {
        let b = vec![c(1.0, 2.0), c(-3.0, 0.5), c(0.0, -1.0)];
        let (x, report) = solve(&SparseMatrix::identity(3), &b).unwrap();
        assert_eq!(x, b);
        assert_eq!(report.relative_residual, 0.0);
    }

    #[test]
    fn two_by_two_complex_symmetric() {
        // [[2, i], [i, 1]]^-1 = [[1, -i], [-i, 2]] / (2 - i^2) = [[1, -i], [-i, 2]] / 3
        let a = SparseMatrix::from_triplets(2, &[(0, 0, c(2.0, 0.0)), (0, 1, c(0.0, 1.0)), (1, 0, c(0.0, 1.0)), (1, 1, c(1.0, 0.0))]);
        let (x, _) = solve(&a, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((x[0] - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((x[1] - c(0.0, -1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, c(1.0, 0.0)), (0, 1, c(1.0, 0.0)), (1, 0, c(1.0, 0.0)), (1, 1, c(1.0, 0.0))]);
        assert!(solve(&a, &[c(1.0, 0.0), c(0.0, 0.0)]).is_err());
        let empty_row = SparseMatrix::from_triplets(2, &[(0, 0, c(1.0, 0.0)), (1, 0, c(1.0, 0.0))]);
        assert!(solve(&empty_row, &[c(1.0, 0.0), c(1.0, 0.0)]).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            solve(&SparseMatrix::identity(2), &[c(1.0, 0.0)]),
            Err(SolveError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn multiple_rhs() {
        let a = SparseMatrix::from_triplets(2, &[(0, 0, c(4.0, 1.0)), (1, 1, c(2.0, 0.0))]);
        let f = Factorization::new(&a).unwrap();
        let out = f.solve_many(&[vec![c(4.0, 1.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(2.0, 0.0)]]).unwrap();
        assert!((out[0].0[0] - c(1.0, 0.0)).norm() < 1e-15);
        assert!((out[1].0[1] - c(1.0, 0.0)).norm() < 1e-15);
    }
}
