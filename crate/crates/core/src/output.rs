//! CSV artifacts. Every schema has a row type that round-trips through `csv`.

use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::BoundaryTrace;
use crate::internal::{SweepSample, Vectorized};

/// `x,y,re_u1,im_u1,re_u2,im_u2`, one row per quadrature point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub x: f64,
    pub y: f64,
    pub re_u1: f64,
    pub im_u1: f64,
    pub re_u2: f64,
    pub im_u2: f64,
}

/// `s,x,y,re_g,im_g,re_h,im_h`, one row per boundary quadrature point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub re_g: f64,
    pub im_g: f64,
    pub re_h: f64,
    pub im_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct InternalRow {
    pub x: f64,
    pub y: f64,
    pub re_Q1: f64,
    pub im_Q1: f64,
    pub re_Q2: f64,
    pub im_Q2: f64,
    pub re_Qx: f64,
    pub im_Qx: f64,
    pub re_Qy: f64,
    pub im_Qy: f64,
    pub cond: f64,
}

/// `kx,ky,phase,re_M,im_M` for one auxiliary index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct SweepRow {
    pub kx: f64,
    pub ky: f64,
    pub phase: f64,
    pub re_M: f64,
    pub im_M: f64,
}

/// `x,y,eps_r,sigma`: the coefficient map at the quadrature points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub x: f64,
    pub y: f64,
    pub eps_r: f64,
    pub sigma: f64,
}

pub fn field_rows(points: &[[f64; 2]], values: &[[Complex64; 2]]) -> Vec<FieldRow> {
    points
        .iter()
        .zip(values)
        .map(|(p, v)| FieldRow {
            x: p[0],
            y: p[1],
            re_u1: v[0].re,
            im_u1: v[0].im,
            re_u2: v[1].re,
            im_u2: v[1].im,
        })
        .collect()
}

pub fn trace_rows(trace: &BoundaryTrace) -> Vec<TraceRow> {
    (0..trace.g.len())
        .map(|q| TraceRow {
            s: trace.arclength[q],
            x: trace.points[q][0],
            y: trace.points[q][1],
            re_g: trace.g[q].re,
            im_g: trace.g[q].im,
            re_h: trace.h[q].re,
            im_h: trace.h[q].im,
        })
        .collect()
}

pub fn internal_rows(points: &[[f64; 2]], q: [&[Complex64]; 2], v: &Vectorized) -> Vec<InternalRow> {
    (0..points.len())
        .map(|p| InternalRow {
            x: points[p][0],
            y: points[p][1],
            re_Q1: q[0][p].re,
            im_Q1: q[0][p].im,
            re_Q2: q[1][p].re,
            im_Q2: q[1][p].im,
            re_Qx: v.qvec[p][0].re,
            im_Qx: v.qvec[p][0].im,
            re_Qy: v.qvec[p][1].re,
            im_Qy: v.qvec[p][1].im,
            cond: v.cond[p],
        })
        .collect()
}

pub fn sweep_rows(samples: &[SweepSample], j: usize) -> Vec<SweepRow> {
    samples
        .iter()
        .map(|s| SweepRow { kx: s.kx, ky: s.ky, phase: s.phase, re_M: s.m[j].re, im_M: s.m[j].im })
        .collect()
}

pub fn write_rows<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a CSV whose header must match the row type exactly.
pub fn read_rows<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(std::io::BufReader::new(file));
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
