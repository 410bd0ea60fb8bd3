//! Conforming triangle meshes of the disk with oriented edge tables.
//!
//! Global edge orientation runs from the lower to the higher vertex index.
//! Local edge `k` of a triangle joins local vertices `LOCAL_EDGES[k]` and
//! carries a sign of `+1` when that local direction agrees with the global one.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::quadrature::gauss_legendre_unit;

pub const MAX_REFINEMENT: u32 = 10;

/// Local vertex pairs of the three triangle edges (edge `k` is opposite vertex `k`).
pub const LOCAL_EDGES: [(usize, usize); 3] = [(1, 2), (2, 0), (0, 1)];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("refinement level {0} exceeds the supported maximum of {MAX_REFINEMENT}")]
    ResourceLimit(u32),
    #[error("invalid mesh argument: {0}")]
    InvalidArgument(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("mesh validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One boundary segment with its outward normal and counterclockwise tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub triangle: usize,
    /// Vertices in the direction of the tangent.
    pub start: usize,
    pub end: usize,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    pub length: f64,
    /// Arclength of `start` measured along the boundary loop.
    pub arclength: f64,
}

impl BoundaryEdge {
    /// `+1` if the tangent agrees with the global edge orientation.
    pub fn orientation(&self) -> f64 {
        if self.start < self.end {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh2D {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[(usize, f64); 3]>,
    edge_triangles: Vec<Vec<usize>>,
    boundary: Vec<BoundaryEdge>,
    boundary_of_edge: Vec<Option<usize>>,
}

impl Mesh2D {
    /// Builds the edge tables from vertices and counterclockwise triangles and
    /// checks every structural invariant.
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(MeshError::Validation("mesh has no triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&v) = tri.iter().find(|&&v| v >= nv) {
                return Err(MeshError::Validation(format!(
                    "triangle {t} references vertex {v} but only {nv} vertices exist"
                )));
            }
            let area = signed_area(&vertices, tri);
            if !(area > 0.0) {
                return Err(MeshError::Validation(format!(
                    "triangle {t} has non-positive signed area {area:e}"
                )));
            }
        }

        // directed edges must be unique for a consistently oriented 2-manifold
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for &(a, b) in &LOCAL_EDGES {
                if let Some(other) = directed.insert((tri[a], tri[b]), t) {
                    return Err(MeshError::Validation(format!(
                        "triangles {other} and {t} traverse edge ({}, {}) in the same direction \
                         (inconsistent winding or non-manifold edge)",
                        tri[a], tri[b]
                    )));
                }
            }
        }

        let mut edge_ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for tri in &triangles {
            for &(a, b) in &LOCAL_EDGES {
                let key = (tri[a].min(tri[b]), tri[a].max(tri[b]));
                edge_ids.insert(key, 0);
            }
        }
        let mut edges = Vec::with_capacity(edge_ids.len());
        for (i, (key, id)) in edge_ids.iter_mut().enumerate() {
            *id = i;
            edges.push([key.0, key.1]);
        }

        let mut edge_triangles = vec![Vec::with_capacity(2); edges.len()];
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [(0usize, 0.0f64); 3];
            for (k, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                let (va, vb) = (tri[a], tri[b]);
                let id = edge_ids[&(va.min(vb), va.max(vb))];
                local[k] = (id, if va < vb { 1.0 } else { -1.0 });
                edge_triangles[id].push(t);
            }
            triangle_edges.push(local);
        }
        for (e, tris) in edge_triangles.iter().enumerate() {
            if tris.len() > 2 {
                return Err(MeshError::Validation(format!(
                    "edge {e} is shared by {} triangles",
                    tris.len()
                )));
            }
        }

        let mut used = vec![false; nv];
        for tri in &triangles {
            for &v in tri {
                used[v] = true;
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MeshError::Validation(format!("vertex {v} is not referenced by any triangle")));
        }

        let euler = nv as i64 - edges.len() as i64 + triangles.len() as i64;
        if euler != 1 {
            return Err(MeshError::Validation(format!(
                "Euler characteristic V - E + T = {euler}, expected 1 for a disk"
            )));
        }

        let boundary = build_boundary_loop(&vertices, &triangles, &triangle_edges, &edge_triangles)?;
        let mut boundary_of_edge = vec![None; edges.len()];
        for (i, b) in boundary.iter().enumerate() {
            boundary_of_edge[b.edge] = Some(i);
        }

        Ok(Mesh2D {
            vertices,
            triangles,
            edges,
            triangle_edges,
            edge_triangles,
            boundary,
            boundary_of_edge,
        })
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self) -> &[[(usize, f64); 3]] {
        &self.triangle_edges
    }

    pub fn edge_triangles(&self, edge: usize) -> &[usize] {
        &self.edge_triangles[edge]
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Position of `edge` in the boundary loop, if it lies on the boundary.
    pub fn boundary_index(&self, edge: usize) -> Option<usize> {
        self.boundary_of_edge[edge]
    }

    pub fn is_boundary_vertex(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for b in &self.boundary {
            flags[b.start] = true;
            flags[b.end] = true;
        }
        flags
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.vertices, &self.triangles[t])
    }

    pub fn triangle_vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        dist(self.vertices[a], self.vertices[b])
    }

    pub fn max_edge_length(&self) -> f64 {
        (0..self.edges.len()).map(|e| self.edge_length(e)).fold(0.0, f64::max)
    }

    pub fn min_edge_length(&self) -> f64 {
        (0..self.edges.len())
            .map(|e| self.edge_length(e))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary.iter().map(|b| b.length).sum()
    }

    pub fn centroid(&self) -> [f64; 2] {
        let n = self.vertices.len() as f64;
        let (sx, sy) = self.vertices.iter().fold((0.0, 0.0), |(sx, sy), v| (sx + v[0], sy + v[1]));
        [sx / n, sy / n]
    }

    /// Largest distance of any vertex from the origin.
    pub fn outer_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max)
    }

    pub fn point_in_triangle(&self, t: usize, bary: [f64; 3]) -> [f64; 2] {
        let [p0, p1, p2] = self.triangle_vertices(t);
        [
            bary[0] * p0[0] + bary[1] * p1[0] + bary[2] * p2[0],
            bary[0] * p0[1] + bary[1] * p1[1] + bary[2] * p2[1],
        ]
    }

    /// Gradients of the three barycentric coordinates of triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [p0, p1, p2] = self.triangle_vertices(t);
        let det = 2.0 * self.triangle_area(t);
        [
            [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
            [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
            [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
        ]
    }

    /// Checks the structural invariants; a freshly built mesh always passes.
    pub fn check_invariants(&self) -> Result<(), MeshError> {
        let rebuilt = Mesh2D::from_parts(self.vertices.clone(), self.triangles.clone())?;
        if rebuilt.edges != self.edges || rebuilt.boundary != self.boundary {
            return Err(MeshError::Validation("edge tables are stale".into()));
        }
        let c = self.centroid();
        for b in &self.boundary {
            let n = b.normal;
            let t = b.tangent;
            let dot = n[0] * t[0] + n[1] * t[1];
            if dot.abs() > 1e-12 || (n[0].hypot(n[1]) - 1.0).abs() > 1e-12 || (t[0].hypot(t[1]) - 1.0).abs() > 1e-12 {
                return Err(MeshError::Validation(format!("bad frame on boundary edge {}", b.edge)));
            }
            let [a, e] = [self.vertices[b.start], self.vertices[b.end]];
            let mid = [0.5 * (a[0] + e[0]) - c[0], 0.5 * (a[1] + e[1]) - c[1]];
            if mid[0] * n[0] + mid[1] * n[1] <= 0.0 {
                return Err(MeshError::Validation(format!(
                    "normal of boundary edge {} points towards the centroid",
                    b.edge
                )));
            }
        }
        Ok(())
    }
}

fn signed_area(vertices: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn build_boundary_loop(
    vertices: &[[f64; 2]],
    triangles: &[[usize; 3]],
    triangle_edges: &[[(usize, f64); 3]],
    edge_triangles: &[Vec<usize>],
) -> Result<Vec<BoundaryEdge>, MeshError> {
    // boundary segments in the counterclockwise direction of their triangle
    let mut by_start: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for (k, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
            let e = triangle_edges[t][k].0;
            if edge_triangles[e].len() == 1 && by_start.insert(tri[a], (tri[b], e, t)).is_some() {
                return Err(MeshError::Validation(format!(
                    "boundary vertex {} starts more than one boundary segment",
                    tri[a]
                )));
            }
        }
    }
    if by_start.is_empty() {
        return Err(MeshError::Validation("mesh has no boundary".into()));
    }

    // start at the vertex with the largest x (ties: smallest y) for a stable arclength origin
    let first = *by_start
        .keys()
        .max_by(|&&a, &&b| {
            let (pa, pb) = (vertices[a], vertices[b]);
            pa[0].total_cmp(&pb[0]).then(pb[1].total_cmp(&pa[1]))
        })
        .unwrap();

    let mut out = Vec::with_capacity(by_start.len());
    let mut current = first;
    let mut s = 0.0;
    loop {
        let Some(&(next, edge, triangle)) = by_start.get(&current) else {
            return Err(MeshError::Validation(format!("boundary loop broken at vertex {current}")));
        };
        let (p, q) = (vertices[current], vertices[next]);
        let length = dist(p, q);
        let tangent = [(q[0] - p[0]) / length, (q[1] - p[1]) / length];
        out.push(BoundaryEdge {
            edge,
            triangle,
            start: current,
            end: next,
            normal: [tangent[1], -tangent[0]],
            tangent,
            length,
            arclength: s,
        });
        s += length;
        current = next;
        if current == first {
            break;
        }
        if out.len() > by_start.len() {
            return Err(MeshError::Validation("boundary does not close".into()));
        }
    }
    if out.len() != by_start.len() {
        return Err(MeshError::Validation(format!(
            "boundary has {} segments but only {} form the outer loop",
            by_start.len(),
            out.len()
        )));
    }
    Ok(out)
}

/// Uniform mesh of the disk: a hexagon fan quadrisected `level` times. After
/// each quadrisection the new boundary vertices are projected onto the circle
/// and interior vertices receive one Jacobi Laplacian smoothing sweep.
pub fn gen_disk_mesh(radius: f64, level: u32) -> Result<Mesh2D, MeshError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(MeshError::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if level > MAX_REFINEMENT {
        return Err(MeshError::ResourceLimit(level));
    }

    let mut vertices = vec![[0.0, 0.0]];
    let mut on_boundary = vec![false];
    for k in 0..6 {
        let a = k as f64 * std::f64::consts::FRAC_PI_3;
        vertices.push([radius * a.cos(), radius * a.sin()]);
        on_boundary.push(true);
    }
    let mut triangles: Vec<[usize; 3]> = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();

    for _ in 0..level {
        let mut count: HashMap<(usize, usize), u8> = HashMap::new();
        for tri in &triangles {
            for &(a, b) in &LOCAL_EDGES {
                *count.entry((tri[a].min(tri[b]), tri[a].max(tri[b]))).or_default() += 1;
            }
        }
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut refined = Vec::with_capacity(4 * triangles.len());
        for tri in &triangles {
            let mut mids = [0usize; 3];
            for (k, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
                let key = (tri[a].min(tri[b]), tri[a].max(tri[b]));
                mids[k] = *midpoint.entry(key).or_insert_with(|| {
                    let (p, q) = (vertices[key.0], vertices[key.1]);
                    let mut m = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
                    let boundary = count[&key] == 1;
                    if boundary {
                        let r = m[0].hypot(m[1]);
                        m = [m[0] * radius / r, m[1] * radius / r];
                    }
                    vertices.push(m);
                    on_boundary.push(boundary);
                    vertices.len() - 1
                });
            }
            // mids[k] sits on the edge opposite local vertex k
            let [v0, v1, v2] = *tri;
            let [m12, m20, m01] = mids;
            refined.push([v0, m01, m20]);
            refined.push([m01, v1, m12]);
            refined.push([m20, m12, v2]);
            refined.push([m01, m12, m20]);
        }
        triangles = refined;
        smooth_interior(&mut vertices, &triangles, &on_boundary);
    }

    Mesh2D::from_parts(vertices, triangles)
}

fn smooth_interior(vertices: &mut [[f64; 2]], triangles: &[[usize; 3]], on_boundary: &[bool]) {
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for tri in triangles {
        for &(a, b) in &LOCAL_EDGES {
            let (u, v) = (tri[a], tri[b]);
            if !neighbours[u].contains(&v) {
                neighbours[u].push(v);
            }
            if !neighbours[v].contains(&u) {
                neighbours[v].push(u);
            }
        }
    }
    let old = vertices.to_vec();
    for (i, nb) in neighbours.iter().enumerate() {
        if on_boundary[i] || nb.is_empty() {
            continue;
        }
        let n = nb.len() as f64;
        let (sx, sy) = nb.iter().fold((0.0, 0.0), |(sx, sy), &j| (sx + old[j][0], sy + old[j][1]));
        vertices[i] = [sx / n, sy / n];
    }
}

/// Reads the ASCII mesh format: a `V T B` header, `V` vertex lines, `T`
/// counterclockwise triangle lines and `B` boundary edge lines (0-based).
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh2D, MeshError> {
    let text = std::fs::read_to_string(path)?;
    parse_mesh(&text)
}

pub fn parse_mesh(text: &str) -> Result<Mesh2D, MeshError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or(MeshError::Parse {
        line: 1,
        msg: "empty mesh file".into(),
    })?;
    let counts: Vec<usize> = parse_fields(hline, header, 3)?;
    let (nv, nt, nb) = (counts[0], counts[1], counts[2]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = next_line(&mut lines, "vertex")?;
        let xy: Vec<f64> = parse_fields(ln, l, 2)?;
        if !xy.iter().all(|v| v.is_finite()) {
            return Err(MeshError::Parse { line: ln, msg: "non-finite coordinate".into() });
        }
        vertices.push([xy[0], xy[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = next_line(&mut lines, "triangle")?;
        let ijk: Vec<usize> = parse_fields(ln, l, 3)?;
        if let Some(v) = ijk.iter().find(|&&v| v >= nv) {
            return Err(MeshError::Parse {
                line: ln,
                msg: format!("vertex index {v} out of range (V = {nv})"),
            });
        }
        triangles.push([ijk[0], ijk[1], ijk[2]]);
    }
    let mut declared = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (ln, l) = next_line(&mut lines, "boundary edge")?;
        let ij: Vec<usize> = parse_fields(ln, l, 2)?;
        if let Some(v) = ij.iter().find(|&&v| v >= nv) {
            return Err(MeshError::Parse {
                line: ln,
                msg: format!("vertex index {v} out of range (V = {nv})"),
            });
        }
        declared.push((ij[0].min(ij[1]), ij[0].max(ij[1])));
    }
    if let Some((ln, _)) = lines.next() {
        return Err(MeshError::Parse { line: ln, msg: "unexpected trailing data".into() });
    }

    let mesh = Mesh2D::from_parts(vertices, triangles)?;
    let mut computed: Vec<(usize, usize)> = mesh
        .boundary_edges()
        .iter()
        .map(|b| (b.start.min(b.end), b.start.max(b.end)))
        .collect();
    computed.sort_unstable();
    declared.sort_unstable();
    if computed != declared {
        return Err(MeshError::Validation(format!(
            "declared boundary edges ({}) do not match the mesh boundary ({})",
            declared.len(),
            computed.len()
        )));
    }
    Ok(mesh)
}

fn next_line<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    what: &str,
) -> Result<(usize, &'a str), MeshError> {
    lines.next().ok_or(MeshError::Parse {
        line: 0,
        msg: format!("unexpected end of file while reading {what} lines"),
    })
}

fn parse_fields<T: std::str::FromStr>(line: usize, text: &str, n: usize) -> Result<Vec<T>, MeshError> {
    let fields: Vec<&str> = text.split_whitespace().collect();
    if fields.len() != n {
        return Err(MeshError::Parse {
            line,
            msg: format!("expected {n} fields, found {}", fields.len()),
        });
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<T>().map_err(|_| MeshError::Parse {
                line,
                msg: format!("cannot parse '{f}'"),
            })
        })
        .collect()
}

pub fn format_mesh(mesh: &Mesh2D) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} {}",
        mesh.n_vertices(),
        mesh.n_triangles(),
        mesh.boundary_edges().len()
    );
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:e} {:e}", v[0], v[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    for b in mesh.boundary_edges() {
        let _ = writeln!(out, "{} {}", b.start, b.end);
    }
    out
}

pub fn write_mesh(mesh: &Mesh2D, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, format_mesh(mesh))?;
    Ok(())
}

/// Gauss point on a boundary segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    /// Index into [`Mesh2D::boundary_edges`].
    pub segment: usize,
    pub point: [f64; 2],
    pub weight: f64,
    pub normal: [f64; 2],
    pub tangent: [f64; 2],
    /// Arclength coordinate along the boundary loop.
    pub arclength: f64,
}

/// Gauss–Legendre points on every boundary segment, `order` points each.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    pub order: usize,
    pub points: Vec<BoundaryPoint>,
}

impl BoundaryQuadrature {
    pub fn segment_points(&self, segment: usize) -> &[BoundaryPoint] {
        &self.points[segment * self.order..(segment + 1) * self.order]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// ∮ f ds for samples aligned with `points`.
    pub fn integrate<T>(&self, samples: &[T]) -> T
    where
        T: Copy + std::iter::Sum<T> + std::ops::Mul<f64, Output = T>,
    {
        self.points.iter().zip(samples).map(|(p, &v)| v * p.weight).sum()
    }
}

pub fn boundary_quadrature(mesh: &Mesh2D, order: usize) -> Result<BoundaryQuadrature, MeshError> {
    if !(1..=10).contains(&order) {
        return Err(MeshError::InvalidArgument(format!(
            "boundary quadrature order must be in 1..=10, got {order}"
        )));
    }
    let (nodes, weights) = gauss_legendre_unit(order);
    let mut points = Vec::with_capacity(order * mesh.boundary_edges().len());
    for (i, b) in mesh.boundary_edges().iter().enumerate() {
        let (p, q) = (mesh.vertices()[b.start], mesh.vertices()[b.end]);
        for (s, w) in nodes.iter().zip(&weights) {
            points.push(BoundaryPoint {
                segment: i,
                point: [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])],
                weight: w * b.length,
                normal: b.normal,
                tangent: b.tangent,
                arclength: b.arclength + s * b.length,
            });
        }
    }
    Ok(BoundaryQuadrature { order, points })
}
