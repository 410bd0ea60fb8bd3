//! Compressed sparse row storage with a pattern shared between all forms
//! assembled on the same mesh.

use std::sync::Arc;

use num_complex::Complex64;

use crate::mesh::Mesh2D;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl SparsityPattern {
    /// Square pattern from (row, col) pairs; duplicates are merged.
    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (r, c) in entries {
            assert!(r < n && c < n, "entry ({r}, {c}) outside {n}x{n}");
            rows[r].push(c);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend(row);
            row_ptr.push(col_idx.len());
        }
        SparsityPattern { n, row_ptr, col_idx }
    }

    /// Edge-to-edge coupling through shared triangles.
    pub fn for_edges(mesh: &Mesh2D) -> Self {
        let entries = mesh.triangle_edges().iter().flat_map(|te| {
            let ids = [te[0].0, te[1].0, te[2].0];
            (0..3).flat_map(move |i| (0..3).map(move |j| (ids[i], ids[j])))
        });
        Self::from_entries(mesh.n_edges(), entries)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Storage position of (r, c), if it belongs to the pattern.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r];
        self.row(r).binary_search(&c).ok().map(|k| start + k)
    }

    pub fn is_structurally_symmetric(&self) -> bool {
        (0..self.n).all(|r| self.row(r).iter().all(|&c| self.position(c, r).is_some()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<Complex64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); pattern.nnz()];
        SparseMatrix { pattern, values }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, Complex64)]) -> Self {
        let pattern = Arc::new(SparsityPattern::from_entries(n, triplets.iter().map(|&(r, c, _)| (r, c))));
        let mut m = Self::zeros(pattern);
        for &(r, c, v) in triplets {
            m.add(r, c, v);
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect();
        Self::from_triplets(n, &t)
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Adds `v` at (r, c). Panics if the entry is outside the pattern.
    pub fn add(&mut self, r: usize, c: usize, v: Complex64) {
        let k = self
            .pattern
            .position(r, c)
            .unwrap_or_else(|| panic!("entry ({r}, {c}) not in sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.pattern
            .position(r, c)
            .map_or(Complex64::new(0.0, 0.0), |k| self.values[k])
    }

    /// Iterates over stored (row, col, value) entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            let start = self.pattern.row_ptr[r];
            self.pattern
                .row(r)
                .iter()
                .enumerate()
                .map(move |(k, &c)| (r, c, self.values[start + k]))
        })
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim(), "dimension mismatch in matrix-vector product");
        (0..self.dim())
            .map(|r| {
                let start = self.pattern.row_ptr[r];
                self.pattern
                    .row(r)
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| self.values[start + k] * x[c])
                    .sum()
            })
            .collect()
    }

    /// Bilinear form `yᵀ A x` (no conjugation).
    pub fn bilinear(&self, y: &[Complex64], x: &[Complex64]) -> Complex64 {
        self.mul_vec(x).iter().zip(y).map(|(ax, y)| ax * y).sum()
    }

    pub fn scale(&mut self, s: Complex64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// `self += s * other`; both must share the same pattern.
    pub fn axpy(&mut self, s: Complex64, other: &SparseMatrix) {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern,
            "axpy requires identical sparsity patterns"
        );
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max |A − Aᵀ| over stored entries.
    pub fn symmetry_defect(&self) -> f64 {
        self.triplets()
            .map(|(r, c, v)| (v - self.get(c, r)).norm())
            .fold(0.0, f64::max)
    }

    /// Principal submatrix on the given (sorted, unique) index set.
    pub fn submatrix(&self, keep: &[usize]) -> SparseMatrix {
        let mut local = vec![usize::MAX; self.dim()];
        for (i, &g) in keep.iter().enumerate() {
            local[g] = i;
        }
        let triplets: Vec<_> = keep
            .iter()
            .flat_map(|&r| {
                let start = self.pattern.row_ptr[r];
                let local = &local;
                self.pattern.row(r).iter().enumerate().filter_map(move |(k, &c)| {
                    (local[c] != usize::MAX).then_some((local[r], local[c], self.values[start + k]))
                })
            })
            .collect();
        SparseMatrix::from_triplets(keep.len(), &triplets)
    }
}
