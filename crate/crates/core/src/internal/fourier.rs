//! Discrete inversion of sampled Fourier data `q̂(k) = ∫ q(x) e^{ik·x} dx`.

use num_complex::Complex64;

/// Uniform `n × n` node grid on `[-half_width, half_width]²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGrid {
    pub n: usize,
    pub half_width: f64,
}

impl CartesianGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Bilinear interpolation of node values (row-major, `values[iy * n + ix]`).
    /// Points outside the grid are clamped to its boundary.
    pub fn bilinear(&self, values: &[Complex64], x: [f64; 2]) -> Complex64 {
        let h = self.spacing();
        let locate = |c: f64| {
            let s = ((c + self.half_width) / h).clamp(0.0, (self.n - 1) as f64);
            let i = (s.floor() as usize).min(self.n - 2);
            (i, s - i as f64)
        };
        let (ix, tx) = locate(x[0]);
        let (iy, ty) = locate(x[1]);
        let v = |i: usize, j: usize| values[j * self.n + i];
        v(ix, iy) * ((1.0 - tx) * (1.0 - ty))
            + v(ix + 1, iy) * (tx * (1.0 - ty))
            + v(ix, iy + 1) * ((1.0 - tx) * ty)
            + v(ix + 1, iy + 1) * (tx * ty)
    }
}

/// Integer wave-vector indices `m` with `|m_x Δk|, |m_y Δk| ≤ k_max`, row-major in `(m_y, m_x)`.
pub fn k_grid(k_max: f64, dk: f64) -> Vec<[i64; 2]> {
    let m = (k_max / dk + 1e-9).floor() as i64;
    let mut out = Vec::with_capacity(((2 * m + 1) * (2 * m + 1)) as usize);
    for my in -m..=m {
        for mx in -m..=m {
            out.push([mx, my]);
        }
    }
    out
}

/// `q(x) = (2π)⁻² Σ q̂(k) e^{−ik·x} Δk²` evaluated on every grid node.
pub fn inverse_transform_grid(indices: &[[i64; 2]], qhat: &[Complex64], dk: f64, grid: &CartesianGrid) -> Vec<Complex64> {
    assert_eq!(indices.len(), qhat.len());
    let m = indices.iter().map(|i| i[0].abs().max(i[1].abs())).max().unwrap_or(0);
    let width = (2 * m + 1) as usize;
    // separable phase tables e^{-i m Δk x_i}
    let table: Vec<Complex64> = (0..grid.n)
        .flat_map(|i| {
            let x = grid.coord(i);
            (-m..=m).map(move |mm| Complex64::from_polar(1.0, -(mm as f64) * dk * x))
        })
        .collect();
    let scale = dk * dk / (4.0 * std::f64::consts::PI * std::f64::consts::PI);
    let mut out = vec![Complex64::new(0.0, 0.0); grid.n * grid.n];
    for iy in 0..grid.n {
        for ix in 0..grid.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for (idx, q) in indices.iter().zip(qhat) {
                let ex = table[ix * width + (idx[0] + m) as usize];
                let ey = table[iy * width + (idx[1] + m) as usize];
                acc += q * ex * ey;
            }
            out[iy * grid.n + ix] = acc * scale;
        }
    }
    out
}
