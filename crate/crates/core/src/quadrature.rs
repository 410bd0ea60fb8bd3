//! Quadrature rules on the reference triangle and on line segments.

use std::f64::consts::PI;

/// Symmetric rule on the reference triangle: barycentric points and weights
/// normalized so that they sum to one (multiply by the triangle area).
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Rule exact for polynomials of total degree `degree` (1..=5).
    pub fn with_degree(degree: usize) -> Option<Self> {
        let mut rule = TriangleRule {
            degree,
            points: Vec::new(),
            weights: Vec::new(),
        };
        match degree {
            1 => rule.push_centroid(1.0),
            2 => rule.push_orbit3(1.0 / 6.0, 1.0 / 3.0),
            3 => {
                rule.push_centroid(-27.0 / 48.0);
                rule.push_orbit3(0.2, 25.0 / 48.0);
            }
            4 => {
                rule.push_orbit3(0.445_948_490_915_965, 0.223_381_589_678_011);
                rule.push_orbit3(0.091_576_213_509_771, 0.109_951_743_655_322);
            }
            5 => {
                rule.push_centroid(0.225);
                rule.push_orbit3(0.470_142_064_105_115, 0.132_394_152_788_506);
                rule.push_orbit3(0.101_286_507_323_456, 0.125_939_180_544_827);
            }
            _ => return None,
        }
        Some(rule)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push_centroid(&mut self, w: f64) {
        self.points.push([1.0 / 3.0; 3]);
        self.weights.push(w);
    }

    // the three permutations of (a, a, 1 - 2a)
    fn push_orbit3(&mut self, a: f64, w: f64) {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a, b], [a, b, a], [b, a, a]] {
            self.points.push(p);
            self.weights.push(w);
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one Gauss point required");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [0, 1].
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        w.iter().map(|t| 0.5 * t).collect(),
    )
}
