use std::f64::consts::PI;
use std::sync::Arc;

use aemlab_core::fem::{
    apply_dirichlet_tangential, assemble_boundary_load, assemble_curl_curl, assemble_forms, assemble_load, assemble_mass,
    evaluate_curl, evaluate_field, interpolate, interpolate_gradient, relative_l2_error, FemError, FieldFE,
    QuadratureCache, SparseMatrix, SparsityPattern,
};
use aemlab_core::linsolve::solve;
use aemlab_core::medium::{Gammas, MediumModel};
use aemlab_core::mesh::{boundary_quadrature, gen_disk_mesh, Mesh2D, LOCAL_EDGES};
use aemlab_core::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn ones(n: usize) -> Vec<Complex64> {
    vec![c(1.0, 0.0); n]
}

fn smooth(x: [f64; 2]) -> [Complex64; 2] {
    [c((2.0 * x[1]).sin(), 0.3 * x[0]), c(x[0] * x[1], (x[0] - x[1]).cos())]
}

fn mass_matrix(mesh: &Mesh2D, cache: &QuadratureCache) -> SparseMatrix {
    let pattern = Arc::new(SparsityPattern::for_edges(mesh));
    assemble_mass(cache, &pattern, &ones(cache.n_points())).unwrap()
}

fn curl_matrix(mesh: &Mesh2D, cache: &QuadratureCache) -> SparseMatrix {
    let pattern = Arc::new(SparsityPattern::for_edges(mesh));
    assemble_curl_curl(cache, &pattern, &ones(cache.n_points())).unwrap()
}

fn pseudo_random(n: usize, seed: u64) -> Vec<Complex64> {
    let mut s = seed;
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    (0..n).map(|_| c(next(), next())).collect()
}

#[test]
fn reference_triangle_curl_entries_equal_two() {
    let mesh = Mesh2D::from_parts(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let s = curl_matrix(&mesh, &cache);
    for e in 0..3 {
        assert!((s.get(e, e) - c(2.0, 0.0)).norm() < 1e-14);
    }
}

#[test]
fn constant_field_mass_is_disk_area() {
    let mesh = gen_disk_mesh(1.0, 4).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let u = interpolate(&mesh, |_| [c(1.0, 0.0), c(0.0, 0.0)], 2);
    let m = mass_matrix(&mesh, &cache);
    let integral = m.bilinear(&u.dofs, &u.dofs);
    assert!(integral.im.abs() < 1e-14);
    assert!((integral.re - PI).abs() / PI < 5e-3, "{}", integral.re);
}

#[test]
fn all_forms_are_symmetric() {
    let mesh = gen_disk_mesh(1.0, 3).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let medium = MediumModel::reference_default(Gammas { eps: 0.35, sigma: 0.35, j: 0.65 });
    let forms = assemble_forms(&mesh, &cache, &medium.coefficients(&cache), medium.lambda).unwrap();
    for m in [&forms.curl_curl, &forms.mass_eps, &forms.mass_sigma, &forms.mass, &forms.boundary] {
        assert!(m.symmetry_defect() <= 1e-14 * m.max_abs().max(1.0));
    }
    let a = forms.impedance_system(medium.omega);
    assert!(a.symmetry_defect() <= 1e-14 * a.max_abs());
}

#[test]
fn gradients_lie_in_the_curl_kernel() {
    let mesh = gen_disk_mesh(1.0, 3).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let nodal = pseudo_random(mesh.n_vertices(), 7);
    let g = interpolate_gradient(&mesh, &nodal);
    assert!(g.sample_curl(&cache).iter().all(|v| v.norm() < 1e-12));
    let sg = curl_matrix(&mesh, &cache).mul_vec(&g.dofs);
    assert!(sg.iter().all(|v| v.norm() < 1e-12));
}

#[test]
fn constant_fields_are_reproduced() {
    let mesh = gen_disk_mesh(1.0, 2).unwrap();
    let v = [c(0.7, -0.2), c(-1.3, 0.4)];
    let u = interpolate(&mesh, |_| v, 1);
    let pts: Vec<(usize, [f64; 3])> = (0..mesh.n_triangles()).map(|t| (t, [0.2, 0.5, 0.3])).collect();
    for w in evaluate_field(&mesh, &u, &pts) {
        assert!((w[0] - v[0]).norm() < 1e-13 && (w[1] - v[1]).norm() < 1e-13);
    }
    assert!(evaluate_curl(&mesh, &u, &pts).iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn zero_load_gives_zero_vector() {
    let mesh = gen_disk_mesh(1.0, 2).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let f = vec![[c(0.0, 0.0); 2]; cache.n_points()];
    assert!(assemble_load(&mesh, &cache, &f).unwrap().iter().all(|v| *v == c(0.0, 0.0)));
}

#[test]
fn non_finite_load_is_rejected() {
    let mesh = gen_disk_mesh(1.0, 1).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let mut f = vec![[c(1.0, 0.0); 2]; cache.n_points()];
    let p = cache.triangle_points(5).start;
    f[p][1] = c(f64::NAN, 0.0);
    assert_eq!(assemble_load(&mesh, &cache, &f), Err(FemError::NonFiniteSample { element: 5 }));
}

/// `∫_T (λ_a∇λ_b − λ_b∇λ_a)·c = (|T|/3)(∇λ_b − ∇λ_a)·c` for constant `c`.
#[test]
fn load_of_piecewise_constant_gradient_matches_closed_form() {
    let mesh = gen_disk_mesh(1.0, 3).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let nodal = pseudo_random(mesh.n_vertices(), 3);
    let grad = interpolate_gradient(&mesh, &nodal);
    let f = grad.sample(&cache);
    let rhs = assemble_load(&mesh, &cache, &f).unwrap();

    let mut expected = vec![c(0.0, 0.0); mesh.n_edges()];
    for t in 0..mesh.n_triangles() {
        let g = mesh.barycentric_gradients(t);
        let tri = mesh.triangles()[t];
        let mut cg = [c(0.0, 0.0); 2];
        for k in 0..3 {
            cg[0] += nodal[tri[k]] * g[k][0];
            cg[1] += nodal[tri[k]] * g[k][1];
        }
        let area = mesh.triangle_area(t);
        for (k, &(a, b)) in LOCAL_EDGES.iter().enumerate() {
            let (edge, sign) = mesh.triangle_edges()[t][k];
            let d = [g[b][0] - g[a][0], g[b][1] - g[a][1]];
            expected[edge] += (cg[0] * d[0] + cg[1] * d[1]) * (sign * area / 3.0);
        }
    }
    for (r, e) in rhs.iter().zip(&expected) {
        assert!((r - e).norm() < 1e-12, "{r} vs {e}");
    }
}

#[test]
fn unit_boundary_data_loads_orientation_signs() {
    let mesh = gen_disk_mesh(1.0, 2).unwrap();
    let bq = boundary_quadrature(&mesh, 3).unwrap();
    let rhs = assemble_boundary_load(&mesh, &bq, &ones(bq.len())).unwrap();
    let mut on_boundary = vec![false; mesh.n_edges()];
    for b in mesh.boundary_edges() {
        on_boundary[b.edge] = true;
        assert!((rhs[b.edge] - c(b.orientation(), 0.0)).norm() < 1e-14);
    }
    for (e, r) in rhs.iter().enumerate() {
        if !on_boundary[e] {
            assert_eq!(*r, c(0.0, 0.0));
        }
    }
}

#[test]
fn boundary_load_is_local_to_its_segment() {
    let mesh = gen_disk_mesh(1.0, 2).unwrap();
    let bq = boundary_quadrature(&mesh, 3).unwrap();
    let seg = 5;
    let g: Vec<Complex64> = bq.points.iter().map(|p| if p.segment == seg { c(2.0, -1.0) } else { c(0.0, 0.0) }).collect();
    let rhs = assemble_boundary_load(&mesh, &bq, &g).unwrap();
    let target = mesh.boundary_edges()[seg].edge;
    for (e, r) in rhs.iter().enumerate() {
        assert_eq!(*r != c(0.0, 0.0), e == target);
    }
}

#[test]
fn dirichlet_elimination_reproduces_discrete_field() {
    let mesh = gen_disk_mesh(1.0, 3).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let mut a = curl_matrix(&mesh, &cache);
    a.axpy(c(1.0, 0.0), &mass_matrix(&mesh, &cache));
    let w = interpolate(&mesh, smooth, 4);
    let rhs = a.mul_vec(&w.dofs);
    let circ: Vec<Complex64> = mesh.boundary_edges().iter().map(|b| w.dofs[b.edge] * b.orientation()).collect();
    let sys = apply_dirichlet_tangential(&mesh, &a, &rhs, &circ).unwrap();
    assert_eq!(sys.n_constraints(), mesh.boundary_edges().len());
    assert_eq!(sys.free_dofs().len(), mesh.n_edges() - mesh.boundary_edges().len());
    let (x, _) = solve(&sys.matrix, &sys.rhs).unwrap();
    let full = sys.expand(&x);
    for (u, v) in full.iter().zip(&w.dofs) {
        assert!((u - v).norm() < 1e-10);
    }
    for b in mesh.boundary_edges() {
        assert_eq!(full[b.edge], w.dofs[b.edge]);
    }
}

#[test]
fn dirichlet_data_length_is_checked() {
    let mesh = gen_disk_mesh(1.0, 1).unwrap();
    let a = SparseMatrix::identity(mesh.n_edges());
    let rhs = vec![c(0.0, 0.0); mesh.n_edges()];
    assert!(matches!(
        apply_dirichlet_tangential(&mesh, &a, &rhs, &[c(0.0, 0.0)]),
        Err(FemError::BoundaryData(_))
    ));
}

/// A discrete gradient `G` solves `curl curl E − κE = −κG` exactly when its
/// own boundary circulations are imposed.
#[test]
fn gradient_patch_test() {
    let mesh = gen_disk_mesh(1.0, 3).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let kappa = c(3.0, 1.5);
    let g = interpolate_gradient(&mesh, &pseudo_random(mesh.n_vertices(), 11));
    let m = mass_matrix(&mesh, &cache);
    let mut a = curl_matrix(&mesh, &cache);
    a.axpy(-kappa, &m);
    let rhs: Vec<Complex64> = m.mul_vec(&g.dofs).iter().map(|v| -kappa * v).collect();
    let circ: Vec<Complex64> = mesh.boundary_edges().iter().map(|b| g.dofs[b.edge] * b.orientation()).collect();
    let sys = apply_dirichlet_tangential(&mesh, &a, &rhs, &circ).unwrap();
    let (x, _) = solve(&sys.matrix, &sys.rhs).unwrap();
    let e = FieldFE::new(&mesh, sys.expand(&x)).unwrap();
    assert!(relative_l2_error(&cache, &e, &g).unwrap() < 1e-10);
}

#[test]
fn relative_error_trivial_cases() {
    let mesh = gen_disk_mesh(1.0, 2).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let v = interpolate(&mesh, smooth, 3);
    let zero = FieldFE::zeros(&mesh);
    assert_eq!(relative_l2_error(&cache, &v, &v).unwrap(), 0.0);
    assert!((relative_l2_error(&cache, &v.scaled(c(1.1, 0.0)), &v).unwrap() - 0.1).abs() < 1e-12);
    assert!((relative_l2_error(&cache, &zero, &v).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(relative_l2_error(&cache, &v, &zero), Err(FemError::ZeroNorm));
}

#[test]
fn field_length_is_checked() {
    let mesh = gen_disk_mesh(1.0, 1).unwrap();
    assert!(matches!(FieldFE::new(&mesh, vec![c(0.0, 0.0); 3]), Err(FemError::DimensionMismatch { .. })));
}

#[test]
fn assembly_is_deterministic() {
    let mesh = gen_disk_mesh(1.0, 3).unwrap();
    let cache = QuadratureCache::default_for(&mesh);
    let medium = MediumModel::reference_default(Gammas { eps: 0.35, sigma: 0.35, j: 0.65 });
    let coeffs = medium.coefficients(&cache);
    let a = assemble_forms(&mesh, &cache, &coeffs, 1.0).unwrap().impedance_system(PI);
    let b = assemble_forms(&mesh, &cache, &coeffs, 1.0).unwrap().impedance_system(PI);
    assert_eq!(a.values(), b.values());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn load_is_linear(a in -2.0f64..2.0, b in -2.0f64..2.0, seed in any::<u64>()) {
        let mesh = gen_disk_mesh(1.0, 2).unwrap();
        let cache = QuadratureCache::default_for(&mesh);
        let n = cache.n_points();
        let r1 = pseudo_random(2 * n, seed);
        let r2 = pseudo_random(2 * n, seed ^ 0x5555);
        let f1: Vec<[Complex64; 2]> = (0..n).map(|i| [r1[2 * i], r1[2 * i + 1]]).collect();
        let f2: Vec<[Complex64; 2]> = (0..n).map(|i| [r2[2 * i], r2[2 * i + 1]]).collect();
        let comb: Vec<[Complex64; 2]> = f1.iter().zip(&f2).map(|(x, y)| [x[0] * a + y[0] * b, x[1] * a + y[1] * b]).collect();
        let l1 = assemble_load(&mesh, &cache, &f1).unwrap();
        let l2 = assemble_load(&mesh, &cache, &f2).unwrap();
        let lc = assemble_load(&mesh, &cache, &comb).unwrap();
        for i in 0..lc.len() {
            prop_assert!((lc[i] - (l1[i] * a + l2[i] * b)).norm() < 1e-12);
        }
    }

    #[test]
    fn mass_is_positive_definite(seed in any::<u64>()) {
        let mesh = gen_disk_mesh(1.0, 2).unwrap();
        let cache = QuadratureCache::default_for(&mesh);
        let m = mass_matrix(&mesh, &cache);
        let x: Vec<Complex64> = pseudo_random(mesh.n_edges(), seed).iter().map(|v| c(v.re, 0.0)).collect();
        prop_assert!(m.bilinear(&x, &x).re > 0.0);
    }
}
