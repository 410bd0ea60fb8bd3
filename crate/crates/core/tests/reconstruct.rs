use std::sync::Arc;

use aemlab_core::fem::{interpolate, relative_l2_error, FieldFE};
use aemlab_core::forward::Problem;
use aemlab_core::medium::{Gammas, MediumModel, Region, Shape, SourceModel};
use aemlab_core::mesh::gen_disk_mesh;
use aemlab_core::pipeline::{demo_nonradiating, run_pipeline};
use aemlab_core::reconstruct::{
    classify_case, energy_identity_residual, gamma_kappa_at_points, nonradiating_source, reconstruct_i1,
    reconstruct_ii4, recover_j_galerkin, BoundaryMode, CaseLabel, DEFAULT_RELATIVE_TOL,
};
use aemlab_core::scenario::{ReferenceCase, ScenarioConfig};
use aemlab_core::{Complex64, Error};
use proptest::prelude::*;

const I1: Gammas = Gammas { eps: 0.25, sigma: 0.35, j: 0.0 };
const II4: Gammas = Gammas { eps: 0.35, sigma: 0.35, j: 0.65 };

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn problem(level: u32, g: Gammas) -> Problem {
    Problem::new(Arc::new(gen_disk_mesh(1.0, level).unwrap()), MediumModel::reference_default(g)).unwrap()
}

fn smooth(p: &Problem) -> FieldFE {
    interpolate(&p.mesh, |x| [c(x[1].sin(), x[0]), c(1.0 - x[0] * x[1], 0.5 * x[1])], 4)
}

fn noiseless(case: ReferenceCase, level: u32) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::reference(case, level);
    cfg.noise.nu = 0.0;
    cfg
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn i1_division_is_exact_for_discrete_fields() {
    let p = problem(3, I1);
    let e = smooth(&p);
    let kg = gamma_kappa_at_points(&p);
    let q: Vec<[Complex64; 2]> = e.sample(&p.cache).iter().zip(&kg).map(|(v, k)| [v[0] * k, v[1] * k]).collect();
    let r = reconstruct_i1(&p, &q, DEFAULT_RELATIVE_TOL, None).unwrap();
    assert!(relative_l2_error(&p.cache, &r.e_rec, &e).unwrap() < 1e-10);
    assert!(r.errors.is_none());
}

#[test]
fn i1_closed_loop_noiseless() {
    let run = run_pipeline(&noiseless(ReferenceCase::I1, 4), true).unwrap();
    assert!(run.report.errors.unwrap().j <= 0.10);
}

#[test]
fn ii4_closed_loop_noiseless() {
    let run = run_pipeline(&noiseless(ReferenceCase::II4, 4), true).unwrap();
    let errors = run.report.errors.unwrap();
    assert!(errors.e.unwrap() <= 0.02);
    assert!(errors.j <= 0.05);
}

#[test]
fn ii4_impedance_variant_matches_noiseless_field() {
    let mut cfg = noiseless(ReferenceCase::II4, 3);
    cfg.boundary_mode = BoundaryMode::Impedance;
    let run = run_pipeline(&cfg, true).unwrap();
    assert!(run.report.errors.unwrap().e.unwrap() <= 1e-8);
}

#[test]
fn zero_data_gives_zero_reconstruction() {
    let p = problem(2, I1);
    let zeros = vec![[c(0.0, 0.0); 2]; p.cache.n_points()];
    let r = reconstruct_i1(&p, &zeros, DEFAULT_RELATIVE_TOL, None).unwrap();
    assert!(r.e_rec.dofs.iter().chain(&r.j_rec.dofs).all(|v| v.norm() == 0.0));

    let p = problem(2, II4);
    let trace = p.extract_traces(&FieldFE::zeros(&p.mesh));
    for mode in [BoundaryMode::Dirichlet, BoundaryMode::Impedance] {
        let r = reconstruct_ii4(&p, &zeros, &trace, mode, DEFAULT_RELATIVE_TOL, None).unwrap();
        assert!(r.e_rec.dofs.iter().chain(&r.j_rec.dofs).all(|v| v.norm() == 0.0));
    }
}

#[test]
fn wrong_case_is_refused() {
    let p = problem(2, II4);
    let zeros = vec![[c(0.0, 0.0); 2]; p.cache.n_points()];
    assert!(matches!(reconstruct_i1(&p, &zeros, DEFAULT_RELATIVE_TOL, None), Err(Error::Case(_))));
    let p = problem(2, I1);
    let trace = p.extract_traces(&FieldFE::zeros(&p.mesh));
    assert!(matches!(
        reconstruct_ii4(&p, &zeros, &trace, BoundaryMode::Dirichlet, DEFAULT_RELATIVE_TOL, None),
        Err(Error::Case(_))
    ));
}

#[test]
fn recovered_current_of_forward_solution() {
    let p = problem(4, II4);
    let source = SourceModel::reference_default();
    let (e, _) = p.solve_impedance(Some(&source), None, None).unwrap();
    let (j, _) = recover_j_galerkin(&p, &e).unwrap();
    let truth = aemlab_core::reconstruct::interpolate_source(&p.mesh, &source);
    assert!(relative_l2_error(&p.cache, &j, &truth).unwrap() <= 0.05);
    let (zero, _) = recover_j_galerkin(&p, &FieldFE::zeros(&p.mesh)).unwrap();
    assert!(zero.dofs.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn recovery_is_linear() {
    let p = problem(3, II4);
    let e1 = smooth(&p);
    let e2 = interpolate(&p.mesh, |x| [c(0.0, x[0] * x[0]), c(x[1], 1.0)], 4);
    let (j1, _) = recover_j_galerkin(&p, &e1).unwrap();
    let (j2, _) = recover_j_galerkin(&p, &e2).unwrap();
    let (j12, _) = recover_j_galerkin(&p, &e1.add(&e2)).unwrap();
    assert!(relative_l2_error(&p.cache, &j12, &j1.add(&j2)).unwrap() <= 1e-10);
}

#[test]
fn source_scaling_is_equivariant() {
    for case in [ReferenceCase::I1, ReferenceCase::II4] {
        let base = noiseless(case, 3);
        let r1 = run_pipeline(&base, true).unwrap();
        let alpha = 3.7;
        let mut scaled = base.clone();
        scaled.source = base.source.scaled(alpha);
        let r2 = run_pipeline(&scaled, true).unwrap();
        let expected = r1.reconstruction.result.j_rec.scaled(alpha.into());
        let p = &r1.forward.problem;
        assert!(relative_l2_error(&p.cache, &r2.reconstruction.result.j_rec, &expected).unwrap() <= 1e-9);
        let (e1, e2) = (r1.report.errors.unwrap().j, r2.report.errors.unwrap().j);
        assert!((e1 - e2).abs() <= 1e-9 * e1.max(1e-3));
    }
}

#[test]
fn error_grows_with_noise_level() {
    let levels = [0.0, 0.005, 0.01, 0.02];
    let medians: Vec<f64> = levels
        .iter()
        .map(|&nu| {
            median(
                (0..5)
                    .map(|seed| {
                        let mut cfg = ScenarioConfig::reference(ReferenceCase::II4, 3);
                        cfg.noise.nu = nu;
                        cfg.noise.seed = seed;
                        run_pipeline(&cfg, true).unwrap().report.errors.unwrap().j
                    })
                    .collect(),
            )
        })
        .collect();
    for w in medians.windows(2) {
        assert!(w[1] > w[0], "{medians:?}");
    }
}

#[test]
fn nonradiating_source_is_invisible_at_the_boundary() {
    let cfg = ScenarioConfig::reference(ReferenceCase::II4, 4);
    let r = demo_nonradiating(&cfg, [-0.1, 0.2], 0.4, 1.0).unwrap();
    assert!(r.trace_difference <= 1e-8);
    assert!(r.field_identity <= 1e-8);
    assert!((r.field_difference - r.gradient_norm).abs() <= 1e-8 * r.gradient_norm);
    assert!(r.gradient_norm > 0.1);
}

#[test]
fn nonradiating_bump_must_stay_inside() {
    let mesh = gen_disk_mesh(1.0, 2).unwrap();
    assert!(matches!(
        nonradiating_source(&mesh, &SourceModel::reference_default(), [0.6, 0.0], 0.38, 1.0),
        Err(Error::Config(_))
    ));
}

#[test]
fn energy_identity_zero_case() {
    let p = problem(2, II4);
    let u = FieldFE::zeros(&p.mesh);
    let dq = vec![[c(0.0, 0.0); 2]; p.cache.n_points()];
    let r = energy_identity_residual(&p, &u, &dq, &p.extract_traces(&u)).unwrap();
    assert_eq!((r.real, r.imag), (0.0, 0.0));
}

#[test]
fn energy_identities_on_noisy_difference() {
    let run = run_pipeline(&ScenarioConfig::reference(ReferenceCase::II4, 4), true).unwrap();
    let e = run.report.energy.unwrap();
    assert!(e.real <= 0.02 && e.imag <= 0.02, "{e:?}");
    assert!(e.imag_lhs > 0.0);
}

fn with_insulator(mut m: MediumModel) -> MediumModel {
    m.regions.push(Region {
        name: "insulator".into(),
        shape: Shape::Disk { center: [0.0, -0.6], radius: 0.1 },
        eps_r: 4.0,
        sigma: 0.0,
    });
    m
}

#[test]
fn classification_table() {
    let reference = |g| MediumModel::reference_default(g);
    let rows = [
        (reference(Gammas { eps: 0.25, sigma: 0.35, j: 0.0 }), CaseLabel::UniqueI1),
        (reference(Gammas { eps: 0.0, sigma: 0.0, j: 0.0 }), CaseLabel::NonUniqueI2),
        (reference(Gammas { eps: 0.4, sigma: 0.4, j: 0.4 }), CaseLabel::NonUniqueII1),
        (reference(Gammas { eps: 0.4, sigma: 0.1, j: 0.4 }), CaseLabel::UniqueII2),
        (with_insulator(reference(Gammas { eps: 0.4, sigma: 0.1, j: 0.4 })), CaseLabel::NonUniqueII3),
        (reference(Gammas { eps: 0.35, sigma: 0.35, j: 0.65 }), CaseLabel::UniqueII4),
    ];
    for (medium, label) in rows {
        let got = classify_case(&medium, DEFAULT_RELATIVE_TOL);
        assert_eq!(got.label, label);
        assert_eq!(got.label.is_unique(), matches!(label, CaseLabel::UniqueI1 | CaseLabel::UniqueII2 | CaseLabel::UniqueII4));
        assert_eq!(got.a.is_some(), medium.gammas.j != 0.0);
    }
    let insulating = with_insulator(reference(Gammas { eps: 0.0, sigma: 0.3, j: 0.0 }));
    assert_eq!(classify_case(&insulating, DEFAULT_RELATIVE_TOL).label, CaseLabel::NonUniqueI2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_admissible_medium_gets_a_label(
        ge in 0.0f64..1.0,
        gs in 0.0f64..1.0,
        gj in prop_oneof![Just(0.0), 0.01f64..1.0],
        eps in 1.0f64..99.0,
        sigma in prop_oneof![Just(0.0), 0.01f64..10.0],
    ) {
        let medium = MediumModel::homogeneous(std::f64::consts::PI, 1.0, eps, sigma, Gammas { eps: ge, sigma: gs, j: gj });
        let c = classify_case(&medium, DEFAULT_RELATIVE_TOL);
        if gj == 0.0 {
            prop_assert!(matches!(c.label, CaseLabel::UniqueI1 | CaseLabel::NonUniqueI2));
            prop_assert_eq!(c.label == CaseLabel::UniqueI1, ge > 0.0 || (gs > 0.0 && sigma > 0.0));
        } else {
            prop_assert!(!matches!(c.label, CaseLabel::UniqueI1 | CaseLabel::NonUniqueI2));
            prop_assert_eq!(c.label == CaseLabel::UniqueII4, ge != gj);
        }
    }
}
