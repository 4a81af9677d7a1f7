mod common;

use std::f64::consts::{FRAC_PI_4, FRAC_PI_6, PI};

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use schurwalk::linalg;
use schurwalk::schur::*;
use schurwalk::Error;

#[test]
fn unstep_matches_hand_arithmetic() {
    let v = schur_unstep(c(0.2, 0.0), c(0.3, 0.0), c(0.5, 0.0)).unwrap();
    assert!((v - c(0.4 / 1.03, 0.0)).norm() < 1e-15);
    let back = schur_step(v, c(0.3, 0.0), c(0.5, 0.0)).unwrap();
    assert!((back - c(0.2, 0.0)).norm() < 1e-14);
}

#[test]
fn step_trivial_cases() {
    let a = c(0.4, -0.2);
    assert_eq!(schur_step(a, a, c(0.7, 0.1)).unwrap(), c(0.0, 0.0));
    let w = c(0.3, 0.2);
    let z = c(0.5, -0.5);
    assert!((schur_step(w, c(0.0, 0.0), z).unwrap() - w / z).norm() < 1e-15);
}

#[test]
fn step_rejects_bad_input() {
    assert!(matches!(schur_step(c(0.1, 0.0), c(1.0, 0.0), c(0.5, 0.0)), Err(Error::InvalidParameter(_))));
    assert!(matches!(schur_step(c(0.1, 0.0), c(0.2, 0.0), c(0.0, 0.0)), Err(Error::InvalidParameter(_))));
    // f = 1/conj(alpha) makes the denominator vanish
    let a = c(0.5, 0.0);
    assert_eq!(schur_step(c(2.0, 0.0), a, c(0.5, 0.0)), Err(Error::DivisionDegenerate));
}

#[test]
fn unstep_fixes_plus_minus_one() {
    for a in [-0.99, -0.5, 0.0, 0.3, 0.999] {
        for s in [1.0, -1.0] {
            for z in [1.0, -1.0] {
                let v = schur_unstep(c(s, 0.0), c(a, 0.0), c(z, 0.0)).unwrap();
                // z w is ±1 and (±1 + a)/(1 ± a) = ±1
                assert!((v - c(s * z, 0.0)).norm() < 1e-15, "a={a} s={s} z={z}");
            }
        }
    }
}

#[test]
fn step_of_periodic_tail_is_shifted_tail() {
    let (st, s) = (0.3, 0.4);
    let z = c(0.5, 0.0);
    let f = periodic2_schur(s, st, z).unwrap();
    let shifted = schur_step(f, c(st, 0.0), z).unwrap();
    let oracle = periodic2_schur(st, s, z).unwrap();
    assert!((shifted - oracle).norm() < 1e-13);
}

#[test]
fn periodic_closed_form_matches_iteration_inside_disk() {
    let mut r = rng(1);
    for _ in 0..200 {
        let s = r.gen_range(-0.95..0.95);
        let st = r.gen_range(-0.95..0.95);
        let rad: f64 = r.gen_range(0.0..0.9);
        let z = Complex64::from_polar(rad, r.gen_range(-PI..PI));
        let exact = periodic2_schur(s, st, z).unwrap();
        let iter = schur_by_iteration(&[], st, s, z, 4000);
        assert!((exact - iter).norm() < 1e-10, "s={s} st={st} z={z}: {exact} vs {iter}");
    }
}

#[test]
fn periodic_limit_at_origin_is_first_parameter() {
    let mut r = rng(2);
    for _ in 0..10 {
        let s = r.gen_range(-0.9..0.9);
        let st = r.gen_range(-0.9..0.9);
        let dir = Complex64::from_polar(1.0, r.gen_range(-PI..PI));
        for k in 2..8 {
            let rad = 10f64.powi(-k);
            let v = periodic2_schur(s, st, dir * rad).unwrap();
            assert!((v - c(st, 0.0)).norm() < 10.0 * rad, "error not O(|z|) at |z|={rad}");
        }
        assert!((periodic2_schur(s, st, c(0.0, 0.0)).unwrap() - c(st, 0.0)).norm() < 1e-15);
    }
}

#[test]
fn periodic_boundary_signs() {
    let angles = [-1.3, -0.7, -0.2, 0.0, 0.4, 0.9, 1.4];
    for &t in &angles {
        for &tt in &angles {
            let (s, st) = (f64::sin(t), f64::sin(tt));
            if tt + t != 0.0 {
                let v = periodic2_schur(s, st, c(1.0, 0.0)).unwrap();
                assert!((v - c((tt + t).signum(), 0.0)).norm() < 1e-9, "f(1) for ({tt},{t}) = {v}");
            }
            if tt - t != 0.0 {
                let v = periodic2_schur(s, st, c(-1.0, 0.0)).unwrap();
                assert!((v - c((tt - t).signum(), 0.0)).norm() < 1e-9, "f(-1) for ({tt},{t}) = {v}");
            }
        }
    }
    // coined-walk tail value
    let v = periodic2_schur(f64::sin(-0.6), 0.0, c(1.0, 0.0)).unwrap();
    assert!((v - c(-1.0, 0.0)).norm() < 1e-12);
}

#[test]
fn periodic_unimodular_exactly_on_gap_arcs() {
    let mut r = rng(3);
    for _ in 0..5 {
        let t: f64 = r.gen_range(-1.4..1.4);
        let tt: f64 = r.gen_range(-1.4..1.4);
        let gap = GapAnalysis::from_angles(tt, t);
        for k in 0..1000 {
            let w = -PI + (k as f64 + 0.5) * 2.0 * PI / 1000.0;
            let delta = gap.circle_discriminant(w);
            if delta.abs() < 1e-6 {
                continue;
            }
            let v = periodic2_schur(t.sin(), tt.sin(), Complex64::from_polar(1.0, w)).unwrap();
            let unimodular = (v.norm() - 1.0).abs() < 1e-10;
            assert_eq!(unimodular, delta > 0.0, "w={w} delta={delta} |f|={}", v.norm());
        }
    }
}

#[test]
fn gap_analysis_fields() {
    let g = GapAnalysis::from_angles(0.3, -0.3);
    assert!(!g.gapped_at_plus);
    assert!(g.gapped_at_minus);
    let g = GapAnalysis::from_angles(0.3, 0.3);
    assert!(g.gapped_at_plus);
    assert!(!g.gapped_at_minus);
    let g = GapAnalysis::from_angles(0.2, 0.5);
    assert!((g.branch_point_cosines[0] - 0.7f64.cos()).abs() < 1e-15);
    assert!((g.branch_point_cosines[1] + (-0.3f64).cos()).abs() < 1e-15);
    // the discriminant vanishes at the branch points
    for cw in g.branch_point_cosines {
        assert!(g.circle_discriminant(cw.acos()).abs() < 1e-14);
    }
}

#[test]
fn eval_boundary_examples() {
    let seq = SchurParamSeq::two_periodic(&[0.9, -0.5, 0.1], 0.0, FRAC_PI_4.sin()).unwrap();
    let v = eval_boundary(&seq, BoundaryPoint::Plus).unwrap();
    assert_eq!(v.value, c(1.0, 0.0));
    assert!(v.exact);

    let seq = SchurParamSeq::two_periodic(&[], (-FRAC_PI_6).sin(), 0.0).unwrap();
    assert_eq!(eval_boundary(&seq, BoundaryPoint::Minus).unwrap().value, c(-1.0, 0.0));

    let seq = SchurParamSeq::two_periodic(&[], 0.0, 0.0).unwrap();
    assert!(matches!(eval_boundary(&seq, BoundaryPoint::Plus), Err(Error::GapClosed { .. })));

    let seq = SchurParamSeq::new(vec![c(0.3, 0.0)], Tail::Terminating(c(0.0, 1.0))).unwrap();
    let expected = (c(0.0, 1.0) + 0.3) / (1.0 + 0.3 * c(0.0, 1.0));
    assert!((eval_boundary(&seq, BoundaryPoint::Plus).unwrap().value - expected).norm() < 1e-15);
}

#[test]
fn eval_boundary_complex_head_matches_radial_limit() {
    let head = [c(0.0, 0.4)];
    let seq = SchurParamSeq::new(head.to_vec(), Tail::Periodic(vec![c(0.0, 0.0), c(0.5, 0.0)])).unwrap();
    let v = eval_boundary(&seq, BoundaryPoint::Plus).unwrap();
    assert!((v.value.norm() - 1.0).abs() < 1e-12);
    // radial oracle: independent iteration at r = 1 - h with Richardson extrapolation
    let h = 1e-6;
    let f = |r: f64| schur_by_iteration(&head, 0.0, 0.5, c(r, 0.0), 200_000);
    let radial = 2.0 * f(1.0 - h) - f(1.0 - 2.0 * h);
    assert!((v.value - radial).norm() < 1e-6, "{} vs {radial}", v.value);
}

#[test]
fn parity_transforms() {
    let seq = SchurParamSeq::two_periodic(&[0.3, -0.2], 0.25, -0.6).unwrap();
    let neg = apply_parity_transform(&seq, ParityTransform::Negate);
    assert_eq!(neg.head(), &[c(-0.3, 0.0), c(0.2, 0.0)]);
    let odd = apply_parity_transform(&seq, ParityTransform::InterleaveOdd);
    let even = apply_parity_transform(&seq, ParityTransform::InterleaveEven);
    let mut r = rng(4);
    for _ in 0..50 {
        let z = Complex64::from_polar(r.gen_range(0.0..0.95), r.gen_range(-PI..PI));
        let f = seq.eval(z * z).unwrap();
        assert!((neg.eval(z).unwrap() + seq.eval(z).unwrap()).norm() < 1e-12);
        assert!((odd.eval(z).unwrap() + odd.eval(-z).unwrap()).norm() < 1e-12);
        assert!((even.eval(z).unwrap() - even.eval(-z).unwrap()).norm() < 1e-12);
        assert!((even.eval(z).unwrap() - f).norm() < 1e-12);
        assert!((odd.eval(z).unwrap() - z * f).norm() < 1e-12);
    }
    let head_only = SchurParamSeq::new(vec![c(0.7, 0.0)], Tail::Zero).unwrap();
    let odd = apply_parity_transform(&head_only, ParityTransform::InterleaveOdd);
    assert_eq!(odd.head(), &[c(0.0, 0.0), c(0.7, 0.0)]);
}

#[test]
fn interleave_even_of_periodic_tail_at_point_six() {
    let seq = SchurParamSeq::two_periodic(&[], 0.3, 0.4).unwrap();
    let even = apply_parity_transform(&seq, ParityTransform::InterleaveEven);
    let z = c(0.6, 0.0);
    let oracle = periodic2_schur(0.4, 0.3, z * z).unwrap();
    assert!((even.eval(z).unwrap() - oracle).norm() < 1e-12);
}

#[test]
fn caratheodory_transform() {
    assert_eq!(schur_to_caratheodory(c(0.0, 0.0), c(0.3, 0.2)).unwrap(), c(1.0, 0.0));
    // λ f(λ) = 1 on the circle
    let lambda = Complex64::from_polar(1.0, 0.7);
    assert_eq!(schur_to_caratheodory(lambda.conj(), lambda), Err(Error::MassPointSingular));
    let z = c(0.0, 0.2);
    let f = periodic2_schur(0.3, 0.4, z).unwrap();
    assert!(schur_to_caratheodory(f, z).unwrap().re >= 0.0);

    let mut r = rng(5);
    for _ in 0..20 {
        let u = random_unitary(6, &mut r);
        let basis = linalg::submatrix(&linalg::identity(6), 0, 0, 6, 2);
        let z = Complex64::from_polar(r.gen_range(0.0..0.95), r.gen_range(-PI..PI));
        let f = subspace_schur(&u, &basis, z).unwrap();
        let big_f = schur_to_caratheodory_matrix(&f, z).unwrap();
        let herm = linalg::scale(&linalg::add(&big_f, &linalg::adjoint(&big_f)), c(0.5, 0.0));
        let (vals, _) = linalg::hermitian_eigen(&herm).unwrap();
        assert!(vals.iter().all(|&v| v > -1e-10), "Re F not positive: {vals:?}");
    }
}

#[test]
fn subspace_schur_of_whole_space_is_adjoint() {
    let mut r = rng(6);
    let u = random_unitary(5, &mut r);
    let f = subspace_schur(&u, &linalg::identity(5), c(0.4, -0.3)).unwrap();
    assert!(max_diff(&f, &linalg::adjoint(&u)) < 1e-12);
}

#[test]
fn mass_points_of_small_examples() {
    let u = linalg::diag(&[c(1.0, 0.0), c(0.0, 1.0)]);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let basis = CMatExt::col(&[c(s, 0.0), c(s, 0.0)]);
    let pts = schurwalk::index::mass_points(&u, &basis).unwrap();
    assert_eq!(pts.len(), 2);
    for p in &pts {
        assert!((p.eigenvalue - c(1.0, 0.0)).norm() < 1e-10 || (p.eigenvalue - c(0.0, 1.0)).norm() < 1e-10);
        assert_eq!(p.kernel.ncols(), 1);
    }

    let theta = schurwalk::ThetaBlock::real(0.35).unwrap().matrix().clone();
    let e0 = CMatExt::col(&[c(1.0, 0.0), c(0.0, 0.0)]);
    let mut pts: Vec<f64> = schurwalk::index::mass_points(&theta, &e0).unwrap().iter().map(|p| p.eigenvalue.re).collect();
    pts.sort_by(f64::total_cmp);
    assert!((pts[0] + 1.0).abs() < 1e-10 && (pts[1] - 1.0).abs() < 1e-10);

    let not_cyclic = linalg::diag(&[c(1.0, 0.0), c(1.0, 0.0)]);
    assert!(matches!(schurwalk::index::mass_points(&not_cyclic, &e0), Err(Error::NotCyclic { .. })));
}

struct CMatExt;
impl CMatExt {
    fn col(v: &[Complex64]) -> linalg::CMat {
        linalg::CMat::from_fn(v.len(), 1, |i, _| v[i])
    }
}

#[test]
fn power_series_zeroth_coefficient_is_cell_block_of_adjoint() {
    let seq = schurwalk::TwoSidedSeq::constant([c(0.3, 0.0), c(-0.5, 0.0)]);
    let w = schurwalk::cmv::build_cmv(&seq, -5, 5, schurwalk::Boundary::OpenDecoupled).unwrap();
    let coeffs = power_series_coefficients(&w, 10, 2, 3).unwrap();
    let dense = w.dense().unwrap();
    let adj = linalg::adjoint(&dense);
    assert!(max_diff(&coeffs[0], &linalg::submatrix(&adj, 10, 10, 2, 2)) < 1e-15);
    // the series reproduces the resolvent Schur function
    let z = c(0.3, 0.2);
    let coeffs = power_series_coefficients(&w, 10, 2, 120).unwrap();
    let mut sum = linalg::zeros(2, 2);
    let mut zn = c(1.0, 0.0);
    for k in &coeffs {
        sum = linalg::add(&sum, &linalg::scale(k, zn));
        zn *= z;
    }
    let f = w.resolvent_column(10, 2, z).unwrap();
    assert!(max_diff(&sum, &f) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn prop_round_trip(ar in -0.99f64..0.99, ai in -0.99f64..0.99,
                       vr in 0.0f64..1.0, vphase in -PI..PI,
                       zr in 0.05f64..1.0, zphase in -PI..PI) {
        let a = c(ar, ai);
        prop_assume!(a.norm() < 0.99);
        let v = Complex64::from_polar(vr, vphase);
        let z = Complex64::from_polar(zr, zphase);
        let f = schur_unstep(v, a, z).unwrap();
        let back = schur_step(f, a, z).unwrap();
        prop_assert!((back - v).norm() < 1e-10 * (1.0 / zr));
    }

    #[test]
    fn prop_contractive(s in -0.999f64..0.999, st in -0.999f64..0.999,
                        rad in 0.0f64..1.0, phase in -PI..PI) {
        let z = Complex64::from_polar(rad, phase);
        match periodic2_schur(s, st, z) {
            Ok(v) => prop_assert!(v.norm() <= 1.0 + 1e-10, "|f| = {}", v.norm()),
            Err(Error::BranchAmbiguous { .. }) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn prop_real_head_preserves_tail_sign(head in proptest::collection::vec(-0.99f64..0.99, 0..12),
                                          t in -1.4f64..1.4, tt in -1.4f64..1.4) {
        prop_assume!((t + tt).abs() > 1e-6);
        let seq = SchurParamSeq::two_periodic(&head, tt.sin(), t.sin()).unwrap();
        let v = eval_boundary(&seq, BoundaryPoint::Plus).unwrap();
        prop_assert_eq!(v.value, c((t + tt).signum(), 0.0));
    }
}
