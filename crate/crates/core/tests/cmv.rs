mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use schurwalk::cmv::{assemble_cells, build_cmv, one_sided_cmv};
use schurwalk::linalg::{self, CMat};
use schurwalk::walk::build_walk_ring;
use schurwalk::{Boundary, Error, Layer, PlacedBlock, SchurParamSeq, Tail, ThetaBlock, TwoSidedSeq, WalkSpec};

fn random_pair_seq(r: &mut impl Rng, cells: i64) -> TwoSidedSeq {
    let mut seq = TwoSidedSeq::constant([c(0.3, 0.0), c(-0.6, 0.0)]);
    seq.left = [c(-0.2, 0.0), c(0.7, 0.0)];
    for n in -2 * cells..2 * cells {
        seq.overrides.insert(n, c(r.gen_range(-0.9..0.9), r.gen_range(-0.3..0.3)));
    }
    seq
}

#[test]
fn theta_of_zero_is_swap() {
    let t = ThetaBlock::real(0.0).unwrap();
    assert_eq!(t.matrix(), ThetaBlock::swap(1).matrix());
    assert!(matches!(ThetaBlock::real(1.2), Err(Error::InvalidParameter(_))));
}

#[test]
fn theta_blocks_are_unitary_and_real_ones_square_to_one() {
    let mut r = rng(10);
    for _ in 0..50 {
        let a = Complex64::from_polar(r.gen_range(0.0..1.0), r.gen_range(-PI..PI));
        let t = ThetaBlock::scalar(a).unwrap();
        assert!(linalg::unitarity_residual(t.matrix()) < 1e-14);
        let real = ThetaBlock::real(a.re).unwrap();
        assert!(linalg::involution_residual(real.matrix()) < 1e-14);
    }
}

#[test]
fn ring_split_step_equals_shift_coin_product() {
    let mut r = rng(11);
    let radius = 3;
    let n_cells = 2 * radius + 1;
    let mut window = BTreeMap::new();
    for x in -(radius as i64)..=radius as i64 {
        window.insert(x, (r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5)));
    }
    let spec = WalkSpec::split_step((0.2, 0.4), (0.2, 0.4), window.clone()).unwrap();
    let w = build_walk_ring(&spec, radius).unwrap();
    let dense = w.unitary.dense().unwrap();

    let c1: Vec<CMat> = window.values().map(|&(t1, _)| rotation(t1)).collect();
    let c2: Vec<CMat> = window.values().map(|&(_, t2)| rotation(t2)).collect();
    let oracle = shift_down(n_cells, 1) * cellwise(&c2) * shift_up(n_cells, 1) * cellwise(&c1);
    assert!(max_diff(&dense, &oracle) < 1e-14);

    let product = w.chiral.gamma_tilde_dense() * w.chiral.gamma_dense();
    assert!(max_diff(&dense, &product) < 1e-14);

    // γ is the swap following C1
    let swap = cellwise(&vec![ThetaBlock::swap(1).matrix().clone(); n_cells]);
    assert!(max_diff(&w.chiral.gamma_dense(), &(&swap * cellwise(&c1))) < 1e-14);
}

#[test]
fn ring_spectrum_lies_on_unit_circle() {
    let mut r = rng(12);
    let seq = random_pair_seq(&mut r, 6);
    let w = build_cmv(&seq, -6, 5, Boundary::Ring).unwrap();
    let (vals, _) = linalg::eigen(&w.dense().unwrap()).unwrap();
    assert_eq!(vals.len(), 24);
    for v in vals {
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn factorized_action_matches_dense() {
    let mut r = rng(13);
    let seq = random_pair_seq(&mut r, 8);
    for boundary in [Boundary::OpenDecoupled, Boundary::Ring] {
        let w = build_cmv(&seq, -8, 7, boundary).unwrap();
        let dense = w.dense().unwrap();
        let even = w.layer_even().dense(w.dim());
        let odd = w.layer_odd().dense(w.dim());
        assert!(max_diff(&dense, &(&even * &odd)) < 1e-14);
        assert!(linalg::unitarity_residual(&dense) < 1e-13);
        let v: Vec<Complex64> = (0..w.dim()).map(|_| c(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))).collect();
        let col = CMat::from_fn(w.dim(), 1, |i, _| v[i]);
        let expect = &dense * &col;
        let expect_adj = linalg::adjoint(&dense) * &col;
        let got = w.apply(&v);
        let got_adj = w.apply_adjoint(&v);
        for i in 0..w.dim() {
            assert!((got[i] - expect[(i, 0)]).norm() < 1e-13);
            assert!((got_adj[i] - expect_adj[(i, 0)]).norm() < 1e-13);
        }
        assert!(max_diff(&w.adjoint().dense().unwrap(), &linalg::adjoint(&dense)) < 1e-14);
    }
}

#[test]
fn open_truncation_has_bounded_band() {
    let seq = TwoSidedSeq::constant([c(0.3, 0.0), c(-0.5, 0.0)]);
    let w = build_cmv(&seq, -20, 20, Boundary::OpenDecoupled).unwrap();
    let (kl, ku) = w.bandwidth();
    assert!(kl <= 2 && ku <= 2, "bandwidth ({kl}, {ku})");
}

#[test]
fn resolvent_matches_dense_inverse() {
    let mut r = rng(14);
    let seq = random_pair_seq(&mut r, 5);
    let w = build_cmv(&seq, -5, 4, Boundary::OpenDecoupled).unwrap();
    let dense = w.dense().unwrap();
    let dim = w.dim();
    for (start, len) in [(0, 1), (4, 2), (9, 3), (dim - 2, 2)] {
        let z = Complex64::from_polar(r.gen_range(0.0..0.95), r.gen_range(-PI..PI));
        let mut shifted = dense.clone();
        for i in 0..dim {
            if i < start || i >= start + len {
                shifted[(i, i)] -= z;
            }
        }
        let oracle = linalg::submatrix(&linalg::inverse(&shifted).unwrap(), start, start, len, len);
        let got = w.resolvent_column(start, len, z).unwrap();
        assert!(max_diff(&got, &oracle) < 1e-11, "block {start}+{len}");
    }
    // whole space: (W - 0)^{-1} = W*
    let all = w.resolvent_column(0, dim, c(0.4, 0.3)).unwrap();
    assert!(max_diff(&all, &linalg::adjoint(&dense)) < 1e-13);
    // f(0) = P W* P
    let f0 = w.resolvent_column(6, 2, c(0.0, 0.0)).unwrap();
    assert!(max_diff(&f0, &linalg::submatrix(&linalg::adjoint(&dense), 6, 6, 2, 2)) < 1e-14);
    assert!(w.resolvent_column(0, 1, c(1.0, 0.0)).is_err());
}

#[test]
fn one_sided_cmv_carries_its_schur_parameters() {
    let mut r = rng(15);
    for len in [1usize, 2, 5, 8] {
        let params: Vec<Complex64> =
            (0..len).map(|_| Complex64::from_polar(r.gen_range(0.0..0.9), r.gen_range(-PI..PI))).collect();
        let w = one_sided_cmv(&params).unwrap();
        let seq = SchurParamSeq::new(params.clone(), Tail::Terminating(c(1.0, 0.0))).unwrap();
        for _ in 0..5 {
            let z = Complex64::from_polar(r.gen_range(0.0..0.95), r.gen_range(-PI..PI));
            let f = w.resolvent_column(0, 1, z).unwrap()[(0, 0)];
            let expect = seq.eval(z).unwrap();
            assert!((f - expect).norm() < 1e-11, "len {len}: {f} vs {expect}");
        }
    }
}

#[test]
fn resolvent_localises_in_gapped_tails() {
    let seq = TwoSidedSeq::constant([c(0.5, 0.0), c(0.6, 0.0)]);
    let z = c(0.3, 0.5);
    let small = build_cmv(&seq, -20, 20, Boundary::OpenDecoupled).unwrap();
    let big = build_cmv(&seq, -40, 40, Boundary::OpenDecoupled).unwrap();
    let a = small.resolvent_column(40, 2, z).unwrap();
    let b = big.resolvent_column(80, 2, z).unwrap();
    assert!(max_diff(&a, &b) < 1e-12);
}

#[test]
fn restrict_respects_invariant_ranges() {
    let seq = TwoSidedSeq::constant([c(0.3, 0.0), c(-0.5, 0.0)]);
    let mut w = build_cmv(&seq, 0, 5, Boundary::OpenDecoupled).unwrap();
    assert!(matches!(w.restrict(0, 5), Err(Error::InconsistentWindow(_))));
    // removing the γ̃ block across the cut between cells 2 and 3 decouples the halves
    w.layer_even_mut().remove_at(5).unwrap();
    let left = w.restrict(0, 6).unwrap();
    let right = w.restrict(6, 6).unwrap();
    let dense = w.dense().unwrap();
    assert!(max_diff(&left.dense().unwrap(), &linalg::submatrix(&dense, 0, 0, 6, 6)) < 1e-15);
    assert!(max_diff(&right.dense().unwrap(), &linalg::submatrix(&dense, 6, 6, 6, 6)) < 1e-15);
    assert!(linalg::max_abs(&linalg::submatrix(&dense, 0, 6, 6, 6)) == 0.0);
    let ring = build_cmv(&seq, 0, 5, Boundary::Ring).unwrap();
    assert!(ring.restrict(0, 6).is_err());
}

#[test]
fn window_errors() {
    let seq = TwoSidedSeq::constant([c(0.3, 0.0), c(-0.5, 0.0)]);
    assert!(matches!(build_cmv(&seq, 3, 2, Boundary::OpenDecoupled), Err(Error::InconsistentWindow(_))));
    assert!(matches!(
        assemble_cells(0, 1, 1, |_| ThetaBlock::real(0.0), |_| ThetaBlock::real(0.0), Boundary::Ring),
        Err(Error::InconsistentWindow(_))
    ));
    let w = build_cmv(&seq, 0, 9, Boundary::OpenDecoupled).unwrap();
    assert_eq!(w.dense_capped(8), Err(Error::DimensionCapExceeded { dim: 20, cap: 8 }));
    let bad = Layer::new(vec![PlacedBlock { offset: 3, block: ThetaBlock::real(0.1).unwrap() }]);
    assert!(schurwalk::BandedUnitary::new(4, bad, Layer::default(), Boundary::OpenDecoupled).is_err());
}

#[test]
fn two_sided_halves() {
    let mut seq = TwoSidedSeq::constant([c(0.1, 0.0), c(0.2, 0.0)]);
    seq.left = [c(0.3, 0.0), c(0.4, 0.0)];
    seq.overrides.insert(1, c(0.9, 0.0));
    let right = seq.right_half(0).unwrap();
    for n in 0..10 {
        assert_eq!(right.param(n).unwrap(), seq.alpha(n as i64));
    }
    let left = seq.left_half(0).unwrap();
    for n in 0..10 {
        assert_eq!(left.param(n).unwrap(), -seq.alpha(-(n as i64)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prop_truncations_are_unitary(alphas in proptest::collection::vec((-0.99f64..0.99, -0.99f64..0.99), 4..24),
                                    ring in any::<bool>()) {
        let mut seq = TwoSidedSeq::constant([c(0.0, 0.0), c(0.0, 0.0)]);
        for (n, &(re, im)) in alphas.iter().enumerate() {
            let a = c(re, im);
            let a = if a.norm() >= 1.0 { a / (1.01 * a.norm()) } else { a };
            seq.overrides.insert(n as i64, a);
        }
        let cells = (alphas.len() as i64 + 1) / 2;
        let boundary = if ring { Boundary::Ring } else { Boundary::OpenDecoupled };
        let w = build_cmv(&seq, 0, cells.max(2) - 1, boundary).unwrap();
        prop_assert!(linalg::unitarity_residual(&w.dense().unwrap()) < 1e-12);
    }
}
