//! Dense reference constructions shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use schurwalk::linalg::{self, CMat};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Inverse Schur step written out independently of the library.
pub fn mobius_unstep(w: Complex64, a: Complex64, z: Complex64) -> Complex64 {
    (z * w + a) / (1.0 + a.conj() * z * w)
}

/// Schur function of a head followed by the two-periodic tail `(st, s)`,
/// from `depth` backward steps starting at 0. Only valid for `|z| < 1`.
pub fn schur_by_iteration(head: &[Complex64], st: f64, s: f64, z: Complex64, depth: usize) -> Complex64 {
    let mut w = Complex64::new(0.0, 0.0);
    for _ in 0..depth {
        w = mobius_unstep(w, c(s, 0.0), z);
        w = mobius_unstep(w, c(st, 0.0), z);
    }
    for &a in head.iter().rev() {
        w = mobius_unstep(w, a, z);
    }
    w
}

pub fn random_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let m = CMat::from_fn(n, n, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let qr = m.qr();
    qr.compute_Q()
}

/// Random unitary with the prescribed eigenvalues, each repeated `mult[k]` times.
pub fn unitary_with_spectrum(values: &[Complex64], mult: &[usize], rng: &mut impl Rng) -> CMat {
    let n: usize = mult.iter().sum();
    let q = random_unitary(n, rng);
    let mut d = Vec::with_capacity(n);
    for (v, &m) in values.iter().zip(mult) {
        d.extend(std::iter::repeat(*v).take(m));
    }
    &q * linalg::diag(&d) * q.adjoint()
}

/// `|x↑⟩ -> |x+1 ↑⟩` on a ring of `n` cells of `2d` scalars; `↓` is fixed.
pub fn shift_up(n_cells: usize, d: usize) -> CMat {
    let dim = 2 * d * n_cells;
    let mut m = linalg::zeros(dim, dim);
    for x in 0..n_cells {
        for r in 0..d {
            let from = 2 * d * x + r;
            let to_cell = (x + 1) % n_cells;
            m[(2 * d * to_cell + r, from)] = c(1.0, 0.0);
            m[(2 * d * x + d + r, 2 * d * x + d + r)] = c(1.0, 0.0);
        }
    }
    m
}

/// `|x↓⟩ -> |x-1 ↓⟩` on a ring; `↑` is fixed.
pub fn shift_down(n_cells: usize, d: usize) -> CMat {
    let dim = 2 * d * n_cells;
    let mut m = linalg::zeros(dim, dim);
    for x in 0..n_cells {
        for r in 0..d {
            let from = 2 * d * x + d + r;
            let to_cell = if x == 0 { n_cells - 1 } else { x - 1 };
            m[(2 * d * to_cell + d + r, from)] = c(1.0, 0.0);
            m[(2 * d * x + r, 2 * d * x + r)] = c(1.0, 0.0);
        }
    }
    m
}

/// Cell-diagonal operator with the given `2d × 2d` blocks.
pub fn cellwise(blocks: &[CMat]) -> CMat {
    let k = blocks[0].nrows();
    let dim = k * blocks.len();
    let mut m = linalg::zeros(dim, dim);
    for (x, b) in blocks.iter().enumerate() {
        linalg::set_block(&mut m, k * x, k * x, b);
    }
    m
}

/// Rotation coin `[[cos θ, -sin θ], [sin θ, cos θ]]`.
pub fn rotation(theta: f64) -> CMat {
    linalg::from_real(2, 2, |i, j| match (i, j) {
        (0, 0) | (1, 1) => theta.cos(),
        (0, 1) => -theta.sin(),
        _ => theta.sin(),
    })
}

pub fn max_diff(a: &CMat, b: &CMat) -> f64 {
    linalg::max_abs_diff(a, b)
}
