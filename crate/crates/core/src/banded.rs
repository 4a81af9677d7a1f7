//! Band storage with LU factorization and partial pivoting.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{CMat, ZERO};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, with
/// room for the `kl` extra super-diagonals created by row pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![ZERO; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if j + self.kl < i || j > i + self.ku + self.kl {
            ZERO
        } else {
            self.data[self.slot(i, j)]
        }
    }

    /// Adds `v` at `(i, j)`; the position must lie inside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        assert!(j + self.kl >= i && j <= i + self.ku, "entry ({i}, {j}) outside the band");
        let k = self.slot(i, j);
        self.data[k] += v;
    }

    /// LU factorization with partial pivoting, reusable across right-hand sides.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let scale = self.data.iter().map(|x| x.norm()).fold(0.0f64, f64::max);
        let reach = self.ku + self.kl;
        let mut pivots = Vec::with_capacity(n);
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).norm();
            for i in k + 1..=last {
                let v = self.get(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                return Err(Error::SingularSolve);
            }
            pivots.push(p);
            let jmax = (k + reach).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (a, b) = (self.slot(k, j), self.slot(p, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last {
                let l = self.get(i, k) / pivot;
                // the multiplier is kept in the eliminated slot
                let s = self.slot(i, k);
                self.data[s] = l;
                if l == ZERO {
                    continue;
                }
                for j in k + 1..=jmax {
                    let u = self.get(k, j);
                    if u != ZERO {
                        let s = self.slot(i, j);
                        self.data[s] -= l * u;
                    }
                }
            }
        }
        Ok(BandLu { lu: self, pivots })
    }

    /// Solves `A X = B` in place, overwriting `rhs` with `X`.
    pub fn solve_in_place(self, rhs: &mut CMat) -> Result<()> {
        self.factor()?.solve_in_place(rhs)
    }
}

/// Factorized band matrix.
#[derive(Debug, Clone)]
pub struct BandLu {
    lu: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve_in_place(&self, rhs: &mut CMat) -> Result<()> {
        let m = &self.lu;
        let n = m.n;
        if rhs.nrows() != n {
            return Err(Error::Linalg("band solve: shape mismatch".into()));
        }
        let reach = m.ku + m.kl;
        for c in 0..rhs.ncols() {
            for k in 0..n {
                let p = self.pivots[k];
                if p != k {
                    let t = rhs[(k, c)];
                    rhs[(k, c)] = rhs[(p, c)];
                    rhs[(p, c)] = t;
                }
                let u = rhs[(k, c)];
                if u == ZERO {
                    continue;
                }
                for i in k + 1..=(k + m.kl).min(n - 1) {
                    rhs[(i, c)] -= m.get(i, k) * u;
                }
            }
            for i in (0..n).rev() {
                let mut acc = rhs[(i, c)];
                for j in i + 1..=(i + reach).min(n - 1) {
                    acc -= m.get(i, j) * rhs[(j, c)];
                }
                rhs[(i, c)] = acc / m.get(i, i);
            }
        }
        Ok(())
    }
}
