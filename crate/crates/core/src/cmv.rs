//! Two-layer factorized unitaries built from Θ blocks.
//!
//! A [`BandedUnitary`] is `W = L_even · L_odd`, each layer a direct sum of
//! small unitary blocks placed on contiguous scalar indices. With the
//! walk conventions, `L_odd` is the cell-aligned layer γ and `L_even` the
//! half-shifted layer γ̃, so that `W = γ̃ γ`.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::schur::{SchurParamSeq, Tail};

/// A unitary block of a layer: `Θ(α) = [[conj α, ρ], [ρ, -α]]` in the scalar
/// case, or a general `2d × 2d` block such as `[[B, A*], [A, B̂]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaBlock {
    alpha: Option<Complex64>,
    matrix: CMat,
}

impl ThetaBlock {
    pub fn scalar(alpha: Complex64) -> Result<Self> {
        let r2 = alpha.norm_sqr();
        if r2 > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!("|alpha| = {} > 1", alpha.norm())));
        }
        let rho = Complex64::new((1.0 - r2).max(0.0).sqrt(), 0.0);
        let matrix = CMat::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => alpha.conj(),
            (1, 1) => -alpha,
            _ => rho,
        });
        Ok(Self { alpha: Some(alpha), matrix })
    }

    pub fn real(alpha: f64) -> Result<Self> {
        Self::scalar(Complex64::new(alpha, 0.0))
    }

    /// A general square block; unitarity is the caller's responsibility.
    pub fn from_matrix(matrix: CMat) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols(), "block must be square");
        Self { alpha: None, matrix }
    }

    /// `[[0, 1_d], [1_d, 0]]`, which is `Θ(0)` for `d = 1`.
    pub fn swap(d: usize) -> Self {
        let m = linalg::from_real(2 * d, 2 * d, |i, j| if (i + d) % (2 * d) == j { 1.0 } else { 0.0 });
        Self { alpha: (d == 1).then_some(ZERO), matrix: m }
    }

    pub fn alpha(&self) -> Option<Complex64> {
        self.alpha
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { alpha: None, matrix: linalg::adjoint(&self.matrix) }
    }
}

/// A block acting on scalar indices `offset, offset + 1, ...` (modulo the
/// dimension in ring mode).
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedBlock {
    pub offset: usize,
    pub block: ThetaBlock,
}

/// A direct sum of placed blocks; identity on uncovered indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layer {
    blocks: Vec<PlacedBlock>,
}

impl Layer {
    pub fn new(mut blocks: Vec<PlacedBlock>) -> Self {
        blocks.sort_by_key(|b| b.offset);
        Self { blocks }
    }

    pub fn blocks(&self) -> &[PlacedBlock] {
        &self.blocks
    }

    /// Removes the block placed at `offset`, leaving the identity there.
    pub fn remove_at(&mut self, offset: usize) -> Option<PlacedBlock> {
        let pos = self.blocks.iter().position(|b| b.offset == offset)?;
        Some(self.blocks.remove(pos))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            blocks: self
                .blocks
                .iter()
                .map(|b| PlacedBlock { offset: b.offset, block: b.block.adjoint() })
                .collect(),
        }
    }

    fn apply_with(&self, v: &[Complex64], adjoint: bool) -> Vec<Complex64> {
        let dim = v.len();
        let mut out = v.to_vec();
        for pb in &self.blocks {
            let m = pb.block.matrix();
            let k = m.nrows();
            for i in 0..k {
                let mut acc = ZERO;
                for j in 0..k {
                    let entry = if adjoint { m[(j, i)].conj() } else { m[(i, j)] };
                    acc += entry * v[(pb.offset + j) % dim];
                }
                out[(pb.offset + i) % dim] = acc;
            }
        }
        out
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.apply_with(v, false)
    }

    pub fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.apply_with(v, true)
    }

    pub fn dense(&self, dim: usize) -> CMat {
        let mut out = linalg::identity(dim);
        for pb in &self.blocks {
            let m = pb.block.matrix();
            let k = m.nrows();
            for i in 0..k {
                out[((pb.offset + i) % dim, (pb.offset + i) % dim)] = ZERO;
            }
            for j in 0..k {
                for i in 0..k {
                    out[((pb.offset + i) % dim, (pb.offset + j) % dim)] = m[(i, j)];
                }
            }
        }
        out
    }

    /// Index map: scalar index -> (block index, local index).
    fn index_map(&self, dim: usize) -> Vec<Option<(usize, usize)>> {
        let mut map = vec![None; dim];
        for (b, pb) in self.blocks.iter().enumerate() {
            for l in 0..pb.block.size() {
                map[(pb.offset + l) % dim] = Some((b, l));
            }
        }
        map
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Blocks straddling the cut are replaced by the identity.
    OpenDecoupled,
    /// Blocks wrap around the end of the index range.
    Ring,
}

/// `W = layer_even · layer_odd` on `C^dim`.
#[derive(Debug, Clone)]
pub struct BandedUnitary {
    dim: usize,
    layer_even: Layer,
    layer_odd: Layer,
    boundary: Boundary,
}

fn validate_layer(layer: &Layer, dim: usize, boundary: Boundary) -> Result<()> {
    let mut used = vec![false; dim];
    for pb in layer.blocks() {
        let k = pb.block.size();
        if boundary == Boundary::OpenDecoupled && pb.offset + k > dim {
            return Err(Error::InconsistentWindow(format!(
                "block at {} of size {k} exceeds dimension {dim}",
                pb.offset
            )));
        }
        if pb.offset >= dim || k > dim {
            return Err(Error::InconsistentWindow(format!("block at {} does not fit", pb.offset)));
        }
        for l in 0..k {
            let idx = (pb.offset + l) % dim;
            if used[idx] {
                return Err(Error::InconsistentWindow(format!("blocks overlap at index {idx}")));
            }
            used[idx] = true;
        }
    }
    Ok(())
}

impl BandedUnitary {
    pub fn new(dim: usize, layer_even: Layer, layer_odd: Layer, boundary: Boundary) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InconsistentWindow("empty window".into()));
        }
        validate_layer(&layer_even, dim, boundary)?;
        validate_layer(&layer_odd, dim, boundary)?;
        Ok(Self { dim, layer_even, layer_odd, boundary })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn layer_even(&self) -> &Layer {
        &self.layer_even
    }

    pub fn layer_odd(&self) -> &Layer {
        &self.layer_odd
    }

    pub fn layer_even_mut(&mut self) -> &mut Layer {
        &mut self.layer_even
    }

    pub fn layer_odd_mut(&mut self) -> &mut Layer {
        &mut self.layer_odd
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        self.layer_even.apply(&self.layer_odd.apply(v))
    }

    pub fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        self.layer_odd.apply_adjoint(&self.layer_even.apply_adjoint(v))
    }

    /// `W*` in the same two-layer form (the layers swap roles).
    pub fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            layer_even: self.layer_odd.adjoint(),
            layer_odd: self.layer_even.adjoint(),
            boundary: self.boundary,
        }
    }

    /// The operator on the invariant index range `start..start + len`, which
    /// must not be cut by any block.
    pub fn restrict(&self, start: usize, len: usize) -> Result<Self> {
        if self.boundary == Boundary::Ring || len == 0 || start + len > self.dim {
            return Err(Error::InconsistentWindow(format!("cannot restrict to {start}..{}", start + len)));
        }
        let pick = |layer: &Layer| -> Result<Layer> {
            let mut out = Vec::new();
            for pb in layer.blocks() {
                let end = pb.offset + pb.block.size();
                if end <= start || pb.offset >= start + len {
                    continue;
                }
                if pb.offset < start || end > start + len {
                    return Err(Error::InconsistentWindow(format!(
                        "block at {} crosses the range {start}..{}",
                        pb.offset,
                        start + len
                    )));
                }
                out.push(PlacedBlock { offset: pb.offset - start, block: pb.block.clone() });
            }
            Ok(Layer::new(out))
        };
        Self::new(len, pick(&self.layer_even)?, pick(&self.layer_odd)?, Boundary::OpenDecoupled)
    }

    /// Nonzero entries of column `j`.
    fn sparse_columns(&self) -> Vec<Vec<(usize, Complex64)>> {
        let dim = self.dim;
        let odd_map = self.layer_odd.index_map(dim);
        let even_map = self.layer_even.index_map(dim);
        let mut cols = Vec::with_capacity(dim);
        for j in 0..dim {
            let first: Vec<(usize, Complex64)> = match odd_map[j] {
                Some((b, l)) => {
                    let pb = &self.layer_odd.blocks[b];
                    let m = pb.block.matrix();
                    (0..m.nrows()).map(|i| ((pb.offset + i) % dim, m[(i, l)])).collect()
                }
                None => vec![(j, ONE)],
            };
            let mut acc: BTreeMap<usize, Complex64> = BTreeMap::new();
            for (k, v) in first {
                if v == ZERO {
                    continue;
                }
                match even_map[k] {
                    Some((b, l)) => {
                        let pb = &self.layer_even.blocks[b];
                        let m = pb.block.matrix();
                        for i in 0..m.nrows() {
                            *acc.entry((pb.offset + i) % dim).or_insert(ZERO) += m[(i, l)] * v;
                        }
                    }
                    None => *acc.entry(k).or_insert(ZERO) += v,
                }
            }
            cols.push(acc.into_iter().filter(|(_, v)| *v != ZERO).collect());
        }
        cols
    }

    /// Lower and upper bandwidth of the (non-wrapping) sparsity pattern.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for (j, col) in self.sparse_columns().iter().enumerate() {
            for &(i, _) in col {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    pub fn dense_capped(&self, cap: usize) -> Result<CMat> {
        if self.dim > cap {
            return Err(Error::DimensionCapExceeded { dim: self.dim, cap });
        }
        let mut out = linalg::zeros(self.dim, self.dim);
        for (j, col) in self.sparse_columns().into_iter().enumerate() {
            for (i, v) in col {
                out[(i, j)] = v;
            }
        }
        Ok(out)
    }

    /// Dense matrix with the default cap of 4096.
    pub fn dense(&self) -> Result<CMat> {
        self.dense_capped(4096)
    }

    /// Schur function `P_C (W - z P_C^perp)^{-1} P_C` of the scalar block
    /// `start..start + len`, for `|z| < 1`.
    pub fn resolvent_column(&self, start: usize, len: usize, z: Complex64) -> Result<CMat> {
        if len == 0 || start + len > self.dim {
            return Err(Error::InvalidParameter(format!(
                "block {start}..{} outside dimension {}",
                start + len,
                self.dim
            )));
        }
        if z.norm() >= 1.0 {
            return Err(Error::InvalidParameter(format!("resolvent needs |z| < 1, got {}", z.norm())));
        }
        let in_block = |i: usize| i >= start && i < start + len;
        let cols = self.sparse_columns();
        let (mut kl, mut ku) = (0usize, 0usize);
        for (j, col) in cols.iter().enumerate() {
            for &(i, _) in col {
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let mut rhs = linalg::zeros(self.dim, len);
        for c in 0..len {
            rhs[(start + c, c)] = ONE;
        }
        let x = if kl.max(ku) <= 64 {
            let mut band = BandMatrix::zeros(self.dim, kl, ku);
            for (j, col) in cols.iter().enumerate() {
                for &(i, v) in col {
                    band.add(i, j, v);
                }
                if !in_block(j) {
                    band.add(j, j, -z);
                }
            }
            let lu = band.factor()?;
            let mut x = rhs.clone();
            lu.solve_in_place(&mut x)?;
            // near the spectrum the system is badly conditioned; a few
            // correction steps against an accurately computed residual
            // recover the digits lost in the factorization
            for _ in 0..REFINE_STEPS {
                let mut r = accurate_residual(&cols, &in_block, z, &rhs, &x);
                lu.solve_in_place(&mut r)?;
                let size = linalg::max_abs(&r);
                let scale = linalg::max_abs(&x);
                x += &r;
                if size <= 1e-15 * scale {
                    break;
                }
            }
            x
        } else {
            let mut a = linalg::zeros(self.dim, self.dim);
            for (j, col) in cols.iter().enumerate() {
                for &(i, v) in col {
                    a[(i, j)] = v;
                }
                if !in_block(j) {
                    a[(j, j)] -= z;
                }
            }
            linalg::solve(&a, &rhs)?
        };
        Ok(linalg::submatrix(&x, start, 0, len, len))
    }
}

const REFINE_STEPS: usize = 3;

/// Error-free product `a b = p + e`.
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Sum of real terms carried in double-double.
#[derive(Default, Clone, Copy)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let s = self.hi + v;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (v - bp);
        self.hi = s;
        self.lo += err;
    }

    fn add_prod(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        self.add(p);
        self.lo += e;
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// `B - (W - z P⊥) X` with every product and sum carried in extra precision.
fn accurate_residual(
    cols: &[Vec<(usize, Complex64)>],
    in_block: &impl Fn(usize) -> bool,
    z: Complex64,
    rhs: &CMat,
    x: &CMat,
) -> CMat {
    let n = rhs.nrows();
    let mut out = linalg::zeros(n, rhs.ncols());
    for c in 0..rhs.ncols() {
        let mut re = vec![Compensated::default(); n];
        let mut im = vec![Compensated::default(); n];
        for i in 0..n {
            re[i].add(rhs[(i, c)].re);
            im[i].add(rhs[(i, c)].im);
        }
        let mut sub = |i: usize, a: Complex64, v: Complex64| {
            re[i].add_prod(-a.re, v.re);
            re[i].add_prod(a.im, v.im);
            im[i].add_prod(-a.re, v.im);
            im[i].add_prod(-a.im, v.re);
        };
        for (j, col) in cols.iter().enumerate() {
            let v = x[(j, c)];
            for &(i, a) in col {
                sub(i, a, v);
            }
            if !in_block(j) {
                sub(j, -z, v);
            }
        }
        for i in 0..n {
            out[(i, c)] = Complex64::new(re[i].value(), im[i].value());
        }
    }
    out
}

/// Assembles `W = γ̃ γ` on `n_cells` cells of `2d` scalar indices each.
///
/// `gamma(x)` is placed on cell `x`; `gamma_tilde(x)` is placed on the `↓`
/// half of cell `x - 1` followed by the `↑` half of cell `x`. In open mode
/// the γ̃ block of the first cell straddles the cut and is dropped; in ring
/// mode it wraps around.
pub fn assemble_cells(
    first_cell: i64,
    n_cells: usize,
    d: usize,
    mut gamma: impl FnMut(i64) -> Result<ThetaBlock>,
    mut gamma_tilde: impl FnMut(i64) -> Result<ThetaBlock>,
    boundary: Boundary,
) -> Result<BandedUnitary> {
    if n_cells == 0 || d == 0 {
        return Err(Error::InconsistentWindow("window must contain at least one cell".into()));
    }
    if boundary == Boundary::Ring && n_cells < 2 {
        return Err(Error::InconsistentWindow("a ring needs at least two cells".into()));
    }
    let dim = 2 * d * n_cells;
    let mut odd = Vec::with_capacity(n_cells);
    let mut even = Vec::with_capacity(n_cells);
    for k in 0..n_cells {
        let x = first_cell + k as i64;
        let g = gamma(x)?;
        let gt = gamma_tilde(x)?;
        if g.size() != 2 * d || gt.size() != 2 * d {
            return Err(Error::InconsistentWindow(format!("block size at cell {x} is not {}", 2 * d)));
        }
        odd.push(PlacedBlock { offset: 2 * d * k, block: g });
        if k > 0 {
            even.push(PlacedBlock { offset: 2 * d * k - d, block: gt });
        } else if boundary == Boundary::Ring {
            even.push(PlacedBlock { offset: dim - d, block: gt });
        }
    }
    BandedUnitary::new(dim, Layer::new(even), Layer::new(odd), boundary)
}

/// Two-sided sequence of Schur parameters indexed by `n ∈ Z`.
///
/// Parameters `α_{2x}, α_{2x+1}` belong to cell `x`. Cells `x <= split`
/// follow the left pair, cells `x > split` the right pair, and explicit
/// entries override both.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedSeq {
    pub left: [Complex64; 2],
    pub right: [Complex64; 2],
    pub split: i64,
    pub overrides: BTreeMap<i64, Complex64>,
}

impl TwoSidedSeq {
    pub fn constant(pair: [Complex64; 2]) -> Self {
        Self { left: pair, right: pair, split: 0, overrides: BTreeMap::new() }
    }

    pub fn alpha(&self, n: i64) -> Complex64 {
        if let Some(a) = self.overrides.get(&n) {
            return *a;
        }
        let cell = n.div_euclid(2);
        let pair = if cell <= self.split { &self.left } else { &self.right };
        pair[n.rem_euclid(2) as usize]
    }

    /// `(α_n)_{n >= start}` as a one-sided sequence; `start` must be even.
    pub fn right_half(&self, start: i64) -> Result<SchurParamSeq> {
        assert!(start % 2 == 0, "right half must start at an even index");
        let mut tail_start = 2 * (self.split + 1);
        if let Some((&last, _)) = self.overrides.iter().next_back() {
            tail_start = tail_start.max(last + 1 + (last + 1).rem_euclid(2));
        }
        let tail_start = tail_start.max(start);
        let head = (start..tail_start).map(|n| self.alpha(n)).collect();
        SchurParamSeq::new(head, Tail::Periodic(self.right.to_vec()))
    }

    /// `(-α_{start - n})_{n >= 0}` as a one-sided sequence; `start` must be even.
    pub fn left_half(&self, start: i64) -> Result<SchurParamSeq> {
        assert!(start % 2 == 0, "left half must start at an even index");
        let mut tail_top = 2 * self.split;
        if let Some((&first, _)) = self.overrides.iter().next() {
            let below = first - 1;
            tail_top = tail_top.min(below - below.rem_euclid(2));
        }
        let tail_top = tail_top.min(start);
        let head = ((tail_top + 1)..=start).rev().map(|n| -self.alpha(n)).collect();
        SchurParamSeq::new(head, Tail::Periodic(vec![-self.left[0], -self.left[1]]))
    }
}

/// Two-layer unitary carrying `α_n` for the cells `first_cell..=last_cell`.
///
/// `Θ(α_{2x+1})` sits on cell `x` and `Θ(α_{2x})` on the last index of
/// cell `x - 1` and the first index of cell `x`.
pub fn build_cmv(seq: &TwoSidedSeq, first_cell: i64, last_cell: i64, boundary: Boundary) -> Result<BandedUnitary> {
    if last_cell < first_cell {
        return Err(Error::InconsistentWindow(format!("empty window {first_cell}..={last_cell}")));
    }
    let n_cells = (last_cell - first_cell + 1) as usize;
    assemble_cells(
        first_cell,
        n_cells,
        1,
        |x| ThetaBlock::scalar(seq.alpha(2 * x + 1)),
        |x| ThetaBlock::scalar(seq.alpha(2 * x)),
        boundary,
    )
}

/// Finite one-sided CMV matrix `[Θ(β0) ⊕ Θ(β2) ⊕ …][1 ⊕ Θ(β1) ⊕ …]` of size
/// `params.len() + 1`, whose first basis vector has Schur parameters
/// `(β_0, …, β_{k-1})` followed by the terminating value 1.
pub fn one_sided_cmv(params: &[Complex64]) -> Result<BandedUnitary> {
    let dim = params.len() + 1;
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for (n, &b) in params.iter().enumerate() {
        let pb = PlacedBlock { offset: n, block: ThetaBlock::scalar(b)? };
        if n % 2 == 0 {
            even.push(pb);
        } else {
            odd.push(pb);
        }
    }
    BandedUnitary::new(dim, Layer::new(even), Layer::new(odd), Boundary::OpenDecoupled)
}
