//! Symmetry indices of finite representations and of walks.
//!
//! Walk indices are read off the boundary values at `±1` of the half-line
//! Schur functions `f_L^{x↑}` and `f_R^{x↓}`: `siL = ½ (tr f_L(1) - tr f_L(-1))`,
//! `siR` likewise, `si₋ = -½ (tr f_L(-1) + tr f_R(-1))` and `si₊` from the
//! sum rule `si₊ + si₋ = siL + siR`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cmv::BandedUnitary;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ZERO};
use crate::schur::{eval_boundary, subspace_schur, BoundaryPoint, GapAnalysis};
use crate::walk::{build_walk, Model, SiteData, WalkSpec, WalkTruncation};

// ---------------------------------------------------------------------------
// Symmetry types and finite representations

/// A tenfold-way symmetry type: which of particle-hole `η`, time reversal
/// `τ` and chiral `γ` are present, and the signs of `η²`, `τ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymmetryType {
    eta: Option<i8>,
    tau: Option<i8>,
    chiral: bool,
}

/// Which closed formula gives the index of a finite representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IndexCase {
    /// `η` alone with `η² = 1`: `dim mod 2`.
    ParticleHole,
    /// Full group with `η² = 1`, `τ² = -1`: `dim mod 4`.
    Kramers,
    /// `γ` with `γ² = 1`: `tr γ`.
    Chiral,
    /// Every other type has a trivial index group.
    Trivial,
}

fn check_sign(s: Option<i8>, name: &str) -> Result<()> {
    match s {
        None | Some(1) | Some(-1) => Ok(()),
        Some(v) => Err(Error::InconsistentRepresentation(format!("{name}^2 sign must be ±1, got {v}"))),
    }
}

impl SymmetryType {
    pub fn new(eta: Option<i8>, tau: Option<i8>, chiral: bool) -> Result<Self> {
        check_sign(eta, "eta")?;
        check_sign(tau, "tau")?;
        let antiunitary = eta.is_some() as u8 + tau.is_some() as u8;
        let closed = matches!((antiunitary, chiral), (0, _) | (1, false) | (2, true));
        if !closed {
            return Err(Error::InconsistentRepresentation(
                "symmetry group must be closed under products".into(),
            ));
        }
        Ok(Self { eta, tau, chiral })
    }

    /// `{1, γ}`.
    pub fn chiral_only() -> Self {
        Self { eta: None, tau: None, chiral: true }
    }

    /// `{1, η}` with the given sign of `η²`.
    pub fn particle_hole(sign: i8) -> Result<Self> {
        Self::new(Some(sign), None, false)
    }

    /// `{1, η, τ, γ}` with the given signs.
    pub fn full(eta_sign: i8, tau_sign: i8) -> Result<Self> {
        Self::new(Some(eta_sign), Some(tau_sign), true)
    }

    pub fn eta(&self) -> Option<i8> {
        self.eta
    }

    pub fn tau(&self) -> Option<i8> {
        self.tau
    }

    pub fn has_chiral(&self) -> bool {
        self.chiral
    }

    /// `γ²`, which is `η² τ²` when all three symmetries are present.
    pub fn chiral_square(&self) -> Option<i8> {
        self.chiral.then(|| match (self.eta, self.tau) {
            (Some(e), Some(t)) => e * t,
            _ => 1,
        })
    }

    pub fn case(&self) -> IndexCase {
        match (self.eta, self.tau, self.chiral) {
            (Some(1), None, false) => IndexCase::ParticleHole,
            (Some(1), Some(-1), true) => IndexCase::Kramers,
            (_, _, true) if self.chiral_square() == Some(1) => IndexCase::Chiral,
            _ => IndexCase::Trivial,
        }
    }
}

/// Concrete matrices realizing a symmetry type. Antiunitary symmetries are
/// stored as `M` with `σ ψ = M conj(ψ)`.
#[derive(Debug, Clone)]
pub struct FiniteRepresentation {
    symmetry: SymmetryType,
    eta: Option<CMat>,
    tau: Option<CMat>,
    gamma: Option<CMat>,
    dim: usize,
}

const REP_TOL: f64 = 1e-8;

fn conj(m: &CMat) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

fn scaled_identity(n: usize, s: i8) -> CMat {
    linalg::scale(&linalg::identity(n), Complex64::new(s as f64, 0.0))
}

impl FiniteRepresentation {
    pub fn new(symmetry: SymmetryType, eta: Option<CMat>, tau: Option<CMat>, gamma: Option<CMat>) -> Result<Self> {
        let declared = (symmetry.eta.is_some(), symmetry.tau.is_some(), symmetry.chiral);
        if declared != (eta.is_some(), tau.is_some(), gamma.is_some()) {
            return Err(Error::InconsistentRepresentation(
                "matrices supplied do not match the declared symmetry type".into(),
            ));
        }
        let dim = [&eta, &tau, &gamma]
            .iter()
            .find_map(|m| m.as_ref().map(|m| m.nrows()))
            .unwrap_or(0);
        let bad = |msg: String| Err(Error::InconsistentRepresentation(msg));
        for (name, m) in [("eta", &eta), ("tau", &tau), ("gamma", &gamma)] {
            if let Some(m) = m {
                if m.nrows() != dim || m.ncols() != dim {
                    return bad(format!("{name} must be {dim}x{dim}"));
                }
                let r = linalg::unitarity_residual(m);
                if r > REP_TOL {
                    return bad(format!("{name} is not unitary (residual {r:e})"));
                }
            }
        }
        for (name, m, s) in [("eta", &eta, symmetry.eta), ("tau", &tau, symmetry.tau)] {
            if let (Some(m), Some(s)) = (m, s) {
                let r = linalg::max_abs_diff(&(m * conj(m)), &scaled_identity(dim, s));
                if r > REP_TOL {
                    return bad(format!("{name}^2 does not equal {s} (residual {r:e})"));
                }
            }
        }
        if let (Some(g), Some(s)) = (&gamma, symmetry.chiral_square()) {
            let r = linalg::max_abs_diff(&(g * g), &scaled_identity(dim, s));
            if r > REP_TOL {
                return bad(format!("gamma^2 does not equal {s} (residual {r:e})"));
            }
        }
        if let (Some(e), Some(t), Some(g)) = (&eta, &tau, &gamma) {
            let et = e * conj(t);
            let te = t * conj(e);
            let r = linalg::max_abs_diff(&et, g).max(linalg::max_abs_diff(&et, &te));
            if r > REP_TOL {
                return bad(format!("gamma must equal eta tau and the symmetries must commute (residual {r:e})"));
            }
        }
        Ok(Self { symmetry, eta, tau, gamma, dim })
    }

    /// `{1, γ}` represented by `gamma`.
    pub fn chiral(gamma: CMat) -> Result<Self> {
        Self::new(SymmetryType::chiral_only(), None, None, Some(gamma))
    }

    /// The full real type realized by complex conjugation, `τ = γ K` and `γ`.
    pub fn real_chiral(gamma: CMat) -> Result<Self> {
        let n = gamma.nrows();
        let tau = gamma.clone();
        Self::new(SymmetryType::full(1, 1)?, Some(linalg::identity(n)), Some(tau), Some(gamma))
    }

    pub fn symmetry(&self) -> SymmetryType {
        self.symmetry
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> Option<&CMat> {
        self.gamma.as_ref()
    }

    /// Largest violation of `η U η* = U`, `τ U τ* = U*`, `γ U γ* = U*`.
    pub fn symmetry_residual(&self, u: &CMat) -> f64 {
        let ustar = linalg::adjoint(u);
        let mut r = 0.0f64;
        if let Some(e) = &self.eta {
            r = r.max(linalg::max_abs_diff(&(e * conj(u) * e.adjoint()), u));
        }
        if let Some(t) = &self.tau {
            r = r.max(linalg::max_abs_diff(&(t * conj(u) * t.adjoint()), &ustar));
        }
        if let Some(g) = &self.gamma {
            r = r.max(linalg::max_abs_diff(&(g * u * g.adjoint()), &ustar));
        }
        r
    }
}

/// Value of a symmetry index: an integer or a residue.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SymmetryIndex {
    Integer(i64),
    Residue { value: u8, modulus: u8 },
}

impl SymmetryIndex {
    pub fn integer(self) -> Option<i64> {
        match self {
            SymmetryIndex::Integer(n) => Some(n),
            SymmetryIndex::Residue { .. } => None,
        }
    }

    pub fn mod2(self) -> SymmetryIndex {
        match self {
            SymmetryIndex::Integer(n) => SymmetryIndex::Residue { value: n.rem_euclid(2) as u8, modulus: 2 },
            SymmetryIndex::Residue { value, .. } => SymmetryIndex::Residue { value: value % 2, modulus: 2 },
        }
    }
}

impl fmt::Display for SymmetryIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymmetryIndex::Integer(n) => write!(f, "{n}"),
            SymmetryIndex::Residue { value, modulus } => write!(f, "{value} (mod {modulus})"),
        }
    }
}

fn round_integer(x: Complex64, tol: f64, what: &str) -> Result<i64> {
    let n = x.re.round();
    if (x.re - n).abs() > tol || x.im.abs() > tol {
        return Err(Error::InconsistentRepresentation(format!("{what} = {x} is not an integer")));
    }
    Ok(n as i64)
}

/// Index of a finite-dimensional representation.
pub fn si_finite(rep: &FiniteRepresentation) -> Result<SymmetryIndex> {
    let n = rep.dim as i64;
    Ok(match rep.symmetry.case() {
        IndexCase::ParticleHole => SymmetryIndex::Residue { value: n.rem_euclid(2) as u8, modulus: 2 },
        IndexCase::Kramers => SymmetryIndex::Residue { value: n.rem_euclid(4) as u8, modulus: 4 },
        IndexCase::Chiral => {
            let g = rep.gamma.as_ref().expect("chiral case carries gamma");
            SymmetryIndex::Integer(round_integer(linalg::trace(g), 1e-6, "tr gamma")?)
        }
        IndexCase::Trivial => SymmetryIndex::Integer(0),
    })
}

/// `(si₊, si₋)` of a finite unitary commuting with the representation.
pub fn si_pm_finite(u: &CMat, rep: &FiniteRepresentation) -> Result<(SymmetryIndex, SymmetryIndex)> {
    if u.nrows() != rep.dim || u.ncols() != rep.dim {
        return Err(Error::InvalidParameter("unitary and representation dimensions differ".into()));
    }
    let residual = rep.symmetry_residual(u);
    if residual > 1e-7 {
        return Err(Error::SymmetryViolated { residual });
    }
    let n = rep.dim;
    match rep.symmetry.case() {
        IndexCase::ParticleHole => {
            let idx = |s: f64| -> Result<SymmetryIndex> {
                let det = linalg::determinant(&linalg::scale(u, Complex64::new(s, 0.0)));
                if (det.norm() - 1.0).abs() > 1e-6 || det.im.abs() > 1e-6 {
                    return Err(Error::InconsistentRepresentation(format!("det = {det} is not ±1")));
                }
                Ok(SymmetryIndex::Residue { value: (det.re < 0.0) as u8, modulus: 2 })
            };
            Ok((idx(-1.0)?, idx(1.0)?))
        }
        IndexCase::Kramers => {
            let idx = |s: f64| -> Result<SymmetryIndex> {
                let shifted = u - linalg::scale(&linalg::identity(n), Complex64::new(s, 0.0));
                let k = linalg::null_space(&shifted, 1e-8)?.ncols();
                Ok(SymmetryIndex::Residue { value: (k % 4) as u8, modulus: 4 })
            };
            Ok((idx(1.0)?, idx(-1.0)?))
        }
        IndexCase::Chiral => {
            let g = rep.gamma.as_ref().expect("chiral case carries gamma");
            let id = linalg::identity(n);
            let plus = linalg::trace(&(g * (&id + u))) * 0.5;
            let minus = linalg::trace(&(g * (&id - u))) * 0.5;
            Ok((
                SymmetryIndex::Integer(round_integer(plus, 1e-6, "si+")?),
                SymmetryIndex::Integer(round_integer(minus, 1e-6, "si-")?),
            ))
        }
        IndexCase::Trivial => Ok((SymmetryIndex::Integer(0), SymmetryIndex::Integer(0))),
    }
}

/// Symmetry type of a walk model.
pub fn walk_symmetry(model: Model) -> SymmetryType {
    match model {
        Model::SplitStep => SymmetryType { eta: Some(1), tau: Some(1), chiral: true },
        Model::ChiralCoined | Model::ShiftedCoined => SymmetryType::chiral_only(),
    }
}

// ---------------------------------------------------------------------------
// Gaps of the asymptotic tails

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HalfLine {
    Left,
    Right,
}

impl HalfLine {
    pub fn name(self) -> &'static str {
        match self {
            HalfLine::Left => "left",
            HalfLine::Right => "right",
        }
    }
}

/// Gap status of one tail at one symmetry-protected point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailGap {
    pub side: HalfLine,
    pub point: i8,
    pub gapped: bool,
    /// Distance from the point to the tail's continuous spectrum.
    pub margin: f64,
}

const GAP_MARGIN: f64 = 1e-9;

/// Distance from `±1` to the spectrum of the constant-coin walk, from the
/// momentum-space symbol `W(k) = γ̃(k) γ`.
fn fourier_gap_margin(gamma: &CMat, gamma_tilde: &CMat, point: BoundaryPoint) -> Result<f64> {
    let d = gamma.nrows() / 2;
    let b = |r: usize, c: usize| linalg::submatrix(gamma_tilde, r * d, c * d, d, d);
    let (b1, b2, b3, b4) = (b(0, 0), b(0, 1), b(1, 0), b(1, 1));
    let shift = linalg::scale(&linalg::identity(2 * d), point.z());
    let sigma = |k: f64| -> Result<f64> {
        let ph = Complex64::from_polar(1.0, k);
        let mut gt = linalg::zeros(2 * d, 2 * d);
        linalg::set_block(&mut gt, 0, 0, &b4);
        linalg::set_block(&mut gt, 0, d, &linalg::scale(&b3, ph.conj()));
        linalg::set_block(&mut gt, d, 0, &linalg::scale(&b2, ph));
        linalg::set_block(&mut gt, d, d, &b1);
        let w = gt * gamma - &shift;
        Ok(linalg::singular_values(&w)?.into_iter().fold(f64::INFINITY, f64::min))
    };
    let n = 256;
    let step = 2.0 * PI / n as f64;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..n {
        let k = i as f64 * step;
        let s = sigma(k)?;
        if s < best.0 {
            best = (s, k);
        }
    }
    let (mut lo, mut hi) = (best.1 - step, best.1 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut e = lo + g * (hi - lo);
    let (mut fc, mut fe) = (sigma(c)?, sigma(e)?);
    for _ in 0..60 {
        if fc < fe {
            hi = e;
            e = c;
            fe = fc;
            c = hi - g * (hi - lo);
            fc = sigma(c)?;
        } else {
            lo = c;
            c = e;
            fc = fe;
            e = lo + g * (hi - lo);
            fe = sigma(e)?;
        }
    }
    Ok(best.0.min(fc).min(fe))
}

fn tail_data(spec: &WalkSpec, side: HalfLine) -> &SiteData {
    match side {
        HalfLine::Left => spec.left_tail(),
        HalfLine::Right => spec.right_tail(),
    }
}

/// A site whose data is the tail's and which lies outside the window.
fn tail_site(spec: &WalkSpec, side: HalfLine) -> i64 {
    let (lo, hi) = spec.window_span();
    match side {
        HalfLine::Left => lo - 1,
        HalfLine::Right => hi + 1,
    }
}

/// Gap status of both tails at both points.
pub fn tail_gaps(spec: &WalkSpec) -> Result<Vec<TailGap>> {
    let mut out = Vec::with_capacity(4);
    for side in [HalfLine::Left, HalfLine::Right] {
        for point in BoundaryPoint::BOTH {
            let (gapped, margin) = match tail_data(spec, side) {
                SiteData::Angles { theta1, theta2 } => {
                    let gap = GapAnalysis::from_angles(*theta2, *theta1);
                    let half_width = match point {
                        BoundaryPoint::Plus => (theta2 + theta1).abs(),
                        BoundaryPoint::Minus => (theta2 - theta1).abs(),
                    };
                    let margin = 2.0 * (half_width / 2.0).sin();
                    (gap.gapped_at(point) && margin > GAP_MARGIN, margin)
                }
                SiteData::Coin(_) => {
                    let x = tail_site(spec, side);
                    let g = spec.gamma_block(x)?.matrix().clone();
                    let gt = spec.gamma_tilde_block(x)?.matrix().clone();
                    let m = fourier_gap_margin(&g, &gt, point)?;
                    (m > GAP_MARGIN, m)
                }
            };
            out.push(TailGap { side, point: point.as_i8(), gapped, margin });
        }
    }
    Ok(out)
}

fn ensure_gapped(spec: &WalkSpec) -> Result<Vec<TailGap>> {
    let gaps = tail_gaps(spec)?;
    if let Some(g) = gaps.iter().find(|g| !g.gapped) {
        return Err(Error::GapClosed {
            point: g.point,
            detail: format!("{} tail has no gap at {:+}", g.side.name(), g.point),
        });
    }
    Ok(gaps)
}

// ---------------------------------------------------------------------------
// Boundary values of the half-line Schur functions

/// `f_L^{x↑}(±1)` and `f_R^{x↓}(±1)` as `d × d` matrices; index 0 holds the
/// value at `+1`, index 1 the value at `-1`.
#[derive(Debug, Clone)]
pub struct BoundaryValues {
    pub site: i64,
    pub left: [CMat; 2],
    pub right: [CMat; 2],
}

/// Real parts of the traces of [`BoundaryValues`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryTraces {
    pub left_plus: f64,
    pub left_minus: f64,
    pub right_plus: f64,
    pub right_minus: f64,
}

/// Quantized traces: `[at +1, at -1]` for each half-line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QuantizedTraces {
    pub left: [i64; 2],
    pub right: [i64; 2],
}

impl QuantizedTraces {
    pub fn si_left(&self) -> i64 {
        (self.left[0] - self.left[1]) / 2
    }

    pub fn si_right(&self) -> i64 {
        (self.right[0] - self.right[1]) / 2
    }

    pub fn si_minus(&self) -> i64 {
        -(self.left[1] + self.right[1]) / 2
    }

    pub fn si_plus(&self) -> i64 {
        (self.left[0] + self.right[0]) / 2
    }
}

/// Nearest admissible trace of a `d × d` involution, if within `tol`.
pub fn quantize_trace(value: Complex64, d: usize, tol: f64) -> Option<i64> {
    let n = value.re.round();
    let d = d as i64;
    let k = n as i64;
    let ok = (value.re - n).abs() <= tol && value.im.abs() <= tol && k.abs() <= d && (k - d).rem_euclid(2) == 0;
    ok.then_some(k)
}

impl BoundaryValues {
    pub fn traces(&self) -> BoundaryTraces {
        let t = |m: &CMat| linalg::trace(m).re;
        BoundaryTraces {
            left_plus: t(&self.left[0]),
            left_minus: t(&self.left[1]),
            right_plus: t(&self.right[0]),
            right_minus: t(&self.right[1]),
        }
    }

    /// Largest unitarity or involution defect among the four values.
    pub fn residual(&self) -> f64 {
        self.left
            .iter()
            .chain(self.right.iter())
            .map(|m| linalg::unitarity_residual(m).max(linalg::involution_residual(m)))
            .fold(0.0, f64::max)
    }

    pub fn quantize(&self, tol: f64) -> Option<QuantizedTraces> {
        let d = self.left[0].nrows();
        let q = |m: &CMat| quantize_trace(linalg::trace(m), d, tol);
        Some(QuantizedTraces {
            left: [q(&self.left[0])?, q(&self.left[1])?],
            right: [q(&self.right[0])?, q(&self.right[1])?],
        })
    }
}

fn scalar_mat(v: Complex64) -> CMat {
    CMat::from_fn(1, 1, |_, _| v)
}

/// Split-step route: the half-line parameters have two-periodic tails whose
/// boundary values are known in closed form.
fn boundary_values_scalar(spec: &WalkSpec, x: i64) -> Result<BoundaryValues> {
    let seq = spec.schur_params()?;
    let right = seq.right_half(2 * x + 2)?;
    let left = seq.left_half(2 * x)?;
    let mut lv = [scalar_mat(ZERO), scalar_mat(ZERO)];
    let mut rv = [scalar_mat(ZERO), scalar_mat(ZERO)];
    for (i, point) in BoundaryPoint::BOTH.into_iter().enumerate() {
        let tag = |e: Error, side: &str| match e {
            Error::GapClosed { detail, .. } => Error::GapClosed {
                point: point.as_i8(),
                detail: format!("{side} tail: {detail}"),
            },
            other => other,
        };
        lv[i] = scalar_mat(eval_boundary(&left, point).map_err(|e| tag(e, "left"))?.value);
        rv[i] = scalar_mat(eval_boundary(&right, point).map_err(|e| tag(e, "right"))?.value);
    }
    Ok(BoundaryValues { site: x, left: lv, right: rv })
}

/// `f_A = f_AA + z f_AB (1 - z f_BB)^{-1} f_BA` for index sets `a`, `b`.
fn reduce(f: &CMat, a: (usize, usize), b: (usize, usize), z: f64) -> Result<CMat> {
    let zc = Complex64::new(z, 0.0);
    let faa = linalg::submatrix(f, a.0, a.0, a.1, a.1);
    let fab = linalg::submatrix(f, a.0, b.0, a.1, b.1);
    let fba = linalg::submatrix(f, b.0, a.0, b.1, a.1);
    let fbb = linalg::submatrix(f, b.0, b.0, b.1, b.1);
    let m = linalg::identity(b.1) - linalg::scale(&fbb, zc);
    let x = linalg::solve(&m, &fba)?;
    Ok(faa + linalg::scale(&(fab * x), zc))
}

/// `f_R^{x↓}` from `f_R^{(x+1)↓}` and the blocks of cell `x + 1`.
fn right_step(gamma_next: &CMat, gamma_tilde_next: &CMat, g_next: &CMat, z: f64) -> Result<CMat> {
    let d = g_next.nrows();
    let v = linalg::direct_sum(&linalg::identity(d), &linalg::adjoint(gamma_next));
    let inner = linalg::direct_sum(&linalg::adjoint(gamma_tilde_next), g_next);
    reduce(&(v * inner), (0, d), (d, 2 * d), z)
}

/// `f_L^{x↑}` from `f_L^{(x-1)↑}`, `γ_{x-1}` and `γ̃_x`.
fn left_step(gamma_prev: &CMat, gamma_tilde_here: &CMat, h_prev: &CMat, z: f64) -> Result<CMat> {
    let d = h_prev.nrows();
    let v = linalg::direct_sum(&linalg::adjoint(gamma_prev), &linalg::identity(d));
    let inner = linalg::direct_sum(h_prev, &linalg::adjoint(gamma_tilde_here));
    reduce(&(v * inner), (2 * d, d), (0, 2 * d), z)
}

const FIXED_POINT_TOL: f64 = 1e-15;
const FIXED_POINT_MAX_ITER: usize = 400_000;

fn fixed_point(d: usize, step: impl Fn(&CMat) -> Result<CMat>) -> Result<CMat> {
    let mut g = linalg::zeros(d, d);
    for _ in 0..FIXED_POINT_MAX_ITER {
        let next = step(&g)?;
        let delta = linalg::max_abs_diff(&next, &g);
        g = next;
        if delta <= FIXED_POINT_TOL {
            return Ok(g);
        }
    }
    Err(Error::WindowNotConverged("tail fixed-point iteration did not settle".into()))
}

/// Matrix route for any model: the tails are fixed points of the one-cell
/// recursion, which is then run through the window down to site `x`.
pub fn boundary_values_matrix(spec: &WalkSpec, x: i64, tol: &Tolerances) -> Result<BoundaryValues> {
    ensure_gapped(spec)?;
    let d = spec.d();
    let gamma = |y: i64| -> Result<CMat> { Ok(spec.gamma_block(y)?.matrix().clone()) };
    let gamma_t = |y: i64| -> Result<CMat> { Ok(spec.gamma_tilde_block(y)?.matrix().clone()) };
    let (lo, hi) = spec.window_span();
    let right_top = hi.max(0);
    let left_bottom = lo.min(1) - 1;
    let mut left = [linalg::zeros(d, d), linalg::zeros(d, d)];
    let mut right = [linalg::zeros(d, d), linalg::zeros(d, d)];
    for (i, point) in BoundaryPoint::BOTH.into_iter().enumerate() {
        let z = point.sign();
        let (gr, gtr) = (gamma(right_top + 1)?, gamma_t(right_top + 1)?);
        let mut g = fixed_point(d, |g| right_step(&gr, &gtr, g, z))?;
        let mut y = right_top;
        while y > x {
            y -= 1;
            g = right_step(&gamma(y + 1)?, &gamma_t(y + 1)?, &g, z)?;
        }
        right[i] = g;

        let (gl, gtl) = (gamma(left_bottom)?, gamma_t(left_bottom)?);
        let mut h = fixed_point(d, |h| left_step(&gl, &gtl, h, z))?;
        let mut y = left_bottom;
        while y < x {
            y += 1;
            h = left_step(&gamma(y - 1)?, &gamma_t(y)?, &h, z)?;
        }
        left[i] = h;
    }
    let values = BoundaryValues { site: x, left, right };
    let r = values.residual();
    if r > tol.boundary {
        return Err(Error::GapClosed {
            point: 0,
            detail: format!("boundary values are not unitary involutions (residual {r:e})"),
        });
    }
    Ok(values)
}

/// Exact boundary values: closed-form tails for split-step walks, the
/// matrix fixed-point route for coined models.
pub fn boundary_values_exact(spec: &WalkSpec, x: i64, tol: &Tolerances) -> Result<BoundaryValues> {
    match spec.model() {
        Model::SplitStep => {
            ensure_gapped(spec)?;
            boundary_values_scalar(spec, x)
        }
        _ => boundary_values_matrix(spec, x, tol),
    }
}

// ---------------------------------------------------------------------------
// Decoupling

/// Which involution block is replaced by the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecouplingMode {
    /// `W V` with `V = γ_x* ⊕ 1`: splits through cell `x` between `↑` and `↓`.
    LeftGamma,
    /// `V W` with `V = γ̃_x* ⊕ 1`: splits at the cell boundary, keeping the
    /// chiral symmetry.
    RightGammaTilde,
}

/// Result of a decoupling on a finite truncation.
#[derive(Debug, Clone)]
pub struct Decoupling {
    /// `W V` or `V W`, block diagonal across `split`.
    pub product: BandedUnitary,
    pub left: BandedUnitary,
    pub right: BandedUnitary,
    /// First scalar index of the right part.
    pub split: usize,
    /// `V` restricted to its support, which starts at `v_offset`.
    pub v_restriction: CMat,
    pub v_offset: usize,
}

pub fn decouple(trunc: &WalkTruncation, x: i64, mode: DecouplingMode) -> Result<Decoupling> {
    if x <= trunc.first_cell || x >= trunc.last_cell() {
        return Err(Error::InconsistentWindow(format!(
            "decoupling site {x} must lie strictly inside cells {}..={}",
            trunc.first_cell,
            trunc.last_cell()
        )));
    }
    let d = trunc.d;
    let start = trunc.cell_start(x);
    let mut product = trunc.unitary.clone();
    let (removed, split) = match mode {
        DecouplingMode::LeftGamma => (product.layer_odd_mut().remove_at(start), start + d),
        DecouplingMode::RightGammaTilde => (product.layer_even_mut().remove_at(start - d), start),
    };
    let removed = removed.ok_or_else(|| Error::InconsistentWindow(format!("no block to remove at cell {x}")))?;
    let v_offset = removed.offset;
    let v_restriction = linalg::adjoint(removed.block.matrix());
    let left = product.restrict(0, split)?;
    let right = product.restrict(split, product.dim() - split)?;
    Ok(Decoupling { product, left, right, split, v_restriction, v_offset })
}

// ---------------------------------------------------------------------------
// Resolvent route

/// `f_L^{x↑}(z)` or `f_R^{x↓}(z)` of a finite truncation, `|z| < 1`.
pub fn half_line_resolvent(trunc: &WalkTruncation, x: i64, side: HalfLine, z: Complex64) -> Result<CMat> {
    let dec = decouple(trunc, x, DecouplingMode::LeftGamma)?;
    let d = trunc.d;
    let start = trunc.cell_start(x);
    match side {
        HalfLine::Left => dec.left.resolvent_column(start, d, z),
        HalfLine::Right => dec.right.resolvent_column(start + d - dec.split, d, z),
    }
}

/// Boundary value from the radial limit `r → 1`.
#[derive(Debug, Clone)]
pub struct RadialEstimate {
    /// The accepted boundary value.
    pub value: CMat,
    /// `f(±(1 - h))`.
    pub raw: CMat,
    pub residual: f64,
    pub raw_residual: f64,
    /// Eigenvalues of the point mass detected at `±1`, ascending.
    pub masses: Vec<f64>,
}

/// Value and slope at 0 of the cubic through samples at `k h`, `k = 1..=4`
/// (the slope in units of `1/h`).
const VALUE_WEIGHTS: [f64; 4] = [4.0, -6.0, 4.0, -1.0];
const SLOPE_WEIGHTS: [f64; 4] = [-13.0 / 3.0, 9.5, -7.0, 11.0 / 6.0];

/// Mass eigenvalues below this (relative to the largest mass, or 1), or
/// below `MASS_ERROR_FACTOR` times the extrapolation error, count as zero.
pub const MASS_FLOOR: f64 = 1e-14;
const MASS_ERROR_FACTOR: f64 = 100.0;

fn weighted(samples: &[CMat], nodes: [usize; 4], weights: [f64; 4], scale: f64) -> CMat {
    let mut out = linalg::zeros(samples[0].nrows(), samples[0].ncols());
    for (k, w) in nodes.into_iter().zip(weights) {
        out += linalg::scale(&samples[k], Complex64::new(w * scale, 0.0));
    }
    out
}

/// Estimates `f(λ)`, `λ = ±1`, from `f(λ(1 - k h))` for small `k`, with
/// `h` rounded down to a power of two.
///
/// Two extrapolations are formed and the one closer to unitary is kept:
/// the cubic in `f` itself, and the cubic in `Φ(u) = u F(λ(1 - u))`, where
/// `F = (1 + z f)(1 - z f)^{-1}`. A mass `M` of the spectral measure at `λ`
/// is a simple pole of `F`, so `Φ(u) = M (2 - u) + u G` stays smooth even
/// when `M` is far smaller than `h`, while `f` varies on the scale of `M`.
/// From `F ≈ 2M/u + Φ'(0)` the limit is `λ̄` on the range of `M` and the
/// Cayley transform of `Φ'(0)` on its kernel. Repeating the extrapolation
/// with step `2h` bounds its error, which sets the mass threshold.
pub fn radial_estimate(
    eval: impl Fn(Complex64) -> Result<CMat>,
    point: BoundaryPoint,
    h: f64,
) -> Result<RadialEstimate> {
    if !(h > 0.0 && h < 0.1) {
        return Err(Error::InvalidParameter(format!("radial step {h} must lie in (0, 1/10)")));
    }
    // a power of two keeps every radius 1 - k h exact
    let h = h.log2().floor().exp2();
    let lambda = point.z();
    // samples at u = k h for k = 1, 2, 3, 4, 6, 8
    let steps = [1.0, 2.0, 3.0, 4.0, 6.0, 8.0];
    let mut fs = Vec::with_capacity(steps.len());
    let mut phis = Vec::with_capacity(steps.len());
    for k in steps {
        let u = k * h;
        let z = lambda * (1.0 - u);
        let f = eval(z)?;
        let id = linalg::identity(f.nrows());
        let zf = linalg::scale(&f, z);
        let carath = linalg::solve(&(&id - &zf), &(&id + &zf))?;
        phis.push(linalg::scale(&carath, Complex64::new(u, 0.0)));
        fs.push(f);
    }
    let fine = [0, 1, 2, 3];
    let coarse = [1, 3, 4, 5];
    let f_limit = weighted(&fs, fine, VALUE_WEIGHTS, 1.0);
    let phi0 = weighted(&phis, fine, VALUE_WEIGHTS, 1.0);
    let phi0_coarse = weighted(&phis, coarse, VALUE_WEIGHTS, 1.0);
    let slope = weighted(&phis, fine, SLOPE_WEIGHTS, 1.0 / h);
    let n = f_limit.nrows();

    let herm = |m: &CMat| linalg::scale(&linalg::add(m, &linalg::adjoint(m)), Complex64::new(0.25, 0.0));
    // the cubic error scales like h^4, so the two estimates differ by ~15x it
    let error = linalg::max_abs(&(&phi0 - &phi0_coarse)) / 15.0 * n as f64;
    let threshold = (MASS_FLOOR * linalg::max_abs(&phi0).max(1.0)).max(MASS_ERROR_FACTOR * error);
    let (vals, vecs) = linalg::hermitian_eigen(&herm(&phi0))?;
    let kernel: Vec<Vec<Complex64>> =
        (0..n).filter(|&i| vals[i] <= threshold).map(|i| linalg::column(&vecs, i)).collect();
    let mut masses: Vec<f64> = vals.iter().copied().filter(|&v| v > threshold).collect();
    masses.sort_by(f64::total_cmp);
    let id = linalg::identity(n);
    let mut cayley = id.clone();
    if !kernel.is_empty() {
        let v = linalg::from_columns(n, &kernel);
        let reduced = linalg::adjoint(&v) * (&slope + &id) * &v;
        let x = &v * linalg::inverse(&reduced)? * linalg::adjoint(&v);
        cayley = &id - linalg::scale(&x, Complex64::new(2.0, 0.0));
    }
    let pole_limit = linalg::scale(&cayley, lambda.conj());

    let r_f = linalg::unitarity_residual(&f_limit);
    let r_pole = linalg::unitarity_residual(&pole_limit);
    let (value, residual) = if r_pole < r_f { (pole_limit, r_pole) } else { (f_limit, r_f) };
    let raw = fs.swap_remove(0);
    Ok(RadialEstimate { raw_residual: linalg::unitarity_residual(&raw), residual, value, raw, masses })
}

/// Step refinements the resolvent routes allow when the tail decay rate is
/// known.
pub const REFINEMENTS: usize = 5;

/// [`radial_estimate`] at `h`, retried with `h / 10` up to `refinements`
/// times while the unitarity residual exceeds `tol`. Eigenvalues close to
/// `±1` (at distance `ε`, weight `μ`) only resolve once `h ≪ ε² / μ`.
pub fn refined_estimate(
    eval: impl Fn(Complex64) -> Result<CMat>,
    point: BoundaryPoint,
    h: f64,
    tol: f64,
    refinements: usize,
) -> Result<RadialEstimate> {
    let mut est = radial_estimate(&eval, point, h)?;
    let mut step = h;
    for _ in 0..refinements {
        if est.residual <= tol {
            break;
        }
        step /= 10.0;
        est = radial_estimate(&eval, point, step)?;
    }
    Ok(est)
}

/// Relative agreement required of point masses seen from two truncations.
const MASS_AGREEMENT: f64 = 1e-3;

/// Whether two estimates see the same point masses. Edge states at the far
/// end of a truncation show up as masses that shrink as the truncation grows.
fn masses_agree(a: &RadialEstimate, b: &RadialEstimate) -> bool {
    a.masses.len() == b.masses.len()
        && a.masses.iter().zip(&b.masses).all(|(x, y)| (x - y).abs() <= MASS_AGREEMENT * x.max(*y))
}

fn block_estimates(
    unitary: &BandedUnitary,
    start: usize,
    len: usize,
    h: f64,
    tol: f64,
    refinements: usize,
) -> Result<[RadialEstimate; 2]> {
    let [p, m] = BoundaryPoint::BOTH;
    Ok([
        refined_estimate(|z| unitary.resolvent_column(start, len, z), p, h, tol, refinements)?,
        refined_estimate(|z| unitary.resolvent_column(start, len, z), m, h, tol, refinements)?,
    ])
}

fn si_pm_from_estimates(est: &[RadialEstimate; 2], gamma_cell: &CMat, tol: &Tolerances) -> Option<(i64, i64)> {
    let len = gamma_cell.nrows();
    let mut out = [0i64; 2];
    for (i, point) in BoundaryPoint::BOTH.into_iter().enumerate() {
        if est[i].residual > tol.boundary {
            return None;
        }
        let m = linalg::identity(len) + linalg::scale(&est[i].value, point.z());
        let v = linalg::trace(&(gamma_cell * m)) * 0.5;
        let n = v.re.round();
        if (v.re - n).abs() > tol.rounding || v.im.abs() > tol.rounding {
            return None;
        }
        out[i] = n as i64;
    }
    Some((out[0], out[1]))
}

/// `(si₊, si₋)` from the radial boundary values of the Schur function of
/// the index block `start..start + len`, with chiral symmetry `gamma_cell`
/// on that block. `None` when the values are not yet quantized.
pub fn si_pm_block(
    unitary: &BandedUnitary,
    start: usize,
    gamma_cell: &CMat,
    h: f64,
    tol: &Tolerances,
) -> Result<Option<(i64, i64)>> {
    let est = block_estimates(unitary, start, gamma_cell.nrows(), h, tol.boundary, 0)?;
    Ok(si_pm_from_estimates(&est, gamma_cell, tol))
}

/// Which route computes boundary values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRoute {
    Exact,
    Resolvent,
}

/// Options for walk-level index computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IndexOptions {
    pub tolerances: Tolerances,
    pub route: BoundaryRoute,
    /// Radial step `h` of the resolvent route (`r = 1 - h`).
    pub radial_step: f64,
    /// Cells beyond the window on each side in the first resolvent attempt.
    pub initial_margin: usize,
    pub max_radius: usize,
}

impl Default for IndexOptions {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            route: BoundaryRoute::Exact,
            radial_step: 1e-6,
            initial_margin: 24,
            max_radius: 4096,
        }
    }
}

/// Decay rate per cell, at `z` on the unit circle, of the decaying
/// solution of the Szegő recursion with period-two parameters `pair`.
/// Zero when `z` lies in the spectrum of the periodic operator.
pub fn tail_decay_rate(pair: [Complex64; 2], z: Complex64) -> f64 {
    let transfer = |a: Complex64| {
        let rho = (1.0 - a.norm_sqr()).sqrt();
        CMat::from_fn(2, 2, |i, j| {
            let v = match (i, j) {
                (0, 0) => z,
                (0, 1) => -a.conj(),
                (1, 0) => -a * z,
                _ => Complex64::new(1.0, 0.0),
            };
            v / rho
        })
    };
    let t = transfer(pair[1]) * transfer(pair[0]);
    // eigenvalues m of t have m1 m2 = det t = z^2
    let tr = t[(0, 0)] + t[(1, 1)];
    let det = t[(0, 0)] * t[(1, 1)] - t[(0, 1)] * t[(1, 0)];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let m = ((tr + disc) / 2.0).norm().max(((tr - disc) / 2.0).norm());
    m.ln().max(0.0)
}

/// Options for a resolvent route on `spec`, with the number of radial step
/// refinements it supports. Refining to step `h` needs far-end edge states
/// to weigh well below `h` at the index cell, which fixes the margin from
/// the slowest tail decay rate at `±1`. Without scalar tails no refinement
/// is attempted.
fn resolvent_plan(spec: &WalkSpec, opts: &IndexOptions) -> (IndexOptions, usize) {
    let Ok(seq) = spec.schur_params() else {
        return (*opts, 0);
    };
    let rate = [seq.left, seq.right]
        .into_iter()
        .flat_map(|pair| BoundaryPoint::BOTH.map(|p| tail_decay_rate(pair, p.z())))
        .fold(f64::INFINITY, f64::min);
    if !(rate > 0.0) {
        return (*opts, 0);
    }
    let finest = opts.radial_step / 10f64.powi(REFINEMENTS as i32);
    let margin = ((1e3 / finest).ln() / (2.0 * rate)).ceil() as usize;
    let margin = opts.initial_margin.max(margin).min(opts.max_radius / 4);
    (IndexOptions { initial_margin: margin, ..*opts }, REFINEMENTS)
}

/// Runs `attempt` on growing truncations until the answers at radius `N`
/// and `N + 2` agree; two successive disagreements abort.
fn adaptive<T: PartialEq + Copy>(
    spec: &WalkSpec,
    opts: &IndexOptions,
    mut attempt: impl FnMut(usize, &WalkTruncation) -> Result<Option<T>>,
) -> Result<T> {
    let (lo, hi) = spec.window_span();
    let mut radius = (lo.abs().max(hi.abs()) as usize + opts.initial_margin).max(4);
    let mut changes = 0;
    let mut previous: Option<T> = None;
    while radius + 2 <= opts.max_radius {
        let a = attempt(radius, &build_walk(spec, radius)?)?;
        let b = attempt(radius + 2, &build_walk(spec, radius + 2)?)?;
        if a.is_some() && a == b {
            return Ok(b.expect("checked above"));
        }
        if let Some(b) = b {
            if previous.is_some_and(|p| p != b) {
                changes += 1;
                if changes >= 2 {
                    return Err(Error::WindowNotConverged(format!(
                        "enlarging the window changed the result twice (radius {radius})"
                    )));
                }
            } else {
                changes = 0;
            }
            previous = Some(b);
        }
        radius *= 2;
    }
    Err(Error::WindowNotConverged(format!("no stable answer up to radius {}", opts.max_radius)))
}

/// `(si₊, si₋)` from the cell Schur function of the truncated walk.
pub fn si_pm_resolvent(spec: &WalkSpec, opts: &IndexOptions) -> Result<(i64, i64)> {
    ensure_gapped(spec)?;
    let gamma0 = spec.gamma_block(0)?.matrix().clone();
    let len = gamma0.nrows();
    let (opts, refinements) = &resolvent_plan(spec, opts);
    let refinements = *refinements;
    adaptive(spec, opts, |radius, t| {
        let est = block_estimates(&t.unitary, t.cell_start(0), len, opts.radial_step, opts.tolerances.boundary, refinements)?;
        if est.iter().any(|e| !e.masses.is_empty()) {
            let t2 = build_walk(spec, radius + 1)?;
            let est2 = block_estimates(&t2.unitary, t2.cell_start(0), len, opts.radial_step, opts.tolerances.boundary, refinements)?;
            if !est.iter().zip(&est2).all(|(a, b)| masses_agree(a, b)) {
                return Ok(None);
            }
        }
        Ok(si_pm_from_estimates(&est, &gamma0, &opts.tolerances))
    })
}

/// `(si₊, si₋)` of a walk.
pub fn si_pm_walk(spec: &WalkSpec, opts: &IndexOptions) -> Result<(i64, i64)> {
    match opts.route {
        BoundaryRoute::Exact => {
            let q = quantized_at(spec, 0, &opts.tolerances)?;
            Ok((q.si_plus(), q.si_minus()))
        }
        BoundaryRoute::Resolvent => si_pm_resolvent(spec, opts),
    }
}

/// Boundary values of `f_L^{x↑}`, `f_R^{x↓}` from truncations, enlarged
/// until stable.
pub fn boundary_values_resolvent(spec: &WalkSpec, x: i64, opts: &IndexOptions) -> Result<BoundaryValues> {
    ensure_gapped(spec)?;
    let (opts, refinements) = &resolvent_plan(spec, opts);
    let refinements = *refinements;
    let tol = opts.tolerances;
    let estimate = |radius: usize, t: &WalkTruncation| -> Result<Option<BoundaryValues>> {
        let mut vals: Vec<CMat> = Vec::with_capacity(4);
        let mut larger: Option<WalkTruncation> = None;
        for side in [HalfLine::Left, HalfLine::Right] {
            for point in BoundaryPoint::BOTH {
                let est = refined_estimate(|z| half_line_resolvent(t, x, side, z), point, opts.radial_step, tol.boundary, refinements)?;
                if est.residual > tol.boundary {
                    return Ok(None);
                }
                if !est.masses.is_empty() {
                    if larger.is_none() {
                        larger = Some(build_walk(spec, radius + 1)?);
                    }
                    let t2 = larger.as_ref().expect("built above");
                    let check = refined_estimate(|z| half_line_resolvent(t2, x, side, z), point, opts.radial_step, tol.boundary, refinements)?;
                    if !masses_agree(&est, &check) {
                        return Ok(None);
                    }
                }
                vals.push(est.value);
            }
        }
        let mut it = vals.into_iter();
        let mut next = || it.next().expect("four values");
        Ok(Some(BoundaryValues { site: x, left: [next(), next()], right: [next(), next()] }))
    };
    let mut last: Option<BoundaryValues> = None;
    adaptive(spec, opts, |radius, t| {
        let v = estimate(radius, t)?;
        let q = v.as_ref().and_then(|v| v.quantize(tol.rounding));
        if q.is_some() {
            last = v;
        }
        Ok(q)
    })?;
    Ok(last.expect("adaptive loop stores the accepted values"))
}

fn quantized_at(spec: &WalkSpec, x: i64, tol: &Tolerances) -> Result<QuantizedTraces> {
    let v = boundary_values_exact(spec, x, tol)?;
    v.quantize(tol.rounding).ok_or_else(|| {
        let t = v.traces();
        Error::WindowNotConverged(format!(
            "boundary traces ({}, {}, {}, {}) are not quantized",
            t.left_plus, t.left_minus, t.right_plus, t.right_minus
        ))
    })
}

/// `(siL, siR)` of a walk, from the exact boundary values at site 0.
pub fn si_lr_walk(spec: &WalkSpec, opts: &IndexOptions) -> Result<(i64, i64)> {
    let q = quantized_at(spec, 0, &opts.tolerances)?;
    Ok((q.si_left(), q.si_right()))
}

// ---------------------------------------------------------------------------
// Phase tables

/// Boundary class of a half-line Schur function with values in `{±1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalarClass {
    /// `f(±1) = ±1`
    OddPlus,
    /// `f(±1) = ∓1`
    OddMinus,
    /// `f(±1) = 1`
    EvenPlus,
    /// `f(±1) = -1`
    EvenMinus,
}

impl ScalarClass {
    pub const ALL: [ScalarClass; 4] =
        [ScalarClass::OddPlus, ScalarClass::OddMinus, ScalarClass::EvenPlus, ScalarClass::EvenMinus];

    /// `[f(1), f(-1)]`.
    pub fn values(self) -> [i64; 2] {
        match self {
            ScalarClass::OddPlus => [1, -1],
            ScalarClass::OddMinus => [-1, 1],
            ScalarClass::EvenPlus => [1, 1],
            ScalarClass::EvenMinus => [-1, -1],
        }
    }

    pub fn from_values(values: [i64; 2]) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.values() == values)
    }

    pub fn describe(self, name: &str) -> String {
        match self {
            ScalarClass::OddPlus => format!("{name}(±1)=±1"),
            ScalarClass::OddMinus => format!("{name}(±1)=∓1"),
            ScalarClass::EvenPlus => format!("{name}(±1)=1"),
            ScalarClass::EvenMinus => format!("{name}(±1)=-1"),
        }
    }
}

pub type Triple = (i64, i64, i64);

/// Split-step phases `(siL, siR, si₋)`; rows are the class of `f_L`, columns
/// the class of `f_R`, both in the order of [`ScalarClass::ALL`].
pub const SPLIT_STEP_TABLE: [[Triple; 4]; 4] = [
    [(1, 1, 1), (1, -1, 0), (1, 0, 0), (1, 0, 1)],
    [(-1, 1, 0), (-1, -1, -1), (-1, 0, -1), (-1, 0, 0)],
    [(0, 1, 0), (0, -1, -1), (0, 0, -1), (0, 0, 0)],
    [(0, 1, 1), (0, -1, 0), (0, 0, 0), (0, 0, 1)],
];

/// The same table after forgetting all symmetries but particle-hole.
pub const SPLIT_STEP_MOD2_TABLE: [[(u8, u8, u8); 4]; 4] = [
    [(1, 1, 1), (1, 1, 0), (1, 0, 0), (1, 0, 1)],
    [(1, 1, 0), (1, 1, 1), (1, 0, 1), (1, 0, 0)],
    [(0, 1, 0), (0, 1, 1), (0, 0, 1), (0, 0, 0)],
    [(0, 1, 1), (0, 1, 0), (0, 0, 0), (0, 0, 1)],
];

/// Chiral coined walks with `d = 2`; rows `tr f_L(1) = 2, 0, -2`, columns
/// `tr f_R(1) = 2, 0, -2`.
pub const COINED_D2_TABLE: [[Triple; 3]; 3] = [
    [(2, 2, 2), (2, 0, 1), (2, -2, 0)],
    [(0, 2, 1), (0, 0, 0), (0, -2, -1)],
    [(-2, 2, 0), (-2, 0, -1), (-2, -2, -2)],
];

/// Shifted-coin walks with `d = 2`, same layout as [`COINED_D2_TABLE`].
pub const SHIFTED_D2_TABLE: [[Triple; 3]; 3] = [
    [(0, 0, -2), (0, 0, -1), (0, 0, 0)],
    [(0, 0, -1), (0, 0, 0), (0, 0, 1)],
    [(0, 0, 0), (0, 0, 1), (0, 0, 2)],
];

fn table_contains<const N: usize>(table: &[[Triple; N]], t: Triple) -> bool {
    table.iter().flatten().any(|&x| x == t)
}

fn triple_string(t: Triple) -> String {
    format!("({},{},{})", t.0, t.1, t.2)
}

/// Label of a phase in the table of its model, or `"unlisted"`.
pub fn phase_label(model: Model, d: usize, triple: Triple) -> String {
    let listed = match (model, d) {
        (_, 1) => table_contains(&SPLIT_STEP_TABLE, triple),
        (Model::ChiralCoined, 2) => table_contains(&COINED_D2_TABLE, triple),
        (Model::ShiftedCoined, 2) => table_contains(&SHIFTED_D2_TABLE, triple),
        _ => false,
    };
    if listed {
        triple_string(triple)
    } else {
        "unlisted".into()
    }
}

/// Label in the particle-hole table, or `"unlisted"`.
pub fn mod2_label(triple: (u8, u8, u8)) -> String {
    if SPLIT_STEP_MOD2_TABLE.iter().flatten().any(|&x| x == triple) {
        format!("({},{},{}) mod 2", triple.0, triple.1, triple.2)
    } else {
        "unlisted".into()
    }
}

// ---------------------------------------------------------------------------
// Classification

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XIndependence {
    pub sites: Vec<i64>,
    pub consistent: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub tail_gaps: Vec<TailGap>,
    pub boundary_traces: Option<BoundaryTraces>,
    pub boundary_residual: Option<f64>,
    pub x_independence: Option<XIndependence>,
    /// `½ (tr f_L(1) + tr f_R(1))`, computed without the sum rule.
    pub si_plus_direct: Option<i64>,
    pub sum_rule_holds: Option<bool>,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexReport {
    pub model: Model,
    pub d: usize,
    pub symmetry: SymmetryType,
    pub gapped: bool,
    pub si_plus: Option<SymmetryIndex>,
    pub si_minus: Option<SymmetryIndex>,
    pub si_left: Option<SymmetryIndex>,
    pub si_right: Option<SymmetryIndex>,
    pub phase_label: String,
    pub diagnostics: Diagnostics,
}

impl IndexReport {
    /// `(siL, siR, si₋)` when all three are integers.
    pub fn triple(&self) -> Option<Triple> {
        Some((
            self.si_left?.integer()?,
            self.si_right?.integer()?,
            self.si_minus?.integer()?,
        ))
    }

    /// `(siL, siR, si₋)` as residues, after [`forget_mod2`].
    pub fn residue_triple(&self) -> Option<(u8, u8, u8)> {
        let r = |s: Option<SymmetryIndex>| match s? {
            SymmetryIndex::Residue { value, .. } => Some(value),
            SymmetryIndex::Integer(_) => None,
        };
        Some((r(self.si_left)?, r(self.si_right)?, r(self.si_minus)?))
    }

    /// First gap failure, as `(side, point)`.
    pub fn gap_failure(&self) -> Option<(HalfLine, i8)> {
        self.diagnostics.tail_gaps.iter().find(|g| !g.gapped).map(|g| (g.side, g.point))
    }
}

/// Sites used for the x-independence check: just left of the window, the
/// origin, and just right of the window.
pub fn certification_sites(spec: &WalkSpec) -> Vec<i64> {
    let (lo, hi) = spec.window_span();
    let mut sites = vec![lo - 1, 0, hi + 1];
    sites.dedup();
    sites
}

pub fn classify(spec: &WalkSpec, opts: &IndexOptions) -> IndexReport {
    let mut report = IndexReport {
        model: spec.model(),
        d: spec.d(),
        symmetry: walk_symmetry(spec.model()),
        gapped: false,
        si_plus: None,
        si_minus: None,
        si_left: None,
        si_right: None,
        phase_label: "unlisted".into(),
        diagnostics: Diagnostics::default(),
    };
    let diag = &mut report.diagnostics;
    match tail_gaps(spec) {
        Ok(g) => diag.tail_gaps = g,
        Err(e) => {
            diag.messages.push(format!("gap analysis failed: {e}"));
            return report;
        }
    }
    if let Some(g) = diag.tail_gaps.iter().find(|g| !g.gapped) {
        diag.messages.push(format!("gap closed: {} tail at {:+}", g.side.name(), g.point));
        report.phase_label = "gap-closed".into();
        return report;
    }
    report.gapped = true;
    let tol = opts.tolerances;
    let values = match opts.route {
        BoundaryRoute::Exact => boundary_values_exact(spec, 0, &tol),
        BoundaryRoute::Resolvent => boundary_values_resolvent(spec, 0, opts),
    };
    let values = match values {
        Ok(v) => v,
        Err(e) => {
            diag.messages.push(format!("boundary values failed: {e}"));
            return report;
        }
    };
    diag.boundary_traces = Some(values.traces());
    diag.boundary_residual = Some(values.residual());
    let Some(q) = values.quantize(tol.rounding) else {
        diag.messages.push("boundary traces are not quantized".into());
        return report;
    };

    let mut consistent = true;
    let sites = certification_sites(spec);
    for &x in &sites {
        if x == 0 {
            continue;
        }
        match boundary_values_exact(spec, x, &tol).map(|v| v.quantize(tol.rounding)) {
            Ok(Some(qx)) if qx == q => {}
            Ok(_) => consistent = false,
            Err(e) => {
                consistent = false;
                diag.messages.push(format!("boundary values at site {x} failed: {e}"));
            }
        }
    }
    diag.x_independence = Some(XIndependence { sites, consistent });
    if !consistent {
        diag.messages.push("boundary values depend on the site".into());
    }
    match spec.model() {
        Model::ChiralCoined if q.left[0] != -q.left[1] || q.right[0] != -q.right[1] => {
            diag.messages.push("coined boundary values are not odd".into());
        }
        Model::ShiftedCoined if q.left[0] != q.left[1] || q.right[0] != q.right[1] => {
            diag.messages.push("shifted-coin boundary values are not even".into());
        }
        _ => {}
    }

    let (si_l, si_r, si_m) = (q.si_left(), q.si_right(), q.si_minus());
    let si_p = si_l + si_r - si_m;
    diag.si_plus_direct = Some(q.si_plus());
    diag.sum_rule_holds = Some(q.si_plus() == si_p);
    report.si_left = Some(SymmetryIndex::Integer(si_l));
    report.si_right = Some(SymmetryIndex::Integer(si_r));
    report.si_minus = Some(SymmetryIndex::Integer(si_m));
    report.si_plus = Some(SymmetryIndex::Integer(si_p));
    report.phase_label = phase_label(spec.model(), spec.d(), (si_l, si_r, si_m));
    report
}

/// Reduces every index mod 2, as for the particle-hole symmetry alone.
pub fn forget_mod2(report: &IndexReport) -> IndexReport {
    let mut out = report.clone();
    out.symmetry = SymmetryType { eta: Some(1), tau: None, chiral: false };
    out.si_plus = report.si_plus.map(SymmetryIndex::mod2);
    out.si_minus = report.si_minus.map(SymmetryIndex::mod2);
    out.si_left = report.si_left.map(SymmetryIndex::mod2);
    out.si_right = report.si_right.map(SymmetryIndex::mod2);
    out.phase_label = match out.residue_triple() {
        Some(t) if report.d == 1 => mod2_label(t),
        Some(_) => "unlisted".into(),
        None => report.phase_label.clone(),
    };
    out
}

// ---------------------------------------------------------------------------
// Mass points

/// A point mass of the spectral measure of a subspace.
#[derive(Debug, Clone)]
pub struct MassPoint {
    pub eigenvalue: Complex64,
    /// Orthonormal basis of `ker(1 - λ f(λ))`, in subspace coordinates.
    pub kernel: CMat,
}

/// Dimension of the smallest `U`-invariant subspace containing the columns
/// of `basis`.
pub fn krylov_rank(u: &CMat, basis: &CMat) -> Result<usize> {
    let n = u.nrows();
    let mut q: Vec<Vec<Complex64>> = Vec::new();
    let orth = |q: &Vec<Vec<Complex64>>, mut v: Vec<Complex64>| -> Option<Vec<Complex64>> {
        let norm0 = linalg::vec_norm(&v);
        for _ in 0..2 {
            for b in q {
                let c: Complex64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let norm = linalg::vec_norm(&v);
        (norm > 1e-10 * norm0.max(1e-300)).then(|| v.into_iter().map(|x| x / norm).collect())
    };
    let mut frontier: Vec<Vec<Complex64>> = Vec::new();
    for j in 0..basis.ncols() {
        if let Some(v) = orth(&q, linalg::column(basis, j)) {
            q.push(v.clone());
            frontier.push(v);
        }
    }
    while !frontier.is_empty() && q.len() < n {
        let mut next = Vec::new();
        for v in frontier {
            let vm = CMat::from_fn(n, 1, |i, _| v[i]);
            let w = linalg::column(&(u * vm), 0);
            if let Some(w) = orth(&q, w) {
                q.push(w.clone());
                next.push(w);
            }
        }
        frontier = next;
    }
    Ok(q.len())
}

/// Eigenvalues of `u` (grouped within `1e-7`) with the kernels of
/// `1 - λ f(λ)`, where `f` is the Schur function of the orthonormal
/// columns of `basis`.
pub fn mass_points(u: &CMat, basis: &CMat) -> Result<Vec<MassPoint>> {
    let n = u.nrows();
    if u.ncols() != n || basis.nrows() != n || basis.ncols() == 0 {
        return Err(Error::InvalidParameter("mass_points: shape mismatch".into()));
    }
    let gram = basis.adjoint() * basis;
    if linalg::max_abs_diff(&gram, &linalg::identity(basis.ncols())) > 1e-10 {
        return Err(Error::InvalidParameter("subspace basis must be orthonormal".into()));
    }
    let rank = krylov_rank(u, basis)?;
    if rank < n {
        return Err(Error::NotCyclic { rank, dim: n });
    }
    let (mut values, _) = linalg::eigen(u)?;
    values.sort_by(|a, b| a.arg().total_cmp(&b.arg()));
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for v in values {
        let v = v / v.norm();
        match clusters.iter_mut().find(|c| (c[0] - v).norm() < 1e-7) {
            Some(c) => c.push(v),
            None => clusters.push(vec![v]),
        }
    }
    let k = basis.ncols();
    let mut out = Vec::with_capacity(clusters.len());
    for c in clusters {
        let mean: Complex64 = c.iter().sum::<Complex64>() / c.len() as f64;
        let lambda = mean / mean.norm();
        let f = subspace_schur(u, basis, lambda)?;
        let m = linalg::identity(k) - linalg::scale(&f, lambda);
        let kernel = linalg::null_space(&m, 1e-7)?;
        out.push(MassPoint { eigenvalue: lambda, kernel });
    }
    Ok(out)
}

/// `|det(1 - z f(z))|`-style residual: smallest singular value of `1 - z f(z)`.
pub fn mass_point_residual(u: &CMat, basis: &CMat, z: Complex64) -> Result<f64> {
    let f = subspace_schur(u, basis, z)?;
    let m = linalg::identity(basis.ncols()) - linalg::scale(&f, z);
    Ok(linalg::singular_values(&m)?.into_iter().fold(f64::INFINITY, f64::min))
}
