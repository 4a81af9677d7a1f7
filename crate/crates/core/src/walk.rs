//! Walk models: split-step walks, chiral coined walks and shifted-coin walks.
//!
//! Every model is written as `W = γ̃ γ` with γ cell-aligned and γ̃ acting on
//! `H↓_{x-1} ⊕ H↑_x`. Sites `x <= 0` follow the left tail and sites `x > 0`
//! the right tail unless the window overrides them.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cmv::{assemble_cells, BandedUnitary, Boundary, Layer, ThetaBlock, TwoSidedSeq};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    SplitStep,
    ChiralCoined,
    ShiftedCoined,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::SplitStep => "split_step",
            Model::ChiralCoined => "chiral_coined",
            Model::ShiftedCoined => "shifted_coined",
        }
    }
}

/// Sign of the square root when a coin is given by its `A` block alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// A `2d × 2d` coin `C = [[A, B̂], [B, A*]]` with `det A != 0`, `B* = B`,
/// `A*A + B² = 1` and `B̂ = -A B A^{-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coin {
    a: CMat,
    b: CMat,
    b_hat: CMat,
}

const COIN_TOL: f64 = 1e-10;

impl Coin {
    pub fn from_blocks(a: CMat, b: CMat) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || a.ncols() != d || b.nrows() != d || b.ncols() != d {
            return Err(Error::InvalidParameter("coin blocks must be square of equal size".into()));
        }
        let herm = linalg::max_abs_diff(&b, &linalg::adjoint(&b));
        if herm > COIN_TOL {
            return Err(Error::CoinConstraintViolated { identity: "B* = B", residual: herm });
        }
        let norm = linalg::max_abs(&(a.adjoint() * &a + &b * &b - linalg::identity(d)));
        if norm > COIN_TOL {
            return Err(Error::CoinConstraintViolated { identity: "A*A + B^2 = 1", residual: norm });
        }
        let sv = linalg::singular_values(&a)?;
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin <= COIN_TOL {
            return Err(Error::CoinConstraintViolated { identity: "det A != 0", residual: smin });
        }
        let a_inv = linalg::inverse(&a)?;
        let b_hat = -(&a * &b * a_inv);
        Ok(Self { a, b, b_hat })
    }

    /// `B = ±(1 - A*A)^{1/2}`, `B̂ = ∓(1 - AA*)^{1/2}`.
    pub fn from_a(a: CMat, sign: Sign) -> Result<Self> {
        let d = a.nrows();
        if d == 0 || a.ncols() != d {
            return Err(Error::InvalidParameter("coin block A must be square".into()));
        }
        let id = linalg::identity(d);
        let b = linalg::scale(
            &linalg::psd_sqrt(&(&id - a.adjoint() * &a)).map_err(|_| Error::CoinConstraintViolated {
                identity: "||A|| <= 1",
                residual: linalg::singular_values(&a).map(|s| s[0] - 1.0).unwrap_or(f64::NAN),
            })?,
            Complex64::new(sign.value(), 0.0),
        );
        let coin = Self::from_blocks(a, b)?;
        let b_hat_alt = linalg::scale(
            &linalg::psd_sqrt(&(&id - &coin.a * coin.a.adjoint()))?,
            Complex64::new(-sign.value(), 0.0),
        );
        let r = linalg::max_abs_diff(&b_hat_alt, &coin.b_hat);
        if r > 1e-8 {
            return Err(Error::CoinConstraintViolated { identity: "B^ = -A B A^-1", residual: r });
        }
        Ok(coin)
    }

    /// `A = diag(cos θ_r)`, `B = diag(sin θ_r)`.
    pub fn diagonal(angles: &[f64]) -> Result<Self> {
        for (r, &t) in angles.iter().enumerate() {
            if !(t.abs() < FRAC_PI_2) {
                return Err(Error::AngleOutOfRange { location: format!("diagonal angle {r}"), value: t });
            }
        }
        let a: Vec<Complex64> = angles.iter().map(|t| Complex64::new(t.cos(), 0.0)).collect();
        let b: Vec<Complex64> = angles.iter().map(|t| Complex64::new(t.sin(), 0.0)).collect();
        let b_hat: Vec<Complex64> = b.iter().map(|x| -x).collect();
        if angles.is_empty() {
            return Err(Error::InvalidParameter("empty angle list".into()));
        }
        Ok(Self { a: linalg::diag(&a), b: linalg::diag(&b), b_hat: linalg::diag(&b_hat) })
    }

    /// The real rotation `[[cos θ, -sin θ], [sin θ, cos θ]]`.
    pub fn rotation(theta: f64) -> Result<Self> {
        Self::diagonal(&[theta])
    }

    pub fn identity(d: usize) -> Self {
        Self { a: linalg::identity(d), b: linalg::zeros(d, d), b_hat: linalg::zeros(d, d) }
    }

    pub fn d(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }

    pub fn b(&self) -> &CMat {
        &self.b
    }

    pub fn b_hat(&self) -> &CMat {
        &self.b_hat
    }

    /// The coin `[[A, B̂], [B, A*]]`.
    pub fn matrix(&self) -> CMat {
        let d = self.d();
        let mut m = linalg::zeros(2 * d, 2 * d);
        linalg::set_block(&mut m, 0, 0, &self.a);
        linalg::set_block(&mut m, 0, d, &self.b_hat);
        linalg::set_block(&mut m, d, 0, &self.b);
        linalg::set_block(&mut m, d, d, &linalg::adjoint(&self.a));
        m
    }

    /// The involution `T C = [[B, A*], [A, B̂]]`.
    pub fn gamma_block(&self) -> CMat {
        let d = self.d();
        let mut m = linalg::zeros(2 * d, 2 * d);
        linalg::set_block(&mut m, 0, 0, &self.b);
        linalg::set_block(&mut m, 0, d, &linalg::adjoint(&self.a));
        linalg::set_block(&mut m, d, 0, &self.a);
        linalg::set_block(&mut m, d, d, &self.b_hat);
        m
    }
}

/// Coin data of a single site.
#[derive(Debug, Clone, PartialEq)]
pub enum SiteData {
    /// Split-step rotation angles `(θ1, θ2)`.
    Angles { theta1: f64, theta2: f64 },
    /// A single coin of a coined model.
    Coin(Coin),
}

/// Declarative description of a walk.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSpec {
    model: Model,
    d: usize,
    left_tail: SiteData,
    right_tail: SiteData,
    window: BTreeMap<i64, SiteData>,
}

fn check_angle(theta: f64, location: String) -> Result<()> {
    if theta.is_finite() && theta.abs() < FRAC_PI_2 {
        Ok(())
    } else {
        Err(Error::AngleOutOfRange { location, value: theta })
    }
}

impl WalkSpec {
    /// Split-step walk; tails and window entries are `(θ1, θ2)` pairs.
    pub fn split_step(left: (f64, f64), right: (f64, f64), window: BTreeMap<i64, (f64, f64)>) -> Result<Self> {
        check_angle(left.0, "left_tail.theta1".into())?;
        check_angle(left.1, "left_tail.theta2".into())?;
        check_angle(right.0, "right_tail.theta1".into())?;
        check_angle(right.1, "right_tail.theta2".into())?;
        for (x, &(t1, t2)) in &window {
            check_angle(t1, format!("window[x={x}].theta1"))?;
            check_angle(t2, format!("window[x={x}].theta2"))?;
        }
        let site = |(theta1, theta2): (f64, f64)| SiteData::Angles { theta1, theta2 };
        Ok(Self {
            model: Model::SplitStep,
            d: 1,
            left_tail: site(left),
            right_tail: site(right),
            window: window.into_iter().map(|(x, p)| (x, site(p))).collect(),
        })
    }

    pub fn translation_invariant(theta1: f64, theta2: f64) -> Result<Self> {
        Self::split_step((theta1, theta2), (theta1, theta2), BTreeMap::new())
    }

    /// Chiral coined (`W = S C`) or shifted-coined (`W = S↓ C S↑`) walk.
    pub fn coined(model: Model, left: Coin, right: Coin, window: BTreeMap<i64, Coin>) -> Result<Self> {
        if model == Model::SplitStep {
            return Err(Error::InvalidParameter("use WalkSpec::split_step for split-step walks".into()));
        }
        let d = left.d();
        if right.d() != d || window.values().any(|c| c.d() != d) {
            return Err(Error::InvalidParameter("all coins must share the cell dimension".into()));
        }
        Ok(Self {
            model,
            d,
            left_tail: SiteData::Coin(left),
            right_tail: SiteData::Coin(right),
            window: window.into_iter().map(|(x, c)| (x, SiteData::Coin(c))).collect(),
        })
    }

    pub fn model(&self) -> Model {
        self.model
    }

    /// Half cell dimension `d` (cells are `2d`-dimensional).
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn left_tail(&self) -> &SiteData {
        &self.left_tail
    }

    pub fn right_tail(&self) -> &SiteData {
        &self.right_tail
    }

    pub fn window(&self) -> &BTreeMap<i64, SiteData> {
        &self.window
    }

    /// Range of window sites, always including the origin.
    pub fn window_span(&self) -> (i64, i64) {
        let lo = self.window.keys().next().copied().unwrap_or(0).min(0);
        let hi = self.window.keys().next_back().copied().unwrap_or(0).max(0);
        (lo, hi)
    }

    pub fn site(&self, x: i64) -> &SiteData {
        self.window
            .get(&x)
            .unwrap_or(if x <= 0 { &self.left_tail } else { &self.right_tail })
    }

    /// Replaces (or inserts) the data of one window site.
    pub fn with_site(&self, x: i64, data: SiteData) -> Result<Self> {
        let ok = matches!(
            (&data, self.model),
            (SiteData::Angles { .. }, Model::SplitStep)
                | (SiteData::Coin(_), Model::ChiralCoined | Model::ShiftedCoined)
        );
        if !ok {
            return Err(Error::InvalidParameter("site data does not match the model".into()));
        }
        match &data {
            SiteData::Angles { theta1, theta2 } => {
                check_angle(*theta1, format!("window[x={x}].theta1"))?;
                check_angle(*theta2, format!("window[x={x}].theta2"))?;
            }
            SiteData::Coin(c) if c.d() != self.d => {
                return Err(Error::InvalidParameter("coin dimension mismatch".into()));
            }
            SiteData::Coin(_) => {}
        }
        let mut out = self.clone();
        out.window.insert(x, data);
        Ok(out)
    }

    /// Coins `(C1_x, C2_x)` of `W = S↓ C2 S↑ C1`.
    pub fn coin_pair(&self, x: i64) -> Result<(Coin, Coin)> {
        Ok(match (self.site(x), self.model) {
            (SiteData::Angles { theta1, theta2 }, _) => (Coin::rotation(*theta1)?, Coin::rotation(*theta2)?),
            (SiteData::Coin(c), Model::ChiralCoined) => (c.clone(), Coin::identity(self.d)),
            (SiteData::Coin(c), _) => (Coin::identity(self.d), c.clone()),
        })
    }

    /// `γ_x`, acting on cell `x`.
    pub fn gamma_block(&self, x: i64) -> Result<ThetaBlock> {
        match (self.site(x), self.model) {
            (SiteData::Angles { theta1, .. }, _) => ThetaBlock::real(theta1.sin()),
            (SiteData::Coin(c), Model::ChiralCoined) => Ok(ThetaBlock::from_matrix(c.gamma_block())),
            (SiteData::Coin(_), _) => Ok(ThetaBlock::swap(self.d)),
        }
    }

    /// `γ̃_x`, acting on `H↓_{x-1} ⊕ H↑_x`.
    pub fn gamma_tilde_block(&self, x: i64) -> Result<ThetaBlock> {
        match (self.site(x), self.model) {
            (SiteData::Angles { theta2, .. }, _) => ThetaBlock::real(theta2.sin()),
            (SiteData::Coin(_), Model::ChiralCoined) => Ok(ThetaBlock::swap(self.d)),
            (SiteData::Coin(c), _) => Ok(ThetaBlock::from_matrix(c.gamma_block())),
        }
    }

    /// Split-step Schur parameters `α_{2x} = sin θ2_x`, `α_{2x+1} = sin θ1_x`.
    pub fn schur_params(&self) -> Result<TwoSidedSeq> {
        let pair = |s: &SiteData| -> Result<[Complex64; 2]> {
            match s {
                SiteData::Angles { theta1, theta2 } => {
                    Ok([Complex64::new(theta2.sin(), 0.0), Complex64::new(theta1.sin(), 0.0)])
                }
                SiteData::Coin(_) => Err(Error::InvalidParameter("only split-step walks have scalar Schur parameters".into())),
            }
        };
        let mut overrides = BTreeMap::new();
        for (&x, s) in &self.window {
            let p = pair(s)?;
            overrides.insert(2 * x, p[0]);
            overrides.insert(2 * x + 1, p[1]);
        }
        Ok(TwoSidedSeq { left: pair(&self.left_tail)?, right: pair(&self.right_tail)?, split: 0, overrides })
    }
}

/// The involution layers of `W = γ̃ γ`.
#[derive(Debug, Clone)]
pub struct ChiralPair {
    pub gamma: Layer,
    pub gamma_tilde: Layer,
    pub dim: usize,
}

impl ChiralPair {
    pub fn gamma_dense(&self) -> CMat {
        self.gamma.dense(self.dim)
    }

    pub fn gamma_tilde_dense(&self) -> CMat {
        self.gamma_tilde.dense(self.dim)
    }
}

/// A finite open-decoupled truncation of a walk to cells `-N..=N`.
#[derive(Debug, Clone)]
pub struct WalkTruncation {
    pub unitary: BandedUnitary,
    pub chiral: ChiralPair,
    pub first_cell: i64,
    pub n_cells: usize,
    pub d: usize,
}

impl WalkTruncation {
    /// First scalar index of cell `x`.
    pub fn cell_start(&self, x: i64) -> usize {
        assert!(x >= self.first_cell && x < self.first_cell + self.n_cells as i64, "cell {x} outside truncation");
        2 * self.d * (x - self.first_cell) as usize
    }

    pub fn last_cell(&self) -> i64 {
        self.first_cell + self.n_cells as i64 - 1
    }

    pub fn dim(&self) -> usize {
        self.unitary.dim()
    }
}

/// A split-step truncation together with its two-sided Schur parameters.
#[derive(Debug, Clone)]
pub struct SplitStepBuild {
    pub walk: WalkTruncation,
    pub params: TwoSidedSeq,
}

fn truncate(spec: &WalkSpec, radius: usize, boundary: Boundary) -> Result<WalkTruncation> {
    if radius == 0 {
        return Err(Error::InconsistentWindow("window radius must be positive".into()));
    }
    let n = radius as i64;
    if let (Some(&lo), Some(&hi)) = (spec.window.keys().next(), spec.window.keys().next_back()) {
        if lo < -n || hi > n {
            return Err(Error::InconsistentWindow(format!(
                "window sites {lo}..={hi} not covered by radius {radius}"
            )));
        }
    }
    let n_cells = 2 * radius + 1;
    let unitary = assemble_cells(
        -n,
        n_cells,
        spec.d,
        |x| spec.gamma_block(x),
        |x| spec.gamma_tilde_block(x),
        boundary,
    )?;
    let chiral = ChiralPair {
        gamma: unitary.layer_odd().clone(),
        gamma_tilde: unitary.layer_even().clone(),
        dim: unitary.dim(),
    };
    Ok(WalkTruncation { unitary, chiral, first_cell: -n, n_cells, d: spec.d })
}

fn expect_model(spec: &WalkSpec, model: Model) -> Result<()> {
    if spec.model != model {
        return Err(Error::InvalidParameter(format!(
            "expected a {} spec, got {}",
            model.name(),
            spec.model.name()
        )));
    }
    Ok(())
}

pub fn build_split_step(spec: &WalkSpec, window_radius: usize) -> Result<SplitStepBuild> {
    expect_model(spec, Model::SplitStep)?;
    let walk = truncate(spec, window_radius, Boundary::OpenDecoupled)?;
    Ok(SplitStepBuild { walk, params: spec.schur_params()? })
}

pub fn build_chiral_coined(spec: &WalkSpec, window_radius: usize) -> Result<WalkTruncation> {
    expect_model(spec, Model::ChiralCoined)?;
    truncate(spec, window_radius, Boundary::OpenDecoupled)
}

pub fn build_shifted_coined(spec: &WalkSpec, window_radius: usize) -> Result<WalkTruncation> {
    expect_model(spec, Model::ShiftedCoined)?;
    truncate(spec, window_radius, Boundary::OpenDecoupled)
}

/// Open-decoupled truncation of any model.
pub fn build_walk(spec: &WalkSpec, window_radius: usize) -> Result<WalkTruncation> {
    truncate(spec, window_radius, Boundary::OpenDecoupled)
}

/// Ring of the cells `-N..=N` (the window is wrapped, tails beyond are dropped).
pub fn build_walk_ring(spec: &WalkSpec, window_radius: usize) -> Result<WalkTruncation> {
    truncate(spec, window_radius, Boundary::Ring)
}

/// One of the two translation-invariant split-step phases used for crossovers:
/// `Minus` is `(1, -1, 0)` with `θ1 ≈ -π/2`, `Plus` is `(-1, 1, 0)` with `θ1 ≈ π/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Minus,
    Plus,
}

impl Phase {
    pub fn center(self) -> f64 {
        match self {
            Phase::Minus => -FRAC_PI_2,
            Phase::Plus => FRAC_PI_2,
        }
    }
}

/// `sin(ε/2) + sin(ε'/2)`, which must stay below `1/√2`.
pub fn admissibility(epsilon: f64, epsilon_prime: f64) -> f64 {
    (epsilon / 2.0).sin() + (epsilon_prime / 2.0).sin()
}

/// Draws `θ1_x ∈ [c - ε, c + ε]` (`c = ±π/2`) and `θ2_x ∈ [-ε', ε']` per
/// site. Each site uses its own stream of a seeded ChaCha generator, so the
/// value at `x` depends only on `(seed, x)`.
pub fn sample_phase_region(
    phase: Phase,
    epsilon: f64,
    epsilon_prime: f64,
    sites: Range<i64>,
    seed: u64,
) -> Result<BTreeMap<i64, (f64, f64)>> {
    if !(epsilon >= 0.0 && epsilon_prime >= 0.0) {
        return Err(Error::InvalidParameter("epsilon values must be non-negative".into()));
    }
    let value = admissibility(epsilon, epsilon_prime);
    if !(value < FRAC_1_SQRT_2) {
        return Err(Error::BoundViolated { value });
    }
    let center = phase.center();
    let mut out = BTreeMap::new();
    for x in sites {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(x as u64);
        let t1 = if epsilon > 0.0 { rng.gen_range(center - epsilon..=center + epsilon) } else { center };
        let t2 = if epsilon_prime > 0.0 { rng.gen_range(-epsilon_prime..=epsilon_prime) } else { 0.0 };
        out.insert(x, (t1, t2));
    }
    Ok(out)
}
