//! Disordered split-step crossovers on rings of `n` cells.
//!
//! Cells `0..n/2` are drawn from the `+1` phase and cells `n/2..n` from the
//! `-1` phase, so the two interfaces sit at cells `0` and `n/2`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{self, Write};

use dashu_float::ops::{EstimatedLog2, SquareRoot};
use dashu_float::FBig;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cmv::{assemble_cells, Boundary, ThetaBlock};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::walk::{sample_phase_region, Phase};

pub const MAX_RING_CELLS: usize = 1500;
pub const DEFAULT_THRESHOLD: f64 = 1e-3;

/// Eigenphase distance from `z` to `+1` (`point = 1`) or `-1` (`point = -1`).
pub fn phase_distance(z: Complex64, point: i8) -> f64 {
    let phase = z.arg().abs();
    if point > 0 {
        phase
    } else {
        PI - phase
    }
}

#[derive(Debug, Clone)]
pub struct RingExperiment {
    pub n_cells: usize,
    pub epsilon: f64,
    pub epsilon_prime: f64,
    pub seed: u64,
    pub threshold: f64,
    /// `(θ1, θ2)` per cell.
    pub angles: Vec<(f64, f64)>,
    /// Spectrum sorted by eigenphase in `(-π, π]`.
    pub eigenvalues: Vec<Complex64>,
    /// Unit eigenvectors, column `k` belonging to `eigenvalues[k]`.
    pub eigenvectors: CMat,
}

/// Runs a ring with the default candidate threshold.
pub fn run_ring(n: usize, epsilon: f64, epsilon_prime: f64, seed: u64) -> Result<RingExperiment> {
    let angles = ring_angles(n, epsilon, epsilon_prime, seed)?;
    let u = ring_unitary(&angles)?;
    let (values, vectors) = linalg::eigen_real(&u)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].arg().total_cmp(&values[j].arg()));
    let eigenvalues = order.iter().map(|&k| values[k]).collect();
    let dim = vectors.nrows();
    let eigenvectors = CMat::from_fn(dim, dim, |i, j| vectors[(i, order[j])]);
    let mut eigenvectors = eigenvectors;
    for j in 0..dim {
        let norm = (0..dim).map(|i| eigenvectors[(i, j)].norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            for i in 0..dim {
                eigenvectors[(i, j)] /= norm;
            }
        }
    }
    Ok(RingExperiment {
        n_cells: n,
        epsilon,
        epsilon_prime,
        seed,
        threshold: DEFAULT_THRESHOLD,
        angles,
        eigenvalues,
        eigenvectors,
    })
}

/// Samples the per-cell angles of a ring without diagonalizing it.
pub fn ring_angles(n: usize, epsilon: f64, epsilon_prime: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    if n < 8 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!("ring size must be even and at least 8, got {n}")));
    }
    if n > MAX_RING_CELLS {
        return Err(Error::DimensionCapExceeded { dim: 2 * n, cap: 2 * MAX_RING_CELLS });
    }
    let half = (n / 2) as i64;
    let mut sites = sample_phase_region(Phase::Plus, epsilon, epsilon_prime, 0..half, seed)?;
    sites.extend(sample_phase_region(Phase::Minus, epsilon, epsilon_prime, half..n as i64, seed)?);
    Ok(sites.into_values().collect())
}

/// The real `2n × 2n` ring unitary `γ̃ γ` for the given angles.
pub fn ring_unitary(angles: &[(f64, f64)]) -> Result<Mat<f64>> {
    let w = assemble_cells(
        0,
        angles.len(),
        1,
        |x| ThetaBlock::real(angles[x as usize].0.sin()),
        |x| ThetaBlock::real(angles[x as usize].1.sin()),
        Boundary::Ring,
    )?;
    let dense = w.dense_capped(2 * MAX_RING_CELLS)?;
    Ok(Mat::from_fn(dense.nrows(), dense.ncols(), |i, j| dense[(i, j)].re))
}

impl RingExperiment {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn interfaces(&self) -> [usize; 2] {
        [0, self.n_cells / 2]
    }

    pub fn eigenphases(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.arg()).collect()
    }

    /// Indices of eigenvalues within the threshold of `±1`, nearest first.
    pub fn candidates(&self, point: i8) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.dim())
            .filter(|&k| phase_distance(self.eigenvalues[k], point) < self.threshold)
            .collect();
        out.sort_by(|&a, &b| {
            phase_distance(self.eigenvalues[a], point).total_cmp(&phase_distance(self.eigenvalues[b], point))
        });
        out
    }

    /// Number of eigenvalues within the threshold of `+1` or `-1`.
    pub fn protected_count(&self) -> usize {
        self.candidates(1).len() + self.candidates(-1).len()
    }

    /// Smallest eigenphase distance to `±1` as resolved by the dense solver.
    pub fn min_distance(&self, point: i8) -> f64 {
        self.eigenvalues.iter().map(|&z| phase_distance(z, point)).fold(f64::INFINITY, f64::min)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.eigenvalues.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest distance from a conjugated eigenvalue to the spectrum.
    pub fn conjugation_defect(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| {
                let c = z.conj();
                self.eigenvalues.iter().map(|w| (w - c).norm()).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    /// `|ψ(x)|²` per cell for eigenvector `k`.
    pub fn cell_profile(&self, k: usize) -> Vec<f64> {
        (0..self.n_cells)
            .map(|x| self.eigenvectors[(2 * x, k)].norm_sqr() + self.eigenvectors[(2 * x + 1, k)].norm_sqr())
            .collect()
    }

    /// Spatial profile of eigenvector `k` with interface masses for `radius`.
    pub fn profile(&self, k: usize, radius: usize) -> EdgeProfile {
        let mass = self.cell_profile(k);
        let interfaces = self.interfaces();
        let near = |c: usize| -> Vec<bool> {
            (0..self.n_cells).map(|x| within(x, c, radius, self.n_cells)).collect()
        };
        let windows = [near(interfaces[0]), near(interfaces[1])];
        let sum = |sel: &dyn Fn(usize) -> bool| (0..self.n_cells).filter(|&x| sel(x)).map(|x| mass[x]).sum();
        let mass_near = [sum(&|x| windows[0][x]), sum(&|x| windows[1][x])];
        let interface_fraction = sum(&|x| windows[0][x] || windows[1][x]);
        EdgeProfile {
            eigenvalue: self.eigenvalues[k],
            index: k,
            interfaces,
            radius,
            mass,
            mass_near,
            interface_fraction,
        }
    }

    /// Eigenphase distances to `+1` and `-1` of the exactly orthogonal ring,
    /// resolved in extended precision (see [`protected_gap`]).
    pub fn protected_gaps(&self) -> Result<[ProtectedGap; 2]> {
        Ok([protected_gap(&self.angles, 1)?, protected_gap(&self.angles, -1)?])
    }
}

/// Whether cell `x` lies within `radius` cells of the interface at `center`
/// (the interface sits between cells `center - 1` and `center`).
fn within(x: usize, center: usize, radius: usize, n: usize) -> bool {
    let offset = (x + n - center) % n;
    offset < radius || offset >= n - radius.min(n)
}

#[derive(Debug, Clone)]
pub struct EdgeProfile {
    pub eigenvalue: Complex64,
    pub index: usize,
    pub interfaces: [usize; 2],
    pub radius: usize,
    /// `|ψ(x)|²` per cell.
    pub mass: Vec<f64>,
    /// Mass within `radius` cells of each interface.
    pub mass_near: [f64; 2],
    /// Mass within `radius` cells of either interface.
    pub interface_fraction: f64,
}

/// Profile of the eigenvector nearest to `±1`, with masses within 10 cells.
pub fn edge_state_profile(exp: &RingExperiment, point: i8) -> Result<EdgeProfile> {
    let k = *exp.candidates(point).first().ok_or(Error::NoCandidate { point })?;
    Ok(exp.profile(k, 10))
}

/// Distance of the ring spectrum to `±1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtectedGap {
    pub point: i8,
    /// Eigenphase distance; underflows to 0 below `f64` range.
    pub distance: f64,
    pub log10_distance: f64,
    pub precision_bits: usize,
}

type Big = FBig;

/// Smallest eigenphase distance from the ring spectrum to `point`.
///
/// `γ` and `γ̃` are reflections with one-dimensional `+1` spaces per block,
/// so the eigenvalues of `γ̃ γ` are `e^{±2iφ}` for the principal angles `φ`
/// between the `+1` space of `γ` and that of `γ̃`. The distance to `+1` is
/// `2 asin σ` with `σ` the smallest singular value of the overlap of the
/// `+1` space of `γ` with the `-1` space of `γ̃`; for `-1` the `+1` space of
/// `γ̃` is used instead. Both overlaps are cyclic bidiagonal, and `σ` is
/// found by inverse iteration with precision doubled until it settles,
/// which resolves splittings far below `f64` rounding.
pub fn protected_gap(angles: &[(f64, f64)], point: i8) -> Result<ProtectedGap> {
    let n = angles.len();
    if n < 2 {
        return Err(Error::InvalidParameter("ring needs at least two cells".into()));
    }
    let mut bits = 256usize;
    let mut previous: Option<f64> = None;
    loop {
        let log2 = smallest_singular_log2(angles, point, bits)?;
        if let (Some(p), Some(v)) = (previous, log2) {
            if (p - v).abs() < 1e-9 * v.abs().max(1.0) {
                return Ok(gap_from_log2(point, v, bits));
            }
        }
        if log2.is_none() && previous.is_none() && bits >= 1024 {
            // Exactly singular overlap: an exact eigenvalue at the point.
            return Ok(ProtectedGap { point, distance: 0.0, log10_distance: f64::NEG_INFINITY, precision_bits: bits });
        }
        previous = log2;
        bits *= 2;
        if bits > 1 << 17 {
            return Err(Error::Linalg("protected gap did not settle within the precision cap".into()));
        }
    }
}

fn gap_from_log2(point: i8, log2_sigma: f64, bits: usize) -> ProtectedGap {
    // 2 asin σ ≈ 2σ (1 + σ²/6); the correction only matters for sizable σ.
    let sigma = log2_sigma.exp2();
    let distance = 2.0 * sigma.min(1.0).asin();
    let log10_distance = if distance > 0.0 && sigma > 1e-150 {
        distance.log10()
    } else {
        (log2_sigma + 1.0) * std::f64::consts::LOG10_2
    };
    ProtectedGap { point, distance, log10_distance, precision_bits: bits }
}

/// `log2` of the smallest singular value, or `None` if the overlap is
/// numerically singular at this precision.
fn smallest_singular_log2(angles: &[(f64, f64)], point: i8, bits: usize) -> Result<Option<f64>> {
    let n = angles.len();
    let one = Big::ONE.with_precision(bits).value();
    let half = |a: f64, sign: i32| -> Result<Big> {
        let a = Big::try_from(a).map_err(|_| Error::InvalidParameter("non-finite angle".into()))?;
        let v = if sign > 0 { &one + &a } else { &one - &a };
        Ok((v / Big::from(2)).sqrt())
    };
    let mut c = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    let mut ct = Vec::with_capacity(n);
    let mut st = Vec::with_capacity(n);
    for &(t1, t2) in angles {
        let (a, b) = (t1.sin(), t2.sin());
        c.push(half(a, 1)?);
        s.push(half(a, -1)?);
        ct.push(half(b, 1)?);
        st.push(half(b, -1)?);
    }
    // Row y pairs the γ̃ block on (↓_{y-1}, ↑_y) with the cells y and y - 1.
    let mut diag = Vec::with_capacity(n);
    let mut sub = Vec::with_capacity(n);
    for y in 0..n {
        let prev = (y + n - 1) % n;
        if point > 0 {
            diag.push(-(&ct[y] * &c[y]));
            sub.push(&st[y] * &s[prev]);
        } else {
            diag.push(&st[y] * &c[y]);
            sub.push(&ct[y] * &s[prev]);
        }
    }
    if diag.contains(&Big::ZERO) {
        return Ok(None);
    }
    let mut v: Vec<Big> = (0..n).map(|i| Big::from(1 + (i % 3) as i64).with_precision(bits).value()).collect();
    let mut ratio = Big::ZERO;
    for _ in 0..6 {
        let Some(w) = solve_transposed(&diag, &sub, &v) else { return Ok(None) };
        let Some(x) = solve(&diag, &sub, &w) else { return Ok(None) };
        // Rayleigh quotient of (BᵀB)^{-1}: ‖B^{-T} v‖² / ‖v‖².
        ratio = norm_sq(&w) / norm_sq(&v);
        let scale = norm_sq(&x).sqrt();
        v = x.iter().map(|e| e / &scale).collect();
    }
    Ok(Some(-0.5 * log2_exact(&ratio)))
}

fn norm_sq(v: &[Big]) -> Big {
    v.iter().fold(Big::ZERO, |acc, e| acc + e * e)
}

/// `log2` of a positive big float to double accuracy.
fn log2_exact(x: &Big) -> f64 {
    let e = x.log2_bounds().0.floor() as i32;
    let scaled = x / Big::from(2).powi(e.into());
    let m = scaled.to_f64().value();
    e as f64 + m.log2()
}

/// Solves `B x = r` for `B` with diagonal `d` and cyclic subdiagonal `l`
/// (`l[0]` in the top-right corner).
fn solve(d: &[Big], l: &[Big], r: &[Big]) -> Option<Vec<Big>> {
    let n = d.len();
    let mut p = Vec::with_capacity(n);
    let mut q = Vec::with_capacity(n);
    p.push(&r[0] / &d[0]);
    q.push(-(&l[0] / &d[0]));
    for y in 1..n {
        p.push((&r[y] - &l[y] * &p[y - 1]) / &d[y]);
        q.push(-(&l[y] * &q[y - 1]) / &d[y]);
    }
    let denom = Big::ONE - &q[n - 1];
    if denom == Big::ZERO {
        return None;
    }
    let t = &p[n - 1] / &denom;
    Some((0..n).map(|y| &p[y] + &q[y] * &t).collect())
}

/// Solves `Bᵀ z = r`, i.e. `d_x z_x + l_{x+1} z_{x+1} = r_x` cyclically.
fn solve_transposed(d: &[Big], l: &[Big], r: &[Big]) -> Option<Vec<Big>> {
    let n = d.len();
    let mut p = vec![Big::ZERO; n];
    let mut q = vec![Big::ZERO; n];
    p[n - 1] = &r[n - 1] / &d[n - 1];
    q[n - 1] = -(&l[0] / &d[n - 1]);
    for x in (0..n - 1).rev() {
        p[x] = (&r[x] - &l[x + 1] * &p[x + 1]) / &d[x];
        q[x] = -(&l[x + 1] * &q[x + 1]) / &d[x];
    }
    let denom = Big::ONE - &q[0];
    if denom == Big::ZERO {
        return None;
    }
    let t = &p[0] / &denom;
    Some((0..n).map(|x| &p[x] + &q[x] * &t).collect())
}

/// Writes `re, im, eigenphase, dist_to_plus1, dist_to_minus1` rows.
pub fn write_spectrum_csv(exp: &RingExperiment, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "re,im,eigenphase,dist_to_plus1,dist_to_minus1")?;
    for z in &exp.eigenvalues {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            z.re,
            z.im,
            z.arg(),
            phase_distance(*z, 1),
            phase_distance(*z, -1)
        )?;
    }
    Ok(())
}

/// Writes `cell, mass` rows.
pub fn write_profile_csv(profile: &EdgeProfile, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "cell,mass")?;
    for (x, m) in profile.mass.iter().enumerate() {
        writeln!(out, "{x},{m:.16e}")?;
    }
    Ok(())
}

/// Scatter of the spectrum on the unit circle; eigenvalues near `±1` are
/// drawn in a second color.
pub fn spectrum_svg(exp: &RingExperiment) -> String {
    let size = 480.0;
    let c = size / 2.0;
    let r = 200.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{h}" viewBox="0 0 {size} {h}">"#,
        h = size + 60.0
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r##"<circle cx="{c}" cy="{c}" r="{r}" fill="none" stroke="#bbb"/>"##);
    let _ = writeln!(s, r##"<line x1="{}" y1="{c}" x2="{}" y2="{c}" stroke="#eee"/>"##, c - r - 10.0, c + r + 10.0);
    let _ = writeln!(s, r##"<line x1="{c}" y1="{}" x2="{c}" y2="{}" stroke="#eee"/>"##, c - r - 10.0, c + r + 10.0);
    for z in &exp.eigenvalues {
        let near = phase_distance(*z, 1) < exp.threshold || phase_distance(*z, -1) < exp.threshold;
        let (fill, rad) = if near { ("#d62728", 4.0) } else { ("#2ca02c", 2.0) };
        let _ = writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{rad}" fill="{fill}"/>"#,
            c + r * z.re,
            c - r * z.im
        );
    }
    // markers at ±1, where the interface states accumulate
    for x in [c + r, c - r] {
        let _ = writeln!(
            s,
            r##"<path class="interface-marker" d="M {} {c} L {} {c} M {x} {} L {x} {}" stroke="#1f77b4" stroke-width="2"/>"##,
            x - 8.0,
            x + 8.0,
            c - 8.0,
            c + 8.0
        );
    }
    let [a, b] = exp.interfaces();
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="14" font-family="sans-serif">+1</text>"#, c + r + 12.0, c + 5.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="14" font-family="sans-serif">-1</text>"#, c - r - 30.0, c + 5.0);
    let _ = writeln!(
        s,
        r#"<text x="10" y="{}" font-size="13" font-family="sans-serif">n = {} cells, seed {}, interfaces at cells {a} and {b}; {} eigenvalues within {:.0e} of ±1</text>"#,
        size + 30.0,
        exp.n_cells,
        exp.seed,
        exp.protected_count(),
        exp.threshold
    );
    let _ = writeln!(s, "</svg>");
    s
}
