//! Scalar and small-matrix Schur-function machinery.
//!
//! A Schur function is encoded by its parameters `alpha_0, alpha_1, ...`
//! through the recursion `f_{n+1} = (1/z) (f_n - alpha_n) / (1 - conj(alpha_n) f_n)`.
//! Sequences here consist of a finite head followed by a tail that is
//! zero, terminating (a unimodular parameter) or periodic.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cmv::BandedUnitary;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat, ONE, ZERO};

/// One of the two symmetry-protected points of the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryPoint {
    Plus,
    Minus,
}

impl BoundaryPoint {
    pub const BOTH: [BoundaryPoint; 2] = [BoundaryPoint::Plus, BoundaryPoint::Minus];

    pub fn sign(self) -> f64 {
        match self {
            BoundaryPoint::Plus => 1.0,
            BoundaryPoint::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            BoundaryPoint::Plus => 1,
            BoundaryPoint::Minus => -1,
        }
    }

    pub fn z(self) -> Complex64 {
        Complex64::new(self.sign(), 0.0)
    }
}

/// Tail of a one-sided parameter sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    /// Zeros forever (the free shift).
    Zero,
    /// A final unimodular parameter: the Schur function after the head is constant.
    Terminating(Complex64),
    /// The listed parameters repeat forever.
    Periodic(Vec<Complex64>),
}

/// One-sided sequence of Schur parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SchurParamSeq {
    head: Vec<Complex64>,
    tail: Tail,
}

fn check_open(alpha: Complex64, what: &str) -> Result<()> {
    if !(alpha.norm() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "{what} {alpha} must lie in the open unit disk"
        )));
    }
    Ok(())
}

impl SchurParamSeq {
    pub fn new(head: Vec<Complex64>, tail: Tail) -> Result<Self> {
        for a in &head {
            check_open(*a, "head parameter")?;
        }
        let tail = match tail {
            Tail::Terminating(a) => {
                if (a.norm() - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "terminating parameter {a} is not unimodular"
                    )));
                }
                Tail::Terminating(a)
            }
            Tail::Periodic(p) => {
                if p.is_empty() {
                    return Err(Error::InvalidParameter("empty periodic tail".into()));
                }
                for a in &p {
                    check_open(*a, "tail parameter")?;
                }
                if p.iter().all(|a| *a == ZERO) {
                    Tail::Zero
                } else {
                    Tail::Periodic(p)
                }
            }
            Tail::Zero => Tail::Zero,
        };
        Ok(Self { head, tail })
    }

    /// Real head followed by the two-periodic tail `(s_tilde, s, s_tilde, s, ...)`.
    pub fn two_periodic(head: &[f64], s_tilde: f64, s: f64) -> Result<Self> {
        Self::new(
            head.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
            Tail::Periodic(vec![Complex64::new(s_tilde, 0.0), Complex64::new(s, 0.0)]),
        )
    }

    pub fn head(&self) -> &[Complex64] {
        &self.head
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    pub fn is_real(&self) -> bool {
        let tail_real = match &self.tail {
            Tail::Zero => true,
            Tail::Terminating(a) => a.im == 0.0,
            Tail::Periodic(p) => p.iter().all(|a| a.im == 0.0),
        };
        tail_real && self.head.iter().all(|a| a.im == 0.0)
    }

    /// The `n`-th parameter, or `None` past a terminating entry.
    pub fn param(&self, n: usize) -> Option<Complex64> {
        if n < self.head.len() {
            return Some(self.head[n]);
        }
        let k = n - self.head.len();
        match &self.tail {
            Tail::Zero => Some(ZERO),
            Tail::Terminating(a) => (k == 0).then_some(*a),
            Tail::Periodic(p) => Some(p[k % p.len()]),
        }
    }

    /// Value of the tail's Schur function at `z`.
    fn tail_value(&self, z: Complex64) -> Result<Complex64> {
        match &self.tail {
            Tail::Zero => Ok(ZERO),
            Tail::Terminating(a) => Ok(*a),
            Tail::Periodic(p) => {
                if let Some((st, s)) = real_pair(p) {
                    periodic2_schur(s, st, z)
                } else {
                    periodic_fixed_point(p, z)
                }
            }
        }
    }

    /// Evaluates the Schur function at `|z| <= 1`.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        if z.norm() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!("|z| = {} > 1", z.norm())));
        }
        let mut value = self.tail_value(z)?;
        for &a in self.head.iter().rev() {
            value = schur_unstep(value, a, z)?;
        }
        Ok(value)
    }
}

fn real_pair(p: &[Complex64]) -> Option<(f64, f64)> {
    (p.len() == 2 && p[0].im == 0.0 && p[1].im == 0.0).then(|| (p[0].re, p[1].re))
}

/// One step of the Schur algorithm: `(1/z) (f - alpha) / (1 - conj(alpha) f)`.
pub fn schur_step(f_value: Complex64, alpha: Complex64, z: Complex64) -> Result<Complex64> {
    check_open(alpha, "parameter")?;
    if z == ZERO {
        return Err(Error::InvalidParameter("schur_step needs z != 0".into()));
    }
    let den = ONE - alpha.conj() * f_value;
    if den.norm() <= 1e-15 {
        return Err(Error::DivisionDegenerate);
    }
    Ok((f_value - alpha) / (den * z))
}

/// Inverse Schur step: `(z w + alpha) / (1 + conj(alpha) z w)`.
pub fn schur_unstep(next_value: Complex64, alpha: Complex64, z: Complex64) -> Result<Complex64> {
    check_open(alpha, "parameter")?;
    let zw = z * next_value;
    let den = ONE + alpha.conj() * zw;
    if den.norm() <= 1e-15 {
        return Err(Error::BoundaryDegenerate);
    }
    Ok((zw + alpha) / den)
}

/// Discriminant of the two-periodic closed form.
fn discriminant(s: f64, s_tilde: f64, z: Complex64) -> Complex64 {
    let one_minus = ONE - z * z;
    one_minus * one_minus + 4.0 * z * (s + s_tilde * z) * (s * z + s_tilde)
}

/// `sqrt(Delta(z))` continued along `[0, z]` from the value 1 at the origin.
fn tracked_sqrt(s: f64, s_tilde: f64, z: Complex64) -> Result<Complex64> {
    const MAX_STEP: f64 = 1.0 / 64.0;
    let mut t = 0.0f64;
    let mut h = MAX_STEP;
    let mut root = ONE;
    let mut prev = ONE;
    while t < 1.0 {
        let t_new = (t + h).min(1.0);
        let d = discriminant(s, s_tilde, z * t_new);
        if (d / prev).arg().abs() > FRAC_PI_2 || d == ZERO {
            h *= 0.5;
            if h < 1e-14 {
                return Err(Error::BranchAmbiguous { re: z.re, im: z.im });
            }
            continue;
        }
        let r = d.sqrt();
        root = if (r - root).norm() <= (r + root).norm() { r } else { -r };
        prev = d;
        t = t_new;
        h = (2.0 * h).min(MAX_STEP);
    }
    Ok(root)
}

/// Schur function of the two-periodic parameters `(s_tilde, s, s_tilde, s, ...)`.
///
/// Uses `f = (z^2 - 1 + sqrt(D)) / (2z(s + s_tilde z))` together with the
/// rationalized form `f = 2(s z + s_tilde) / (sqrt(D) + 1 - z^2)`; the
/// better conditioned of the two is evaluated, which covers the removable
/// singularities without a limiting procedure.
pub fn periodic2_schur(s: f64, s_tilde: f64, z: Complex64) -> Result<Complex64> {
    if !(s.abs() < 1.0 && s_tilde.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "periodic parameters ({s_tilde}, {s}) must lie in (-1, 1)"
        )));
    }
    let r = z.norm();
    if r > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!("|z| = {r} > 1")));
    }
    if z == ZERO {
        return Ok(Complex64::new(s_tilde, 0.0));
    }
    if z.im == 0.0 && (z.re == 1.0 || z.re == -1.0) {
        let sum = s_tilde + z.re * s;
        if sum == 0.0 {
            let point = if z.re > 0.0 { 1 } else { -1 };
            return Err(Error::GapClosed {
                point,
                detail: format!("periodic tail ({s_tilde}, {s}) has no gap"),
            });
        }
        return Ok(Complex64::new(sum.signum(), 0.0));
    }
    if (r - 1.0).abs() <= 1e-12 && discriminant(s, s_tilde, z).norm() <= 1e-13 {
        return Err(Error::BranchAmbiguous { re: z.re, im: z.im });
    }
    let root = tracked_sqrt(s, s_tilde, z)?;
    let z2 = z * z;
    let den1 = 2.0 * z * (s + s_tilde * z);
    let den2 = root + ONE - z2;
    if den1.norm() >= den2.norm() {
        Ok((z2 - ONE + root) / den1)
    } else {
        Ok(2.0 * (s * z + s_tilde) / den2)
    }
}

/// Fixed point of the composed inverse steps of one period, chosen as the
/// attracting one (the one inside the disk when `|z| < 1`).
fn periodic_fixed_point(p: &[Complex64], z: Complex64) -> Result<Complex64> {
    let mut m = [[ONE, ZERO], [ZERO, ONE]];
    for &a in p {
        let step = [[z, a], [a.conj() * z, ONE]];
        m = [
            [
                m[0][0] * step[0][0] + m[0][1] * step[1][0],
                m[0][0] * step[0][1] + m[0][1] * step[1][1],
            ],
            [
                m[1][0] * step[0][0] + m[1][1] * step[1][0],
                m[1][0] * step[0][1] + m[1][1] * step[1][1],
            ],
        ];
    }
    let (a, b, c, d) = (m[0][0], m[0][1], m[1][0], m[1][1]);
    let det = a * d - b * c;
    let scale = a.norm().max(b.norm()).max(c.norm()).max(d.norm());
    let candidates: Vec<Complex64> = if c.norm() <= 1e-15 * scale {
        if (d - a).norm() <= 1e-15 * scale {
            return Err(Error::GapClosed {
                point: 0,
                detail: "periodic tail map has no isolated fixed point".into(),
            });
        }
        vec![b / (d - a)]
    } else {
        let bb = d - a;
        let disc = (bb * bb + 4.0 * c * b).sqrt();
        let q = if (bb.conj() * disc).re >= 0.0 { -0.5 * (bb + disc) } else { -0.5 * (bb - disc) };
        let mut roots = vec![q / c];
        if q != ZERO {
            roots.push(-b / q);
        }
        roots
    };
    let best = candidates
        .into_iter()
        .map(|w| (w, (c * w + d).norm()))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .ok_or(Error::SingularSolve)?;
    let multiplier = det.norm() / (best.1 * best.1);
    if z.norm() >= 1.0 - 1e-12 && multiplier >= 1.0 - 1e-10 {
        return Err(Error::GapClosed {
            point: 0,
            detail: format!("periodic tail map is not hyperbolic at z = {z}"),
        });
    }
    Ok(best.0)
}

/// Angles and gap data of a two-periodic tail `(s_tilde, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapAnalysis {
    pub theta: f64,
    pub theta_tilde: f64,
    pub gapped_at_plus: bool,
    pub gapped_at_minus: bool,
    pub branch_point_cosines: [f64; 2],
}

impl GapAnalysis {
    pub fn from_angles(theta_tilde: f64, theta: f64) -> Self {
        Self {
            theta,
            theta_tilde,
            gapped_at_plus: theta_tilde + theta != 0.0,
            gapped_at_minus: theta_tilde - theta != 0.0,
            branch_point_cosines: [(theta_tilde + theta).cos(), -(theta_tilde - theta).cos()],
        }
    }

    pub fn new(s_tilde: f64, s: f64) -> Self {
        Self::from_angles(s_tilde.asin(), s.asin())
    }

    pub fn gapped_at(&self, point: BoundaryPoint) -> bool {
        match point {
            BoundaryPoint::Plus => self.gapped_at_plus,
            BoundaryPoint::Minus => self.gapped_at_minus,
        }
    }

    /// `(cos w + cos(theta_tilde - theta)) (cos w - cos(theta_tilde + theta))`;
    /// the closed form is unimodular at `e^{iw}` exactly when this is `>= 0`.
    pub fn circle_discriminant(&self, omega: f64) -> f64 {
        let c = omega.cos();
        (c + (self.theta_tilde - self.theta).cos()) * (c - (self.theta_tilde + self.theta).cos())
    }
}

/// A Schur function value with its distance from unimodularity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurValue {
    pub z: Complex64,
    pub value: Complex64,
    pub residual: f64,
    /// True when the value was certified to equal the tail value exactly.
    pub exact: bool,
}

/// `f(+1)` or `f(-1)` by exact inverse recursion from the tail.
pub fn eval_boundary(seq: &SchurParamSeq, point: BoundaryPoint) -> Result<SchurValue> {
    let z = point.z();
    let tail_value = match seq.tail() {
        Tail::Zero => {
            return Err(Error::GapClosed {
                point: point.as_i8(),
                detail: "all-zero tail (free shift) has no gap".into(),
            })
        }
        Tail::Terminating(a) => *a,
        Tail::Periodic(p) => match real_pair(p) {
            Some((st, s)) => periodic2_schur(s, st, z)?,
            None => periodic_fixed_point(p, z).map_err(|e| match e {
                Error::GapClosed { detail, .. } => Error::GapClosed { point: point.as_i8(), detail },
                other => other,
            })?,
        },
    };
    let mut value = tail_value;
    for &a in seq.head().iter().rev() {
        value = schur_unstep(value, a, z)?;
    }
    let head_real = seq.head().iter().all(|a| a.im == 0.0);
    let exact = head_real && tail_value.im == 0.0 && tail_value.re.abs() == 1.0;
    if exact {
        debug_assert_eq!(value, tail_value);
        value = tail_value;
    }
    Ok(SchurValue { z, value, residual: (value.norm() - 1.0).abs(), exact })
}

/// Transformations of Schur parameters with a simple effect on the function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParityTransform {
    /// `alpha_n -> -alpha_n`, i.e. `f -> -f`.
    Negate,
    /// `(alpha_0, 0, alpha_1, 0, ...)`, i.e. `f(z) -> f(z^2)`.
    InterleaveEven,
    /// `(0, alpha_0, 0, alpha_1, ...)`, i.e. `f(z) -> z f(z^2)`.
    InterleaveOdd,
}

pub fn apply_parity_transform(seq: &SchurParamSeq, transform: ParityTransform) -> SchurParamSeq {
    let spread = |xs: &[Complex64], odd: bool| -> Vec<Complex64> {
        xs.iter()
            .flat_map(|&a| if odd { [ZERO, a] } else { [a, ZERO] })
            .collect()
    };
    let (head, tail) = match transform {
        ParityTransform::Negate => (
            seq.head.iter().map(|a| -a).collect(),
            match &seq.tail {
                Tail::Zero => Tail::Zero,
                Tail::Terminating(a) => Tail::Terminating(-a),
                Tail::Periodic(p) => Tail::Periodic(p.iter().map(|a| -a).collect()),
            },
        ),
        ParityTransform::InterleaveEven | ParityTransform::InterleaveOdd => {
            let odd = transform == ParityTransform::InterleaveOdd;
            let head = spread(&seq.head, odd);
            let tail = match &seq.tail {
                Tail::Zero => Tail::Zero,
                Tail::Terminating(a) => Tail::Terminating(*a),
                Tail::Periodic(p) => Tail::Periodic(spread(p, odd)),
            };
            (head, tail)
        }
    };
    SchurParamSeq { head, tail }
}

/// Carathéodory function `(1 + z f)(1 - z f)^{-1}` of a scalar Schur value.
pub fn schur_to_caratheodory(f_value: Complex64, z: Complex64) -> Result<Complex64> {
    let den = ONE - z * f_value;
    if den.norm() <= 1e-13 {
        return Err(Error::MassPointSingular);
    }
    Ok((ONE + z * f_value) / den)
}

/// Matrix version of [`schur_to_caratheodory`].
pub fn schur_to_caratheodory_matrix(f_value: &CMat, z: Complex64) -> Result<CMat> {
    let n = f_value.nrows();
    let zf = linalg::scale(f_value, z);
    let den = linalg::identity(n) - &zf;
    let sv = linalg::singular_values(&den)?;
    if sv.iter().cloned().fold(f64::INFINITY, f64::min) <= 1e-13 {
        return Err(Error::MassPointSingular);
    }
    let inv = linalg::inverse(&den)?;
    Ok((linalg::identity(n) + zf) * inv)
}

/// Schur function `P (U - z P^perp)^{-1} P` of the subspace spanned by the
/// orthonormal columns of `basis`, in the coordinates of `basis`.
pub fn subspace_schur(u: &CMat, basis: &CMat, z: Complex64) -> Result<CMat> {
    let n = u.nrows();
    let proj = basis * basis.adjoint();
    let perp = linalg::identity(n) - proj;
    let a = u - linalg::scale(&perp, z);
    let x = linalg::solve(&a, basis)?;
    Ok(basis.adjoint() * x)
}

/// Coefficients `P (W* P^perp)^n W* P`, `n = 0..=order`, of the Schur
/// function of the scalar index block `start..start + len`.
pub fn power_series_coefficients(
    walk: &BandedUnitary,
    start: usize,
    len: usize,
    order: usize,
) -> Result<Vec<CMat>> {
    let dim = walk.dim();
    if start + len > dim || len == 0 {
        return Err(Error::InvalidParameter(format!(
            "block {start}..{} outside dimension {dim}",
            start + len
        )));
    }
    let mut coeffs = vec![linalg::zeros(len, len); order + 1];
    for j in 0..len {
        let mut v = vec![ZERO; dim];
        v[start + j] = ONE;
        v = walk.apply_adjoint(&v);
        for (n, coeff) in coeffs.iter_mut().enumerate() {
            for i in 0..len {
                coeff[(i, j)] = v[start + i];
            }
            if n == order {
                break;
            }
            for x in v.iter_mut().skip(start).take(len) {
                *x = ZERO;
            }
            v = walk.apply_adjoint(&v);
        }
    }
    Ok(coeffs)
}
