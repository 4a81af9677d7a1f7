//! JSON walk-spec documents.
//!
//! ```json
//! {
//!   "model": "split_step",
//!   "left_tail": {"theta1": -0.5, "theta2": 0.0},
//!   "right_tail": {"theta1": 0.5, "theta2": 0.0},
//!   "window": [{"x": 0, "data": {"theta1": 0.3, "theta2": -0.1}}],
//!   "options": {"window_radius": 24, "tolerances": {"boundary": 1e-6}}
//! }
//! ```
//!
//! Coined models take coins as `{"angles": [...]}` (diagonal), `{"a": M}`
//! (with `sign` or the document's `sign_choice`) or `{"a": M, "b": M}`,
//! where `M` lists rows of entries that are numbers or `[re, im]` pairs.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use schurwalk::index::{BoundaryRoute, IndexOptions};
use schurwalk::linalg::CMat;
use schurwalk::walk::Sign;
use schurwalk::{Coin, Model, Tolerances, WalkSpec};
use serde::Deserialize;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpecDocument {
    pub model: Model,
    pub cell_dim: Option<usize>,
    pub left_tail: SiteDoc,
    pub right_tail: SiteDoc,
    #[serde(default)]
    pub window: Vec<WindowEntry>,
    pub sign_choice: Option<Sign>,
    #[serde(default)]
    pub options: OptionsDoc,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowEntry {
    pub x: i64,
    pub data: SiteDoc,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDoc {
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub angles: Option<Vec<f64>>,
    pub a: Option<Vec<Vec<Entry>>>,
    pub b: Option<Vec<Vec<Entry>>>,
    pub sign: Option<Sign>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Pair([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(x) => Complex64::new(x, 0.0),
            Entry::Pair([re, im]) => Complex64::new(re, im),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsDoc {
    pub window_radius: Option<usize>,
    pub route: Option<BoundaryRoute>,
    pub tolerances: Option<Tolerances>,
}

/// A document that failed to parse or validate, anchored at a field path
/// and, for syntax errors, a line and column.
#[derive(Debug)]
pub struct DocumentError {
    pub path: String,
    pub location: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for DocumentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((line, col)) = self.location {
            write!(f, "line {line}, column {col}: ")?;
        }
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "at `{}`: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for DocumentError {}

fn invalid(path: impl Into<String>, message: impl fmt::Display) -> DocumentError {
    DocumentError { path: path.into(), location: None, message: message.to_string() }
}

pub fn parse(text: &str) -> Result<WalkSpecDocument, DocumentError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        let text = inner.to_string();
        let suffix = format!(" at line {line} column {column}");
        let message = text.strip_suffix(&suffix).unwrap_or(&text).to_string();
        DocumentError { path, location: Some((line, column)), message }
    })
}

fn matrix(rows: &[Vec<Entry>], path: &str) -> Result<CMat, DocumentError> {
    let n = rows.len();
    if n == 0 {
        return Err(invalid(path, "matrix is empty"));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(invalid(format!("{path}[{i}]"), format!("row has {} entries, expected {n}", row.len())));
        }
    }
    Ok(CMat::from_fn(n, n, |i, j| rows[i][j].value()))
}

impl WalkSpecDocument {
    fn angles(&self, site: &SiteDoc, path: &str) -> Result<(f64, f64), DocumentError> {
        if site.angles.is_some() || site.a.is_some() || site.b.is_some() {
            return Err(invalid(path, "split-step sites take only `theta1` and `theta2`"));
        }
        match (site.theta1, site.theta2) {
            (Some(t1), Some(t2)) => Ok((t1, t2)),
            (None, _) => Err(invalid(format!("{path}.theta1"), "missing field")),
            (_, None) => Err(invalid(format!("{path}.theta2"), "missing field")),
        }
    }

    fn coin(&self, site: &SiteDoc, path: &str) -> Result<Coin, DocumentError> {
        if site.theta1.is_some() || site.theta2.is_some() {
            return Err(invalid(path, "coined sites take `angles`, `a` or `a` with `b`"));
        }
        let coin = match (&site.angles, &site.a, &site.b) {
            (Some(angles), None, None) => Coin::diagonal(angles),
            (None, Some(a), None) => {
                let sign = site.sign.or(self.sign_choice).unwrap_or(Sign::Plus);
                Coin::from_a(matrix(a, &format!("{path}.a"))?, sign)
            }
            (None, Some(a), Some(b)) => {
                Coin::from_blocks(matrix(a, &format!("{path}.a"))?, matrix(b, &format!("{path}.b"))?)
            }
            _ => return Err(invalid(path, "give exactly one of `angles`, `a`, or `a` with `b`")),
        };
        let coin = coin.map_err(|e| invalid(path, e))?;
        if let Some(d) = self.cell_dim {
            if coin.d() != d {
                return Err(invalid(path, format!("coin has d = {}, document declares cell_dim = {d}", coin.d())));
            }
        }
        Ok(coin)
    }

    pub fn to_spec(&self) -> Result<WalkSpec, DocumentError> {
        let mut seen = BTreeMap::new();
        for (i, entry) in self.window.iter().enumerate() {
            if let Some(first) = seen.insert(entry.x, i) {
                return Err(invalid(format!("window[{i}].x"), format!("site {} already given at window[{first}]", entry.x)));
            }
        }
        let site_path = |i: usize| format!("window[{i}].data");
        match self.model {
            Model::SplitStep => {
                if let Some(d) = self.cell_dim.filter(|&d| d != 1) {
                    return Err(invalid("cell_dim", format!("split-step walks have cell_dim 1, got {d}")));
                }
                let left = self.angles(&self.left_tail, "left_tail")?;
                let right = self.angles(&self.right_tail, "right_tail")?;
                let mut window = BTreeMap::new();
                for (i, e) in self.window.iter().enumerate() {
                    window.insert(e.x, self.angles(&e.data, &site_path(i))?);
                }
                WalkSpec::split_step(left, right, window).map_err(|e| invalid("", e))
            }
            Model::ChiralCoined | Model::ShiftedCoined => {
                let left = self.coin(&self.left_tail, "left_tail")?;
                let right = self.coin(&self.right_tail, "right_tail")?;
                let mut window = BTreeMap::new();
                for (i, e) in self.window.iter().enumerate() {
                    window.insert(e.x, self.coin(&e.data, &site_path(i))?);
                }
                WalkSpec::coined(self.model, left, right, window).map_err(|e| invalid("", e))
            }
        }
    }

    pub fn index_options(&self) -> IndexOptions {
        let mut opts = IndexOptions::default();
        if let Some(t) = self.options.tolerances {
            opts.tolerances = t;
        }
        if let Some(r) = self.options.route {
            opts.route = r;
        }
        if let Some(w) = self.options.window_radius {
            opts.initial_margin = w;
        }
        opts
    }
}
