use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by the evaluation routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Accepted distance of a boundary value from unitarity.
    pub unitarity: f64,
    /// Residual bound for boundary values obtained by radial limits.
    pub boundary: f64,
    /// Half-width of the acceptance interval around a quantized trace.
    pub rounding: f64,
    /// Largest dimension materialized densely.
    pub dense_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unitarity: 1e-9,
            boundary: 1e-6,
            rounding: 0.1,
            dense_cap: 4096,
        }
    }
}
