//! Schur-function methods for symmetry indices of one-dimensional quantum walks.

pub mod banded;
pub mod cmv;
pub mod config;
pub mod error;
pub mod index;
pub mod linalg;
pub mod schur;
pub mod spectral;
pub mod walk;

pub use cmv::{BandedUnitary, Boundary, Layer, PlacedBlock, ThetaBlock, TwoSidedSeq};
pub use config::Tolerances;
pub use error::{Error, Result};
pub use index::{classify, forget_mod2, si_finite, si_lr_walk, si_pm_finite, si_pm_walk, IndexOptions, IndexReport};
pub use schur::{eval_boundary, BoundaryPoint, GapAnalysis, SchurParamSeq, Tail};
pub use walk::{Coin, Model, Phase, SiteData, WalkSpec};
pub use spectral::{edge_state_profile, run_ring, EdgeProfile, ProtectedGap, RingExperiment};
