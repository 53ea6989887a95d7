//! Keller-Segel chemotaxis near its homogeneous steady state.
//!
//! The crate covers the linear theory (dispersion relation, spectral gap,
//! exact modal propagation), a pseudo-spectral solver for the full nonlinear
//! perturbation system on the Neumann box (0,π)^d, and an experiment harness
//! that measures how closely a δ-perturbation follows its fastest-growing
//! linear modes up to the escape time `ln(θ/δ)/λ_max`.

// `!(x > 0.0)` deliberately rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod error;
pub mod experiment;
pub mod linprop;
pub mod model;
pub mod nonlinear;
pub mod spectral;

pub use dispersion::{eigenpair, spectrum_summary, EigenPair, GrowthEstimate, SpectrumSummary};
pub use error::{Error, Result};
pub use experiment::{ExperimentReport, RunStatus, TheoremConstants};
pub use linprop::{decompose, dominant_projection, propagate, ModalDecomposition};
pub use model::{ModelParams, SteadyState};
pub use nonlinear::{simulate, SolverConfig, Trajectory};
pub use spectral::{GridField, ModeIndex, SpectralField};
