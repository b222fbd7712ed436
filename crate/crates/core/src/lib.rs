//! Simulation and reconstruction toolkit for multi-RIS wireless regional
//! imaging.
//!
//! A space of interest is gridded into M cells; K single-receiver RIS
//! panels take T snapshots each under random 1-bit phase configurations.
//! The stacked linear operator mapping scene amplitudes to received
//! samples is assembled from far-field steering and propagation factors,
//! analyzed (singular spectrum, rank bound `min{M, K*T, K*N}`,
//! collinearity), and inverted — by complex least squares when phases are
//! available, or by a reweighted Wirtinger-flow solver from amplitudes
//! alone.
//!
//! Modules follow the pipeline: [`geometry`] and [`channel`] build the
//! physics, [`codebook`] the measurement design, [`forward`] the stacked
//! operator and synthetic data, [`analysis`] the diagnostics, [`recon`]
//! the solvers, [`metrics`] the quality scores, and [`scenario`]/[`sweep`]
//! the experiment harness.

pub mod analysis;
pub mod channel;
pub mod codebook;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod metrics;
pub mod recon;
pub mod rng;
pub mod scenario;
pub mod sweep;

pub use error::{Error, Result};
