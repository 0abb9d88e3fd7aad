//! Post-hoc decision-boundary adjustment for long-tailed classification on
//! simplex-ETF classifier geometry.
//!
//! The crate provides:
//!
//! - [`etf`]: fixed simplex-ETF classifiers, the inter-weight angle psi, and
//!   pairwise boundary normal vectors;
//! - [`bounds`]: the angular concentration bound Pi(theta; k), its validity
//!   window, the closed-form optimal boundary angles, a brute-force grid
//!   diagnostic, and the ReLU complexity calculator;
//! - [`adjust`]: multiplicative and additive logit adjustment, the one-vs-one
//!   boundary voter, and the closed-form boundary angles each method induces;
//! - [`sim`]: synthetic collapsed-feature scenarios with 1/sqrt(n_k) test
//!   spread, plus ingestion of external feature dumps;
//! - [`evaluation`]: accuracy reports with Many/Medium/Few breakdowns,
//!   boundary-angle difference heatmaps, and deterministic gamma sweeps;
//! - [`io`]: the binary and CSV feature-file formats and the stats JSON.
//!
//! Batch paths are parallelized with rayon behind the default `parallel`
//! feature; disabling it yields a fully sequential build with identical
//! outputs.

pub mod adjust;
pub mod bounds;
mod error;
pub mod etf;
pub mod evaluation;
pub mod io;
pub mod sim;

pub use error::{Error, Result};
