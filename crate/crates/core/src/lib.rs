//! Variational Bayesian joint localization and channel estimation (JLCE) for
//! range measurements whose noise variance grows with distance.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: generative model, likelihood and log-joint.
//! - [`linearization`]: first-order expansions used by the message updates.
//! - [`vmp`]: belief types, the four belief updates and the iteration loop.
//! - [`bcrb`]: Bayesian Fisher information and the position bound.
//! - [`oracle`]: brute-force references and the Gauss–Newton baseline.
//! - [`harness`]: Monte Carlo trials, sweeps and CSV tables.
//! - [`config`] and [`cli`]: configuration file handling and the command line.

pub mod bcrb;
pub mod cli;
pub mod config;
pub mod error;
pub mod harness;
pub mod linearization;
pub mod model;
pub mod oracle;
pub mod vmp;

pub use error::{Error, Result};

/// Planar position or displacement in metres.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2×2 matrix, used for position covariances.
pub type Mat2 = nalgebra::Matrix2<f64>;
