//! Naturally perturbed SIS epidemic model.
//!
//! The transmission rate of the deterministic SIS equation is replaced by a
//! stochastic process `Y`. The crate simulates the coupled system, classifies
//! its long-run behaviour and approximates moments of the infected fraction
//! by a perturbation series in the noise scale `c`.

pub mod asymptotics;
pub mod config;
pub mod corrections;
pub mod diffusions;
pub mod error;
pub mod quadrature;
pub mod scenario;
pub mod simulate;
pub mod sis;

pub use error::{Error, Result};
