//! Quantum estimation of the tripartite spin-magnon-mechanical coupling.
//!
//! The pipeline runs from the closed-system eigenstate QFI, through the
//! driven-dissipative mechanical steady state and its Gaussian QFI, to the
//! precision of concrete measurements and their sensitivity to noise.
//! Every closed form has an independent numerical counterpart:
//!
//! | closed form | oracle |
//! |---|---|
//! | [`closed::eigenstate_qfi`] | [`fock::fock_oracle_qfi`] |
//! | [`open::steady_covariance`] | [`open::lyapunov_oracle`] |
//! | [`gaussian::near_critical_qfi`] | [`gaussian::gaussian_qfi`] |
//! | [`measurement::intensity_precision_closed_form`] | [`measurement::error_propagation`] |
//! | [`measurement::anharmonic_susceptibility_closed_form`] | [`measurement::steady_anharmonic_susceptibility`] |
//! | [`measurement::steady_anharmonic_susceptibility`] | [`measurement::intensity_anharmonic_susceptibility`] |
//!
//! Validity checks are written as `!(x > 0.0)` so that NaN is rejected too.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed;
pub mod error;
pub mod fock;
pub mod gaussian;
pub mod harness;
pub mod measurement;
pub mod model;
pub mod numdiff;
pub mod open;

pub use error::{Error, Result};
pub use gaussian::GaussianState;
pub use model::{Phase, SqueezedFrame, SystemParameters};
pub use open::{DriftModel, FormulaMode, MechanicalFamily, SteadyState};
