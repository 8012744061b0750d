//! Compatibility of noisy qudit measurements, channels and instruments.
//!
//! The crate builds noisy sharp meters `Q_s`, depolarizing channels `I_r` and
//! instruments on `C^d`, the explicit joint devices that realise the edges of
//! their compatibility regions, the closed-form regions themselves, and a
//! numerical feasibility oracle used to cross-check those closed forms.

pub mod constructions;
pub mod covariance;
pub mod devices;
pub mod error;
pub mod feasibility;
pub mod numkit;
pub mod regions;
pub mod verify;

#[doc(hidden)]
pub mod cli;

pub use error::{Error, Result};
pub use numkit::{CMatrix, HermitianMatrix, C64};
