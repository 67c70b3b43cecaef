//! Quantum carpets in a one-dimensional infinite square well.
//!
//! A localized initial profile is expanded in the box eigenbasis ([`spectral`]),
//! evolved analytically ([`fields`]), rendered as space-time rasters ([`carpet`])
//! and followed with Bohmian trajectories ([`bohm`]). [`verify`] bundles the
//! numerical checks that the CLI exposes as `qcarpet verify`.

pub mod bohm;
pub mod carpet;
pub mod error;
pub mod fields;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
pub use spectral::{ApertureShape, SpectralState, WellConfig};
