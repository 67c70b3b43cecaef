//! Eigenbasis of the infinite square well on `[-L/2, L/2]`.
//!
//! Odd mode indices carry the even (cosine) eigenfunctions, even indices the
//! odd (sine) ones. Every function here takes the physical index `alpha >= 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical setup: box length, aperture width, particle mass and action constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellConfig {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "m")]
    pub mass: f64,
    pub hbar: f64,
}

impl Default for WellConfig {
    fn default() -> Self {
        WellConfig {
            length: 50.0,
            width: 10.0,
            mass: 1.0,
            hbar: 1.0,
        }
    }
}

impl WellConfig {
    /// Builds a validated configuration.
    pub fn new(length: f64, width: f64, mass: f64, hbar: f64) -> Result<Self> {
        let config = WellConfig {
            length,
            width,
            mass,
            hbar,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("L", self.length),
            ("w", self.width),
            ("m", self.mass),
            ("hbar", self.hbar),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        if self.width > self.length {
            return Err(Error::Config(format!(
                "aperture width w = {} exceeds box length L = {}",
                self.width, self.length
            )));
        }
        Ok(())
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    /// `E_1 / hbar`, the unit in which every mode frequency is an integer square.
    pub(crate) fn base_frequency(&self) -> f64 {
        PI * PI * self.hbar / (2.0 * self.mass * self.length * self.length)
    }

    pub(crate) fn check_position(&self, x: f64) -> Result<()> {
        if !x.is_finite() || x.abs() > self.half_length() {
            return Err(Error::Domain(format!(
                "position x = {x} lies outside the box [-{h}, {h}]",
                h = self.half_length()
            )));
        }
        Ok(())
    }
}

fn check_index(alpha: u32) -> Result<()> {
    if alpha < 1 {
        return Err(Error::Domain("mode index must be >= 1".into()));
    }
    Ok(())
}

/// `k_alpha = pi * alpha / L`.
pub fn wavenumber(alpha: u32, config: &WellConfig) -> Result<f64> {
    check_index(alpha)?;
    Ok(PI * f64::from(alpha) / config.length)
}

/// Normalized eigenfunction `phi_alpha(x)`.
pub fn eigenfunction(alpha: u32, x: f64, config: &WellConfig) -> Result<f64> {
    Ok(eigenfunction_with_derivative(alpha, x, config)?.0)
}

/// Returns `(phi_alpha(x), phi_alpha'(x))`.
pub fn eigenfunction_with_derivative(alpha: u32, x: f64, config: &WellConfig) -> Result<(f64, f64)> {
    config.check_position(x)?;
    let k = wavenumber(alpha, config)?;
    Ok(mode_value(alpha, k, x, (2.0 / config.length).sqrt()))
}

/// Unchecked evaluation used on hot paths; `norm` is `sqrt(2/L)`.
#[inline]
pub(crate) fn mode_value(alpha: u32, k: f64, x: f64, norm: f64) -> (f64, f64) {
    let (s, c) = (k * x).sin_cos();
    if alpha % 2 == 1 {
        (norm * c, -norm * k * s)
    } else {
        (norm * s, norm * k * c)
    }
}

/// `E_alpha = pi^2 hbar^2 alpha^2 / (2 m L^2)`.
pub fn energy(alpha: u32, config: &WellConfig) -> Result<f64> {
    check_index(alpha)?;
    let a = f64::from(alpha);
    Ok(config.hbar * config.base_frequency() * a * a)
}

/// Angular beat frequency `(E_alpha - E_alpha') / hbar`.
pub fn beat_frequency(alpha: u32, alpha_prime: u32, config: &WellConfig) -> Result<f64> {
    check_index(alpha)?;
    check_index(alpha_prime)?;
    let diff = i64::from(alpha) * i64::from(alpha) - i64::from(alpha_prime) * i64::from(alpha_prime);
    Ok(config.base_frequency() * diff as f64)
}

/// Recurrence time `m L^2 / (2 pi hbar)`: the period of the slowest beat `omega_{3,1}`.
pub fn recurrence_time(config: &WellConfig) -> f64 {
    config.mass * config.length * config.length / (2.0 * PI * config.hbar)
}

/// Physical index of the `n`-th cosine mode (`n >= 1`).
pub fn even_mode_index(n: u32) -> u32 {
    2 * n - 1
}

/// Physical index of the `n`-th sine mode (`n >= 1`).
pub fn odd_mode_index(n: u32) -> u32 {
    2 * n
}

/// Series position `n` of a physical index within its own parity sequence.
pub fn series_position(alpha: u32) -> u32 {
    alpha.div_ceil(2)
}
