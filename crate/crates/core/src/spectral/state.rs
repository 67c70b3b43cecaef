use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::{
    eigenfunction_with_derivative, energy, even_mode_index, odd_mode_index, recurrence_time, series_position,
    WellConfig,
};
use super::quadrature::{integrate, QuadOptions};
use super::shape::{ApertureShape, Profile, ShapeProfile};
use crate::error::{Error, Result};

/// Which eigenfunction families a state occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    /// Cosine modes only (odd `alpha`).
    Even,
    /// Sine modes only (even `alpha`).
    Odd,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub alpha: u32,
    pub c: Complex64,
}

/// Truncated eigenfunction expansion of an initial state. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralState {
    config: WellConfig,
    modes: Vec<Mode>,
    parity: Parity,
    n_modes: u32,
    label: String,
    truncation_deficit: f64,
    quadrature_error: Option<f64>,
}

impl SpectralState {
    /// Builds a state from explicit modes. Parity follows from the occupied indices;
    /// `n_modes` becomes the largest series position present.
    pub fn from_modes(config: WellConfig, mut modes: Vec<Mode>) -> Result<Self> {
        config.validate()?;
        if modes.is_empty() {
            return Err(Error::Domain("a spectral state needs at least one mode".into()));
        }
        if modes.iter().any(|m| m.alpha == 0) {
            return Err(Error::Domain("mode index must be >= 1".into()));
        }
        if modes.iter().any(|m| !(m.c.re.is_finite() && m.c.im.is_finite())) {
            return Err(Error::Domain("non-finite coefficient".into()));
        }
        modes.sort_by_key(|m| m.alpha);
        if modes.windows(2).any(|w| w[0].alpha == w[1].alpha) {
            return Err(Error::Domain("duplicate mode index".into()));
        }
        let has_even = modes.iter().any(|m| m.alpha % 2 == 1);
        let has_odd = modes.iter().any(|m| m.alpha % 2 == 0);
        let parity = match (has_even, has_odd) {
            (true, false) => Parity::Even,
            (false, true) => Parity::Odd,
            _ => Parity::Mixed,
        };
        let n_modes = modes.iter().map(|m| series_position(m.alpha)).max().unwrap_or(0);
        let state = SpectralState {
            config,
            modes,
            parity,
            n_modes,
            label: "custom".into(),
            truncation_deficit: 0.0,
            quadrature_error: None,
        };
        let p = state.total_probability();
        if p > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("coefficients carry probability {p} > 1")));
        }
        Ok(state)
    }

    /// A single normalized eigenmode.
    pub fn single_mode(alpha: u32, config: WellConfig) -> Result<Self> {
        let mut s = Self::from_modes(
            config,
            vec![Mode {
                alpha,
                c: Complex64::new(1.0, 0.0),
            }],
        )?;
        s.label = format!("mode-{alpha}");
        Ok(s)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn config(&self) -> &WellConfig {
        &self.config
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    /// Truncation count `N`, per parity series.
    pub fn n_modes(&self) -> u32 {
        self.n_modes
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Probability of the untruncated initial profile lying outside the box.
    pub fn truncation_deficit(&self) -> f64 {
        self.truncation_deficit
    }

    /// Largest per-coefficient error estimate when built by quadrature.
    pub fn quadrature_error(&self) -> Option<f64> {
        self.quadrature_error
    }

    pub fn coefficient(&self, alpha: u32) -> Complex64 {
        self.modes
            .binary_search_by_key(&alpha, |m| m.alpha)
            .map(|i| self.modes[i].c)
            .unwrap_or_default()
    }

    /// Same coefficients, different well parameters. The expansion does not depend
    /// on `m` or `hbar`, so this is how mass series are built.
    pub fn with_config(&self, config: WellConfig) -> Result<Self> {
        config.validate()?;
        let mut s = self.clone();
        s.config = config;
        Ok(s)
    }

    /// Multiplies every coefficient by a common phase.
    pub fn with_global_phase(&self, phase: f64) -> Self {
        let u = Complex64::from_polar(1.0, phase);
        let mut s = self.clone();
        for m in &mut s.modes {
            m.c *= u;
        }
        s
    }

    /// Drops modes beyond series position `n`.
    pub fn truncated(&self, n: u32) -> Result<Self> {
        if n < 1 || n > self.n_modes {
            return Err(Error::Domain(format!("truncation {n} outside 1..={}", self.n_modes)));
        }
        let mut s = self.clone();
        s.modes.retain(|m| series_position(m.alpha) <= n);
        s.n_modes = n;
        Ok(s)
    }

    pub fn total_probability(&self) -> f64 {
        self.modes.iter().map(|m| m.c.norm_sqr()).sum()
    }

    /// Series of the dominant parity as `(n, |c|^2)` pairs, `n = 1..=N`.
    pub(crate) fn weight_series(&self) -> Vec<(u32, f64)> {
        let odd_alpha = !matches!(self.parity, Parity::Odd);
        (1..=self.n_modes)
            .map(|n| {
                let alpha = if odd_alpha { even_mode_index(n) } else { odd_mode_index(n) };
                (n, self.coefficient(alpha).norm_sqr())
            })
            .collect()
    }
}

/// First `n` cosine-mode coefficients from the closed forms.
pub fn coefficients_analytic(shape: &ApertureShape, n: u32, config: &WellConfig) -> Result<SpectralState> {
    config.validate()?;
    shape.validate(config)?;
    if !shape.is_analytic() {
        return Err(Error::Unsupported(
            "sampled profiles have no closed-form coefficients; use coefficients_quadrature".into(),
        ));
    }
    if n < 1 {
        return Err(Error::Config("truncation N must be >= 1".into()));
    }
    let modes = (1..=n)
        .map(|i| {
            let alpha = even_mode_index(i);
            Ok(Mode {
                alpha,
                c: Complex64::new(shape.analytic_coefficient(alpha, config)?, 0.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpectralState {
        config: *config,
        modes,
        parity: Parity::Even,
        n_modes: n,
        label: shape.name().into(),
        truncation_deficit: shape.truncation_deficit(config)?,
        quadrature_error: None,
    })
}

/// `c_alpha = integral of phi_alpha(x) f(x)` over the box.
pub fn project_mode(profile: &dyn Profile, alpha: u32, config: &WellConfig, opts: &QuadOptions) -> Result<(Complex64, f64)> {
    let h = config.half_length();
    let r = integrate(
        |x| {
            let (phi, _) = eigenfunction_with_derivative(alpha, x.clamp(-h, h), config).expect("alpha >= 1");
            profile.value(x) * phi
        },
        -h,
        h,
        &profile.breakpoints(),
        opts,
    )?;
    Ok((r.value, r.error))
}

/// Projects a profile onto the first `n` modes of each parity. Parity families whose
/// coefficients all fall below ten times the quadrature tolerance are dropped.
pub fn coefficients_quadrature(
    profile: &dyn Profile,
    n: u32,
    config: &WellConfig,
    opts: &QuadOptions,
) -> Result<SpectralState> {
    config.validate()?;
    if n < 1 {
        return Err(Error::Config("truncation N must be >= 1".into()));
    }
    let projected = (1..=2 * n)
        .into_par_iter()
        .map(|alpha| project_mode(profile, alpha, config, opts).map(|(c, e)| (alpha, c, e)))
        .collect::<Result<Vec<_>>>()?;

    let parity_tol = 10.0 * opts.abs_tol;
    let max_of = |odd_alpha: bool| {
        projected
            .iter()
            .filter(|(a, _, _)| (a % 2 == 1) == odd_alpha)
            .map(|(_, c, _)| c.norm())
            .fold(0.0, f64::max)
    };
    let (cos_max, sin_max) = (max_of(true), max_of(false));
    let parity = if sin_max <= parity_tol {
        Parity::Even
    } else if cos_max <= parity_tol {
        Parity::Odd
    } else {
        Parity::Mixed
    };
    let keep = |alpha: u32| match parity {
        Parity::Even => alpha % 2 == 1,
        Parity::Odd => alpha % 2 == 0,
        Parity::Mixed => true,
    };
    let modes: Vec<Mode> = projected
        .iter()
        .filter(|(a, _, _)| keep(*a))
        .map(|&(alpha, c, _)| Mode { alpha, c })
        .collect();
    let quadrature_error = projected.iter().map(|(_, _, e)| *e).fold(0.0, f64::max);
    Ok(SpectralState {
        config: *config,
        modes,
        parity,
        n_modes: n,
        label: "quadrature".into(),
        truncation_deficit: 0.0,
        quadrature_error: Some(quadrature_error),
    })
}

/// Convenience: quadrature projection of one of the aperture shapes.
pub fn coefficients_quadrature_for_shape(
    shape: &ApertureShape,
    n: u32,
    config: &WellConfig,
    opts: &QuadOptions,
) -> Result<SpectralState> {
    shape.validate(config)?;
    let profile = ShapeProfile {
        shape,
        config: *config,
    };
    let mut s = coefficients_quadrature(&profile, n, config, opts)?;
    s.label = shape.name().into();
    s.truncation_deficit = shape.truncation_deficit(config)?;
    Ok(s)
}

/// JSON sidecar accompanying an exported coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "m")]
    pub mass: f64,
    pub hbar: f64,
    pub shape: String,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(rename = "P_N")]
    pub p_n: f64,
    #[serde(rename = "H_N")]
    pub h_n: f64,
    pub tau_r: f64,
    pub parity: Parity,
    pub truncation_deficit: f64,
}

impl SpectralState {
    pub fn summary(&self) -> Result<CoefficientSummary> {
        Ok(CoefficientSummary {
            length: self.config.length,
            width: self.config.width,
            mass: self.config.mass,
            hbar: self.config.hbar,
            shape: self.label.clone(),
            n: self.n_modes,
            p_n: super::overlap_probability(self, self.n_modes)?,
            h_n: super::expected_energy(self, self.n_modes)?,
            tau_r: recurrence_time(&self.config),
            parity: self.parity,
            truncation_deficit: self.truncation_deficit,
        })
    }

    /// Writes `alpha,re_c,im_c,weight,energy`, one row per stored mode.
    pub fn write_coefficients_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["alpha", "re_c", "im_c", "weight", "energy"])?;
        for m in &self.modes {
            w.write_record(&[
                m.alpha.to_string(),
                format!("{:e}", m.c.re),
                format!("{:e}", m.c.im),
                format!("{:e}", m.c.norm_sqr()),
                format!("{:e}", energy(m.alpha, &self.config)?),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::basis::eigenfunction;
    use crate::spectral::shape::FnProfile;
    use std::f64::consts::PI;

    #[test]
    fn analytic_state_shape() {
        let s = coefficients_analytic(&ApertureShape::Square, 5, &WellConfig::default()).unwrap();
        assert_eq!(s.parity(), Parity::Even);
        assert_eq!(s.n_modes(), 5);
        let alphas: Vec<u32> = s.modes().iter().map(|m| m.alpha).collect();
        assert_eq!(alphas, vec![1, 3, 5, 7, 9]);
        assert!(s.modes().iter().all(|m| m.c.im == 0.0));
        assert!(coefficients_analytic(&ApertureShape::Square, 0, &WellConfig::default()).is_err());
    }

    #[test]
    fn sampled_shape_needs_quadrature() {
        let p = crate::spectral::shape::SampledProfile::from_fn(5.0, 5, |_| Complex64::new(0.3, 0.0)).unwrap();
        let err = coefficients_analytic(&ApertureShape::Sampled(p), 5, &WellConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn projecting_an_eigenmode_recovers_it() {
        let config = WellConfig::default();
        let profile = FnProfile::new(|x| Complex64::new(eigenfunction(3, x, &config).unwrap(), 0.0));
        let s = coefficients_quadrature(&profile, 10, &config, &QuadOptions::default()).unwrap();
        assert_eq!(s.parity(), Parity::Even);
        assert!((s.coefficient(3).re - 1.0).abs() < 1e-10);
        for m in s.modes().iter().filter(|m| m.alpha != 3) {
            assert!(m.c.norm() <= 1e-10, "alpha {}: {}", m.alpha, m.c);
        }
    }

    #[test]
    fn odd_profile_has_no_cosine_content() {
        let config = WellConfig::default();
        let w = config.width;
        let opts = QuadOptions::default();
        let f = move |x: f64| {
            if x.abs() <= 0.5 * w {
                Complex64::new((2.0 / w).sqrt() * (2.0 * PI * x / w).sin(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        };
        let profile = FnProfile::new(f).with_breakpoints(vec![-0.5 * w, 0.0, 0.5 * w]);
        for alpha in (1..40).step_by(2) {
            let (c, _) = project_mode(&profile, alpha, &config, &opts).unwrap();
            assert!(c.norm() <= 1e-10, "alpha {alpha}: {c}");
        }
        let s = coefficients_quadrature(&profile, 20, &config, &opts).unwrap();
        assert_eq!(s.parity(), Parity::Odd);
        assert!(s.modes().iter().all(|m| m.alpha % 2 == 0));
    }

    #[test]
    fn asymmetric_complex_profile_is_mixed() {
        let config = WellConfig::default();
        let shape = ApertureShape::Square;
        let profile = FnProfile::new(|x: f64| shape.value(x, &config) * Complex64::from_polar(1.0, 0.8 * x))
            .with_breakpoints(vec![-5.0, 5.0]);
        let s = coefficients_quadrature(&profile, 30, &config, &QuadOptions::default()).unwrap();
        assert_eq!(s.parity(), Parity::Mixed);
        assert_eq!(s.modes().len(), 60);
        assert!(s.modes().iter().any(|m| m.c.im.abs() > 1e-3));
    }

    #[test]
    fn from_modes_validation() {
        let config = WellConfig::default();
        let c = Complex64::new(0.8, 0.0);
        assert!(SpectralState::from_modes(config, vec![]).is_err());
        assert!(SpectralState::from_modes(config, vec![Mode { alpha: 0, c }]).is_err());
        assert!(SpectralState::from_modes(config, vec![Mode { alpha: 1, c }, Mode { alpha: 1, c }]).is_err());
        assert!(SpectralState::from_modes(config, vec![Mode { alpha: 1, c }, Mode { alpha: 3, c }]).is_err());
        let s = SpectralState::from_modes(config, vec![Mode { alpha: 4, c }, Mode { alpha: 1, c: c * 0.5 }]).unwrap();
        assert_eq!(s.parity(), Parity::Mixed);
        assert_eq!(s.modes()[0].alpha, 1);
        assert_eq!(s.n_modes(), 2);
    }

    #[test]
    fn csv_export_header_and_rows() {
        let s = coefficients_analytic(&ApertureShape::Triangle, 3, &WellConfig::default()).unwrap();
        let mut buf = Vec::new();
        s.write_coefficients_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "alpha,re_c,im_c,weight,energy");
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("3,"));
    }

    #[test]
    fn summary_fields() {
        let s = coefficients_analytic(&ApertureShape::HalfCosineSquared, 10, &WellConfig::default()).unwrap();
        let j = serde_json::to_value(s.summary().unwrap()).unwrap();
        for key in ["L", "w", "m", "hbar", "shape", "N", "P_N", "H_N", "tau_r"] {
            assert!(j.get(key).is_some(), "missing {key}");
        }
        assert_eq!(j["shape"], "half-cosine-squared");
    }
}
