//! Initial aperture profiles `f(x)` and their closed-form cosine coefficients.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::basis::{wavenumber, WellConfig};
use super::quadrature::{integrate_real, QuadOptions};
use crate::error::{Error, Result};

/// Relative size of a vanishing denominator below which the closed-form limit is used.
pub const DEGENERATE_SWITCH: f64 = 1e-9;

/// Unnormalized `sin(x)/x`, with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// A tabulated, possibly complex profile, linearly interpolated between nodes
/// and zero outside the tabulated range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledProfile {
    pub x: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl SampledProfile {
    pub fn new(x: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let profile = SampledProfile {
            x,
            re: values.iter().map(|v| v.re).collect(),
            im: values.iter().map(|v| v.im).collect(),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn from_fn<F: Fn(f64) -> Complex64>(half_width: f64, samples: usize, f: F) -> Result<Self> {
        if samples < 2 {
            return Err(Error::Config("a sampled profile needs at least 2 nodes".into()));
        }
        let x: Vec<f64> = (0..samples)
            .map(|i| -half_width + 2.0 * half_width * i as f64 / (samples - 1) as f64)
            .collect();
        let values = x.iter().map(|&xi| f(xi)).collect();
        Self::new(x, values)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.len() < 2 || self.x.len() != self.re.len() || self.x.len() != self.im.len() {
            return Err(Error::Config(
                "sampled profile needs >= 2 nodes with matching value columns".into(),
            ));
        }
        if self.x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("sampled profile nodes must be strictly increasing".into()));
        }
        if self.x.iter().chain(&self.re).chain(&self.im).any(|v| !v.is_finite()) {
            return Err(Error::Config("sampled profile contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> Complex64 {
        let n = self.x.len();
        if x < self.x[0] || x > self.x[n - 1] {
            return Complex64::new(0.0, 0.0);
        }
        let i = match self.x.partition_point(|&xi| xi <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let t = (x - self.x[i]) / (self.x[i + 1] - self.x[i]);
        let a = Complex64::new(self.re[i], self.im[i]);
        let b = Complex64::new(self.re[i + 1], self.im[i + 1]);
        a + (b - a) * t
    }
}

/// The initial profile confined to the aperture `|x| <= w/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ApertureShape {
    Square,
    Triangle,
    Parabola,
    HalfCosine,
    HalfCosineSquared,
    /// Gaussian normalized on the whole line; `sigma0` defaults to `w / (2 pi)`.
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma0: Option<f64>,
    },
    Sampled(SampledProfile),
}

impl ApertureShape {
    /// The six closed-form shapes in their canonical order.
    pub fn analytic_shapes() -> [ApertureShape; 6] {
        [
            ApertureShape::Square,
            ApertureShape::Triangle,
            ApertureShape::Parabola,
            ApertureShape::HalfCosine,
            ApertureShape::HalfCosineSquared,
            ApertureShape::Gaussian { sigma0: None },
        ]
    }

    pub fn gaussian() -> Self {
        ApertureShape::Gaussian { sigma0: None }
    }

    pub fn is_analytic(&self) -> bool {
        !matches!(self, ApertureShape::Sampled(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ApertureShape::Square => "square",
            ApertureShape::Triangle => "triangle",
            ApertureShape::Parabola => "parabola",
            ApertureShape::HalfCosine => "half-cosine",
            ApertureShape::HalfCosineSquared => "half-cosine-squared",
            ApertureShape::Gaussian { .. } => "gaussian",
            ApertureShape::Sampled(_) => "sampled",
        }
    }

    pub fn sigma0(&self, config: &WellConfig) -> Option<f64> {
        match self {
            ApertureShape::Gaussian { sigma0 } => Some(sigma0.unwrap_or(config.width / (2.0 * PI))),
            _ => None,
        }
    }

    pub fn validate(&self, config: &WellConfig) -> Result<()> {
        match self {
            ApertureShape::Gaussian { sigma0: Some(s) } if !(s.is_finite() && *s > 0.0) => {
                Err(Error::Config(format!("gaussian sigma0 must be positive, got {s}")))
            }
            ApertureShape::Sampled(p) => {
                p.validate()?;
                let h = 0.5 * config.width;
                if p.x[0] < -h * (1.0 + 1e-12) || p.x[p.x.len() - 1] > h * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "sampled profile extends beyond the aperture |x| <= {h}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `f(x)`; analytic shapes vanish outside the aperture except the Gaussian.
    pub fn value(&self, x: f64, config: &WellConfig) -> Complex64 {
        let w = config.width;
        let inside = x.abs() <= 0.5 * w;
        let k0 = PI / w;
        let re = match self {
            ApertureShape::Sampled(p) => return p.value(x),
            ApertureShape::Gaussian { .. } => {
                let s = self.sigma0(config).expect("gaussian");
                (2.0 * PI * s * s).powf(-0.25) * (-x * x / (4.0 * s * s)).exp()
            }
            _ if !inside => 0.0,
            ApertureShape::Square => 1.0 / w.sqrt(),
            ApertureShape::Triangle => (3.0 / w).sqrt() * (1.0 - 2.0 * x.abs() / w),
            ApertureShape::Parabola => {
                let u = 2.0 * x / w;
                (15.0 / (8.0 * w)).sqrt() * (1.0 - u * u)
            }
            ApertureShape::HalfCosine => (2.0 / w).sqrt() * (k0 * x).cos(),
            ApertureShape::HalfCosineSquared => {
                let c = (k0 * x).cos();
                (8.0 / (3.0 * w)).sqrt() * c * c
            }
        };
        Complex64::new(re, 0.0)
    }

    /// Points where `f` or its derivative is discontinuous.
    pub fn breakpoints(&self, config: &WellConfig) -> Vec<f64> {
        let h = 0.5 * config.width;
        match self {
            ApertureShape::Gaussian { .. } => vec![0.0],
            ApertureShape::Sampled(p) => p.x.clone(),
            _ => vec![-h, 0.0, h],
        }
    }

    /// Integration support of the profile.
    pub fn support(&self, config: &WellConfig) -> (f64, f64) {
        match self {
            ApertureShape::Gaussian { .. } => (-config.half_length(), config.half_length()),
            ApertureShape::Sampled(p) => (p.x[0], p.x[p.x.len() - 1]),
            _ => (-0.5 * config.width, 0.5 * config.width),
        }
    }

    /// Closed-form coefficient of an odd (cosine) mode `alpha`.
    pub fn analytic_coefficient(&self, alpha: u32, config: &WellConfig) -> Result<f64> {
        if alpha % 2 == 0 {
            // Every analytic shape is even, so sine modes carry nothing.
            wavenumber(alpha, config)?;
            return Ok(0.0);
        }
        let l = config.length;
        let w = config.width;
        let k = wavenumber(alpha, config)?;
        let k0 = PI / w;
        let half = 0.5 * k * w;
        let c = match self {
            ApertureShape::Square => (2.0 * w / l).sqrt() * sinc(half),
            ApertureShape::Triangle => {
                let s = sinc(0.25 * k * w);
                (1.5 * w / l).sqrt() * s * s
            }
            ApertureShape::Parabola => {
                // sinc(z) - cos(z) ~ z^2/3 for small z; keep the series to avoid cancellation.
                let bracket = if half.abs() < 1e-3 {
                    let z2 = half * half;
                    z2 / 3.0 - z2 * z2 / 30.0 + z2 * z2 * z2 / 840.0
                } else {
                    sinc(half) - half.cos()
                };
                (4.0 / w) * (15.0 / (w * l)).sqrt() * bracket / (k * k)
            }
            ApertureShape::HalfCosine => {
                let denom = k0 * k0 - k * k;
                if (denom / (k0 * k0)).abs() < DEGENERATE_SWITCH {
                    (w / l).sqrt()
                } else {
                    4.0 / (l * w).sqrt() * (k0 / denom) * half.cos()
                }
            }
            ApertureShape::HalfCosineSquared => {
                let q = 2.0 * k0;
                let denom = q * q - k * k;
                if (denom / (q * q)).abs() < DEGENERATE_SWITCH {
                    // Limit at k = 2 k0, where sin(k w / 2) and the denominator vanish together.
                    (w / (3.0 * l)).sqrt()
                } else {
                    (4.0 * w / (3.0 * l)).sqrt() * (q * q / denom) * sinc(half)
                }
            }
            ApertureShape::Gaussian { .. } => {
                let s = self.sigma0(config).expect("gaussian");
                (2.0 / l).sqrt() * (8.0 * PI * s * s).powf(0.25) * (-s * s * k * k).exp()
            }
            ApertureShape::Sampled(_) => {
                return Err(Error::Unsupported(
                    "sampled profiles have no closed-form coefficients; use quadrature".into(),
                ))
            }
        };
        Ok(c)
    }

    /// Probability of the infinite-line profile that lies outside the box.
    /// Zero for every shape except the Gaussian.
    pub fn truncation_deficit(&self, config: &WellConfig) -> Result<f64> {
        let Some(s) = self.sigma0(config) else {
            return Ok(0.0);
        };
        let h = config.half_length();
        let density = |x: f64| (-x * x / (2.0 * s * s)).exp() / ((2.0 * PI).sqrt() * s);
        let opts = QuadOptions {
            abs_tol: 1e-300,
            rel_tol: 1e-10,
            max_intervals: 2000,
        };
        let (tail, _) = integrate_real(density, h, h + 40.0 * s, &[], &opts)?;
        Ok(2.0 * tail)
    }
}

impl fmt::Display for ApertureShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ApertureShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        match key.as_str() {
            "square" => Ok(ApertureShape::Square),
            "triangle" => Ok(ApertureShape::Triangle),
            "parabola" => Ok(ApertureShape::Parabola),
            "half-cosine" | "cosine" => Ok(ApertureShape::HalfCosine),
            "half-cosine-squared" | "cosine-squared" => Ok(ApertureShape::HalfCosineSquared),
            "gaussian" => Ok(ApertureShape::gaussian()),
            _ => Err(Error::Config(format!(
                "unknown shape '{s}' (expected square, triangle, parabola, half-cosine, half-cosine-squared or gaussian)"
            ))),
        }
    }
}

/// Anything that can be projected onto the eigenbasis.
pub trait Profile: Sync {
    fn value(&self, x: f64) -> Complex64;

    /// Kinks and jumps inside the box, used as initial quadrature cuts.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// An aperture shape bound to a concrete well.
pub struct ShapeProfile<'a> {
    pub shape: &'a ApertureShape,
    pub config: WellConfig,
}

impl Profile for ShapeProfile<'_> {
    fn value(&self, x: f64) -> Complex64 {
        self.shape.value(x, &self.config)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.shape.breakpoints(&self.config)
    }
}

/// A closure profile with optional breakpoints.
pub struct FnProfile<F> {
    pub f: F,
    pub breakpoints: Vec<f64>,
}

impl<F> FnProfile<F> {
    pub fn new(f: F) -> Self {
        FnProfile {
            f,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }
}

impl<F: Fn(f64) -> Complex64 + Sync> Profile for FnProfile<F> {
    fn value(&self, x: f64) -> Complex64 {
        (self.f)(x)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breakpoints.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_convention() {
        assert_eq!(sinc(0.0), 1.0);
        assert!((sinc(PI)).abs() < 1e-16);
        assert!((sinc(1e-5) - (1e-5f64).sin() / 1e-5).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn analytic_profiles_are_normalized() {
        let config = WellConfig::default();
        let opts = QuadOptions {
            abs_tol: 1e-14,
            rel_tol: 0.0,
            max_intervals: 4000,
        };
        for shape in ApertureShape::analytic_shapes() {
            let (a, b) = shape.support(&config);
            let (norm, _) = integrate_real(
                |x| shape.value(x, &config).norm_sqr(),
                a,
                b,
                &shape.breakpoints(&config),
                &opts,
            )
            .unwrap();
            let deficit = shape.truncation_deficit(&config).unwrap();
            assert!((norm + deficit - 1.0).abs() < 1e-12, "{shape}: {norm}");
        }
    }

    #[test]
    fn analytic_profiles_are_even_and_confined() {
        let config = WellConfig::default();
        for shape in ApertureShape::analytic_shapes() {
            for x in [0.3, 1.7, 4.9] {
                assert_eq!(shape.value(x, &config), shape.value(-x, &config));
            }
            if !matches!(shape, ApertureShape::Gaussian { .. }) {
                assert_eq!(shape.value(5.01, &config).norm(), 0.0);
                assert_eq!(shape.value(-20.0, &config).norm(), 0.0);
            }
        }
        // exp(-x^2 / (4 sigma0^2)) at the wall, sigma0 = w / (2 pi).
        let g = ApertureShape::gaussian();
        assert!(g.value(25.0, &config).norm() < 1e-26);
    }

    #[test]
    fn gaussian_deficit_is_tiny_but_recorded() {
        let config = WellConfig::default();
        let d = ApertureShape::gaussian().truncation_deficit(&config).unwrap();
        assert!(d > 0.0 && d < 1e-20, "{d}");
        let narrow_box = WellConfig::new(10.0, 10.0, 1.0, 1.0).unwrap();
        let d = ApertureShape::gaussian().truncation_deficit(&narrow_box).unwrap();
        // P(|X| > 5) with sigma = 10 / (2 pi)
        assert!(d > 1e-4 && d < 1e-2, "{d}");
    }

    #[test]
    fn half_cosine_degenerate_branch() {
        // k_alpha = k0 when alpha = L / w.
        let config = WellConfig::new(30.0, 10.0, 1.0, 1.0).unwrap();
        let c = ApertureShape::HalfCosine.analytic_coefficient(3, &config).unwrap();
        assert!((c - (10.0f64 / 30.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn square_first_coefficient() {
        let c = ApertureShape::Square
            .analytic_coefficient(1, &WellConfig::default())
            .unwrap();
        assert!((c - 0.62210).abs() < 1e-5);
        assert!((c - 0.4f64.sqrt() * sinc(PI / 10.0)).abs() < 1e-15);
    }

    #[test]
    fn sampled_profile_rejects_bad_input() {
        assert!(SampledProfile::new(vec![0.0], vec![Complex64::new(1.0, 0.0)]).is_err());
        assert!(SampledProfile::new(
            vec![0.0, 0.0],
            vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)]
        )
        .is_err());
        let p = SampledProfile::from_fn(5.0, 11, |x| Complex64::new(x, -x)).unwrap();
        assert_eq!(p.value(0.25), Complex64::new(0.25, -0.25));
        assert_eq!(p.value(6.0), Complex64::new(0.0, 0.0));
        let wide = ApertureShape::Sampled(SampledProfile::from_fn(6.0, 5, |_| Complex64::new(1.0, 0.0)).unwrap());
        assert!(wide.validate(&WellConfig::default()).is_err());
        assert!(ApertureShape::Sampled(p).analytic_coefficient(1, &WellConfig::default()).is_err());
    }

    #[test]
    fn shape_names_round_trip() {
        for shape in ApertureShape::analytic_shapes() {
            assert_eq!(shape.name().parse::<ApertureShape>().unwrap(), shape);
        }
        assert!("hexagon".parse::<ApertureShape>().is_err());
    }
}
