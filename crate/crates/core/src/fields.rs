//! Time-evolved wavefunction and the hydrodynamic fields derived from it.
//!
//! Two evaluation routes are provided. The single-sum route accumulates
//! `psi`, `psi'` and `psi''` term by term (O(N) per point) and forms every field
//! from them; it is what grids and trajectories use. The double-sum route
//! evaluates the coherence sums over mode pairs directly (O(N^2) per point) and
//! serves as an independent cross-check.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{wavenumber, SpectralState, WellConfig};

/// Relative density below which a point counts as near a node.
pub const NODE_FLOOR_RELATIVE: f64 = 1e-12;

/// Velocity magnitude cap at nodes, in units of `hbar / (m L)`.
pub const VELOCITY_CAP_SCALE: f64 = 1e12;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Term {
    pub alpha: u32,
    pub c: Complex64,
    pub k: f64,
    /// `E_alpha / hbar`
    pub omega: f64,
}

impl Term {
    #[inline]
    pub fn is_cosine(&self) -> bool {
        self.alpha % 2 == 1
    }
}

/// `psi` and its first two spatial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Amplitudes {
    pub psi: Complex64,
    pub dpsi: Complex64,
    pub d2psi: Complex64,
}

impl Amplitudes {
    pub fn rho(&self) -> f64 {
        self.psi.norm_sqr()
    }

    /// `Im(psi* psi')`; the current is this times `hbar / m`.
    pub fn flux_kernel(&self) -> f64 {
        (self.psi.conj() * self.dpsi).im
    }

    pub fn drho_dx(&self) -> f64 {
        2.0 * (self.psi.conj() * self.dpsi).re
    }

    pub fn d2rho_dx2(&self) -> f64 {
        2.0 * (self.psi.conj() * self.d2psi).re + 2.0 * self.dpsi.norm_sqr()
    }
}

/// A field value that may have been clipped at a density node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: f64,
    pub near_node: bool,
}

/// Every field at one space-time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub x: f64,
    pub t: f64,
    pub psi: Complex64,
    pub rho: f64,
    pub v: f64,
    pub q: Option<f64>,
    pub near_node: bool,
}

impl FieldSample {
    pub fn flags(&self) -> &'static str {
        if self.near_node {
            "near-node"
        } else {
            ""
        }
    }
}

/// Finite-difference continuity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuityResidual {
    /// Central differences in both `t` and `x`.
    pub finite_difference: f64,
    /// Term-wise `d rho / dt` plus the central difference of the current.
    pub analytic_time: f64,
}

/// Precomputed per-mode data for repeated evaluation of one state.
#[derive(Debug, Clone)]
pub struct FieldEvaluator {
    config: WellConfig,
    terms: Vec<Term>,
    norm: f64,
    node_floor: f64,
}

impl FieldEvaluator {
    pub fn new(state: &SpectralState) -> Self {
        let config = *state.config();
        let terms: Vec<Term> = state
            .modes()
            .iter()
            .filter(|m| m.c != Complex64::new(0.0, 0.0))
            .map(|m| {
                let k = wavenumber(m.alpha, &config).expect("stored modes have alpha >= 1");
                Term {
                    alpha: m.alpha,
                    c: m.c,
                    k,
                    omega: config.hbar * k * k / (2.0 * config.mass),
                }
            })
            .collect();
        let norm = (2.0 / config.length).sqrt();
        let amplitude_bound: f64 = terms.iter().map(|t| t.c.norm()).sum::<f64>() * norm;
        FieldEvaluator {
            config,
            terms,
            norm,
            node_floor: NODE_FLOOR_RELATIVE * amplitude_bound * amplitude_bound,
        }
    }

    /// Overrides the absolute density below which samples are flagged near-node.
    pub fn with_node_floor(mut self, floor: f64) -> Self {
        self.node_floor = floor;
        self
    }

    pub fn node_floor(&self) -> f64 {
        self.node_floor
    }

    pub fn config(&self) -> &WellConfig {
        &self.config
    }

    pub(crate) fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub(crate) fn basis_norm(&self) -> f64 {
        self.norm
    }

    pub fn velocity_cap(&self) -> f64 {
        VELOCITY_CAP_SCALE * self.config.hbar / (self.config.mass * self.config.length)
    }

    fn potential_cap(&self) -> f64 {
        VELOCITY_CAP_SCALE * self.config.hbar * self.config.hbar
            / (self.config.mass * self.config.length * self.config.length)
    }

    /// Single-sum accumulation without domain checks.
    #[inline]
    pub(crate) fn amplitudes_unchecked(&self, x: f64, t: f64) -> Amplitudes {
        let mut psi = Complex64::new(0.0, 0.0);
        let mut dpsi = Complex64::new(0.0, 0.0);
        let mut d2psi = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let (s, c) = (term.k * x).sin_cos();
            let (phi, dphi) = if term.is_cosine() {
                (self.norm * c, -self.norm * term.k * s)
            } else {
                (self.norm * s, self.norm * term.k * c)
            };
            let a = term.c * Complex64::from_polar(1.0, -term.omega * t);
            psi += a * phi;
            dpsi += a * dphi;
            d2psi -= a * (term.k * term.k * phi);
        }
        Amplitudes { psi, dpsi, d2psi }
    }

    pub fn amplitudes(&self, x: f64, t: f64) -> Result<Amplitudes> {
        self.check(x, t)?;
        Ok(self.amplitudes_unchecked(x, t))
    }

    fn check(&self, x: f64, t: f64) -> Result<()> {
        self.config.check_position(x)?;
        if !t.is_finite() {
            return Err(Error::Domain(format!("time t = {t} is not finite")));
        }
        Ok(())
    }

    pub fn psi(&self, x: f64, t: f64) -> Result<Complex64> {
        Ok(self.amplitudes(x, t)?.psi)
    }

    /// `|psi|^2` via the single-sum route.
    pub fn rho(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.amplitudes(x, t)?.rho())
    }

    /// Density from the pairwise coherence sum
    /// `sum |c||c'| phi phi' cos(omega_{a,a'} t - delta_{a,a'})`.
    pub fn rho_double_sum(&self, x: f64, t: f64) -> Result<f64> {
        self.check(x, t)?;
        let phis: Vec<f64> = self.terms.iter().map(|tm| self.phi(tm, x).0).collect();
        let mut sum = 0.0;
        for (i, a) in self.terms.iter().enumerate() {
            // Diagonal: the bare sum of separate densities.
            sum += a.c.norm_sqr() * phis[i] * phis[i];
            for (j, b) in self.terms.iter().enumerate().skip(i + 1) {
                let (beat, shift) = pair_phase(a, b);
                // (i, j) and (j, i) contribute identical cosines.
                sum += 2.0 * a.c.norm() * b.c.norm() * phis[i] * phis[j] * (beat * t - shift).cos();
            }
        }
        Ok(sum)
    }

    #[inline]
    fn phi(&self, term: &Term, x: f64) -> (f64, f64) {
        crate::spectral::basis::mode_value(term.alpha, term.k, x, self.norm)
    }

    /// Probability current `J = (hbar/m) Im(psi* psi')`.
    pub fn current(&self, x: f64, t: f64) -> Result<f64> {
        Ok(self.hbar_over_m() * self.amplitudes(x, t)?.flux_kernel())
    }

    fn hbar_over_m(&self) -> f64 {
        self.config.hbar / self.config.mass
    }

    pub(crate) fn flag_velocity(&self, rho: f64, kernel: f64) -> Flagged {
        let raw = self.hbar_over_m() * kernel / rho;
        if rho >= self.node_floor && raw.is_finite() {
            return Flagged {
                value: raw,
                near_node: false,
            };
        }
        let cap = self.velocity_cap();
        let value = if raw.is_nan() { 0.0 } else { raw.clamp(-cap, cap) };
        Flagged {
            value,
            near_node: true,
        }
    }

    /// Bohmian velocity `(hbar/m) Im(psi'/psi)`. Near nodes the value is capped and flagged.
    pub fn velocity(&self, x: f64, t: f64) -> Result<Flagged> {
        let a = self.amplitudes(x, t)?;
        Ok(self.flag_velocity(a.rho(), a.flux_kernel()))
    }

    /// Velocity from the pairwise sums
    /// `(hbar/m) sum |c||c'| phi_a phi'_a' sin(omega t - delta) / sum |c||c'| phi_a phi_a' cos(omega t - delta)`.
    /// For real cosine coefficients this is the familiar ratio of
    /// `sum c c' k sin(k x) cos(k' x) sin(omega t)` to the density sum.
    pub fn velocity_double_sum(&self, x: f64, t: f64) -> Result<Flagged> {
        self.check(x, t)?;
        let vals: Vec<(f64, f64)> = self.terms.iter().map(|tm| self.phi(tm, x)).collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in self.terms.iter().enumerate() {
                let (beat, shift) = pair_phase(a, b);
                let amp = a.c.norm() * b.c.norm();
                let arg = beat * t - shift;
                num += amp * vals[i].0 * vals[j].1 * arg.sin();
                den += amp * vals[i].0 * vals[j].0 * arg.cos();
            }
        }
        Ok(self.flag_velocity(den, num))
    }

    /// Quantum potential `-(hbar^2/2m) [ rho''/(2 rho) - (rho'/rho)^2 / 4 ]`
    /// from term-wise derivatives.
    pub fn quantum_potential(&self, x: f64, t: f64) -> Result<Flagged> {
        let a = self.amplitudes(x, t)?;
        Ok(self.flag_potential(&a))
    }

    pub(crate) fn flag_potential(&self, a: &Amplitudes) -> Flagged {
        let rho = a.rho();
        let r1 = a.drho_dx() / rho;
        let r2 = a.d2rho_dx2() / rho;
        let raw = -(self.config.hbar * self.config.hbar / (2.0 * self.config.mass)) * (0.5 * r2 - 0.25 * r1 * r1);
        if rho >= self.node_floor && raw.is_finite() {
            return Flagged {
                value: raw,
                near_node: false,
            };
        }
        let cap = self.potential_cap();
        Flagged {
            value: if raw.is_nan() { 0.0 } else { raw.clamp(-cap, cap) },
            near_node: true,
        }
    }

    /// Term-wise `d rho / dt = 2 Re(psi* d psi/dt)`.
    pub fn drho_dt(&self, x: f64, t: f64) -> Result<f64> {
        self.check(x, t)?;
        let mut psi = Complex64::new(0.0, 0.0);
        let mut dpsi_dt = Complex64::new(0.0, 0.0);
        for term in &self.terms {
            let a = term.c * Complex64::from_polar(1.0, -term.omega * t) * self.phi(term, x).0;
            psi += a;
            dpsi_dt += a * Complex64::new(0.0, -term.omega);
        }
        Ok(2.0 * (psi.conj() * dpsi_dt).re)
    }

    /// Term-wise `d J / dx = (hbar/m) Im(psi* psi'')`.
    pub fn current_divergence(&self, x: f64, t: f64) -> Result<f64> {
        let a = self.amplitudes(x, t)?;
        Ok(self.hbar_over_m() * (a.psi.conj() * a.d2psi).im)
    }

    /// Central-difference residual of `d rho/dt + d(rho v)/dx` with steps `hx`, `ht`.
    pub fn continuity_residual(&self, x: f64, t: f64, hx: f64, ht: f64) -> Result<ContinuityResidual> {
        if !(hx > 0.0 && ht > 0.0) {
            return Err(Error::Domain("stencil steps must be positive".into()));
        }
        let half = self.config.half_length();
        if (x - hx) < -half || (x + hx) > half {
            return Err(Error::Domain(format!(
                "stencil [{}, {}] leaves the box",
                x - hx,
                x + hx
            )));
        }
        let drho_fd = (self.rho(x, t + ht)? - self.rho(x, t - ht)?) / (2.0 * ht);
        let djdx_fd = (self.current(x + hx, t)? - self.current(x - hx, t)?) / (2.0 * hx);
        Ok(ContinuityResidual {
            finite_difference: drho_fd + djdx_fd,
            analytic_time: self.drho_dt(x, t)? + djdx_fd,
        })
    }

    /// All fields at one point.
    pub fn sample(&self, x: f64, t: f64) -> Result<FieldSample> {
        let a = self.amplitudes(x, t)?;
        let v = self.flag_velocity(a.rho(), a.flux_kernel());
        let q = self.flag_potential(&a);
        Ok(FieldSample {
            x,
            t,
            psi: a.psi,
            rho: a.rho(),
            v: v.value,
            q: (!q.near_node).then_some(q.value),
            near_node: v.near_node || q.near_node,
        })
    }
}

/// `(omega_a - omega_b, delta_a - delta_b)` for a mode pair.
#[inline]
fn pair_phase(a: &Term, b: &Term) -> (f64, f64) {
    (a.omega - b.omega, a.c.arg() - b.c.arg())
}

pub fn psi(state: &SpectralState, x: f64, t: f64) -> Result<Complex64> {
    FieldEvaluator::new(state).psi(x, t)
}

pub fn rho(state: &SpectralState, x: f64, t: f64) -> Result<f64> {
    FieldEvaluator::new(state).rho(x, t)
}

pub fn velocity(state: &SpectralState, x: f64, t: f64) -> Result<Flagged> {
    FieldEvaluator::new(state).velocity(x, t)
}

pub fn quantum_potential(state: &SpectralState, x: f64, t: f64) -> Result<Flagged> {
    FieldEvaluator::new(state).quantum_potential(x, t)
}

pub fn continuity_residual(state: &SpectralState, x: f64, t: f64, hx: f64, ht: f64) -> Result<ContinuityResidual> {
    FieldEvaluator::new(state).continuity_residual(x, t, hx, ht)
}

/// Writes `x,t,rho,v,q,flags` rows for a list of point queries.
pub fn write_samples_csv<W: std::io::Write>(samples: &[FieldSample], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "t", "rho", "v", "q", "flags"])?;
    for s in samples {
        w.write_record(&[
            format!("{:e}", s.x),
            format!("{:e}", s.t),
            format!("{:e}", s.rho),
            format!("{:e}", s.v),
            s.q.map(|q| format!("{q:e}")).unwrap_or_default(),
            s.flags().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
