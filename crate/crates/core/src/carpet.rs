//! Space-time rasters ("quantum carpets") and the symmetry and revival metrics
//! measured on them.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Amplitudes, FieldEvaluator, Flagged, NODE_FLOOR_RELATIVE};
use crate::spectral::{recurrence_time, Parity, SpectralState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    Density,
    Velocity,
    QuantumPotential,
}

impl FieldKind {
    pub fn name(&self) -> &'static str {
        match self {
            FieldKind::Density => "density",
            FieldKind::Velocity => "velocity",
            FieldKind::QuantumPotential => "quantum-potential",
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FieldKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "density" | "rho" => Ok(FieldKind::Density),
            "velocity" | "v" => Ok(FieldKind::Velocity),
            "quantum-potential" | "potential" | "q" => Ok(FieldKind::QuantumPotential),
            other => Err(Error::Config(format!("unknown field kind '{other}'"))),
        }
    }
}

/// A field sampled on `x_axis x t_axis`, stored time-major (`values[j * nx + i]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub kind: FieldKind,
    pub nx: usize,
    pub nt: usize,
    pub x_axis: Vec<f64>,
    pub t_axis: Vec<f64>,
    pub values: Vec<f64>,
    /// Samples clipped at a density node.
    pub near_node: Vec<bool>,
    pub clip: (f64, f64),
}

impl FieldGrid {
    #[inline]
    pub fn value(&self, ix: usize, it: usize) -> f64 {
        self.values[it * self.nx + ix]
    }

    #[inline]
    pub fn flagged(&self, ix: usize, it: usize) -> bool {
        self.near_node[it * self.nx + ix]
    }

    pub fn t_max(&self) -> f64 {
        *self.t_axis.last().expect("nt >= 2")
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn near_node_count(&self) -> usize {
        self.near_node.iter().filter(|&&f| f).count()
    }

    /// True when the axes are exact mirror images about `x = 0` and the time midpoint.
    pub fn is_symmetric(&self) -> bool {
        let x_ok = (0..self.nx).all(|i| self.x_axis[i] == -self.x_axis[self.nx - 1 - i]);
        let t0 = self.t_axis[0];
        let t1 = self.t_max();
        let centre = 0.5 * (t0 + t1);
        let tol = 4.0 * f64::EPSILON * t1.abs().max(1.0);
        let t_ok = (0..self.nt).all(|j| (self.t_axis[j] + self.t_axis[self.nt - 1 - j] - 2.0 * centre).abs() <= tol);
        x_ok && t_ok
    }

    /// Maps a value onto `0..=65535` through the clip range.
    fn quantize(&self, v: f64) -> u16 {
        let (lo, hi) = self.clip;
        if !(hi > lo) {
            return 0;
        }
        let s = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        (s * 65535.0).round() as u16
    }

    /// Binary 16-bit PGM, x fastest, first row at the largest `t`.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P5\n{} {}\n65535\n", self.nx, self.nt)?;
        let mut row = Vec::with_capacity(2 * self.nx);
        for it in (0..self.nt).rev() {
            row.clear();
            for ix in 0..self.nx {
                row.extend_from_slice(&self.quantize(self.value(ix, it)).to_be_bytes());
            }
            w.write_all(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Raw matrix: one line per time (increasing), one column per `x`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for it in 0..self.nt {
            out.write_record((0..self.nx).map(|ix| format!("{:e}", self.value(ix, it))))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn sidecar(&self, state: &SpectralState) -> GridSidecar {
        GridSidecar {
            kind: self.kind,
            nx: self.nx,
            nt: self.nt,
            length: state.config().length,
            t_max: self.t_max(),
            clip: self.clip,
            tau_r: recurrence_time(state.config()),
            p_n: state.total_probability(),
            near_node_samples: self.near_node_count(),
            layout: "P5 16-bit big-endian; x fastest; first row is t = T, last row is t = 0".into(),
        }
    }
}

/// Metadata written next to every raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSidecar {
    pub kind: FieldKind,
    pub nx: usize,
    pub nt: usize,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "T")]
    pub t_max: f64,
    pub clip: (f64, f64),
    pub tau_r: f64,
    #[serde(rename = "P_N")]
    pub p_n: f64,
    pub near_node_samples: usize,
    pub layout: String,
}

/// `n` points on `[a, b]`, built from both ends so that `p[i] - mid` and
/// `mid - p[n-1-i]` are bitwise equal.
pub fn symmetric_axis(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut axis = vec![mid; n];
    let last = (n - 1) as f64;
    for i in 0..n / 2 {
        let s = half * (1.0 - 2.0 * i as f64 / last);
        axis[i] = mid - s;
        axis[n - 1 - i] = mid + s;
    }
    axis
}

fn validate_axes(nx: usize, nt: usize, t_max: f64) -> Result<()> {
    if nx < 2 || nt < 2 {
        return Err(Error::Config(format!("grid needs nx, nt >= 2 (got {nx} x {nt})")));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(Error::Config(format!("time extent T = {t_max} must be positive")));
    }
    Ok(())
}

/// Evaluates `kind` on an `nx x nt` grid over `[-L/2, L/2] x [0, T]`.
pub fn render_grid(state: &SpectralState, kind: FieldKind, nx: usize, nt: usize, t_max: f64) -> Result<FieldGrid> {
    validate_axes(nx, nt, t_max)?;
    let half = state.config().half_length();
    render_on_axes(
        state,
        kind,
        symmetric_axis(-half, half, nx),
        symmetric_axis(0.0, t_max, nt),
    )
}

/// Evaluates `kind` on explicit axes (each strictly increasing and inside the box).
pub fn render_on_axes(state: &SpectralState, kind: FieldKind, x_axis: Vec<f64>, t_axis: Vec<f64>) -> Result<FieldGrid> {
    validate_axes(x_axis.len(), t_axis.len(), 1.0)?;
    if x_axis.windows(2).any(|w| !(w[1] > w[0])) || t_axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("grid axes must be strictly increasing".into()));
    }
    for &x in [x_axis[0], *x_axis.last().unwrap()].iter() {
        state.config().check_position(x)?;
    }
    if t_axis.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("time axis contains a non-finite value".into()));
    }

    let eval = FieldEvaluator::new(state);
    let terms = eval.terms();
    let norm = eval.basis_norm();
    let (nx, nt) = (x_axis.len(), t_axis.len());
    let m = terms.len();

    // phi, phi' per (x, mode), mode fastest.
    let mut phi = vec![0.0; nx * m];
    let mut dphi = vec![0.0; nx * m];
    for (ix, &x) in x_axis.iter().enumerate() {
        for (a, term) in terms.iter().enumerate() {
            let (s, c) = (term.k * x).sin_cos();
            let (p, d) = if term.is_cosine() {
                (norm * c, -norm * term.k * s)
            } else {
                (norm * s, norm * term.k * c)
            };
            phi[ix * m + a] = p;
            dphi[ix * m + a] = d;
        }
    }
    let k2: Vec<f64> = terms.iter().map(|t| t.k * t.k).collect();

    let columns: Vec<Vec<Amplitudes>> = t_axis
        .par_iter()
        .map(|&t| {
            let amps: Vec<Complex64> = terms
                .iter()
                .map(|term| term.c * Complex64::from_polar(1.0, -term.omega * t))
                .collect();
            let zero = Complex64::new(0.0, 0.0);
            (0..nx)
                .map(|ix| {
                    let p = &phi[ix * m..(ix + 1) * m];
                    let mut out = Amplitudes { psi: zero, dpsi: zero, d2psi: zero };
                    for a in 0..m {
                        out.psi += amps[a] * p[a];
                    }
                    if kind != FieldKind::Density {
                        let d = &dphi[ix * m..(ix + 1) * m];
                        for a in 0..m {
                            out.dpsi += amps[a] * d[a];
                        }
                    }
                    if kind == FieldKind::QuantumPotential {
                        for a in 0..m {
                            out.d2psi -= amps[a] * (k2[a] * p[a]);
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();

    // Node floor relative to the largest density on this grid.
    let rho_max = columns
        .iter()
        .flatten()
        .map(|a| a.rho())
        .fold(0.0, f64::max);
    let eval = eval.with_node_floor(NODE_FLOOR_RELATIVE * rho_max);
    let mut values = Vec::with_capacity(nx * nt);
    let mut near_node = Vec::with_capacity(nx * nt);
    for a in columns.iter().flatten() {
        let f = match kind {
            FieldKind::Density => Flagged { value: a.rho(), near_node: false },
            FieldKind::Velocity => eval.flag_velocity(a.rho(), a.flux_kernel()),
            FieldKind::QuantumPotential => eval.flag_potential(a),
        };
        values.push(f.value);
        near_node.push(f.near_node);
    }
    let clip = default_clip(kind, &values, &near_node);
    Ok(FieldGrid {
        kind,
        nx,
        nt,
        x_axis,
        t_axis,
        values,
        near_node,
        clip,
    })
}

/// `[0, max/2]` for density, `[-1, 1]` for velocity, the unflagged range otherwise.
pub fn default_clip(kind: FieldKind, values: &[f64], flags: &[bool]) -> (f64, f64) {
    match kind {
        FieldKind::Density => (0.0, 0.5 * values.iter().copied().fold(0.0, f64::max)),
        FieldKind::Velocity => (-1.0, 1.0),
        FieldKind::QuantumPotential => {
            let (lo, hi) = values
                .iter()
                .zip(flags)
                .filter(|(_, &f)| !f)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)));
            if lo.is_finite() {
                (lo, hi)
            } else {
                (0.0, 0.0)
            }
        }
    }
}

/// `<psi(0)|psi(t)> = sum |c|^2 exp(-i E t / hbar)`, in coefficient space.
pub fn autocorrelation(state: &SpectralState, t: f64) -> Complex64 {
    let eval = FieldEvaluator::new(state);
    eval.terms()
        .iter()
        .map(|term| term.c.norm_sqr() * Complex64::from_polar(1.0, -term.omega * t))
        .sum()
}

/// `|A(t)|^2 / P_N^2` at the given time.
pub fn revival_fidelity_at(state: &SpectralState, t: f64) -> f64 {
    let p = state.total_probability();
    if p == 0.0 {
        return 0.0;
    }
    autocorrelation(state, t).norm_sqr() / (p * p)
}

pub fn revival_fidelity(state: &SpectralState) -> f64 {
    revival_fidelity_at(state, recurrence_time(state.config()))
}

/// Density symmetry metrics of one carpet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryReport {
    pub nx: usize,
    pub nt: usize,
    pub max_rho: f64,
    pub mirror_error: f64,
    pub time_reversal_error: f64,
    pub revival_fidelity: f64,
    pub half_time_split_error: Option<f64>,
    pub half_time_note: Option<String>,
}

/// Mirror and time-reversal errors of a grid whose axes are exact mirror images.
pub fn grid_symmetry_errors(grid: &FieldGrid) -> Result<(f64, f64)> {
    if !grid.is_symmetric() {
        return Err(Error::Config(
            "symmetry metrics need axes symmetric about x = 0 and the time midpoint".into(),
        ));
    }
    let (nx, nt) = (grid.nx, grid.nt);
    let mut mirror: f64 = 0.0;
    let mut reversal: f64 = 0.0;
    for it in 0..nt {
        for ix in 0..nx {
            let v = grid.value(ix, it);
            mirror = mirror.max((v - grid.value(nx - 1 - ix, it)).abs());
            reversal = reversal.max((v - grid.value(ix, nt - 1 - it)).abs());
        }
    }
    Ok((mirror, reversal))
}

/// Renders the density over `[-L/2, L/2] x [0, tau_r]` and measures its symmetries.
pub fn symmetry_report(state: &SpectralState, nx: usize, nt: usize) -> Result<SymmetryReport> {
    let tau = recurrence_time(state.config());
    let grid = render_grid(state, FieldKind::Density, nx, nt, tau)?;
    symmetry_report_for_grid(state, &grid)
}

/// Symmetry report from an existing density grid spanning `[0, tau_r]`.
pub fn symmetry_report_for_grid(state: &SpectralState, grid: &FieldGrid) -> Result<SymmetryReport> {
    if grid.kind != FieldKind::Density {
        return Err(Error::Config("symmetry report needs a density grid".into()));
    }
    let (mirror_error, time_reversal_error) = grid_symmetry_errors(grid)?;
    let (half_time_split_error, half_time_note) = match fractional_revival_check(state)? {
        RevivalCheck::Measured { error, .. } => (Some(error), None),
        RevivalCheck::Skipped { reason } => (None, Some(reason)),
    };
    Ok(SymmetryReport {
        nx: grid.nx,
        nt: grid.nt,
        max_rho: grid.max_value(),
        mirror_error,
        time_reversal_error,
        revival_fidelity: revival_fidelity(state),
        half_time_split_error,
        half_time_note,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RevivalCheck {
    Measured {
        /// `max |rho(x, tau_r/2) - rho0(x - L/4)/2 - rho0(x + L/4)/2|`
        error: f64,
        max_rho0: f64,
        points: usize,
    },
    Skipped {
        reason: String,
    },
}

impl RevivalCheck {
    pub fn relative_error(&self) -> Option<f64> {
        match self {
            RevivalCheck::Measured { error, max_rho0, .. } => Some(error / max_rho0),
            RevivalCheck::Skipped { .. } => None,
        }
    }
}

pub const REVIVAL_CHECK_POINTS: usize = 2001;

/// Two-copy structure at half the recurrence time.
pub fn fractional_revival_check(state: &SpectralState) -> Result<RevivalCheck> {
    fractional_revival_check_with(state, REVIVAL_CHECK_POINTS)
}

pub fn fractional_revival_check_with(state: &SpectralState, points: usize) -> Result<RevivalCheck> {
    fractional_revival_check_at(state, points, 0.5 * recurrence_time(state.config()))
}

/// As [`fractional_revival_check_with`], with the split evaluated at `t_half`.
pub fn fractional_revival_check_at(state: &SpectralState, points: usize, t_half: f64) -> Result<RevivalCheck> {
    let config = *state.config();
    if state.parity() != Parity::Even {
        return Ok(RevivalCheck::Skipped {
            reason: "two-copy check applies to even states only".into(),
        });
    }
    if state.modes().iter().filter(|m| m.c.norm_sqr() > 0.0).count() < 2 {
        return Ok(RevivalCheck::Skipped {
            reason: "stationary state: nothing to revive".into(),
        });
    }
    if config.width > 0.5 * config.length {
        return Ok(RevivalCheck::Skipped {
            reason: format!(
                "copies overlap: w = {} exceeds L/2 = {}",
                config.width,
                0.5 * config.length
            ),
        });
    }
    if points < 2 {
        return Err(Error::Config("revival check needs at least 2 points".into()));
    }
    let eval = FieldEvaluator::new(state);
    let half = config.half_length();
    let quarter = 0.25 * config.length;
    let rho0 = |x: f64| {
        if x.abs() <= half {
            eval.amplitudes_unchecked(x, 0.0).rho()
        } else {
            0.0
        }
    };
    let axis = symmetric_axis(-half, half, points);
    let (error, max_rho0) = axis
        .par_iter()
        .map(|&x| {
            let split = eval.amplitudes_unchecked(x, t_half).rho();
            let expected = 0.5 * rho0(x - quarter) + 0.5 * rho0(x + quarter);
            ((split - expected).abs(), rho0(x))
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(RevivalCheck::Measured {
        error,
        max_rho0,
        points,
    })
}
