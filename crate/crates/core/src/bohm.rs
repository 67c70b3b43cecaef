//! Bohmian trajectories `dx/dt = v(x, t)` and ensembles of them.
//!
//! Integration uses the Dormand–Prince 5(4) pair with PI step-size control and
//! its fourth-order continuous extension for output at requested times. A step
//! is rejected and halved whenever a stage would leave the box or lands where the
//! density is below the node floor; if that drives the step below `h_min` the
//! trajectory fails and returns what it had so far.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error;
use crate::fields::FieldEvaluator;
use crate::spectral::quadrature::{integrate_real, QuadOptions};
use crate::spectral::{recurrence_time, Profile, SpectralState, WellConfig};

/// Integration request for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub x0: f64,
    pub t_span: (f64, f64),
    pub rtol: f64,
    pub atol: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Output grid inside `t_span`, increasing.
    pub sample_times: Vec<f64>,
}

impl TrajectorySpec {
    /// Default tolerances scaled to the well: `rtol = 1e-8`, `atol = 1e-10 L`,
    /// `h_min = 1e-12 tau_r`, `h_max = 1e-3 tau_r`; `samples + 1` uniform output times.
    pub fn new(x0: f64, t_span: (f64, f64), samples: usize, config: &WellConfig) -> Self {
        let tau = recurrence_time(config);
        let (t0, t1) = t_span;
        let samples = samples.max(1);
        let sample_times = (0..=samples)
            .map(|i| {
                if i == samples {
                    t1
                } else {
                    t0 + (t1 - t0) * i as f64 / samples as f64
                }
            })
            .collect();
        TrajectorySpec {
            x0,
            t_span,
            rtol: 1e-8,
            atol: 1e-10 * config.length,
            h_min: 1e-12 * tau,
            h_max: 1e-3 * tau,
            sample_times,
        }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self, config: &WellConfig) -> Result<(), Error> {
        let half = config.half_length();
        if !(self.x0.abs() < half) {
            return Err(Error::Config(format!("x0 = {} must lie strictly inside the box", self.x0)));
        }
        let (t0, t1) = self.t_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::Config(format!("time span [{t0}, {t1}] must be increasing")));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.h_min > 0.0 && self.h_max >= self.h_min) {
            return Err(Error::Config("tolerances and step bounds must be positive with h_max >= h_min".into()));
        }
        if self.sample_times.windows(2).any(|w| !(w[1] > w[0]))
            || self.sample_times.iter().any(|&t| t < t0 || t > t1)
        {
            return Err(Error::Config("sample times must increase inside the time span".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected_error: usize,
    pub rejected_node: usize,
    pub rejected_wall: usize,
    pub evaluations: usize,
}

impl StepStats {
    pub fn rejected(&self) -> usize {
        self.rejected_error + self.rejected_node + self.rejected_wall
    }
}

/// Positions at the requested sample times (possibly a prefix on failure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub x0: f64,
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    pub stats: StepStats,
}

impl Path {
    pub fn final_position(&self) -> Option<f64> {
        self.positions.last().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error(transparent)]
    Invalid(#[from] Error),
    #[error("step size fell below h_min at t = {time} ({reason})")]
    StepUnderflow { time: f64, reason: String, partial: Path },
}

impl From<TrajectoryError> for Error {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::Invalid(e) => e,
            TrajectoryError::StepUnderflow { time, reason, .. } => Error::Integration { time, reason },
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const MAX_SHRINK: f64 = 10.0;
const MAX_GROW: f64 = 5.0;

enum Stage {
    Ok(f64),
    Wall,
    Node,
}

struct Rhs<'a> {
    eval: &'a FieldEvaluator,
    half: f64,
}

impl Rhs<'_> {
    fn velocity(&self, x: f64, t: f64, stats: &mut StepStats) -> Stage {
        if !(x.abs() < self.half) {
            return Stage::Wall;
        }
        stats.evaluations += 1;
        let a = self.eval.amplitudes_unchecked(x, t);
        let v = self.eval.flag_velocity(a.rho(), a.flux_kernel());
        if v.near_node {
            Stage::Node
        } else {
            Stage::Ok(v.value)
        }
    }
}

/// Integrates one trajectory through the velocity field of `state`.
pub fn integrate_trajectory(state: &SpectralState, spec: &TrajectorySpec) -> Result<Path, TrajectoryError> {
    integrate_with(&FieldEvaluator::new(state), spec)
}

pub fn integrate_with(eval: &FieldEvaluator, spec: &TrajectorySpec) -> Result<Path, TrajectoryError> {
    let config = *eval.config();
    spec.validate(&config)?;
    let rhs = Rhs {
        eval,
        half: config.half_length(),
    };
    let (t0, t1) = spec.t_span;
    let mut path = Path {
        x0: spec.x0,
        times: Vec::with_capacity(spec.sample_times.len()),
        positions: Vec::with_capacity(spec.sample_times.len()),
        stats: StepStats::default(),
    };
    let mut next_sample = 0;
    while next_sample < spec.sample_times.len() && spec.sample_times[next_sample] <= t0 {
        path.times.push(spec.sample_times[next_sample]);
        path.positions.push(spec.x0);
        next_sample += 1;
    }

    let mut t = t0;
    let mut x = spec.x0;
    let mut k1 = match rhs.velocity(x, t, &mut path.stats) {
        Stage::Ok(v) => v,
        _ => {
            return Err(TrajectoryError::StepUnderflow {
                time: t,
                reason: "initial position sits on a density node".into(),
                partial: path,
            })
        }
    };
    let mut h = (1e-6 * (t1 - t0)).clamp(spec.h_min, spec.h_max);
    let mut err_old: f64 = 1e-4;
    let mut last_reason = "step rejected";

    while t < t1 {
        if h < spec.h_min {
            return Err(TrajectoryError::StepUnderflow {
                time: t,
                reason: last_reason.into(),
                partial: path,
            });
        }
        let final_step = t + h >= t1;
        let h_step = if final_step { t1 - t } else { h };

        let attempt = (|| {
            let s = &mut path.stats;
            let k2 = rhs.velocity(x + h_step * A21 * k1, t + C2 * h_step, s);
            let Stage::Ok(k2) = k2 else { return Err(k2) };
            let k3 = rhs.velocity(x + h_step * (A31 * k1 + A32 * k2), t + C3 * h_step, s);
            let Stage::Ok(k3) = k3 else { return Err(k3) };
            let k4 = rhs.velocity(x + h_step * (A41 * k1 + A42 * k2 + A43 * k3), t + C4 * h_step, s);
            let Stage::Ok(k4) = k4 else { return Err(k4) };
            let k5 = rhs.velocity(
                x + h_step * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
                t + C5 * h_step,
                s,
            );
            let Stage::Ok(k5) = k5 else { return Err(k5) };
            let k6 = rhs.velocity(
                x + h_step * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
                t + h_step,
                s,
            );
            let Stage::Ok(k6) = k6 else { return Err(k6) };
            let x_new = x + h_step * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6);
            let k7 = rhs.velocity(x_new, t + h_step, s);
            let Stage::Ok(k7) = k7 else { return Err(k7) };
            Ok((x_new, [k1, k2, k3, k4, k5, k6, k7]))
        })();

        let (x_new, k) = match attempt {
            Ok(v) => v,
            Err(Stage::Wall) => {
                path.stats.rejected_wall += 1;
                last_reason = "stage reached the wall";
                h = 0.5 * h_step;
                continue;
            }
            Err(_) => {
                path.stats.rejected_node += 1;
                last_reason = "stage hit a density node";
                h = 0.5 * h_step;
                continue;
            }
        };

        let err_est = h_step * (E1 * k[0] + E3 * k[2] + E4 * k[3] + E5 * k[4] + E6 * k[5] + E7 * k[6]);
        let scale = spec.atol + spec.rtol * x.abs().max(x_new.abs());
        let err = (err_est / scale).abs();
        let fac11 = err.powf(0.2 - BETA * 0.75);

        if err > 1.0 {
            path.stats.rejected_error += 1;
            last_reason = "error control";
            h = h_step / (fac11 / SAFETY).min(MAX_SHRINK);
            continue;
        }

        // Continuous extension coefficients.
        let ydiff = x_new - x;
        let bspl = h_step * k[0] - ydiff;
        let r4 = ydiff - h_step * k[6] - bspl;
        let r5 = h_step * (D1 * k[0] + D3 * k[2] + D4 * k[3] + D5 * k[4] + D6 * k[5] + D7 * k[6]);
        let t_new = if final_step { t1 } else { t + h_step };
        while next_sample < spec.sample_times.len() && spec.sample_times[next_sample] <= t_new {
            let ts = spec.sample_times[next_sample];
            let theta = (ts - t) / h_step;
            let theta1 = 1.0 - theta;
            let xs = x + theta * (ydiff + theta1 * (bspl + theta * (r4 + theta1 * r5)));
            path.times.push(ts);
            path.positions.push(if ts == t_new { x_new } else { xs });
            next_sample += 1;
        }

        path.stats.accepted += 1;
        t = t_new;
        x = x_new;
        k1 = k[6];

        let fac = (fac11 / err_old.powf(BETA) / SAFETY).clamp(1.0 / MAX_GROW, MAX_SHRINK);
        err_old = err.max(1e-4);
        h = (h_step / fac).min(spec.h_max);
    }
    Ok(path)
}

/// Outcome of one ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum MemberStatus {
    Completed,
    Failed { time: f64, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub id: usize,
    pub spec: TrajectorySpec,
    pub status: MemberStatus,
    pub path: Path,
}

/// A pair of neighbouring trajectories found out of order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingViolation {
    pub lower: usize,
    pub upper: usize,
    pub time: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub members: Vec<EnsembleMember>,
    pub ordering_tolerance: f64,
    pub crossings: Vec<CrossingViolation>,
}

/// Per-run diagnostics written next to the trajectory table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDiagnostics {
    pub members: usize,
    pub completed: usize,
    pub failed: usize,
    pub crossings: usize,
    pub ordering_tolerance: f64,
    pub per_member: Vec<MemberDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberDiagnostics {
    pub id: usize,
    pub x0: f64,
    pub status: MemberStatus,
    pub stats: StepStats,
    pub final_x: Option<f64>,
    pub max_excursion: f64,
}

impl TrajectoryEnsemble {
    pub fn all_completed(&self) -> bool {
        self.members.iter().all(|m| m.status == MemberStatus::Completed)
    }

    pub fn diagnostics(&self) -> EnsembleDiagnostics {
        let per_member: Vec<MemberDiagnostics> = self
            .members
            .iter()
            .map(|m| MemberDiagnostics {
                id: m.id,
                x0: m.spec.x0,
                status: m.status.clone(),
                stats: m.path.stats,
                final_x: m.path.final_position(),
                max_excursion: m.path.positions.iter().map(|x| (x - m.spec.x0).abs()).fold(0.0, f64::max),
            })
            .collect();
        let completed = per_member.iter().filter(|m| m.status == MemberStatus::Completed).count();
        EnsembleDiagnostics {
            members: self.members.len(),
            completed,
            failed: self.members.len() - completed,
            crossings: self.crossings.len(),
            ordering_tolerance: self.ordering_tolerance,
            per_member,
        }
    }

    /// Long-format `traj_id,t,x`.
    pub fn write_csv<W: Write>(&self, writer: W) -> crate::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["traj_id", "t", "x"])?;
        for m in &self.members {
            for (t, x) in m.path.times.iter().zip(&m.path.positions) {
                w.write_record(&[m.id.to_string(), format!("{t:e}"), format!("{x:e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates every spec (in parallel) and checks that neighbours never cross.
/// Specs must be strictly ordered by `x0`. Member failures are recorded, not fatal.
pub fn integrate_ensemble(state: &SpectralState, specs: &[TrajectorySpec]) -> crate::Result<TrajectoryEnsemble> {
    if specs.is_empty() {
        return Err(Error::Config("an ensemble needs at least one trajectory".into()));
    }
    if specs.windows(2).any(|w| !(w[1].x0 > w[0].x0)) {
        return Err(Error::Config("ensemble seeds must be strictly increasing (no duplicates)".into()));
    }
    let config = *state.config();
    for spec in specs {
        spec.validate(&config)?;
    }
    let eval = FieldEvaluator::new(state);
    let members: Vec<EnsembleMember> = specs
        .par_iter()
        .enumerate()
        .map(|(id, spec)| {
            let (status, path) = match integrate_with(&eval, spec) {
                Ok(path) => (MemberStatus::Completed, path),
                Err(TrajectoryError::StepUnderflow { time, reason, partial }) => {
                    (MemberStatus::Failed { time, reason }, partial)
                }
                Err(TrajectoryError::Invalid(e)) => (
                    MemberStatus::Failed {
                        time: spec.t_span.0,
                        reason: e.to_string(),
                    },
                    Path {
                        x0: spec.x0,
                        times: vec![],
                        positions: vec![],
                        stats: StepStats::default(),
                    },
                ),
            };
            EnsembleMember {
                id,
                spec: spec.clone(),
                status,
                path,
            }
        })
        .collect();

    let tolerance = 1e-6 * config.length;
    let crossings = find_crossings(&members, tolerance);
    Ok(TrajectoryEnsemble {
        members,
        ordering_tolerance: tolerance,
        crossings,
    })
}

fn find_crossings(members: &[EnsembleMember], tolerance: f64) -> Vec<CrossingViolation> {
    let mut out = Vec::new();
    for pair in members.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let upper: HashMap<u64, f64> = hi
            .path
            .times
            .iter()
            .zip(&hi.path.positions)
            .map(|(t, x)| (t.to_bits(), *x))
            .collect();
        for (t, x) in lo.path.times.iter().zip(&lo.path.positions) {
            if let Some(&xu) = upper.get(&t.to_bits()) {
                if x - xu > tolerance {
                    out.push(CrossingViolation {
                        lower: lo.id,
                        upper: hi.id,
                        time: *t,
                        gap: xu - x,
                    });
                }
            }
        }
    }
    out
}

/// `n` evenly spaced seeds on `[-a, a]`, offset by half a spacing from the ends.
/// For odd `n` the middle seed would sit on the stagnation line `x = 0`; it is
/// moved a quarter spacing to the right.
pub fn seed_uniform(n: usize, half_width: f64, config: &WellConfig) -> crate::Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::Config("seed count must be >= 1".into()));
    }
    if !(half_width > 0.0 && half_width < config.half_length()) {
        return Err(Error::Config(format!(
            "seed half-width {half_width} must lie in (0, L/2)"
        )));
    }
    let spacing = 2.0 * half_width / n as f64;
    let mut seeds: Vec<f64> = (0..n).map(|i| -half_width + (i as f64 + 0.5) * spacing).collect();
    if n % 2 == 1 {
        seeds[n / 2] = 0.25 * spacing;
    }
    Ok(seeds)
}

/// Seeds at the quantiles `(i - 1/2)/n` of the initial density of `state`.
pub fn seed_density_weighted(state: &SpectralState, n: usize) -> crate::Result<Vec<f64>> {
    let eval = FieldEvaluator::new(state);
    let half = state.config().half_length();
    quantile_seeds(|x| eval.rho(x.clamp(-half, half), 0.0).unwrap_or(0.0), (-half, half), &[], n)
}

/// Seeds at the quantiles of `|f(x)|^2` for a profile supported on `support`.
pub fn seed_density_weighted_profile(profile: &dyn Profile, support: (f64, f64), n: usize) -> crate::Result<Vec<f64>> {
    quantile_seeds(|x| profile.value(x).norm_sqr(), support, &profile.breakpoints(), n)
}

fn quantile_seeds<F: Fn(f64) -> f64>(
    density: F,
    (a, b): (f64, f64),
    breakpoints: &[f64],
    n: usize,
) -> crate::Result<Vec<f64>> {
    if n < 1 {
        return Err(Error::Config("seed count must be >= 1".into()));
    }
    const PANELS: usize = 512;
    let opts = QuadOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_intervals: 400,
    };
    let mut edges: Vec<f64> = (0..=PANELS).map(|i| a + (b - a) * i as f64 / PANELS as f64).collect();
    edges.extend(breakpoints.iter().filter(|&&p| p > a && p < b));
    edges.sort_by(|x, y| x.total_cmp(y));
    edges.dedup();
    let mut cumulative = vec![0.0];
    for w in edges.windows(2) {
        let (v, _) = integrate_real(&density, w[0], w[1], &[], &opts)?;
        cumulative.push(cumulative.last().unwrap() + v);
    }
    let total = *cumulative.last().unwrap();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Domain("density integrates to zero; cannot place seeds".into()));
    }

    let mut seeds = Vec::with_capacity(n);
    for i in 0..n {
        let target = total * (i as f64 + 0.5) / n as f64;
        let p = cumulative.partition_point(|&c| c < target).clamp(1, edges.len() - 1) - 1;
        let (mut lo, mut hi) = (edges[p], edges[p + 1]);
        let base = cumulative[p];
        // Bisection on the monotone partial integral.
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo < 1e-13 * (b - a) {
                break;
            }
            let (v, _) = integrate_real(&density, edges[p], mid, &[], &opts)?;
            if base + v < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        seeds.push(0.5 * (lo + hi));
    }
    Ok(seeds)
}

/// One spec per seed, sharing tolerances and output grid.
pub fn specs_for_seeds(seeds: &[f64], t_span: (f64, f64), samples: usize, config: &WellConfig) -> Vec<TrajectorySpec> {
    seeds
        .iter()
        .map(|&x0| TrajectorySpec::new(x0, t_span, samples, config))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{coefficients_analytic, ApertureShape, ShapeProfile};

    fn hcs(n: u32, mass: f64) -> SpectralState {
        coefficients_analytic(
            &ApertureShape::HalfCosineSquared,
            n,
            &WellConfig::default().with_mass(mass),
        )
        .unwrap()
    }

    #[test]
    fn uniform_seeds() {
        let config = WellConfig::default();
        assert_eq!(seed_uniform(2, 5.0, &config).unwrap(), vec![-2.5, 2.5]);
        let s = seed_uniform(20, 5.0, &config).unwrap();
        assert_eq!(s.len(), 20);
        assert!((s[1] - s[0] - 0.5).abs() < 1e-15);
        for i in 0..10 {
            assert_eq!(s[i], -s[19 - i]);
        }
        let odd = seed_uniform(3, 3.0, &config).unwrap();
        assert!(odd.iter().all(|&x| x != 0.0));
        assert!(odd.windows(2).all(|w| w[1] > w[0]));
        assert!((seed_uniform(20, 7.0, &config).unwrap()[0] + 6.65).abs() < 1e-15);
        assert!(seed_uniform(0, 5.0, &config).is_err());
        assert!(seed_uniform(4, 30.0, &config).is_err());
    }

    #[test]
    fn density_seeds_for_flat_profile_are_uniform() {
        let config = WellConfig::default();
        let shape = ApertureShape::Square;
        let profile = ShapeProfile { shape: &shape, config };
        for n in [1, 2, 7, 20] {
            let weighted = seed_density_weighted_profile(&profile, shape.support(&config), n).unwrap();
            let mut uniform: Vec<f64> = (0..n).map(|i| -5.0 + (i as f64 + 0.5) * 10.0 / n as f64).collect();
            if n == 2 || n == 20 {
                uniform = seed_uniform(n, 5.0, &config).unwrap();
            }
            for (a, b) in weighted.iter().zip(&uniform) {
                assert!((a - b).abs() < 1e-9, "n = {n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn density_seed_median_is_centre() {
        let s = hcs(100, 1.0);
        let seeds = seed_density_weighted(&s, 1).unwrap();
        assert!(seeds[0].abs() < 1e-9, "{}", seeds[0]);
    }

    #[test]
    fn stationary_state_trajectory_does_not_move() {
        let config = WellConfig::default();
        let s = SpectralState::single_mode(1, config).unwrap();
        let spec = TrajectorySpec::new(3.0, (0.0, 100.0), 10, &config);
        let path = integrate_trajectory(&s, &spec).unwrap();
        assert_eq!(path.times.len(), 11);
        assert!(path.positions.iter().all(|&x| x == 3.0));
    }

    #[test]
    fn integrator_reproduces_a_known_flow() {
        // Two-mode state: trajectories conserve the quantile of the density,
        // which gives an independent check on the integrated positions.
        let config = WellConfig::default();
        let s = SpectralState::from_modes(
            config,
            vec![
                crate::spectral::Mode { alpha: 1, c: num_complex::Complex64::new(0.8, 0.0) },
                crate::spectral::Mode { alpha: 3, c: num_complex::Complex64::new(0.6, 0.0) },
            ],
        )
        .unwrap();
        let eval = FieldEvaluator::new(&s);
        let tau = recurrence_time(&config);
        let spec = TrajectorySpec::new(4.0, (0.0, 0.37 * tau), 5, &config);
        let path = integrate_trajectory(&s, &spec).unwrap();
        let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 0.0, max_intervals: 1000 };
        let mass = |x: f64, t: f64| integrate_real(|y| eval.rho(y, t).unwrap(), 0.0, x, &[], &opts).unwrap().0;
        let m0 = mass(4.0, 0.0);
        for (t, x) in path.times.iter().zip(&path.positions) {
            assert!((mass(*x, *t) - m0).abs() < 1e-8, "t = {t}");
        }
    }

    #[test]
    fn mirror_trajectories_are_antisymmetric() {
        let s = hcs(60, 1.0);
        let config = *s.config();
        let tau = recurrence_time(&config);
        let plus = integrate_trajectory(&s, &TrajectorySpec::new(2.0, (0.0, 0.3 * tau), 30, &config)).unwrap();
        let minus = integrate_trajectory(&s, &TrajectorySpec::new(-2.0, (0.0, 0.3 * tau), 30, &config)).unwrap();
        for (a, b) in plus.positions.iter().zip(&minus.positions) {
            assert!((a + b).abs() < 1e-8, "{a} vs {b}");
            assert!(*a > 0.0);
        }
    }

    #[test]
    fn ensemble_rejects_unordered_or_duplicate_seeds() {
        let s = hcs(20, 1.0);
        let config = *s.config();
        let specs = specs_for_seeds(&[1.0, 1.0], (0.0, 1.0), 2, &config);
        assert!(integrate_ensemble(&s, &specs).is_err());
        let specs = specs_for_seeds(&[2.0, 1.0], (0.0, 1.0), 2, &config);
        assert!(integrate_ensemble(&s, &specs).is_err());
    }

    #[test]
    fn two_seeds_keep_their_order() {
        let s = hcs(100, 1.0);
        let config = *s.config();
        let tau = recurrence_time(&config);
        let specs = specs_for_seeds(&[2.0, 3.0], (0.0, 0.5 * tau), 200, &config);
        let ens = integrate_ensemble(&s, &specs).unwrap();
        assert!(ens.all_completed());
        assert!(ens.crossings.is_empty());
        let (a, b) = (&ens.members[0].path, &ens.members[1].path);
        assert!(a.positions.iter().zip(&b.positions).all(|(x, y)| x < y));
    }

    #[test]
    fn heavy_particles_barely_move() {
        let excursions = |mass: f64| -> Vec<f64> {
            let s = hcs(200, mass);
            let config = *s.config();
            let seeds = seed_uniform(20, 5.0, &config).unwrap();
            let specs = specs_for_seeds(&seeds, (0.0, 397.9), 50, &config);
            let ens = integrate_ensemble(&s, &specs).unwrap();
            assert!(ens.all_completed());
            ens.diagnostics().per_member.iter().map(|m| m.max_excursion).collect()
        };
        let light = excursions(1.0);
        let heavy = excursions(1000.0);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&heavy) < 0.1 * mean(&light), "{} vs {}", mean(&heavy), mean(&light));
        // Central seeds sit where the packet is smooth and hardly move at all.
        assert!(heavy[8..12].iter().all(|&e| e < 0.05), "{heavy:?}");
    }

    #[test]
    fn invalid_specs() {
        let config = WellConfig::default();
        let s = hcs(10, 1.0);
        let bad = TrajectorySpec::new(25.0, (0.0, 1.0), 2, &config);
        assert!(matches!(integrate_trajectory(&s, &bad), Err(TrajectoryError::Invalid(_))));
        let backwards = TrajectorySpec { t_span: (1.0, 0.0), ..TrajectorySpec::new(1.0, (0.0, 1.0), 2, &config) };
        assert!(integrate_trajectory(&s, &backwards).is_err());
    }

    #[test]
    fn underflow_returns_partial_path() {
        let config = WellConfig::default();
        let s = hcs(40, 1.0);
        let mut spec = TrajectorySpec::new(8.0, (0.0, 100.0), 100, &config);
        spec.h_min = 1.0;
        spec.h_max = 1.0;
        spec.rtol = 1e-14;
        spec.atol = 1e-20;
        match integrate_trajectory(&s, &spec) {
            Err(TrajectoryError::StepUnderflow { partial, time, .. }) => {
                assert!(time < 100.0);
                assert!(partial.times.len() < 101);
            }
            other => panic!("expected underflow, got {other:?}"),
        }
    }

    #[test]
    fn csv_is_long_format() {
        let s = hcs(20, 1.0);
        let config = *s.config();
        let specs = specs_for_seeds(&[-1.0, 1.0], (0.0, 1.0), 4, &config);
        let ens = integrate_ensemble(&s, &specs).unwrap();
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("traj_id,t,x\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 5);
    }
}
