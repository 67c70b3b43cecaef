//! Convergence and spread measures of a truncated expansion.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::basis::{energy, series_position};
use super::state::{Parity, SpectralState};
use crate::error::{Error, Result};

/// `zeta(4) = pi^4 / 90`, the limit of the energy series for coefficients decaying as `n^-6`.
pub const ZETA_FOUR: f64 = PI * PI * PI * PI / 90.0;

fn check_upto(state: &SpectralState, upto: u32) -> Result<()> {
    if upto < 1 || upto > state.n_modes() {
        return Err(Error::Domain(format!(
            "upto = {upto} outside the stored truncation 1..={}",
            state.n_modes()
        )));
    }
    Ok(())
}

/// `P_N`: total weight of the modes up to series position `upto` (in every parity present).
pub fn overlap_probability(state: &SpectralState, upto: u32) -> Result<f64> {
    check_upto(state, upto)?;
    Ok(state
        .modes()
        .iter()
        .filter(|m| series_position(m.alpha) <= upto)
        .map(|m| m.c.norm_sqr())
        .sum())
}

/// `<H>_N = sum |c|^2 E / P_N` over the same modes as [`overlap_probability`].
pub fn expected_energy(state: &SpectralState, upto: u32) -> Result<f64> {
    check_upto(state, upto)?;
    let mut weight = 0.0;
    let mut weighted = 0.0;
    for m in state.modes().iter().filter(|m| series_position(m.alpha) <= upto) {
        let p = m.c.norm_sqr();
        weight += p;
        weighted += p * energy(m.alpha, state.config())?;
    }
    if weight == 0.0 {
        return Err(Error::Domain("P_N = 0: energy expectation undefined".into()));
    }
    Ok(weighted / weight)
}

/// `P_N` for every `N = 1..=state.N`, accumulated in one pass.
pub fn convergence_curve(state: &SpectralState) -> Result<Vec<(u32, f64, Option<f64>)>> {
    let mut out = Vec::with_capacity(state.n_modes() as usize);
    let mut weight = 0.0;
    let mut weighted = 0.0;
    let mut modes = state.modes().iter().peekable();
    for n in 1..=state.n_modes() {
        while let Some(m) = modes.next_if(|m| series_position(m.alpha) <= n) {
            let p = m.c.norm_sqr();
            weight += p;
            weighted += p * energy(m.alpha, state.config())?;
        }
        let h = (weight > 0.0).then(|| weighted / weight);
        out.push((n, weight, h));
    }
    Ok(out)
}

/// Result of a log–log least-squares fit of `|c_n|^2` against `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    /// Series positions used by the fit.
    pub points: Vec<u32>,
    /// Slopes fitted separately on the lower and upper half of the points.
    pub half_slopes: (f64, f64),
    /// False when the local slope drifts by more than a quarter between halves,
    /// as for super-polynomial (e.g. Gaussian) decay.
    pub power_law: bool,
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fits the power-law decay `|c_n|^2 ~ n^slope` over series positions in `range`.
///
/// Oscillating series are fitted through their local maxima so that near-zero
/// minima do not drag the slope; monotone series use every nonzero point.
pub fn decay_exponent(state: &SpectralState, range: RangeInclusive<u32>) -> Result<DecayFit> {
    let series = state.weight_series();
    let weight = |n: u32| -> Option<f64> {
        if n >= 1 && n as usize <= series.len() {
            Some(series[n as usize - 1].1)
        } else {
            None
        }
    };
    let lo = (*range.start()).max(1);
    let hi = (*range.end()).min(state.n_modes());
    if hi < lo {
        return Err(Error::Fit(format!("empty fit range {lo}..={hi}")));
    }

    let maxima: Vec<u32> = (lo..=hi)
        .filter(|&n| {
            let y = weight(n).unwrap_or(0.0);
            let left = weight(n.wrapping_sub(1)).unwrap_or(f64::INFINITY);
            let right = weight(n + 1).unwrap_or(f64::NEG_INFINITY);
            y > 0.0 && y > left && y >= right
        })
        .collect();
    let monotone = (lo..hi).all(|n| weight(n + 1).unwrap_or(0.0) <= weight(n).unwrap_or(0.0));
    let points: Vec<u32> = if maxima.len() >= 5 || !monotone {
        maxima
    } else {
        (lo..=hi).filter(|&n| weight(n).unwrap_or(0.0) > 0.0).collect()
    };
    if points.len() < 5 {
        return Err(Error::Fit(format!(
            "only {} usable points in {lo}..={hi}; need at least 5",
            points.len()
        )));
    }

    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&n| (f64::from(n).ln(), weight(n).expect("in range").ln()))
        .collect();
    let (slope, intercept) = least_squares(&logs);
    let mid = logs.len() / 2;
    let lower = least_squares(&logs[..mid.max(2)]).0;
    let upper = least_squares(&logs[mid.min(logs.len() - 2)..]).0;
    let power_law = (lower - upper).abs() <= 0.25 * slope.abs();
    Ok(DecayFit {
        slope,
        intercept,
        points,
        half_slopes: (lower, upper),
        power_law,
    })
}

/// Number of modes whose weight lies within `threshold` (a fraction) below the first:
/// `Delta_{1,alpha} = 1 - |c_alpha|^2 / |c_1|^2` with `0 <= Delta <= threshold`.
/// The first mode itself (`Delta = 0`) is counted.
pub fn spread_count(state: &SpectralState, threshold: f64) -> Result<usize> {
    let first = match state.parity() {
        Parity::Odd => state.coefficient(2),
        _ => state.coefficient(1),
    };
    let c1 = first.norm_sqr();
    if c1 == 0.0 {
        return Err(Error::Domain("leading coefficient is zero; spread undefined".into()));
    }
    Ok(state
        .modes()
        .iter()
        .filter(|m| {
            let delta = 1.0 - m.c.norm_sqr() / c1;
            (0.0..=threshold).contains(&delta)
        })
        .count())
}
