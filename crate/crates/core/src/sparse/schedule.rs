//! ε-schedule: `K(ε) = ⌈log(1/ε)/(2 log γ) + 1⌉` and `δ(ε) = 1/K + C_δ·γ^{K−1}·ε`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest exponent `i` of the dyadic grid `ε = 2^{−i}` searched by default.
pub const DYADIC_DEPTH: u32 = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub epsilon: f64,
    pub gamma: f64,
    #[serde(rename = "K")]
    pub k_layers: u32,
    pub delta: f64,
    pub c_delta: f64,
    /// `min(1/q − 1/q₀, 1/r − 1/r₀)`.
    pub margin: f64,
    /// `δ(ε) + ε ≤ margin`.
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSearch {
    pub margin: f64,
    /// Schedules for `ε = 2^{−1}, 2^{−2}, …`.
    pub grid: Vec<EpsilonSchedule>,
    /// Largest feasible ε on the grid.
    pub chosen: Option<EpsilonSchedule>,
}

/// Hölder conjugate `p/(p − 1)`.
pub fn dual_exponent(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn layers_for(epsilon: f64, gamma: f64) -> u32 {
    let x = (1.0 / epsilon).ln() / (2.0 * gamma.ln()) + 1.0;
    // exact powers of γ should not be pushed up a layer by rounding
    let snapped = if (x - x.round()).abs() < 1e-12 { x.round() } else { x };
    snapped.ceil() as u32
}

fn margin(q0: f64, r0: f64, q: f64, r: f64) -> Result<f64> {
    if !(1.0 <= q && q < q0) {
        return Err(Error::Precondition(format!("need 1 ≤ q < q0, got q = {q}, q0 = {q0}")));
    }
    if !(1.0 <= r && r < r0) {
        return Err(Error::Precondition(format!("need 1 ≤ r < r0, got r = {r}, r0 = {r0}")));
    }
    Ok((1.0 / q - 1.0 / q0).min(1.0 / r - 1.0 / r0))
}

fn schedule(epsilon: f64, gamma: f64, c_delta: f64, margin: f64) -> EpsilonSchedule {
    let k = layers_for(epsilon, gamma);
    let delta = 1.0 / k as f64 + c_delta * gamma.powi(k as i32 - 1) * epsilon;
    EpsilonSchedule {
        epsilon,
        gamma,
        k_layers: k,
        delta,
        c_delta,
        margin,
        feasible: delta + epsilon <= margin,
    }
}

fn check_inputs(gamma: f64, c_delta: f64) -> Result<()> {
    if !(gamma >= 2.0 && gamma.is_finite()) {
        return Err(Error::argument(format!("gamma must be at least 2, got {gamma}")));
    }
    if !(c_delta >= 0.0 && c_delta.is_finite()) {
        return Err(Error::argument(format!("C_delta must be non-negative, got {c_delta}")));
    }
    Ok(())
}

/// Schedule at a single ε; exponents in the restriction convention `q < q₀`, `r < r₀`.
pub fn epsilon_schedule(epsilon: f64, gamma: f64, c_delta: f64, q0: f64, r0: f64, q: f64, r: f64) -> Result<EpsilonSchedule> {
    check_inputs(gamma, c_delta)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::argument(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(schedule(epsilon, gamma, c_delta, margin(q0, r0, q, r)?))
}

/// Schedule at a single ε against an explicit margin; a NaN margin is never feasible.
pub fn schedule_at(epsilon: f64, gamma: f64, c_delta: f64, margin: f64) -> Result<EpsilonSchedule> {
    check_inputs(gamma, c_delta)?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::argument(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(schedule(epsilon, gamma, c_delta, margin))
}

/// Schedules on the dyadic grid `ε = 2^{−i}`, `i = 1..=depth`, against a fixed margin.
pub fn schedule_grid(gamma: f64, c_delta: f64, margin: f64, depth: u32) -> Result<Vec<EpsilonSchedule>> {
    check_inputs(gamma, c_delta)?;
    Ok((1..=depth)
        .map(|i| schedule((-(i as f64)).exp2(), gamma, c_delta, margin))
        .collect())
}

/// Largest dyadic ε with `δ(ε) + ε ≤ margin`.
pub fn feasible_epsilon(gamma: f64, c_delta: f64, q0: f64, r0: f64, q: f64, r: f64) -> Result<ScheduleSearch> {
    let margin = margin(q0, r0, q, r)?;
    let grid = schedule_grid(gamma, c_delta, margin, DYADIC_DEPTH)?;
    let chosen = grid.iter().find(|s| s.feasible).cloned();
    Ok(ScheduleSearch { margin, grid, chosen })
}
