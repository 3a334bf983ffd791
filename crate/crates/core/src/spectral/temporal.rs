//! Temporal Littlewood–Paley projections of sampled time series.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::cutoff::{CutoffProfile, TaperSpec};
use super::fft::{dft, idft};
use crate::error::{Error, Result};

/// Angular frequencies `2πl/(N_t Δt)` of a length-`len` series, FFT order.
pub fn temporal_frequencies(len: usize, dt: f64) -> Vec<f64> {
    let span = len as f64 * dt;
    (0..len)
        .map(|l| {
            let k = if l < len / 2 { l as f64 } else { l as f64 - len as f64 };
            2.0 * PI * k / span
        })
        .collect()
}

/// DFT of the tapered series.
pub fn tapered_spectrum(series: &[Complex64], taper: &TaperSpec) -> Vec<Complex64> {
    let w = taper.window(series.len());
    let mut s: Vec<Complex64> = series.iter().zip(&w).map(|(v, &w)| v * w).collect();
    dft(&mut s);
    s
}

/// Fails unless the upper edge `2^{m(j+1)}` of shell `j` is below the temporal Nyquist `π/Δt`.
pub fn check_temporal_shell(j: i32, m: f64, dt: f64) -> Result<()> {
    let upper = 2f64.powf(m * (j as f64 + 1.0));
    let nyquist = PI / dt;
    if upper >= nyquist {
        return Err(Error::argument(format!(
            "temporal shell j = {j} reaches |tau| = {upper}, beyond the Nyquist frequency {nyquist}"
        )));
    }
    Ok(())
}

/// Number of discrete frequencies where the shell-`j` multiplier is nonzero.
pub fn shell_bins(j: i32, m: f64, len: usize, dt: f64, cutoff: &CutoffProfile) -> usize {
    temporal_frequencies(len, dt)
        .iter()
        .filter(|&&tau| cutoff.temporal(j, m, tau) > 0.0)
        .count()
}

/// `P̃_j` applied to the tapered series: multiplier `φ_j(τ)` on its DFT, then inverse DFT.
pub fn project_temporal(
    series: &[Complex64],
    dt: f64,
    j: i32,
    m: f64,
    cutoff: &CutoffProfile,
    taper: &TaperSpec,
) -> Result<Vec<Complex64>> {
    if series.is_empty() {
        return Err(Error::argument("empty time series"));
    }
    if !(dt > 0.0) {
        return Err(Error::argument("time step must be positive"));
    }
    check_temporal_shell(j, m, dt)?;
    let mut s = tapered_spectrum(series, taper);
    for (v, tau) in s.iter_mut().zip(temporal_frequencies(series.len(), dt)) {
        *v *= cutoff.temporal(j, m, tau);
    }
    idft(&mut s);
    Ok(s)
}
