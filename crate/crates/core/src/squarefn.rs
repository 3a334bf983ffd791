//! Temporal square functions of `e^{itΦ(D)} P_k f` at a fixed spatial point.
//!
//! Time series at a point are synthesized directly from the lattice modes, grouped
//! by phase value, so very long windows never need a full space-time field.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::Exponent;
use crate::phase::{validate_condition1, PhaseFunction, DEFAULT_TOL};
use crate::spectral::fft::{dft, idft};
use crate::spectral::temporal::{check_temporal_shell, tapered_spectrum, temporal_frequencies};
use crate::spectral::{CutoffProfile, GridSpec, SpatialField, TaperSpec};

/// Threshold `log₂μ/m + 2` on `|j − k|`, with `μ` measured on the sphere.
pub fn shell_threshold(phase: &PhaseFunction) -> Result<f64> {
    let report = validate_condition1(phase, 256, DEFAULT_TOL)?;
    if !report.mu.is_finite() {
        return Err(Error::Precondition("phase vanishes on the unit sphere".into()));
    }
    Ok(report.mu.log2() / phase.m() + 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellInteraction {
    pub j: i32,
    pub k: i32,
    pub threshold: f64,
    pub relative_energy: f64,
    /// `|j − k| > threshold`, where the energy should vanish.
    pub off_diagonal: bool,
}

/// Relative energies of every resolved temporal shell for one spatial shell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellProfile {
    pub k: i32,
    pub threshold: f64,
    pub interactions: Vec<ShellInteraction>,
    /// `‖Σ_{|j−k| ≤ threshold} P̃_j F_k‖² / ‖F_k‖²`.
    pub band_capture: f64,
    /// Requested shells without a resolved frequency bin.
    pub excluded: Vec<i32>,
}

/// Mode amplitudes of `e^{itΦ(D)} g(x)` merged by equal phase: `(Φ, c)` pairs.
fn phase_groups(g: &SpatialField, phase: &PhaseFunction, x: &[f64]) -> Vec<(f64, Complex64)> {
    let l = g.lattice;
    let spectrum = g.spectrum();
    let phases = l.phase_values(phase);
    let norm = 1.0 / l.len() as f64;
    let mut modes: Vec<(f64, Complex64)> = spectrum
        .iter()
        .enumerate()
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(i, v)| {
            let xi = l.xi(i);
            let dot: f64 = xi[..l.n].iter().zip(x).map(|(a, b)| a * b).sum();
            (phases[i], v * Complex64::from_polar(norm, dot))
        })
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut groups: Vec<(f64, Complex64)> = Vec::new();
    for (p, c) in modes {
        match groups.last_mut() {
            Some((q, acc)) if (p - *q).abs() <= 1e-12 * p.abs().max(1.0) => *acc += c,
            _ => groups.push((p, c)),
        }
    }
    groups.retain(|(_, c)| c.norm_sqr() > 0.0);
    groups
}

/// `Σ_g c_g e^{iΦ_g t}` at `t_i = t0 + iΔt`, by complex rotation re-anchored every block.
pub fn synthesize(groups: &[(f64, Complex64)], t0: f64, dt: f64, len: usize) -> Vec<Complex64> {
    const BLOCK: usize = 512;
    let steps: Vec<Complex64> = groups.iter().map(|(p, _)| Complex64::from_polar(1.0, p * dt)).collect();
    let mut out = vec![Complex64::new(0.0, 0.0); len];
    let mut state = vec![Complex64::new(0.0, 0.0); groups.len()];
    for (b, chunk) in out.chunks_mut(BLOCK).enumerate() {
        let t = t0 + (b * BLOCK) as f64 * dt;
        for (s, (p, c)) in state.iter_mut().zip(groups) {
            *s = c * Complex64::from_polar(1.0, p * t);
        }
        for slot in chunk.iter_mut() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (s, w) in state.iter_mut().zip(&steps) {
                acc += *s;
                *s *= w;
            }
            *slot = acc;
        }
    }
    out
}

/// `e^{itΦ(D)} f(x)` on the time grid of `grid`.
pub fn point_series(f: &SpatialField, phase: &PhaseFunction, x: &[f64], grid: &GridSpec) -> Result<Vec<Complex64>> {
    check_inputs(f, phase, x, grid)?;
    let groups = phase_groups(f, phase, x);
    Ok(synthesize(&groups, grid.time_span[0], grid.dt(), grid.time_samples))
}

fn check_inputs(f: &SpatialField, phase: &PhaseFunction, x: &[f64], grid: &GridSpec) -> Result<()> {
    grid.validate()?;
    if grid.lattice()? != f.lattice {
        return Err(Error::argument("field lattice does not match the grid"));
    }
    if phase.n() != f.lattice.n || x.len() != f.lattice.n {
        return Err(Error::argument("dimension mismatch between phase, field and point"));
    }
    Ok(())
}

fn spatial_shell(f: &SpatialField, k: i32, cutoff: &CutoffProfile) -> Result<SpatialField> {
    crate::spectral::project_spatial(f, k, cutoff)
}

/// Shell profile of `e^{itΦ(D)} P_k f(x)` over temporal shells `js`.
pub fn shell_profile(
    f: &SpatialField,
    phase: &PhaseFunction,
    k: i32,
    js: impl IntoIterator<Item = i32>,
    x: &[f64],
    grid: &GridSpec,
    taper: &TaperSpec,
) -> Result<ShellProfile> {
    check_inputs(f, phase, x, grid)?;
    taper.validate()?;
    let cutoff = CutoffProfile::default();
    let threshold = shell_threshold(phase)?;
    let m = phase.m();
    let dt = grid.dt();
    let fk = spatial_shell(f, k, &cutoff)?;
    let groups = phase_groups(&fk, phase, x);
    let series = synthesize(&groups, grid.time_span[0], dt, grid.time_samples);
    let spectrum = tapered_spectrum(&series, taper);
    let total: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
    // L²_t norm of the tapered series by Parseval
    if total * dt / spectrum.len() as f64 <= 1e-14 {
        return Err(Error::Degenerate(format!("P_{k} f vanishes at the sample point")));
    }
    let taus = temporal_frequencies(series.len(), dt);

    let mut interactions = Vec::new();
    let mut excluded = Vec::new();
    for j in js {
        check_temporal_shell(j, m, dt)?;
        let mut resolved = false;
        let mut energy = 0.0;
        for (v, &tau) in spectrum.iter().zip(&taus) {
            let w = cutoff.temporal(j, m, tau);
            if w > 0.0 {
                resolved = true;
                energy += w * w * v.norm_sqr();
            }
        }
        if !resolved {
            excluded.push(j);
            continue;
        }
        interactions.push(ShellInteraction {
            j,
            k,
            threshold,
            relative_energy: (energy / total).clamp(0.0, 1.0),
            off_diagonal: ((j - k).abs() as f64) > threshold,
        });
    }

    let reach = threshold.floor() as i32;
    let mut captured = 0.0;
    for (v, &tau) in spectrum.iter().zip(&taus) {
        let w: f64 = (k - reach..=k + reach).map(|j| cutoff.temporal(j, m, tau)).sum();
        captured += w * w * v.norm_sqr();
    }
    Ok(ShellProfile {
        k,
        threshold,
        interactions,
        band_capture: (captured / total).clamp(0.0, 1.0),
        excluded,
    })
}

/// Relative energy of `P̃_j e^{itΦ(D)} P_k f(x)` within `e^{itΦ(D)} P_k f(x)`.
pub fn offdiagonal_energy(
    f: &SpatialField,
    phase: &PhaseFunction,
    j: i32,
    k: i32,
    x: &[f64],
    grid: &GridSpec,
    taper: &TaperSpec,
) -> Result<ShellInteraction> {
    let profile = shell_profile(f, phase, k, [j], x, grid, taper)?;
    profile
        .interactions
        .into_iter()
        .next()
        .ok_or_else(|| Error::argument(format!("temporal shell j = {j} has no resolved frequency")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareFunctionComparison {
    pub lhs: f64,
    pub rhs: f64,
    pub shells_k: Vec<i32>,
    /// Spatial shells dropped because they reach past the Nyquist frequency.
    pub excluded_k: Vec<i32>,
}

fn lr_norm(values: &[f64], r: f64, dt: f64) -> f64 {
    let scale = values.iter().cloned().fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let sum: f64 = crate::spectral::pairwise_sum(&values.iter().map(|v| (v / scale).powf(r)).collect::<Vec<_>>());
    scale * (sum * dt).powf(1.0 / r)
}

/// `‖w·e^{itΦ(D)}f(x)‖_{L^r_t}` against the diagonal square function
/// `‖(Σ_k Σ_{|j−k| ≤ threshold} |P̃_j e^{itΦ(D)} P_k f(x)|²)^{1/2}‖_{L^r_t}`, where `w` is the taper.
pub fn square_function_compare(
    f: &SpatialField,
    phase: &PhaseFunction,
    x: &[f64],
    r: Exponent,
    grid: &GridSpec,
    taper: &TaperSpec,
) -> Result<SquareFunctionComparison> {
    let rf = r.to_f64();
    if !(rf > 1.0 && rf.is_finite()) {
        return Err(Error::argument(format!("r must lie in (1, inf), got {r}")));
    }
    check_inputs(f, phase, x, grid)?;
    taper.validate()?;
    let cutoff = CutoffProfile::default();
    let threshold = shell_threshold(phase)?;
    let reach = threshold.floor() as i32;
    let m = phase.m();
    let dt = grid.dt();
    let len = grid.time_samples;
    let lattice = f.lattice;
    let window = taper.window(len);

    let full = point_series(f, phase, x, grid)?;
    let tapered: Vec<f64> = full.iter().zip(&window).map(|(v, w)| v.norm() * w).collect();
    let lhs = lr_norm(&tapered, rf, dt);

    let radii = lattice.radii();
    let spectrum = f.spectrum();
    let r_min = radii
        .iter()
        .zip(&spectrum)
        .filter(|(&r, v)| r > 0.0 && v.norm_sqr() > 0.0)
        .map(|(&r, _)| r)
        .fold(f64::INFINITY, f64::min);
    let r_max = radii
        .iter()
        .zip(&spectrum)
        .filter(|(_, v)| v.norm_sqr() > 0.0)
        .map(|(&r, _)| r)
        .fold(0.0, f64::max);
    if !r_min.is_finite() {
        return Err(Error::Degenerate("data has no nonzero frequency".into()));
    }
    let k_lo = r_min.log2().floor() as i32 - 1;
    let k_hi = r_max.log2().ceil() as i32 + 1;
    let taus = temporal_frequencies(len, dt);
    let nyquist_t = std::f64::consts::PI / dt;

    let mut square = vec![0.0; len];
    let mut shells_k = Vec::new();
    let mut excluded_k = Vec::new();
    for k in k_lo..=k_hi {
        if 2f64.powi(k + 1) > lattice.nyquist() {
            excluded_k.push(k);
            continue;
        }
        let fk = spatial_shell(f, k, &cutoff)?;
        let groups = phase_groups(&fk, phase, x);
        if groups.is_empty() {
            continue;
        }
        shells_k.push(k);
        let mut spectrum_k = synthesize(&groups, grid.time_span[0], dt, len);
        for (v, w) in spectrum_k.iter_mut().zip(&window) {
            *v *= w;
        }
        dft(&mut spectrum_k);
        for j in (k - reach)..=(k + reach) {
            if 2f64.powf(m * (j as f64 + 1.0)) >= nyquist_t {
                continue;
            }
            let mut piece: Vec<Complex64> = spectrum_k
                .iter()
                .zip(&taus)
                .map(|(v, &tau)| v * cutoff.temporal(j, m, tau))
                .collect();
            idft(&mut piece);
            for (s, v) in square.iter_mut().zip(&piece) {
                *s += v.norm_sqr();
            }
        }
    }
    let root: Vec<f64> = square.iter().map(|v| v.sqrt()).collect();
    Ok(SquareFunctionComparison {
        lhs,
        rhs: lr_norm(&root, rf, dt),
        shells_k,
        excluded_k,
    })
}
