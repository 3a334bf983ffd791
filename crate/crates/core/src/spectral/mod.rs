//! Periodic lattice, the propagator `e^{itΦ(D)}` and dyadic frequency projections.

pub mod container;
pub mod cutoff;
pub mod fft;
pub mod temporal;

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhaseFunction;

pub use cutoff::{make_cutoff, CutoffProfile, TaperSpec};
pub use fft::FftNd;
pub use temporal::project_temporal;

/// Spatial lattice plus a uniform time grid on `[t0, t1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub points_per_dim: usize,
    pub spatial_period: f64,
    pub time_samples: usize,
    pub time_span: [f64; 2],
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.lattice()?;
        if self.time_samples == 0 {
            return Err(Error::argument("time_samples must be positive"));
        }
        let [t0, t1] = self.time_span;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::argument("time span must be a finite interval with t1 > t0"));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.n, self.points_per_dim, self.spatial_period)
    }

    pub fn dt(&self) -> f64 {
        (self.time_span[1] - self.time_span[0]) / self.time_samples as f64
    }

    pub fn times(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.time_samples)
            .map(|i| self.time_span[0] + i as f64 * dt)
            .collect()
    }
}

/// Periodic sample lattice `x_j = (j − N/2)Δx` in each of `n` axes, `Δx = L/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub n: usize,
    pub points: usize,
    pub period: f64,
}

impl Lattice {
    pub fn new(n: usize, points: usize, period: f64) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::argument(format!("dimension must be 1 or 2, got {n}")));
        }
        if points < 2 || !points.is_power_of_two() {
            return Err(Error::argument(format!("points per dimension must be a power of two, got {points}")));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::argument("spatial period must be positive"));
        }
        Ok(Lattice { n, points, period })
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }

    pub fn dx(&self) -> f64 {
        self.period / self.points as f64
    }

    /// Volume of one lattice cell, `Δx^n`.
    pub fn cell(&self) -> f64 {
        self.dx().powi(self.n as i32)
    }

    /// Largest resolved frequency, `πN/L`.
    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / self.period
    }

    /// Frequency lattice spacing `2π/L`.
    pub fn frequency_step(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Signed wavenumber of FFT index `i`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let half = self.points / 2;
        if i < half {
            i as i64
        } else {
            i as i64 - self.points as i64
        }
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - (self.points / 2) as f64) * self.dx()
    }

    /// Per-axis indices of a flat (row-major) index; unused axes are zero.
    pub fn split(&self, flat: usize) -> [usize; 2] {
        match self.n {
            1 => [flat, 0],
            _ => [flat / self.points, flat % self.points],
        }
    }

    pub fn flat(&self, idx: [usize; 2]) -> usize {
        match self.n {
            1 => idx[0],
            _ => idx[0] * self.points + idx[1],
        }
    }

    pub fn position(&self, flat: usize) -> [f64; 2] {
        let [a, b] = self.split(flat);
        match self.n {
            1 => [self.coordinate(a), 0.0],
            _ => [self.coordinate(a), self.coordinate(b)],
        }
    }

    pub fn wave(&self, flat: usize) -> [i64; 2] {
        let [a, b] = self.split(flat);
        match self.n {
            1 => [self.wavenumber(a), 0],
            _ => [self.wavenumber(a), self.wavenumber(b)],
        }
    }

    pub fn xi(&self, flat: usize) -> [f64; 2] {
        let h = self.frequency_step();
        let [a, b] = self.wave(flat);
        [h * a as f64, h * b as f64]
    }

    /// Flat index of a signed wavenumber, if it is on the lattice.
    pub fn wave_index(&self, wave: &[i64]) -> Option<usize> {
        let half = (self.points / 2) as i64;
        let mut idx = [0usize; 2];
        for (slot, &k) in idx.iter_mut().zip(wave.iter().take(self.n)) {
            if k < -half || k >= half {
                return None;
            }
            *slot = k.rem_euclid(self.points as i64) as usize;
        }
        Some(self.flat(idx))
    }

    pub fn radii(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let [a, b] = self.xi(i);
                (a * a + b * b).sqrt()
            })
            .collect()
    }

    /// `Φ(ξ_a)` over the frequency lattice in FFT order, with `Φ(0) = 0`.
    pub fn phase_values(&self, phase: &PhaseFunction) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let xi = self.xi(i);
                phase.value_unchecked(&xi[..self.n])
            })
            .collect()
    }

    pub fn plan(&self) -> FftNd {
        FftNd::new(self.n, self.points)
    }
}

/// Complex samples of a function on a [`Lattice`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialField {
    pub lattice: Lattice,
    pub data: Vec<Complex64>,
}

impl SpatialField {
    pub fn new(lattice: Lattice, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != lattice.len() {
            return Err(Error::argument(format!(
                "field has {} samples, lattice has {}",
                data.len(),
                lattice.len()
            )));
        }
        Ok(SpatialField { lattice, data })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        SpatialField {
            lattice,
            data: vec![Complex64::new(0.0, 0.0); lattice.len()],
        }
    }

    pub fn from_fn(lattice: Lattice, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let data = (0..lattice.len())
            .map(|i| f(&lattice.position(i)[..lattice.n]))
            .collect();
        SpatialField { lattice, data }
    }

    /// Field whose continuous Fourier transform `∫ f(x) e^{−ix·ξ} dx` is sampled from `fhat`.
    pub fn from_fourier(lattice: Lattice, fhat: impl Fn(&[f64]) -> Complex64) -> Self {
        let scale = 1.0 / lattice.cell();
        let spectrum = (0..lattice.len())
            .map(|i| fhat(&lattice.xi(i)[..lattice.n]) * scale)
            .collect();
        Self::from_spectrum(lattice, spectrum)
    }

    /// Inverse of [`SpatialField::spectrum`].
    pub fn from_spectrum(lattice: Lattice, mut spectrum: Vec<Complex64>) -> Self {
        lattice.plan().inverse(&mut spectrum);
        SpatialField { lattice, data: spectrum }
    }

    /// `e^{i x·ξ₀}` for the lattice wavenumber `wave`.
    pub fn mode(lattice: Lattice, wave: &[i64]) -> Result<Self> {
        let idx = lattice
            .wave_index(wave)
            .ok_or_else(|| Error::argument("wavenumber is outside the lattice"))?;
        let mut spectrum = vec![Complex64::new(0.0, 0.0); lattice.len()];
        spectrum[idx] = Complex64::new(lattice.len() as f64, 0.0);
        Ok(Self::from_spectrum(lattice, spectrum))
    }

    /// Centered DFT `F_a = Σ_j f_j e^{−iξ_a·x_j}` in FFT order.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut s = self.data.clone();
        self.lattice.plan().forward(&mut s);
        s
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.lattice.cell() * pairwise_sum(&self.data.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>())
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        SpatialField {
            lattice: self.lattice,
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Cyclic translation by whole lattice cells: `g(x) = f(x − shift·Δx)`.
    pub fn translated(&self, shift: &[i64]) -> Self {
        let l = self.lattice;
        let p = l.points as i64;
        let mut data = vec![Complex64::new(0.0, 0.0); l.len()];
        for (i, v) in self.data.iter().enumerate() {
            let idx = l.split(i);
            let mut out = [0usize; 2];
            for d in 0..l.n {
                out[d] = (idx[d] as i64 + shift.get(d).copied().unwrap_or(0)).rem_euclid(p) as usize;
            }
            data[l.flat(out)] = *v;
        }
        SpatialField { lattice: l, data }
    }

    /// Fraction of spectral energy at `|ξ|` outside `[lo, hi]`.
    pub fn energy_outside(&self, lo: f64, hi: f64) -> f64 {
        let s = self.spectrum();
        let radii = self.lattice.radii();
        let total: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let outside: f64 = s
            .iter()
            .zip(&radii)
            .filter(|(_, &r)| r < lo || r > hi)
            .map(|(v, _)| v.norm_sqr())
            .sum();
        outside / total
    }

    pub fn add(&self, other: &SpatialField) -> Result<SpatialField> {
        if self.lattice != other.lattice {
            return Err(Error::argument("fields live on different lattices"));
        }
        Ok(SpatialField {
            lattice: self.lattice,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Samples `u(t_i, x_j)` stored time-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub grid: GridSpec,
    pub lattice: Lattice,
    pub samples: Vec<Complex64>,
}

impl SpaceTimeField {
    pub fn new(grid: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        let lattice = grid.lattice()?;
        if samples.len() != lattice.len() * grid.time_samples {
            return Err(Error::argument("sample count does not match the grid"));
        }
        Ok(SpaceTimeField { grid, lattice, samples })
    }

    pub fn time_samples(&self) -> usize {
        self.grid.time_samples
    }

    pub fn slice(&self, t: usize) -> &[Complex64] {
        let len = self.lattice.len();
        &self.samples[t * len..(t + 1) * len]
    }

    pub fn slice_field(&self, t: usize) -> SpatialField {
        SpatialField {
            lattice: self.lattice,
            data: self.slice(t).to_vec(),
        }
    }

    /// Time series at one lattice point.
    pub fn point_series(&self, flat: usize) -> Vec<Complex64> {
        let len = self.lattice.len();
        (0..self.grid.time_samples)
            .map(|t| self.samples[t * len + flat])
            .collect()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> SpaceTimeField {
        SpaceTimeField {
            grid: self.grid.clone(),
            lattice: self.lattice,
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }
}

fn check_phase(lattice: &Lattice, phase: &PhaseFunction) -> Result<()> {
    if phase.n() != lattice.n {
        return Err(Error::argument(format!(
            "phase is {}-dimensional but the lattice is {}-dimensional",
            phase.n(),
            lattice.n
        )));
    }
    Ok(())
}

/// `e^{itΦ(D)} f` at a single time.
pub fn propagate_to(f: &SpatialField, phase: &PhaseFunction, t: f64) -> Result<SpatialField> {
    check_phase(&f.lattice, phase)?;
    let mut spectrum = f.spectrum();
    for (v, p) in spectrum.iter_mut().zip(f.lattice.phase_values(phase)) {
        *v *= Complex64::from_polar(1.0, t * p);
    }
    Ok(SpatialField::from_spectrum(f.lattice, spectrum))
}

/// `e^{itΦ(D)} f` on every time sample of `grid`.
pub fn propagate(f: &SpatialField, phase: &PhaseFunction, grid: &GridSpec) -> Result<SpaceTimeField> {
    grid.validate()?;
    let lattice = grid.lattice()?;
    if lattice != f.lattice {
        return Err(Error::argument("field lattice does not match the grid"));
    }
    check_phase(&lattice, phase)?;
    let spectrum = f.spectrum();
    let phases = lattice.phase_values(phase);
    let plan = lattice.plan();
    let slices: Vec<Vec<Complex64>> = grid
        .times()
        .par_iter()
        .map(|&t| {
            let mut s: Vec<Complex64> = spectrum
                .iter()
                .zip(&phases)
                .map(|(v, &p)| v * Complex64::from_polar(1.0, t * p))
                .collect();
            plan.inverse(&mut s);
            s
        })
        .collect();
    SpaceTimeField::new(grid.clone(), slices.concat())
}

/// `P_k f`, the multiplier `φ(2^{−k}|ξ|)`.
pub fn project_spatial(f: &SpatialField, k: i32, cutoff: &CutoffProfile) -> Result<SpatialField> {
    let upper = 2f64.powi(k + 1);
    if upper > f.lattice.nyquist() {
        return Err(Error::argument(format!(
            "shell k = {k} reaches |xi| = {upper}, beyond the Nyquist frequency {}",
            f.lattice.nyquist()
        )));
    }
    let mut spectrum = f.spectrum();
    for (v, r) in spectrum.iter_mut().zip(f.lattice.radii()) {
        *v *= cutoff.spatial(k, r);
    }
    Ok(SpatialField::from_spectrum(f.lattice, spectrum))
}

/// Recursive pairwise summation; the split points depend only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(lattice: Lattice, width: f64) -> SpatialField {
        SpatialField::from_fn(lattice, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
        })
    }

    fn grid(n: usize, points: usize, period: f64, samples: usize, t1: f64) -> GridSpec {
        GridSpec {
            n,
            points_per_dim: points,
            spatial_period: period,
            time_samples: samples,
            time_span: [0.0, t1],
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let g = grid(2, 100, 10.0, 4, 1.0);
        assert!(matches!(g.validate(), Err(Error::Argument(_))));
    }

    #[test]
    fn identity_at_time_zero() {
        let g = grid(2, 64, 20.0, 4, 1.0);
        let l = g.lattice().unwrap();
        let f = gaussian(l, 1.5);
        let u = propagate(&f, &PhaseFunction::power(2, 2.0).unwrap(), &g).unwrap();
        let err: f64 = u.slice(0).iter().zip(&f.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * f.data.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }

    #[test]
    fn single_mode_evolves_by_phase() {
        let g = grid(2, 32, 2.0 * PI, 5, 1.0);
        let l = g.lattice().unwrap();
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        let f = SpatialField::mode(l, &[3, -2]).unwrap();
        let u = propagate(&f, &phase, &g).unwrap();
        for (ti, t) in g.times().into_iter().enumerate() {
            for (i, v) in u.slice(ti).iter().enumerate() {
                let x = l.position(i);
                let expected = Complex64::from_polar(1.0, 3.0 * x[0] - 2.0 * x[1] + 13.0 * t);
                assert!((v - expected).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn unitarity_for_gaussian() {
        let g = grid(2, 64, 30.0, 16, 3.0);
        let l = g.lattice().unwrap();
        let f = gaussian(l, 1.0);
        let u = propagate(&f, &PhaseFunction::power(2, 2.0).unwrap(), &g).unwrap();
        let n0 = f.l2_norm();
        for t in 0..g.time_samples {
            assert!((u.slice_field(t).l2_norm() / n0 - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn group_law() {
        let g = grid(1, 128, 40.0, 1, 1.0);
        let l = g.lattice().unwrap();
        let phase = PhaseFunction::power(1, 3.0).unwrap();
        let f = gaussian(l, 2.0);
        let two_step = propagate_to(&propagate_to(&f, &phase, 0.3).unwrap(), &phase, 0.45).unwrap();
        let direct = propagate_to(&f, &phase, 0.75).unwrap();
        for (a, b) in two_step.data.iter().zip(&direct.data) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    fn annulus_field(l: Lattice) -> SpatialField {
        let c = CutoffProfile::default();
        SpatialField::from_fourier(l, |xi| {
            let r = (xi.iter().map(|v| v * v).sum::<f64>()).sqrt();
            let bump = c.spatial(0, r);
            Complex64::new(bump * (1.0 + xi[0]), bump * xi[xi.len() - 1])
        })
    }

    #[test]
    fn three_shells_reconstruct_annulus_data() {
        let l = Lattice::new(2, 64, 32.0).unwrap();
        let f = annulus_field(l);
        let c = CutoffProfile::default();
        let mut sum = SpatialField::zeros(l);
        for k in -1..=1 {
            sum = sum.add(&project_spatial(&f, k, &c).unwrap()).unwrap();
        }
        let scale = f.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in sum.data.iter().zip(&f.data) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn disjoint_shell_is_zero_and_nyquist_is_checked() {
        let l = Lattice::new(2, 128, 16.0).unwrap();
        let f = annulus_field(l);
        let c = CutoffProfile::default();
        let p = project_spatial(&f, 3, &c).unwrap();
        assert!(p.data.iter().all(|v| v.norm() < 1e-14));
        // Nyquist is π·128/16 ≈ 25.1 < 2^5.
        assert!(project_spatial(&f, 4, &c).is_err());
    }

    #[test]
    fn projection_support_and_overlap_bounds() {
        let l = Lattice::new(2, 128, 32.0).unwrap();
        let f = SpatialField::from_fourier(l, |xi| {
            let r2: f64 = xi.iter().map(|v| v * v).sum();
            Complex64::new((-r2 / 4.0).exp() * r2, 0.0)
        });
        let c = CutoffProfile::default();
        let total = f.l2_norm_sq();
        let mut sum = 0.0;
        for k in -8..=2 {
            let p = project_spatial(&f, k, &c).unwrap();
            let lo = 2f64.powi(k - 1);
            let hi = 2f64.powi(k + 1);
            for (v, r) in p.spectrum().iter().zip(l.radii()) {
                if r < lo || r > hi {
                    assert!(v.norm() < 1e-9);
                }
            }
            sum += p.l2_norm_sq();
        }
        // at most two shells overlap, and φ² + (1 − φ)² ≥ 1/2
        assert!(sum <= total * (1.0 + 1e-9));
        assert!(sum >= 0.5 * total);
    }

    #[test]
    fn projection_commutes_with_propagation() {
        let l = Lattice::new(2, 64, 32.0).unwrap();
        let f = annulus_field(l);
        let c = CutoffProfile::default();
        let phase = PhaseFunction::quartic_anisotropic();
        let a = project_spatial(&propagate_to(&f, &phase, 0.7).unwrap(), 0, &c).unwrap();
        let b = propagate_to(&project_spatial(&f, 0, &c).unwrap(), &phase, 0.7).unwrap();
        for (x, y) in a.data.iter().zip(&b.data) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn pairwise_sum_matches_exact_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
    }
}
