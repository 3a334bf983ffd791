//! Seeded data batteries of annulus band-limited fields.
//!
//! Every field is `χ(|ξ|)·a(ξ)` in frequency, where `χ = φ(|ξ|)` is the shell-zero
//! cutoff supported in `1/2 ≤ |ξ| ≤ 2`, and is normalized to unit `L²` norm.
//!
//! `default-v1` (plane only) holds six profiles:
//! - `gaussian-annulus`: `a = exp(−(|ξ| − 1.2)²/(2·0.15²))`;
//! - `packet-round`, `packet-radial`, `packet-tangential`, `packet-knapp`: Gaussian
//!   packets at `1.2·(cos θ, sin θ)` with widths `(σ_∥, σ_⊥)` of `(0.15, 0.15)`,
//!   `(0.25, 0.1)`, `(0.1, 0.25)` and `(0.3, 0.1)` along and across the centre direction;
//! - `random`: four packets with seeded centres (radius in `[0.8, 1.6]`), widths in
//!   `[0.12, 0.2]`, unit amplitudes and seeded phases.
//!
//! The angles `θ` are drawn from the seed, so the battery is a function of the seed alone.
//!
//! `noise-v1` holds ten fields whose lattice coefficients are independent uniform
//! complex numbers in `[−1/2, 1/2]²` times `χ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spectral::{CutoffProfile, Lattice, SpatialField};

pub const DEFAULT_BATTERY: &str = "default-v1";
pub const NOISE_BATTERY: &str = "noise-v1";
pub const BATTERY_IDS: [&str; 2] = [DEFAULT_BATTERY, NOISE_BATTERY];

const RING_RADIUS: f64 = 1.2;
const NOISE_FIELDS: usize = 10;

struct Packet {
    center: [f64; 2],
    along: f64,
    across: f64,
    amplitude: Complex64,
}

impl Packet {
    fn at(theta: f64, radius: f64, along: f64, across: f64, amplitude: Complex64) -> Self {
        Packet {
            center: [radius * theta.cos(), radius * theta.sin()],
            along,
            across,
            amplitude,
        }
    }

    fn eval(&self, xi: &[f64]) -> Complex64 {
        let [cx, cy] = self.center;
        let norm = (cx * cx + cy * cy).sqrt();
        let (ux, uy) = (cx / norm, cy / norm);
        let (dx, dy) = (xi[0] - cx, xi[1] - cy);
        let par = dx * ux + dy * uy;
        let perp = -dx * uy + dy * ux;
        let e = par * par / (2.0 * self.along * self.along) + perp * perp / (2.0 * self.across * self.across);
        self.amplitude * (-e).exp()
    }
}

fn normalized(f: SpatialField) -> Result<SpatialField> {
    let norm = f.l2_norm();
    if !(norm > 0.0) {
        return Err(Error::Degenerate("battery field vanishes on this lattice".into()));
    }
    Ok(f.scaled(Complex64::new(1.0 / norm, 0.0)))
}

fn banded(lattice: Lattice, a: impl Fn(&[f64]) -> Complex64) -> Result<SpatialField> {
    let cutoff = CutoffProfile::default();
    normalized(SpatialField::from_fourier(lattice, |xi| {
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let chi = cutoff.spatial(0, r);
        if chi == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            a(xi) * chi
        }
    }))
}

fn default_battery(seed: u64, lattice: Lattice) -> Result<Vec<(String, SpatialField)>> {
    if lattice.n != 2 {
        return Err(Error::argument(format!("{DEFAULT_BATTERY} is defined in the plane, got n = {}", lattice.n)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one = Complex64::new(1.0, 0.0);
    let mut out = vec![(
        "gaussian-annulus".to_string(),
        banded(lattice, |xi| {
            let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            Complex64::new((-(r - RING_RADIUS).powi(2) / (2.0 * 0.15 * 0.15)).exp(), 0.0)
        })?,
    )];
    for (name, along, across) in [
        ("packet-round", 0.15, 0.15),
        ("packet-radial", 0.25, 0.1),
        ("packet-tangential", 0.1, 0.25),
        ("packet-knapp", 0.3, 0.1),
    ] {
        let theta = rng.random::<f64>() * 2.0 * PI;
        let packet = Packet::at(theta, RING_RADIUS, along, across, one);
        out.push((name.to_string(), banded(lattice, |xi| packet.eval(xi))?));
    }
    let packets: Vec<Packet> = (0..4)
        .map(|_| {
            let theta = rng.random::<f64>() * 2.0 * PI;
            let radius = 0.8 + 0.8 * rng.random::<f64>();
            let along = 0.12 + 0.08 * rng.random::<f64>();
            let across = 0.12 + 0.08 * rng.random::<f64>();
            let phase = rng.random::<f64>() * 2.0 * PI;
            Packet::at(theta, radius, along, across, Complex64::from_polar(1.0, phase))
        })
        .collect();
    out.push((
        "random".to_string(),
        banded(lattice, |xi| packets.iter().map(|p| p.eval(xi)).sum())?,
    ));
    Ok(out)
}

fn noise_battery(seed: u64, lattice: Lattice) -> Result<Vec<(String, SpatialField)>> {
    let cutoff = CutoffProfile::default();
    let radii = lattice.radii();
    (0..NOISE_FIELDS)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let spectrum = radii
                .iter()
                .map(|&r| {
                    let v = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
                    v * cutoff.spatial(0, r)
                })
                .collect();
            Ok((format!("noise-{i}"), normalized(SpatialField::from_spectrum(lattice, spectrum))?))
        })
        .collect()
}

/// Named battery fields for `seed` on `lattice`.
pub fn seeded_battery(seed: u64, id: &str, lattice: Lattice) -> Result<Vec<(String, SpatialField)>> {
    match id {
        DEFAULT_BATTERY => default_battery(seed, lattice),
        NOISE_BATTERY => noise_battery(seed, lattice),
        _ => Err(Error::argument(format!(
            "unknown battery `{id}`, expected one of {BATTERY_IDS:?}"
        ))),
    }
}
