//! Dyadic cutoff profile and the temporal taper window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `e^{−1/u}` for `u > 0`, zero otherwise, written as a ratio so it never overflows.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + (1.0 / u - 1.0 / (1.0 - u)).exp())
    }
}

/// Smooth bump `φ` with `supp φ = [1/2, 2]` and `Σ_k φ(2^{−k}x) = 1` for `x > 0`.
///
/// In logarithmic coordinates `φ(x) = S(log₂x + 1) − S(log₂x)` where `S` is the
/// standard `C^∞` step from 0 on `(−∞, 0]` to 1 on `[1, ∞)`; the dyadic sum telescopes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    resolution: usize,
}

pub fn make_cutoff(resolution: usize) -> Result<CutoffProfile> {
    if resolution < 256 {
        return Err(Error::argument(format!("cutoff resolution must be >= 256, got {resolution}")));
    }
    Ok(CutoffProfile { resolution })
}

impl Default for CutoffProfile {
    fn default() -> Self {
        CutoffProfile { resolution: 1024 }
    }
}

impl CutoffProfile {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Profile in logarithmic coordinates, `g(u) = φ(2^u)`.
    pub fn log_profile(&self, u: f64) -> f64 {
        if u <= -1.0 || u >= 1.0 {
            return 0.0;
        }
        smooth_step(u + 1.0) - smooth_step(u)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if !(x > 0.0) || !x.is_finite() {
            return 0.0;
        }
        self.log_profile(x.log2())
    }

    /// Spatial shell multiplier `φ(2^{−k}|ξ|)`.
    pub fn spatial(&self, k: i32, radius: f64) -> f64 {
        self.eval(radius * 2f64.powi(-k))
    }

    /// Temporal shell multiplier for homogeneity degree `m`.
    ///
    /// Shell `j` is `g(log₂|τ|/m − j)`, supported on `2^{m(j−1)} ≤ |τ| ≤ 2^{m(j+1)}`;
    /// the shells form a partition of unity in `j` for every `m`.
    pub fn temporal(&self, j: i32, m: f64, tau: f64) -> f64 {
        let a = tau.abs();
        if !(a > 0.0) || !a.is_finite() {
            return 0.0;
        }
        self.log_profile(a.log2() / m - j as f64)
    }

    /// `resolution` equally spaced samples `(x, φ(x))` over `[1/2, 2]`.
    pub fn table(&self) -> Vec<(f64, f64)> {
        let steps = self.resolution - 1;
        (0..self.resolution)
            .map(|i| {
                let x = 0.5 + 1.5 * i as f64 / steps as f64;
                (x, self.eval(x))
            })
            .collect()
    }
}

/// Raised-cosine (Tukey) taper that is flat over a central fraction of the window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaperSpec {
    pub flat_fraction: f64,
}

impl Default for TaperSpec {
    fn default() -> Self {
        TaperSpec { flat_fraction: 0.8 }
    }
}

impl TaperSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.flat_fraction) {
            return Err(Error::validation("taper.flat_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn weight(&self, position: f64) -> f64 {
        let ramp = 0.5 * (1.0 - self.flat_fraction);
        if ramp <= 0.0 {
            return 1.0;
        }
        let edge = position.min(1.0 - position);
        if edge <= 0.0 {
            0.0
        } else if edge >= ramp {
            1.0
        } else {
            0.5 * (1.0 - (std::f64::consts::PI * edge / ramp).cos())
        }
    }

    /// Window of `len` samples; sample `i` sits at position `(i + 1/2)/len`.
    pub fn window(&self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|i| self.weight((i as f64 + 0.5) / len as f64))
            .collect()
    }
}
