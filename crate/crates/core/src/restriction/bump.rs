//! Band-limited radial weight `φ_A = c·|b̌|²`.
//!
//! `b` is a smooth radial bump supported in the ball of radius 1/3, so the Fourier
//! transform of `φ_A` is the autocorrelation `b ⋆ b`, which is nonnegative and
//! supported in the ball of radius 2/3. The constant `c` makes `φ_A = 1` on the
//! unit sphere; the profile decreases radially there, so `φ_A ≥ 1` on the unit ball.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Support radius of `b`.
pub const BUMP_RADIUS: f64 = 1.0 / 3.0;
const QUADRATURE_ORDER: usize = 64;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(order: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(order);
    for i in 0..order {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = order as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Bessel `J₀` from `J₀(x) = (1/π)∫₀^π cos(x sin θ) dθ`; the integrand has period π,
/// so the trapezoid rule converges geometrically once the node count exceeds `x/2`.
pub fn bessel_j0(x: f64) -> f64 {
    let count = 32 + x.abs().ceil() as usize;
    let h = PI / count as f64;
    (0..count).map(|i| (x * (i as f64 * h).sin()).cos()).sum::<f64>() / count as f64
}

fn bump(rho: f64) -> f64 {
    let u = rho / BUMP_RADIUS;
    if u >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

#[derive(Clone, Debug)]
pub struct ModulatedBump {
    dim: usize,
    nodes: Vec<(f64, f64)>,
    scale: f64,
}

impl ModulatedBump {
    /// Profile in `ℝ^dim`, `dim ∈ {1, 2, 3}`.
    pub fn new(dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::argument(format!("bump dimension must be 1, 2 or 3, got {dim}")));
        }
        // map [-1, 1] onto [0, a]
        let nodes = gauss_legendre(QUADRATURE_ORDER)
            .into_iter()
            .map(|(x, w)| {
                let rho = 0.5 * BUMP_RADIUS * (x + 1.0);
                (rho, 0.5 * BUMP_RADIUS * w * bump(rho))
            })
            .collect();
        let mut out = ModulatedBump { dim, nodes, scale: 1.0 };
        out.scale = 1.0 / out.profile(1.0);
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Radial inverse transform of `b` up to a constant.
    fn inverse_bump(&self, s: f64) -> f64 {
        self.nodes
            .iter()
            .map(|&(rho, w)| {
                let x = rho * s;
                w * match self.dim {
                    1 => x.cos(),
                    2 => rho * bessel_j0(x),
                    _ => rho * rho * if x == 0.0 { 1.0 } else { x.sin() / x },
                }
            })
            .sum()
    }

    /// `φ_A` at radius `s = |z|`.
    pub fn profile(&self, s: f64) -> f64 {
        let v = self.inverse_bump(s);
        self.scale * v * v
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.profile(z.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// `φ_i(z) = φ_A((z − z_i)/R)`.
    pub fn localized(&self, z: &[f64], center: &[f64], radius: f64) -> f64 {
        let s = z
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        self.profile(s / radius)
    }

    /// Radius of the Fourier support of `φ_A`.
    pub fn band_limit(&self) -> f64 {
        2.0 * BUMP_RADIUS
    }
}
