//! Quadrature for the surface `S = {(ξ, Φ(ξ)) : 1/2 ≤ |ξ| ≤ 2}` with its graph measure.
//!
//! Radial nodes are equally spaced in arclength, measured with the steepest radial
//! slope over all directions, so node spacing on `S` is uniform rather than in `ξ`.
//! In the plane each ring carries enough angular nodes to keep the same spacing.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::phase::PhaseFunction;

const R_MIN: f64 = 0.5;
const R_MAX: f64 = 2.0;
/// Subintervals of the table used to invert the arclength map.
const ARC_TABLE: usize = 8192;
/// Directions sampled when maximizing slopes over angles.
const ANGLE_SAMPLES: usize = 256;
/// Covers the excess of the true maximum over the sampled one.
const SLOPE_MARGIN: f64 = 1.01;
/// Nodes per parallel work unit; fixed so reductions are reproducible.
const CHUNK: usize = 4096;

#[derive(Clone, Debug)]
pub struct SurfacePatch {
    phase: PhaseFunction,
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    max_gap: f64,
    rings: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PatchSummary {
    pub nodes: usize,
    pub rings: usize,
    pub total_measure: f64,
    pub max_gap: f64,
}

/// Unit direction in the spatial plane (or on the line).
fn direction(n: usize, theta: f64) -> [f64; 2] {
    if n == 1 {
        [theta.cos().signum(), 0.0]
    } else {
        [theta.cos(), theta.sin()]
    }
}

fn sample_angles(n: usize) -> Vec<f64> {
    if n == 1 {
        vec![0.0, PI]
    } else {
        (0..ANGLE_SAMPLES).map(|l| 2.0 * PI * l as f64 / ANGLE_SAMPLES as f64).collect()
    }
}

/// `∂_r Φ` and `∂_θ Φ` at polar point `(r, θ)`.
fn polar_derivatives(phase: &PhaseFunction, r: f64, theta: f64) -> Result<(f64, f64)> {
    let n = phase.n();
    let d = direction(n, theta);
    let xi: Vec<f64> = d[..n].iter().map(|c| r * c).collect();
    let g = phase.gradient(&xi)?;
    let radial: f64 = g.iter().zip(&d[..n]).map(|(a, b)| a * b).sum();
    let angular = if n == 2 { r * (-g[0] * d[1] + g[1] * d[0]) } else { 0.0 };
    Ok((radial, angular))
}

/// Steepest radial arclength density `max_θ √(1 + (∂_rΦ)²)`, slightly inflated.
fn radial_density(phase: &PhaseFunction, r: f64, angles: &[f64]) -> Result<f64> {
    let mut g: f64 = 1.0;
    for &t in angles {
        let (dr, _) = polar_derivatives(phase, r, t)?;
        g = g.max((1.0 + dr * dr).sqrt());
    }
    Ok(SLOPE_MARGIN * g)
}

/// Cumulative arclength table `(r_i, S(r_i))` on `[1/2, 2]`.
fn arclength_table(phase: &PhaseFunction, angles: &[f64]) -> Result<Vec<(f64, f64)>> {
    let h = (R_MAX - R_MIN) / ARC_TABLE as f64;
    let mut table = Vec::with_capacity(ARC_TABLE + 1);
    let mut s = 0.0;
    let mut prev = radial_density(phase, R_MIN, angles)?;
    table.push((R_MIN, 0.0));
    for i in 1..=ARC_TABLE {
        let r = R_MIN + i as f64 * h;
        let cur = radial_density(phase, r, angles)?;
        s += 0.5 * h * (prev + cur);
        table.push((r, s));
        prev = cur;
    }
    Ok(table)
}

fn invert(table: &[(f64, f64)], s: f64) -> f64 {
    let i = table.partition_point(|&(_, v)| v < s).clamp(1, table.len() - 1);
    let ((r0, s0), (r1, s1)) = (table[i - 1], table[i]);
    r0 + (r1 - r0) * (s - s0) / (s1 - s0)
}

/// Total radial arclength of the steepest profile; `max_gap ≤ length / rings`.
pub fn radial_arclength(phase: &PhaseFunction) -> Result<f64> {
    let table = arclength_table(phase, &sample_angles(phase.n()))?;
    Ok(table.last().expect("non-empty").1)
}

/// Ring count that keeps `|z|·max_gap ≤ 1/4` for all `|z| ≤ z_max`.
pub fn rings_for_frequency(phase: &PhaseFunction, z_max: f64) -> Result<usize> {
    let length = radial_arclength(phase)?;
    Ok(((4.0 * z_max * length * 1.001).ceil() as usize).max(32))
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn surface_point(phase: &PhaseFunction, r: f64, theta: f64) -> Vec<f64> {
    let n = phase.n();
    let d = direction(n, theta);
    let mut p: Vec<f64> = d[..n].iter().map(|c| r * c).collect();
    p.push(phase.value_unchecked(&p));
    p
}

pub fn build_patch(phase: &PhaseFunction, nodes_per_dim: usize) -> Result<SurfacePatch> {
    if nodes_per_dim < 32 {
        return Err(Error::argument(format!(
            "nodes_per_dim must be at least 32, got {nodes_per_dim}"
        )));
    }
    let n = phase.n();
    let angles = sample_angles(n);
    let table = arclength_table(phase, &angles)?;
    let length = table.last().expect("non-empty").1;
    let ds = length / nodes_per_dim as f64;

    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut max_gap: f64 = 0.0;
    let mut previous_ring: Option<f64> = None;
    for i in 0..nodes_per_dim {
        let r = invert(&table, (i as f64 + 0.5) * ds);
        // dr = ds / g(r) at the midpoint of the arclength cell
        let dr = ds / radial_density(phase, r, &angles)?;
        let ring_angles: Vec<f64> = if n == 1 {
            vec![0.0, PI]
        } else {
            let mut a_max: f64 = 0.0;
            for &t in &angles {
                let (_, da) = polar_derivatives(phase, r, t)?;
                a_max = a_max.max((r * r + da * da).sqrt());
            }
            let count = ((2.0 * PI * SLOPE_MARGIN * a_max / ds).ceil() as usize).max(8);
            (0..count).map(|l| 2.0 * PI * l as f64 / count as f64).collect()
        };
        let dtheta = if n == 1 { 1.0 } else { 2.0 * PI / ring_angles.len() as f64 };
        let jac = if n == 1 { 1.0 } else { r };
        let mut ring_points = Vec::with_capacity(ring_angles.len());
        for &t in &ring_angles {
            let p = surface_point(phase, r, t);
            let grad = phase.gradient(&p[..n])?;
            let g2: f64 = grad.iter().map(|v| v * v).sum();
            if !g2.is_finite() {
                return Err(Error::Numeric(format!("phase gradient is not finite at {:?}", &p[..n])));
            }
            weights.push((1.0 + g2).sqrt() * jac * dr * dtheta);
            nodes.extend_from_slice(&p);
            ring_points.push(p);
        }
        if n == 2 {
            for w in 0..ring_points.len() {
                max_gap = max_gap.max(dist(&ring_points[w], &ring_points[(w + 1) % ring_points.len()]));
            }
        }
        if let Some(r_prev) = previous_ring {
            for &t in &angles {
                max_gap = max_gap.max(dist(&surface_point(phase, r_prev, t), &surface_point(phase, r, t)));
            }
        }
        previous_ring = Some(r);
    }

    Ok(SurfacePatch {
        phase: phase.clone(),
        dim: n + 1,
        nodes,
        weights,
        max_gap,
        rings: nodes_per_dim,
    })
}

impl SurfacePatch {
    pub fn phase(&self) -> &PhaseFunction {
        &self.phase
    }

    /// Space-time dimension `n + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_gap(&self) -> f64 {
        self.max_gap
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn summary(&self) -> PatchSummary {
        PatchSummary {
            nodes: self.len(),
            rings: self.rings,
            total_measure: self.total_measure(),
            max_gap: self.max_gap,
        }
    }

    /// Largest `|z|` allowed by `|z|·max_gap ≤ 1/4`.
    pub fn frequency_limit(&self) -> f64 {
        0.25 / self.max_gap
    }

    fn check_frequency(&self, norm: f64) -> Result<()> {
        if norm * self.max_gap > 0.25 {
            return Err(Error::argument(format!(
                "|z| = {norm} aliases on this patch (max node gap {}, limit {})",
                self.max_gap,
                self.frequency_limit()
            )));
        }
        Ok(())
    }

    /// `Σ_i w_i g_i e^{s·i z·node_i}` with a fixed reduction order.
    pub(crate) fn weighted_sum(&self, z: &[f64], sign: f64, g: Option<&[Complex64]>) -> Complex64 {
        let parts: Vec<Complex64> = (0..self.len())
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|idx| {
                let mut acc = Complex64::new(0.0, 0.0);
                for &i in idx {
                    let phase: f64 = self.node(i).iter().zip(z).map(|(a, b)| a * b).sum();
                    let (s, c) = (sign * phase).sin_cos();
                    let w = self.weights[i];
                    let e = Complex64::new(w * c, w * s);
                    acc += match g {
                        Some(g) => e * g[i],
                        None => e,
                    };
                }
                acc
            })
            .collect();
        parts.into_iter().sum()
    }

    /// `d̂σ(z) = Σ_i w_i e^{−i z·(ξ_i, Φ(ξ_i))}`.
    pub fn surface_measure_transform(&self, z: &[f64]) -> Result<Complex64> {
        self.check_point(z)?;
        self.check_frequency(z.iter().map(|v| v * v).sum::<f64>().sqrt())?;
        Ok(self.weighted_sum(z, -1.0, None))
    }

    pub(crate) fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::argument(format!(
                "point has dimension {}, expected {}",
                z.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// `d̂σ(s·u)` at `s = start + k·step`, `k < count`, via a per-node phase recurrence.
    pub fn transform_along_ray(&self, u: &[f64], start: f64, step: f64, count: usize) -> Result<Vec<Complex64>> {
        self.check_point(u)?;
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::argument("ray direction must be a unit vector"));
        }
        if count == 0 {
            return Ok(Vec::new());
        }
        let last = start + step * (count - 1) as f64;
        self.check_frequency(start.abs().max(last.abs()))?;
        let parts: Vec<Vec<Complex64>> = (0..self.len())
            .collect::<Vec<_>>()
            .par_chunks(CHUNK)
            .map(|idx| {
                let mut acc = vec![Complex64::new(0.0, 0.0); count];
                for &i in idx {
                    let theta: f64 = self.node(i).iter().zip(u).map(|(a, b)| a * b).sum();
                    let mut e = Complex64::from_polar(self.weights[i], -start * theta);
                    let rot = Complex64::from_polar(1.0, -step * theta);
                    for a in acc.iter_mut() {
                        *a += e;
                        e *= rot;
                    }
                }
                acc
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        for p in parts {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        Ok(out)
    }
}
