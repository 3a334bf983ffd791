//! Seeded inputs for the sparse experiments: cube sets and sparse ball families.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::PhaseFunction;
use crate::restriction::{
    log_log_slope, rings_for_frequency, sparse_orthogonality_test, build_patch, ModulatedBump, SampleSet,
};
use crate::sparse::{CubeSet, SparseCollection};

use super::config::{CubeLayout, OrthogonalityParams};

/// Cube set of `cells` cells in `ℤ^dim` drawn from `seed`.
///
/// The clustered layout takes compact blobs of `⌊cells^{1/K}⌋` cells around anchors
/// placed on a lattice of spacing `3·cells^γ`, so blobs are
/// separated by more than `2R₁` and each fits a first-layer ball.
pub fn random_cube_set(seed: u64, dim: usize, cells: usize, layout: &CubeLayout, k_layers: u32, gamma: f64) -> Result<CubeSet> {
    if cells == 0 {
        return Err(Error::argument("a cube set needs at least one cell"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = CubeSet::new(dim)?;
    match layout {
        CubeLayout::Box { side } => {
            if (*side as f64).powi(dim as i32) < cells as f64 {
                return Err(Error::argument("box is too small for the cell count"));
            }
            while e.len() < cells {
                e.insert((0..dim).map(|_| rng.random_range(0..*side)).collect())?;
            }
        }
        CubeLayout::Clustered => {
            let size = ((cells as f64).powf(1.0 / k_layers.max(1) as f64) + 1e-9).floor().max(1.0) as usize;
            let clusters = cells.div_ceil(size);
            let spacing = 3 * ((cells as f64).powf(gamma).ceil() as i64);
            let side = ((clusters as f64).powf(1.0 / dim as f64).ceil() as i64) + 1;
            let mut anchors: Vec<Vec<i64>> = (0..side.pow(dim as u32))
                .map(|flat| {
                    let mut rest = flat;
                    (0..dim)
                        .map(|_| {
                            let v = rest % side;
                            rest /= side;
                            v * spacing
                        })
                        .collect()
                })
                .collect();
            anchors.shuffle(&mut rng);
            for (c, anchor) in anchors.into_iter().take(clusters).enumerate() {
                let target = size.min(cells - c * size);
                // the `target` cells nearest the anchor, ties broken by the seed
                let reach = (target as f64).powf(1.0 / dim as f64).ceil() as i64 + 1;
                let width = 2 * reach + 1;
                let mut candidates: Vec<(i64, u64, Vec<i64>)> = (0..width.pow(dim as u32))
                    .map(|flat| {
                        let mut rest = flat;
                        let offset: Vec<i64> = (0..dim)
                            .map(|_| {
                                let v = rest % width - reach;
                                rest /= width;
                                v
                            })
                            .collect();
                        let d2 = offset.iter().map(|v| v * v).sum();
                        let cell = anchor.iter().zip(&offset).map(|(a, o)| a + o).collect();
                        (d2, rng.random::<u64>(), cell)
                    })
                    .collect();
                candidates.sort();
                for (_, _, cell) in candidates.into_iter().take(target) {
                    e.insert(cell)?;
                }
            }
        }
    }
    Ok(e)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityRow {
    pub count: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub cross_term: f64,
    pub cross_envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossRow {
    pub separation: f64,
    pub cross_term: f64,
    pub cross_envelope: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalitySweep {
    pub gamma: f64,
    pub rows: Vec<OrthogonalityRow>,
    pub cross: Vec<CrossRow>,
    /// `max ratio / min ratio` over the collection sizes.
    pub ratio_spread: f64,
    /// Minus the log-log slope of the cross envelope against the separation.
    pub cross_decay_exponent: Option<f64>,
}

fn random_ball(seed: u64, center: &[f64], radius: f64, h: f64) -> Result<SampleSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = SampleSet::ball(center, radius, h, |_| Complex64::new(0.0, 0.0))?;
    let values = (0..set.len())
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    set.with_values(values)
}

/// Sparse families along a fixed direction: for each `N`, balls at `i·(NR)^γ·u`,
/// plus the cross term of two balls as their separation grows.
pub fn orthogonality_sweep(phase: &PhaseFunction, gamma: f64, params: &OrthogonalityParams, seed: u64) -> Result<OrthogonalitySweep> {
    let dim = phase.n() + 1;
    if params.direction.len() != dim {
        return Err(Error::argument(format!("direction must have {dim} coordinates")));
    }
    let norm = params.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let u: Vec<f64> = params.direction.iter().map(|v| v / norm).collect();
    let radius = params.radius;
    // keeps the float separation at or above (NR)^γ after rounding
    let stretch = 1.0 + 1e-9;
    let spacing = |count: usize| (count as f64 * radius).powf(gamma) * stretch;
    let reach = params
        .counts
        .iter()
        .map(|&c| (c - 1) as f64 * spacing(c))
        .chain(params.separations.iter().copied())
        .fold(0.0, f64::max)
        + radius;
    let patch = build_patch(phase, rings_for_frequency(phase, reach * 1.05)?)?;
    let bump = ModulatedBump::new(dim)?;
    let at = |s: f64| -> Vec<f64> { u.iter().map(|v| v * s).collect() };

    let rows = params
        .counts
        .iter()
        .map(|&count| {
            let centers: Vec<Vec<f64>> = (0..count).map(|i| at(i as f64 * spacing(count))).collect();
            let fields = centers
                .iter()
                .enumerate()
                .map(|(i, c)| random_ball(seed.wrapping_add(i as u64), c, radius, params.spacing))
                .collect::<Result<Vec<_>>>()?;
            let collection = SparseCollection::new(centers, radius, gamma)?;
            let out = sparse_orthogonality_test(&collection, &fields, &patch, &bump)?;
            Ok(OrthogonalityRow {
                count,
                lhs: out.lhs,
                rhs: out.rhs,
                ratio: out.ratio(),
                cross_term: out.cross_term,
                cross_envelope: out.cross_envelope,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let origin = vec![0.0; dim];
    let first = random_ball(seed, &origin, radius, params.spacing)?;
    let cross = params
        .separations
        .iter()
        .map(|&s| {
            let center = at(s);
            let second = random_ball(seed.wrapping_add(1), &origin, radius, params.spacing)?.translated(&center);
            let collection = SparseCollection::new(vec![origin.clone(), center], radius, gamma)?;
            let out = sparse_orthogonality_test(&collection, &[first.clone(), second], &patch, &bump)?;
            Ok(CrossRow {
                separation: s,
                cross_term: out.cross_term,
                cross_envelope: out.cross_envelope,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let decay: Vec<(f64, f64)> = cross.iter().map(|c| (c.separation, c.cross_envelope)).collect();
    Ok(OrthogonalitySweep {
        gamma,
        rows,
        cross,
        ratio_spread: max / min,
        cross_decay_exponent: log_log_slope(&decay).ok().map(|s| -s),
    })
}
