//! `(N, R)`-sparse ball collections, layered decompositions of lattice cube sets,
//! fiber stratification and the ε-schedule.

mod cubes;
mod decompose;
mod schedule;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cubes::{fiber_stratify, CubeSet, Stratum};
pub use decompose::{
    closed_form_radius, decompose, is_sparse_cells, recursive_radius, BallRecord, CollectionRecord,
    CoverageEntry, DecompositionResult, Layer, Radius,
};
pub use schedule::{dual_exponent, epsilon_schedule, feasible_epsilon, schedule_at, schedule_grid, EpsilonSchedule, ScheduleSearch};

/// Balls of a common radius whose centers are meant to be `(N·R)^γ`-separated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseCollection {
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityCheck {
    pub sparse: bool,
    /// `(N·R)^γ`.
    pub required: f64,
    /// Closest pair of centers, if there are at least two.
    pub worst: Option<WorstPair>,
    /// Set when there were no centers at all.
    pub vacuous: bool,
}

impl SparseCollection {
    pub fn new(centers: Vec<Vec<f64>>, radius: f64, gamma: f64) -> Result<Self> {
        check_parameters(radius, gamma)?;
        if let Some(first) = centers.first() {
            if centers.iter().any(|c| c.len() != first.len()) {
                return Err(Error::argument("centers have mixed dimensions"));
            }
        }
        Ok(SparseCollection { centers, radius, gamma })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn check(&self) -> Result<SparsityCheck> {
        is_sparse(&self.centers, self.radius, self.gamma)
    }
}

fn check_parameters(radius: f64, gamma: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::argument(format!("radius must be positive, got {radius}")));
    }
    if !(gamma >= 2.0 && gamma.is_finite()) {
        return Err(Error::argument(format!("gamma must be at least 2, got {gamma}")));
    }
    Ok(())
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Exhaustive pairwise check of `|z_i − z_j| ≥ (N·R)^γ`.
pub fn is_sparse(centers: &[Vec<f64>], radius: f64, gamma: f64) -> Result<SparsityCheck> {
    check_parameters(radius, gamma)?;
    let required = (centers.len() as f64 * radius).powf(gamma);
    let mut worst: Option<WorstPair> = None;
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let d = distance(&centers[i], &centers[j]);
            if worst.as_ref().is_none_or(|w| d < w.distance) {
                worst = Some(WorstPair { i, j, distance: d });
            }
        }
    }
    Ok(SparsityCheck {
        sparse: worst.as_ref().is_none_or(|w| w.distance >= required),
        required,
        worst,
        vacuous: centers.is_empty(),
    })
}
