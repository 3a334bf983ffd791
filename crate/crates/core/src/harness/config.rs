//! Declarative experiment description and its validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::norms::MixedNormSpec;
use crate::phase::{PhaseFunction, PhaseSpec};
use crate::spectral::{GridSpec, TaperSpec};

use super::battery::BATTERY_IDS;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    ValidatePhase,
    Propagate,
    Norms,
    Squarefn,
    Ddecay,
    Orthogonality,
    SparseDecompose,
    Stratify,
    Schedule,
    Scan,
    LocalGlobal,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::ValidatePhase => "validate-phase",
            Experiment::Propagate => "propagate",
            Experiment::Norms => "norms",
            Experiment::Squarefn => "squarefn",
            Experiment::Ddecay => "ddecay",
            Experiment::Orthogonality => "orthogonality",
            Experiment::SparseDecompose => "sparse-decompose",
            Experiment::Stratify => "stratify",
            Experiment::Schedule => "schedule",
            Experiment::Scan => "scan",
            Experiment::LocalGlobal => "local-global",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseParams {
    /// Number of layers.
    #[serde(rename = "K", default)]
    pub k_layers: Option<u32>,
    /// Overrides `γ = n/ρ` from the phase.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub c_delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SquarefnParams {
    pub k: i32,
    pub js: Vec<i32>,
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    #[serde(default)]
    pub taper: Option<TaperSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    pub r_min: f64,
    pub r_max: f64,
    pub count: usize,
    pub directions: usize,
    /// Radial rings of the surface patch; defaults to what resolves `r_max`.
    #[serde(default)]
    pub rings: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrthogonalityParams {
    /// Collection sizes `N`.
    pub counts: Vec<usize>,
    /// Ball radius `R`.
    pub radius: f64,
    /// Lattice spacing of the samples inside each ball.
    pub spacing: f64,
    /// Direction along which the ball centres are placed.
    pub direction: Vec<f64>,
    /// Separations for the two-ball cross-term decay.
    #[serde(default)]
    pub separations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CubeLayout {
    /// Uniform cells in `[0, side)^dim`.
    Box { side: i64 },
    /// Blobs of `⌊|E|^{1/K}⌋` cells, far apart.
    Clustered,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeParams {
    pub dim: usize,
    pub cells: usize,
    pub layout: CubeLayout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    #[serde(default)]
    pub epsilon: Option<f64>,
    /// `(q₀, r₀, q, r)`; the extension side `q > q₀`, `r > r₀` is mapped to the
    /// restriction side `q < q₀`, `r < r₀` through Hölder duals.
    #[serde(default)]
    pub exponents: Option<[f64; 4]>,
    #[serde(default)]
    pub depth: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanParams {
    pub q_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub lambdas: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalGlobalParams {
    pub q0: f64,
    pub r0: f64,
    pub q: f64,
    pub r: f64,
    pub radii: Vec<f64>,
    /// Battery profile used as data.
    #[serde(default)]
    pub profile: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<PhaseSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<MixedNormSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sparse: Option<SparseParams>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Battery id for experiments that need data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub battery: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub squarefn: Option<SquarefnParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orthogonality: Option<OrthogonalityParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubes: Option<CubeParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_global: Option<LocalGlobalParams>,
}

fn need<'a, T>(value: &'a Option<T>, field: &str, experiment: Experiment) -> Result<&'a T> {
    value
        .as_ref()
        .ok_or_else(|| Error::validation(field, format!("required by experiment `{}`", experiment.name())))
}

fn field<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Validation { .. } => e,
        other => Error::validation(name, other.to_string()),
    })
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(name, format!("must be a positive number, got {v}")))
    }
}

impl ExperimentConfig {
    /// Parses a JSON document; unknown keys and malformed values are validation errors.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::validation(json_path(&e), e.to_string()))?;
        Ok(config)
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        // serde_json maps are ordered, so going through a Value sorts every key
        Ok(serde_json::to_string(&serde_json::to_value(self)?)?)
    }

    /// SHA-256 of the canonical JSON, in hex.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_canonical_json()?.as_bytes())))
    }

    pub fn phase_function(&self) -> Result<PhaseFunction> {
        let spec = need(&self.phase, "phase", self.experiment)?;
        field("phase", PhaseFunction::try_from(spec.clone()))
    }

    /// Checks every field the experiment uses, before anything runs.
    pub fn validate(&self) -> Result<()> {
        use Experiment::*;
        let e = self.experiment;
        let needs_phase = !matches!(e, SparseDecompose | Stratify | Schedule);
        let phase = if needs_phase { Some(self.phase_function()?) } else { None };
        let needs_grid = matches!(e, Propagate | Norms | Squarefn | Scan | LocalGlobal);
        if needs_grid {
            let grid = need(&self.grid, "grid", e)?;
            field("grid", grid.validate())?;
            if let Some(p) = &phase {
                if p.n() != grid.n {
                    return Err(Error::validation("grid.n", format!("phase is {}-dimensional", p.n())));
                }
            }
        }
        if let Some(norm) = &self.norm {
            field("norm", norm.validate())?;
        }
        if matches!(e, Norms) {
            need(&self.norm, "norm", e)?;
        }
        if matches!(e, Propagate | Norms | Squarefn | Scan | LocalGlobal) {
            let id = self.battery_id();
            if !BATTERY_IDS.contains(&id) {
                return Err(Error::validation("battery", format!("unknown battery `{id}`, expected one of {BATTERY_IDS:?}")));
            }
        }
        if let Some(s) = &self.sparse {
            if let Some(k) = s.k_layers {
                if k == 0 {
                    return Err(Error::validation("sparse.K", "must be at least 1"));
                }
            }
            if let Some(g) = s.gamma {
                if !(g.is_finite() && g >= 2.0) {
                    return Err(Error::validation("sparse.gamma", format!("must be at least 2, got {g}")));
                }
            }
            if let Some(c) = s.c_delta {
                if !(c.is_finite() && c >= 0.0) {
                    return Err(Error::validation("sparse.c_delta", format!("must be non-negative, got {c}")));
                }
            }
        }
        match e {
            Squarefn => {
                let p = need(&self.squarefn, "squarefn", e)?;
                if p.js.is_empty() {
                    return Err(Error::validation("squarefn.js", "needs at least one temporal shell"));
                }
                if let (Some(x), Some(g)) = (&p.point, &self.grid) {
                    if x.len() != g.n {
                        return Err(Error::validation("squarefn.point", format!("must have {} coordinates", g.n)));
                    }
                }
                if let Some(t) = &p.taper {
                    field("squarefn.taper", t.validate())?;
                }
            }
            Ddecay => {
                let p = need(&self.decay, "decay", e)?;
                positive("decay.r_min", p.r_min)?;
                if !(p.r_max > p.r_min && p.r_max.is_finite()) {
                    return Err(Error::validation("decay.r_max", "must exceed r_min"));
                }
                if p.count < 2 {
                    return Err(Error::validation("decay.count", "needs at least two radii"));
                }
                if p.directions == 0 {
                    return Err(Error::validation("decay.directions", "needs at least one direction"));
                }
            }
            Orthogonality => {
                let p = need(&self.orthogonality, "orthogonality", e)?;
                if p.counts.is_empty() || p.counts.contains(&0) {
                    return Err(Error::validation("orthogonality.counts", "needs positive collection sizes"));
                }
                positive("orthogonality.radius", p.radius)?;
                positive("orthogonality.spacing", p.spacing)?;
                let n = phase.as_ref().map(|p| p.n()).unwrap_or(1);
                let norm: f64 = p.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
                if p.direction.len() != n + 1 || !(norm > 0.0) {
                    return Err(Error::validation(
                        "orthogonality.direction",
                        format!("must be a nonzero vector with {} coordinates", n + 1),
                    ));
                }
                for &s in &p.separations {
                    positive("orthogonality.separations", s)?;
                }
            }
            SparseDecompose | Stratify => {
                let p = need(&self.cubes, "cubes", e)?;
                if !(2..=4).contains(&p.dim) {
                    return Err(Error::validation("cubes.dim", format!("must be 2, 3 or 4, got {}", p.dim)));
                }
                if p.cells < 2 {
                    return Err(Error::validation("cubes.cells", "needs at least two cells"));
                }
                if let CubeLayout::Box { side } = p.layout {
                    if side < 1 || (side as f64).powi(p.dim as i32) < p.cells as f64 {
                        return Err(Error::validation("cubes.layout.side", "box is too small for the cell count"));
                    }
                }
            }
            Schedule => {
                let p = need(&self.schedule, "schedule", e)?;
                if let Some(eps) = p.epsilon {
                    if !(eps > 0.0 && eps <= 1.0) {
                        return Err(Error::validation("schedule.epsilon", format!("must lie in (0, 1], got {eps}")));
                    }
                }
                if let Some(e) = p.exponents {
                    let [q0, r0, q, r] = restriction_side(e);
                    if !(1.0 <= q && q < q0 && 1.0 <= r && r < r0) {
                        return Err(Error::validation(
                            "schedule.exponents",
                            "need 1 ≤ q < q0 and 1 ≤ r < r0, or q > q0 ≥ 1 and r > r0 ≥ 1",
                        ));
                    }
                }
                if p.epsilon.is_none() && p.exponents.is_none() {
                    return Err(Error::validation("schedule", "needs epsilon, exponents or both"));
                }
            }
            Scan => {
                let p = need(&self.scan, "scan", e)?;
                if p.q_grid.is_empty() || p.r_grid.is_empty() || p.lambdas.is_empty() {
                    return Err(Error::validation("scan", "q_grid, r_grid and lambdas must be non-empty"));
                }
                for &v in p.q_grid.iter().chain(&p.r_grid) {
                    if !(v >= 1.0) {
                        return Err(Error::validation("scan", format!("exponents must be at least 1, got {v}")));
                    }
                }
                for &l in &p.lambdas {
                    positive("scan.lambdas", l)?;
                    if l.log2().fract() != 0.0 {
                        return Err(Error::validation("scan.lambdas", format!("{l} is not a power of two")));
                    }
                }
                if let Some(p) = &phase {
                    if !(p.m() > 1.0) {
                        return Err(Error::validation("phase", "the scan needs m > 1"));
                    }
                }
            }
            LocalGlobal => {
                let p = need(&self.local_global, "local_global", e)?;
                if !(p.q0 >= 2.0 && p.r0 >= 2.0 && p.q > p.q0 && p.r > p.r0) {
                    return Err(Error::validation("local_global", "need q > q0 ≥ 2 and r > r0 ≥ 2"));
                }
                if p.radii.is_empty() {
                    return Err(Error::validation("local_global.radii", "needs at least one radius"));
                }
                for &r in &p.radii {
                    positive("local_global.radii", r)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn battery_id(&self) -> &str {
        self.battery.as_deref().unwrap_or(super::battery::DEFAULT_BATTERY)
    }
}

/// Maps an extension-side tuple (`q > q₀`, `r > r₀`) to its Hölder duals.
pub fn restriction_side(exponents: [f64; 4]) -> [f64; 4] {
    let [q0, r0, q, r] = exponents;
    if q > q0 && r > r0 {
        exponents.map(crate::sparse::dual_exponent)
    } else {
        exponents
    }
}

fn json_path(e: &serde_json::Error) -> String {
    // serde reports the offending key inside the message, e.g. "unknown field `foo`"
    let msg = e.to_string();
    match msg.split('`').nth(1) {
        Some(key) if msg.starts_with("unknown field") || msg.starts_with("missing field") => key.to_string(),
        _ => format!("line {} column {}", e.line(), e.column()),
    }
}
