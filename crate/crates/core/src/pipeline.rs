//! Composite experiments: shell summation, local against global norms with the
//! dyadic rescaling chain, the dilation scan over `(q, r)`, and the sparse-support
//! restriction bound.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::norms::{
    dyadic_rational, mixed_norm, mixed_norms_streamed, regularity_exponent, rescale, rescaled_grid, sobolev_norm,
    Exponent, MixedNormSpec, Region,
};
use crate::phase::PhaseFunction;
use crate::restriction::{check_supports, log_log_slope, restrict, sigma_norm, SampleSet, SurfacePatch};
use crate::sparse::{SparseCollection, SparsityCheck};
use crate::spectral::{project_spatial, propagate, CutoffProfile, GridSpec, SpatialField};

/// A scan verdict is `stable` when every profile keeps `max/min ≤ STABLE_SPREAD` across λ.
pub const STABLE_SPREAD: f64 = 1.5;
/// A monotone trend in λ counts as growth once `|d log ratio / d log λ|` exceeds this.
pub const GROWTH_EXPONENT: f64 = 0.1;
/// Spectral energy below this fraction of the total does not make a shell count.
const SHELL_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellNorm {
    pub k: i32,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSummation {
    /// `‖e^{itΦ(D)}f‖_{L^q_x L^r_t}`.
    pub full: f64,
    /// `(Σ_k ‖e^{itΦ(D)}P_k f‖²)^{1/2}`.
    pub rss: f64,
    pub shells: Vec<ShellNorm>,
}

impl ShellSummation {
    pub fn ratio(&self) -> f64 {
        self.full / self.rss
    }
}

fn check_square_exponents(spec: &MixedNormSpec) -> Result<()> {
    spec.validate()?;
    if spec.q.to_f64() < 2.0 || spec.r.to_f64() < 2.0 {
        return Err(Error::Precondition(format!(
            "shell summation needs q, r ≥ 2, got q = {}, r = {}",
            spec.q, spec.r
        )));
    }
    Ok(())
}

/// Dyadic shells `k` on which `P_k f` carries energy.
pub fn occupied_shells(f: &SpatialField) -> Result<Vec<i32>> {
    let spectrum = f.spectrum();
    let radii = f.lattice.radii();
    let total: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return Err(Error::Degenerate("the field vanishes".into()));
    }
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for (v, &r) in spectrum.iter().zip(&radii) {
        if r > 0.0 && v.norm_sqr() > SHELL_FLOOR * total {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if !lo.is_finite() {
        return Err(Error::Degenerate("the field has no energy away from zero frequency".into()));
    }
    // φ(2^{−k}|ξ|) is supported on 2^{k−1} ≤ |ξ| ≤ 2^{k+1}
    let first = lo.log2().floor() as i32 - 1;
    let last = hi.log2().ceil() as i32 + 1;
    let cutoff = CutoffProfile::default();
    Ok((first..=last)
        .filter(|&k| {
            radii
                .iter()
                .zip(&spectrum)
                .any(|(&r, v)| cutoff.spatial(k, r) > 0.0 && v.norm_sqr() > SHELL_FLOOR * total)
        })
        .collect())
}

/// Full mixed norm against the square sum of the per-shell norms.
pub fn shell_summation_check(
    f: &SpatialField,
    phase: &PhaseFunction,
    spec: &MixedNormSpec,
    grid: &GridSpec,
) -> Result<ShellSummation> {
    check_square_exponents(spec)?;
    let cutoff = CutoffProfile::default();
    let ks = occupied_shells(f)?;
    let pieces = ks
        .iter()
        .map(|&k| project_spatial(f, k, &cutoff))
        .collect::<Result<Vec<_>>>()?;
    let norm_of = |g: &SpatialField| -> Result<f64> { mixed_norm(&propagate(g, phase, grid)?, spec, None) };
    let full = norm_of(f)?;
    let shells = ks
        .iter()
        .zip(&pieces)
        .map(|(&k, g)| Ok(ShellNorm { k, norm: norm_of(g)? }))
        .collect::<Result<Vec<_>>>()?;
    Ok(ShellSummation {
        full,
        rss: root_sum_square(shells.iter().map(|s| s.norm)),
        shells,
    })
}

fn root_sum_square(values: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.map(|x| x * x).collect();
    // summation order fixed by value so the result does not depend on shell order
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellScaling {
    pub k: i32,
    pub norm: f64,
    /// `2^{ks}·norm(k = 0)`.
    pub predicted: f64,
}

/// Norms of `g_k = 2^{kn/2} g(2^k ·)` on the window scaled by `2^{−mk}`; the
/// scaling law predicts `norm_k = 2^{ks} norm_0`.
pub fn shell_scaling_check(
    g: &SpatialField,
    phase: &PhaseFunction,
    spec: &MixedNormSpec,
    grid: &GridSpec,
    ks: &[i32],
) -> Result<Vec<ShellScaling>> {
    spec.validate()?;
    let n = g.lattice.n;
    let s = regularity_exponent(n, phase.m(), spec.q, spec.r).s;
    let base = mixed_norm(&propagate(g, phase, grid)?, spec, None)?;
    ks.iter()
        .map(|&k| {
            let lam = 2f64.powi(k);
            let gk = rescale(g, lam)?.scaled(lam.powf(n as f64 / 2.0).into());
            let norm = mixed_norm(&propagate(&gk, phase, &rescaled_grid(grid, lam, phase.m()))?, spec, None)?;
            Ok(ShellScaling {
                k,
                norm,
                predicted: lam.powf(s) * base,
            })
        })
        .collect()
}

/// Exact exponent when `v` is a dyadic rational, so that `s` can be reported exactly.
pub fn exponent_of(v: f64) -> Exponent {
    if v.is_infinite() {
        return Exponent::Infinity;
    }
    dyadic_rational(v).map(Exponent::Rational).unwrap_or(Exponent::Real(v))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalNorm {
    pub radius: f64,
    /// `‖e^{itΦ(D)}f‖_{L^{q₀}_x(𝔹_R; L^{r₀}_t(𝕀_R))}`.
    pub norm: f64,
    /// The interval `𝕀_R` reaches past the end of the time grid.
    pub truncated: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub k: u32,
    /// `R = 2^k`; the region is `𝔹_R × 𝕀_{R^m}`.
    pub radius: f64,
    pub time: f64,
    pub norm: f64,
    /// `norm / ‖f‖₂`.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalGlobalReport {
    pub q0: f64,
    pub r0: f64,
    pub q: f64,
    pub r: f64,
    pub local: Vec<LocalNorm>,
    /// `(q₀, r₀)` norm over the whole grid; dominates every local norm.
    pub global: f64,
    /// `(q, r)` norm over the whole grid.
    pub target: f64,
    pub s_local: f64,
    pub s_global: f64,
    /// `‖f‖_{H^{s_local}}`.
    pub local_sobolev: f64,
    /// `‖f‖_{Ḣ^{s_global}}`.
    pub global_sobolev: f64,
    /// Steps whose region fits in one period and in the time window.
    pub chain: Vec<ChainStep>,
    /// Least-squares slope of `log₂ normalized` against `k` along the chain.
    pub growth_exponent: Option<f64>,
    /// Relative spectral energy of `f` outside `1/2 ≤ |ξ| ≤ 2`.
    pub annulus_leakage: f64,
}

const CHAIN_STEPS: u32 = 3;

/// Local norms over `𝔹_R × 𝕀_R`, the global norms, and the chain
/// `x ↦ 2^{−k}x, t ↦ 2^{−mk}t` for `k = 0, 1, 2`.
///
/// The rescaled datum on the unit region has the same norm, up to the factor
/// `2^{−k(n/q₀ + m/r₀)}`, as `f` on `𝔹_{2^k} × 𝕀_{2^{mk}}`, which is what is measured.
/// Radii larger than one spatial period are rejected.
#[allow(clippy::too_many_arguments)]
pub fn local_global_experiment(
    f: &SpatialField,
    phase: &PhaseFunction,
    q0: f64,
    r0: f64,
    q: f64,
    r: f64,
    grid: &GridSpec,
    radii: &[f64],
) -> Result<LocalGlobalReport> {
    if !(q0 >= 2.0 && r0 >= 2.0 && q > q0 && r > r0) {
        return Err(Error::Precondition(format!(
            "need q > q0 ≥ 2 and r > r0 ≥ 2, got (q0, r0, q, r) = ({q0}, {r0}, {q}, {r})"
        )));
    }
    grid.validate()?;
    let lattice = grid.lattice()?;
    let t_end = grid.time_span[1];
    let m = phase.m();
    if let Some(&radius) = radii.iter().find(|&&r| !(r > 0.0) || r > lattice.period) {
        return Err(Error::argument(format!(
            "radius {radius} exceeds the grid extent (period {})",
            lattice.period
        )));
    }

    let local_spec = MixedNormSpec::new(exponent_of(q0), exponent_of(r0))?;
    let global_spec = MixedNormSpec::new(exponent_of(q), exponent_of(r))?;
    let u = propagate(f, phase, grid)?;
    let local = radii
        .iter()
        .map(|&radius| {
            let region = Region { radius, time: [0.0, radius] };
            Ok(LocalNorm {
                radius,
                norm: mixed_norm(&u, &local_spec, Some(&region))?,
                truncated: radius > t_end,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let global = mixed_norm(&u, &local_spec, None)?;
    let target = mixed_norm(&u, &global_spec, None)?;

    let n = lattice.n;
    let s_local = regularity_exponent(n, m, local_spec.q, local_spec.r).s;
    let s_global = regularity_exponent(n, m, global_spec.q, global_spec.r).s;
    let l2 = f.l2_norm();
    let chain = (0..CHAIN_STEPS)
        .filter(|&k| 2f64.powi(k as i32) <= lattice.period && 2f64.powf(m * k as f64) <= t_end)
        .map(|k| {
            let radius = 2f64.powi(k as i32);
            let time = radius.powf(m);
            let norm = mixed_norm(&u, &local_spec, Some(&Region { radius, time: [0.0, time] }))?;
            Ok(ChainStep {
                k,
                radius,
                time,
                norm,
                normalized: norm / l2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let growth_exponent = log_log_slope(
        &chain
            .iter()
            .map(|c| (2f64.powi(c.k as i32), c.normalized))
            .collect::<Vec<_>>(),
    )
    .ok();
    let total = f.l2_norm_sq();
    Ok(LocalGlobalReport {
        q0,
        r0,
        q,
        r,
        local,
        global,
        target,
        s_local,
        s_global,
        local_sobolev: sobolev_norm(f, s_local, false)?,
        global_sobolev: sobolev_norm(f, s_global, true)?,
        chain,
        growth_exponent,
        annulus_leakage: if total > 0.0 { f.energy_outside(0.5, 2.0) / total } else { 0.0 },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Inconclusive,
    Growing,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Growing => "growing",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRatio {
    pub profile: String,
    pub lambda: f64,
    /// `None` when the dilated datum does not fit on the lattice.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub s_exact: Option<String>,
    pub ratios: Vec<ScanRatio>,
    /// Largest `max/min` over λ among the profiles.
    pub spread: f64,
    /// Per-profile slope of `log ratio` against `log λ`, largest in magnitude.
    pub exponent: f64,
    pub verdict: Verdict,
}

impl ScanPoint {
    pub fn in_region(&self, bound: f64) -> bool {
        3.0 / self.q + 1.0 / self.r < bound && self.r >= 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryScan {
    pub m: f64,
    pub lambdas: Vec<f64>,
    pub profiles: Vec<String>,
    pub points: Vec<ScanPoint>,
}

fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "nan".to_string()
    }
}

impl CorollaryScan {
    /// One row per `(q, r, profile, λ)`: `q,r,s,profile,lambda,ratio,verdict`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("q,r,s,profile,lambda,ratio,verdict\n");
        for p in &self.points {
            for row in &p.ratios {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    format_value(p.q),
                    format_value(p.r),
                    format_value(p.s),
                    row.profile,
                    format_value(row.lambda),
                    format_value(row.ratio.unwrap_or(f64::NAN)),
                    p.verdict.as_str()
                );
            }
        }
        out
    }

    pub fn point(&self, q: f64, r: f64) -> Option<&ScanPoint> {
        self.points.iter().find(|p| p.q == q && p.r == r)
    }
}

fn profile_verdict(series: &[(f64, f64)]) -> (Verdict, f64, f64) {
    let max = series.iter().map(|p| p.1).fold(0.0, f64::max);
    let min = series.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let spread = max / min;
    let exponent = log_log_slope(series).unwrap_or(f64::NAN);
    if series.len() < 2 || !exponent.is_finite() {
        return (Verdict::Inconclusive, spread, exponent);
    }
    if spread <= STABLE_SPREAD {
        return (Verdict::Stable, spread, exponent);
    }
    let increasing = series.windows(2).all(|w| w[1].1 >= w[0].1);
    let decreasing = series.windows(2).all(|w| w[1].1 <= w[0].1);
    if (increasing || decreasing) && exponent.abs() > GROWTH_EXPONENT {
        (Verdict::Growing, spread, exponent)
    } else {
        (Verdict::Inconclusive, spread, exponent)
    }
}

/// Minimum battery size accepted by [`corollary_scan`].
pub const MIN_PROFILES: usize = 5;

/// `estimate_ratio` over dilations `λ` of every battery profile for each `(q, r)`.
///
/// One propagation per `(profile, λ)` serves all exponent pairs. Lists of `λ` are
/// sorted ascending; dilations that do not fit the lattice leave a missing ratio
/// and make the point inconclusive.
pub fn corollary_scan(
    phase: &PhaseFunction,
    grid: &GridSpec,
    battery: &[(String, SpatialField)],
    q_grid: &[f64],
    r_grid: &[f64],
    lambdas: &[f64],
) -> Result<CorollaryScan> {
    let m = phase.m();
    if !(m > 1.0) {
        return Err(Error::Precondition(format!("the scan needs m > 1, got {m}")));
    }
    if battery.len() < MIN_PROFILES {
        return Err(Error::Precondition(format!(
            "the scan needs at least {MIN_PROFILES} data profiles, got {}",
            battery.len()
        )));
    }
    if lambdas.is_empty() {
        return Err(Error::argument("no dilations to scan"));
    }
    let mut lambdas = lambdas.to_vec();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let n = grid.n;
    let specs: Vec<MixedNormSpec> = q_grid
        .iter()
        .flat_map(|&q| r_grid.iter().map(move |&r| (q, r)))
        .map(|(q, r)| MixedNormSpec::new(exponent_of(q), exponent_of(r)))
        .collect::<Result<_>>()?;
    let exponents: Vec<_> = specs
        .iter()
        .map(|spec| regularity_exponent(n, m, spec.q, spec.r))
        .collect();

    let jobs: Vec<(usize, f64)> = (0..battery.len())
        .flat_map(|p| lambdas.iter().map(move |&l| (p, l)))
        .collect();
    let results: Vec<Vec<Option<f64>>> = jobs
        .par_iter()
        .map(|&(p, lam)| {
            let evaluate = || -> Result<Vec<f64>> {
                let f = rescale(&battery[p].1, lam)?;
                let g = rescaled_grid(grid, lam, m);
                let numerators = mixed_norms_streamed(&f, phase, &g, &specs, None)?;
                numerators
                    .iter()
                    .zip(&exponents)
                    .map(|(num, e)| Ok(num / sobolev_norm(&f, e.s, true)?))
                    .collect()
            };
            match evaluate() {
                Ok(v) => v.into_iter().map(Some).collect(),
                Err(_) => vec![None; specs.len()],
            }
        })
        .collect();

    let points = specs
        .iter()
        .enumerate()
        .map(|(si, spec)| {
            let mut ratios = Vec::with_capacity(jobs.len());
            let mut verdict = Verdict::Stable;
            let mut spread = 1.0f64;
            let mut exponent = 0.0f64;
            for (p, (name, _)) in battery.iter().enumerate() {
                let rows: Vec<(f64, Option<f64>)> = lambdas
                    .iter()
                    .enumerate()
                    .map(|(li, &lam)| (lam, results[p * lambdas.len() + li][si]))
                    .collect();
                let series: Option<Vec<(f64, f64)>> = rows
                    .iter()
                    .map(|(l, v)| v.filter(|x| x.is_finite() && *x > 0.0).map(|x| (*l, x)))
                    .collect();
                let (pv, ps, pe) = match series {
                    Some(s) => profile_verdict(&s),
                    None => (Verdict::Inconclusive, f64::NAN, f64::NAN),
                };
                verdict = verdict.max(pv);
                // NaN marks a profile without a usable series and stays sticky
                spread = if spread.is_nan() || ps.is_nan() { f64::NAN } else { spread.max(ps) };
                if !exponent.is_nan() && (pe.is_nan() || pe.abs() > exponent.abs()) {
                    exponent = pe;
                }
                ratios.extend(rows.into_iter().map(|(lambda, ratio)| ScanRatio {
                    profile: name.clone(),
                    lambda,
                    ratio,
                }));
            }
            ScanPoint {
                q: spec.q.to_f64(),
                r: spec.r.to_f64(),
                s: exponents[si].s,
                s_exact: exponents[si].exact.clone(),
                ratios,
                spread,
                exponent,
                verdict,
            }
        })
        .collect();
    Ok(CorollaryScan {
        m,
        lambdas,
        profiles: battery.iter().map(|(name, _)| name.clone()).collect(),
        points,
    })
}

/// Norm `L^q_x L^r_t` of space-time samples whose last coordinate is time.
///
/// Samples are grouped by their exact spatial coordinates; each sample carries
/// `h^n` in space and `h` in time with `h = cell^{1/(n+1)}`.
pub fn sample_mixed_norm(f: &SampleSet, q: f64, r: f64) -> Result<f64> {
    if !(q >= 1.0 && r >= 1.0) {
        return Err(Error::argument(format!("exponents must be at least 1, got q = {q}, r = {r}")));
    }
    let dim = f.dim();
    if dim < 2 {
        return Err(Error::argument("space-time samples need at least one spatial axis"));
    }
    let h = f.cell().powf(1.0 / dim as f64);
    let mut columns: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    for (p, v) in f.points().zip(f.values()) {
        let key: Vec<u64> = p[..dim - 1].iter().map(|x| (x + 0.0).to_bits()).collect();
        *columns.entry(key).or_insert(0.0) += h * v.norm().powf(r);
    }
    let spatial_cell = h.powi(dim as i32 - 1);
    let total: f64 = columns.values().map(|a| spatial_cell * a.powf(q / r)).sum();
    Ok(total.powf(1.0 / q))
}

#[derive(Clone, Debug, Serialize)]
pub struct SupportRestriction {
    /// `‖ℛ(Σ f_i)‖_{L²(dσ)}`.
    pub lhs: f64,
    /// `‖Σ f_i‖_{L^q_x L^r_t}`.
    pub rhs_mixed: f64,
    /// `(Σ_i ‖f_i‖²_{L^q_x L^r_t})^{1/2}`.
    pub intermediate: f64,
    pub pieces: Vec<f64>,
    pub sparsity: SparsityCheck,
}

impl SupportRestriction {
    pub fn ratio(&self) -> f64 {
        self.lhs / self.rhs_mixed
    }
}

/// Restriction of a function supported on a sparse union of balls against its mixed norm.
pub fn sparse_support_restriction_test(
    collection: &SparseCollection,
    fields: &[SampleSet],
    patch: &SurfacePatch,
    q: f64,
    r: f64,
) -> Result<SupportRestriction> {
    if !(q > 1.0 && q <= 2.0 && r > 1.0 && r <= 2.0) {
        return Err(Error::Precondition(format!("need 1 < q, r ≤ 2, got q = {q}, r = {r}")));
    }
    let sparsity = check_supports(collection, fields)?;
    let nonempty: Vec<SampleSet> = fields.iter().filter(|f| !f.is_empty()).cloned().collect();
    let total = SampleSet::union(&nonempty)?;
    let lhs = sigma_norm(patch, &restrict(&total, patch)?);
    let pieces = fields
        .iter()
        .map(|f| if f.is_empty() { Ok(0.0) } else { sample_mixed_norm(f, q, r) })
        .collect::<Result<Vec<_>>>()?;
    Ok(SupportRestriction {
        lhs,
        rhs_mixed: sample_mixed_norm(&total, q, r)?,
        intermediate: root_sum_square(pieces.iter().copied()),
        pieces,
        sparsity,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingChain {
    pub l2: f64,
    pub lq: f64,
    pub lr: f64,
    /// `‖a‖₂ ≤ ‖a‖_q ≤ ‖a‖_r` up to a relative rounding slack.
    pub holds: bool,
}

/// Relative slack allowed for rounding in [`embedding_chain`].
pub const EMBEDDING_SLACK: f64 = 1e-13;

fn lp(a: &[f64], p: f64) -> f64 {
    let scale = a.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * a.iter().map(|v| (v.abs() / scale).powf(p)).sum::<f64>().powf(1.0 / p)
}

/// The sequence inclusions `ℓ^r ⊂ ℓ^q ⊂ ℓ²` for `1 ≤ r ≤ q ≤ 2`.
pub fn embedding_chain(a: &[f64], q: f64, r: f64) -> Result<EmbeddingChain> {
    if !(1.0 <= r && r <= q && q <= 2.0) {
        return Err(Error::Precondition(format!("need 1 ≤ r ≤ q ≤ 2, got q = {q}, r = {r}")));
    }
    let (l2, lq, lr) = (lp(a, 2.0), lp(a, q), lp(a, r));
    let slack = 1.0 + EMBEDDING_SLACK;
    Ok(EmbeddingChain {
        l2,
        lq,
        lr,
        holds: l2 <= lq * slack && lq <= lr * slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::restriction::build_patch;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(points: usize, period: f64, samples: usize, t1: f64) -> GridSpec {
        GridSpec {
            n: 2,
            points_per_dim: points,
            spatial_period: period,
            time_samples: samples,
            time_span: [0.0, t1],
        }
    }

    fn shell_field(g: &GridSpec, ks: &[i32], seed: u64) -> SpatialField {
        let l = g.lattice().unwrap();
        let c = CutoffProfile::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spectrum = (0..l.len())
            .map(|i| {
                let [a, b] = l.xi(i);
                let r = (a * a + b * b).sqrt();
                // only the centre of each shell, so shells do not overlap
                let w: f64 = ks.iter().map(|&k| (-((r / 2f64.powi(k)).log2() * 4.0).powi(2)).exp() * c.spatial(k, r)).sum();
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * w
            })
            .collect();
        SpatialField::from_spectrum(l, spectrum)
    }

    fn spec(q: i64, r: i64) -> MixedNormSpec {
        MixedNormSpec::new(Exponent::int(q), Exponent::int(r)).unwrap()
    }

    #[test]
    fn single_shell_full_matches_rss() {
        let g = grid(64, 16.0 * PI, 16, 2.0);
        let f = shell_field(&g, &[0], 1);
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        let out = shell_summation_check(&f, &phase, &spec(4, 4), &g).unwrap();
        assert!(out.shells.len() <= 3);
        assert!((0.5..=2.0).contains(&out.ratio()), "{}", out.ratio());
    }

    #[test]
    fn three_shells_are_square_summable() {
        let g = grid(256, 16.0 * PI, 16, 1.0);
        let f = shell_field(&g, &[-2, 0, 2], 2);
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        let out = shell_summation_check(&f, &phase, &spec(4, 4), &g).unwrap();
        assert!(out.shells.len() >= 3);
        assert!(out.full <= 4.0 * out.rss, "C = {}", out.ratio());
        // rss does not depend on the order of the shells
        let reversed = root_sum_square(out.shells.iter().rev().map(|s| s.norm));
        assert_eq!(reversed, out.rss);
    }

    #[test]
    fn shell_summation_preconditions() {
        let g = grid(16, 8.0, 4, 1.0);
        let f = shell_field(&g, &[0], 3);
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        assert!(matches!(
            shell_summation_check(&f, &phase, &spec(4, 1), &g),
            Err(Error::Precondition(_))
        ));
        // energy right up to the Nyquist frequency leaves the top shell unresolved
        let l = g.lattice().unwrap();
        let noisy = SpatialField::from_spectrum(l, vec![Complex64::new(1.0, 0.0); l.len()]);
        assert!(matches!(
            shell_summation_check(&noisy, &phase, &spec(4, 4), &g),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn parabolic_rescaling_weights() {
        let g = grid(256, 64.0, 32, 1.0);
        let l = g.lattice().unwrap();
        let c = CutoffProfile::default();
        let f = SpatialField::from_fourier(l, |xi| {
            let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            Complex64::new(c.spatial(0, r) * (-(xi[0] - 1.0).powi(2)).exp(), 0.0)
        });
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        for (q, r) in [(4, 4), (6, 2)] {
            let out = shell_scaling_check(&f, &phase, &spec(q, r), &g, &[0, 1, 2]).unwrap();
            for step in &out {
                let rel = (step.norm / step.predicted - 1.0).abs();
                assert!(rel < 0.05, "k = {}: {rel}", step.k);
            }
        }
    }

    fn gaussian_annulus(l: crate::spectral::Lattice) -> SpatialField {
        let c = CutoffProfile::default();
        SpatialField::from_fourier(l, |xi| {
            let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
            Complex64::new(c.spatial(0, r), 0.0)
        })
    }

    #[test]
    fn local_norms_nest() {
        let g = grid(128, 64.0, 160, 20.0);
        let f = gaussian_annulus(g.lattice().unwrap());
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        let rep = local_global_experiment(&f, &phase, 3.0, 8.0, 5.0, 10.0, &g, &[1.0, 2.0, 4.0, 8.0, 16.0]).unwrap();
        for w in rep.local.windows(2) {
            assert!(w[1].norm >= w[0].norm);
        }
        assert!(rep.local.last().unwrap().norm <= rep.global);
        assert!(rep.annulus_leakage < 1e-12);
        assert_eq!(rep.chain.len(), 3);
        assert!(rep.chain.windows(2).all(|w| w[1].norm >= w[0].norm));
    }

    #[test]
    fn region_containing_the_grid_is_global() {
        // every lattice point lies in the unit ball and the window inside (0, 1)
        let g = GridSpec { time_samples: 8, time_span: [0.0, 0.9], ..grid(8, 1.4, 1, 1.0) };
        let l = g.lattice().unwrap();
        let f = SpatialField::from_fn(l, |x| Complex64::new((-x[0] * x[0]).exp(), x[1]));
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        let rep = local_global_experiment(&f, &phase, 3.0, 8.0, 5.0, 10.0, &g, &[1.0]).unwrap();
        assert!((rep.local[0].norm - rep.global).abs() <= 1e-6 * rep.global);
        assert!(rep.local[0].truncated);
        assert_eq!(rep.chain.len(), 0);
        assert!(rep.growth_exponent.is_none());
    }

    #[test]
    fn local_global_preconditions() {
        let g = grid(32, 32.0, 8, 16.0);
        let f = gaussian_annulus(g.lattice().unwrap());
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        assert!(matches!(
            local_global_experiment(&f, &phase, 3.0, 8.0, 2.5, 10.0, &g, &[1.0]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            local_global_experiment(&f, &phase, 3.0, 8.0, 5.0, 10.0, &g, &[40.0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn verdict_rules() {
        assert_eq!(profile_verdict(&[(1.0, 2.0)]).0, Verdict::Inconclusive);
        assert_eq!(profile_verdict(&[(1.0, 2.0), (2.0, 2.5)]).0, Verdict::Stable);
        assert_eq!(profile_verdict(&[(1.0, 1.0), (2.0, 2.0), (4.0, 4.0)]).0, Verdict::Growing);
        assert_eq!(profile_verdict(&[(1.0, 1.0), (2.0, 4.0), (4.0, 1.0)]).0, Verdict::Inconclusive);
    }

    fn small_battery(l: crate::spectral::Lattice) -> Vec<(String, SpatialField)> {
        let c = CutoffProfile::default();
        (0..5)
            .map(|i| {
                let theta = i as f64;
                let f = SpatialField::from_fourier(l, |xi| {
                    let r = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
                    let d = (xi[0] - theta.cos()).powi(2) + (xi[1] - theta.sin()).powi(2);
                    Complex64::new(c.spatial(0, r) * (-4.0 * d).exp(), 0.0)
                });
                (format!("p{i}"), f)
            })
            .collect()
    }

    #[test]
    fn single_dilation_is_inconclusive() {
        let g = grid(64, 64.0, 16, 4.0);
        let battery = small_battery(g.lattice().unwrap());
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        let scan = corollary_scan(&phase, &g, &battery, &[5.0, 6.0], &[2.0, 4.0], &[1.0]).unwrap();
        assert_eq!(scan.points.len(), 4);
        assert!(scan.points.iter().all(|p| p.verdict == Verdict::Inconclusive));
        let p = scan.point(6.0, 2.0).unwrap();
        assert_eq!(p.s_exact.as_deref(), Some("-1/3"));
        let csv = scan.to_csv();
        assert_eq!(csv.lines().count(), 1 + 4 * 5);
        assert!(corollary_scan(&phase, &g, &battery[..4], &[5.0], &[4.0], &[1.0, 2.0]).is_err());
        let schr1 = PhaseFunction::power(2, 1.0).unwrap();
        assert!(corollary_scan(&schr1, &g, &battery, &[5.0], &[4.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn infeasible_dilation_is_inconclusive() {
        let g = grid(32, 32.0, 8, 2.0);
        let battery = small_battery(g.lattice().unwrap());
        let phase = PhaseFunction::power(2, 2.0).unwrap();
        // λ = 8 pushes the band past the Nyquist frequency of this lattice
        let scan = corollary_scan(&phase, &g, &battery, &[5.0], &[4.0], &[1.0, 8.0]).unwrap();
        assert_eq!(scan.points[0].verdict, Verdict::Inconclusive);
        assert!(scan.points[0].ratios.iter().any(|r| r.ratio.is_none()));
    }

    fn ball_field(center: &[f64], seed: u64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let set = SampleSet::ball(center, 1.0, 0.25, |_| Complex64::new(0.0, 0.0)).unwrap();
        let values = (0..set.len())
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        set.with_values(values).unwrap()
    }

    #[test]
    fn disjoint_pieces_add_in_the_qth_power() {
        let a = ball_field(&[0.0, 0.0], 1);
        let b = ball_field(&[10.0, 3.0], 2);
        let (q, r) = (1.5, 1.25);
        let whole = sample_mixed_norm(&SampleSet::union(&[a.clone(), b.clone()]).unwrap(), q, r).unwrap();
        let parts = sample_mixed_norm(&a, q, r).unwrap().powf(q) + sample_mixed_norm(&b, q, r).unwrap().powf(q);
        assert!((whole.powf(q) - parts).abs() <= 1e-12 * parts);
        // for q = r the mixed norm is the plain L^q norm
        let plain = (a.cell() * a.values().iter().map(|v| v.norm().powf(1.5)).sum::<f64>()).powf(1.0 / 1.5);
        assert!((sample_mixed_norm(&a, 1.5, 1.5).unwrap() - plain).abs() < 1e-13 * plain);
    }

    #[test]
    fn single_ball_restriction_bound() {
        let phase = PhaseFunction::power(1, 2.0).unwrap();
        let patch = build_patch(&phase, 256).unwrap();
        let collection = SparseCollection::new(vec![vec![0.0, 0.0]], 2.0, 2.0).unwrap();
        let fields = vec![SampleSet::ball(&[0.0, 0.0], 2.0, 0.25, |p| Complex64::new((-p[0] * p[0]).exp(), p[1])).unwrap()];
        let out = sparse_support_restriction_test(&collection, &fields, &patch, 1.5, 1.5).unwrap();
        assert!(out.ratio().is_finite() && out.ratio() > 0.0);
        assert!((out.intermediate - out.rhs_mixed).abs() < 1e-12 * out.rhs_mixed);
        assert!(matches!(
            sparse_support_restriction_test(&collection, &fields, &patch, 2.5, 1.5),
            Err(Error::Precondition(_))
        ));
        let outside = vec![ball_field(&[3.0, 0.0], 5)];
        assert!(matches!(
            sparse_support_restriction_test(&collection, &outside, &patch, 1.5, 1.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn embedding_chain_rejects_bad_orders() {
        assert!(embedding_chain(&[1.0, 2.0], 1.5, 1.8).is_err());
        assert!(embedding_chain(&[1.0, 2.0], 2.5, 1.0).is_err());
        let one = embedding_chain(&[0.0, 3.0, 0.0], 1.5, 1.0).unwrap();
        assert!(one.holds && (one.l2 - 3.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn embedding_chain_holds(a in proptest::collection::vec(0.0f64..10.0, 8), x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let (r, q) = (1.0 + x.min(y), 1.0 + x.max(y));
            let c = embedding_chain(&a, q, r).unwrap();
            prop_assert!(c.holds, "{:?}", c);
        }
    }
}
