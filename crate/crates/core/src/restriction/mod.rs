//! Fourier restriction to `S = {(ξ, Φ(ξ))}` and its adjoint, the decay of `d̂σ`,
//! and the orthogonality of sparse families of localized pieces.
//!
//! Sign convention: `ℛf(η) = Σ_p f(p) e^{−i η·p}·cell` and `ℛ*g(z) = Σ_i w_i g_i e^{+i z·η_i}`,
//! so `⟨ℛf, g⟩_{L²(dσ)} = ⟨f, ℛ*g⟩` over the sample set.

mod bump;
mod patch;

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sparse::{SparseCollection, SparsityCheck};

pub use bump::{bessel_j0, ModulatedBump, BUMP_RADIUS};
pub use patch::{build_patch, radial_arclength, rings_for_frequency, PatchSummary, SurfacePatch};

/// Finitely many space-time samples `f(p)` carrying a common cell measure.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    dim: usize,
    points: Vec<f64>,
    values: Vec<Complex64>,
    cell: f64,
}

impl SampleSet {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, values: Vec<Complex64>, cell: f64) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::argument("points and values differ in length"));
        }
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::argument(format!("every point must have dimension {dim}")));
        }
        if !(cell > 0.0) {
            return Err(Error::argument("cell measure must be positive"));
        }
        Ok(SampleSet {
            dim,
            points: points.concat(),
            values,
            cell,
        })
    }

    /// Lattice points of spacing `h` in the closed ball `B(center, radius)`, valued by `f`.
    pub fn ball(center: &[f64], radius: f64, h: f64, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let dim = center.len();
        if dim == 0 || !(radius > 0.0) || !(h > 0.0) {
            return Err(Error::argument("ball samples need a center, a positive radius and spacing"));
        }
        let steps = (radius / h).floor() as i64;
        let side = (2 * steps + 1) as usize;
        let mut points = Vec::new();
        let mut values = Vec::new();
        let mut offset = vec![0.0; dim];
        for flat in 0..side.pow(dim as u32) {
            let mut rest = flat;
            for o in offset.iter_mut() {
                *o = ((rest % side) as i64 - steps) as f64 * h;
                rest /= side;
            }
            if offset.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                let p: Vec<f64> = center.iter().zip(&offset).map(|(c, o)| c + o).collect();
                values.push(f(&p));
                points.extend(p);
            }
        }
        Ok(SampleSet {
            dim,
            points,
            values,
            cell: h.powi(dim as i32),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    /// `‖f‖²` with the cell measure.
    pub fn norm_sq(&self) -> f64 {
        self.cell * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn inner(&self, other: &[Complex64]) -> Complex64 {
        self.values.iter().zip(other).map(|(a, b)| a * b.conj()).sum::<Complex64>() * self.cell
    }

    pub fn with_values(&self, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::argument("value count does not match the sample set"));
        }
        Ok(SampleSet { values, ..self.clone() })
    }

    pub fn map(&self, f: impl Fn(&[f64], Complex64) -> Complex64) -> Self {
        let values = self.points().zip(&self.values).map(|(p, &v)| f(p, v)).collect();
        SampleSet { values, ..self.clone() }
    }

    /// `f(· − shift)`: the points move, the values stay.
    pub fn translated(&self, shift: &[f64]) -> Self {
        let points = self
            .points
            .chunks_exact(self.dim)
            .flat_map(|p| p.iter().zip(shift).map(|(a, b)| a + b))
            .collect();
        SampleSet { points, ..self.clone() }
    }

    /// Concatenation of sample sets on the same cell measure.
    pub fn union(parts: &[SampleSet]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::argument("no sample sets to join"))?;
        if parts.iter().any(|p| p.dim != first.dim || (p.cell - first.cell).abs() > 1e-15 * first.cell) {
            return Err(Error::argument("sample sets differ in dimension or cell measure"));
        }
        Ok(SampleSet {
            dim: first.dim,
            points: parts.iter().flat_map(|p| p.points.iter().copied()).collect(),
            values: parts.iter().flat_map(|p| p.values.iter().copied()).collect(),
            cell: first.cell,
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ℛf` at every node.
pub fn restrict(f: &SampleSet, patch: &SurfacePatch) -> Result<Vec<Complex64>> {
    if f.is_empty() {
        return Err(Error::argument("cannot restrict a function with empty support"));
    }
    if f.dim != patch.dim() {
        return Err(Error::argument(format!(
            "samples live in dimension {}, the surface in {}",
            f.dim,
            patch.dim()
        )));
    }
    Ok((0..patch.len())
        .into_par_iter()
        .map(|i| {
            let eta = patch.node(i);
            let sum: Complex64 = f
                .points()
                .zip(&f.values)
                .map(|(p, v)| v * Complex64::from_polar(1.0, -dot(eta, p)))
                .sum();
            sum * f.cell
        })
        .collect())
}

/// `ℛ*g` at the given space-time points.
pub fn extend(g: &[Complex64], patch: &SurfacePatch, eval_points: &[Vec<f64>]) -> Result<Vec<Complex64>> {
    if g.len() != patch.len() {
        return Err(Error::argument("one value per surface node is required"));
    }
    for z in eval_points {
        patch.check_point(z)?;
    }
    Ok(eval_points
        .par_iter()
        .map(|z| patch.weighted_sum(z, 1.0, Some(g)))
        .collect())
}

/// `⟨a, b⟩_{L²(dσ)}`.
pub fn sigma_inner(patch: &SurfacePatch, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    patch
        .weights()
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| x * y.conj() * w)
        .sum()
}

pub fn sigma_norm(patch: &SurfacePatch, a: &[Complex64]) -> f64 {
    patch
        .weights()
        .iter()
        .zip(a)
        .map(|(w, x)| w * x.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate("a slope needs two positive samples".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Degenerate("all abscissae coincide".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// `count` unit directions in `ℝ^dim` (half circle, or a Fibonacci upper hemisphere).
pub fn decay_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        2 => (0..count)
            .map(|l| {
                let t = std::f64::consts::PI * (l as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|l| {
                    let zc = (l as f64 + 0.5) / count as f64;
                    let rho = (1.0 - zc * zc).sqrt();
                    let phi = golden * l as f64;
                    vec![rho * phi.cos(), rho * phi.sin(), zc]
                })
                .collect()
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecaySample {
    pub radius: f64,
    pub direction: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayFit {
    /// `ρ̂ = −slope` of the envelope `max_u |d̂σ(s·u)|` against `s` on log-log axes.
    pub rho_hat: f64,
    /// Minus the slope of one least-squares fit through every sample.
    pub pooled_rho_hat: f64,
    /// Minus the slope along each direction.
    pub direction_rho_hat: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
    pub envelope: Vec<(f64, f64)>,
    pub samples: Vec<DecaySample>,
}

impl DecayFit {
    /// CSV with columns `radius,direction,magnitude`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,direction,magnitude\n");
        for s in &self.samples {
            let _ = writeln!(out, "{:.16e},{},{:.16e}", s.radius, s.direction, s.magnitude);
        }
        out
    }
}

/// Samples `|d̂σ|` on `count` equally spaced radii in `[r_min, r_max]` along each direction.
pub fn fit_decay(patch: &SurfacePatch, directions: &[Vec<f64>], r_min: f64, r_max: f64, count: usize) -> Result<DecayFit> {
    if !(0.0 < r_min && r_min < r_max) || count < 2 || directions.is_empty() {
        return Err(Error::argument("decay fit needs 0 < r_min < r_max, two radii and a direction"));
    }
    let step = (r_max - r_min) / (count - 1) as f64;
    let mut samples = Vec::with_capacity(count * directions.len());
    let mut envelope = vec![0.0f64; count];
    for (d, u) in directions.iter().enumerate() {
        let values = patch.transform_along_ray(u, r_min, step, count)?;
        for (k, v) in values.iter().enumerate() {
            let magnitude = v.norm();
            envelope[k] = envelope[k].max(magnitude);
            samples.push(DecaySample {
                radius: r_min + k as f64 * step,
                direction: d,
                magnitude,
            });
        }
    }
    let envelope: Vec<(f64, f64)> = envelope
        .into_iter()
        .enumerate()
        .map(|(k, e)| (r_min + k as f64 * step, e))
        .collect();
    let pooled: Vec<(f64, f64)> = samples.iter().map(|s| (s.radius, s.magnitude)).collect();
    let direction_rho_hat = (0..directions.len())
        .map(|d| {
            let pts: Vec<(f64, f64)> = pooled[d * count..(d + 1) * count].to_vec();
            log_log_slope(&pts).map(|v| -v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DecayFit {
        rho_hat: -log_log_slope(&envelope)?,
        pooled_rho_hat: -log_log_slope(&pooled)?,
        direction_rho_hat,
        r_min,
        r_max,
        envelope,
        samples,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct OrthogonalityResult {
    /// `‖Σ_i ℛ(f_i φ_i)‖_{L²(dσ)}`.
    pub lhs: f64,
    /// `R^{1/2}(Σ_i ‖f_i‖²)^{1/2}`.
    pub rhs: f64,
    /// `|lhs² − Σ_i ‖ℛ(f_i φ_i)‖²|`.
    pub cross_term: f64,
    /// `2Σ_{i<j} |⟨ℛ(f_i φ_i), ℛ(f_j φ_j)⟩|`, the largest cross term over phase rotations of the pieces.
    pub cross_envelope: f64,
    pub pieces: Vec<f64>,
    pub sparsity: SparsityCheck,
}

impl OrthogonalityResult {
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            0.0
        } else {
            self.lhs / self.rhs
        }
    }
}

pub(crate) fn check_supports(collection: &SparseCollection, fields: &[SampleSet]) -> Result<SparsityCheck> {
    let sparsity = collection.check()?;
    if !sparsity.sparse {
        return Err(Error::Precondition(format!(
            "collection is not sparse: closest pair {:?}, required separation {}",
            sparsity.worst, sparsity.required
        )));
    }
    if fields.len() != collection.len() {
        return Err(Error::argument(format!(
            "{} fields for {} balls",
            fields.len(),
            collection.len()
        )));
    }
    for (i, (f, z)) in fields.iter().zip(&collection.centers).enumerate() {
        let limit = collection.radius * (1.0 + 1e-12);
        if let Some(p) = f.points().find(|p| {
            p.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() > limit
        }) {
            return Err(Error::Precondition(format!(
                "field {i} has a sample at {p:?} outside its ball around {z:?}"
            )));
        }
    }
    Ok(sparsity)
}

/// Orthogonality of the restricted pieces `ℛ(f_i φ_i)` of a sparse family.
pub fn sparse_orthogonality_test(
    collection: &SparseCollection,
    fields: &[SampleSet],
    patch: &SurfacePatch,
    bump: &ModulatedBump,
) -> Result<OrthogonalityResult> {
    let sparsity = check_supports(collection, fields)?;
    if bump.dim() != patch.dim() {
        return Err(Error::argument("bump and surface live in different dimensions"));
    }
    let radius = collection.radius;
    let pieces: Vec<Vec<Complex64>> = fields
        .iter()
        .zip(&collection.centers)
        .map(|(f, z)| {
            if f.is_empty() {
                return Ok(vec![Complex64::new(0.0, 0.0); patch.len()]);
            }
            restrict(&f.map(|p, v| v * bump.localized(p, z, radius)), patch)
        })
        .collect::<Result<_>>()?;

    let mut total = vec![Complex64::new(0.0, 0.0); patch.len()];
    for piece in &pieces {
        for (t, v) in total.iter_mut().zip(piece) {
            *t += v;
        }
    }
    let lhs = sigma_norm(patch, &total);
    let norms: Vec<f64> = pieces.iter().map(|v| sigma_norm(patch, v)).collect();
    let diagonal: f64 = norms.iter().map(|v| v * v).sum();
    let mut cross_envelope = 0.0;
    for i in 0..pieces.len() {
        for j in i + 1..pieces.len() {
            cross_envelope += 2.0 * sigma_inner(patch, &pieces[i], &pieces[j]).norm();
        }
    }
    let field_mass: f64 = fields.iter().map(|f| f.norm_sq()).sum();
    Ok(OrthogonalityResult {
        lhs,
        rhs: radius.sqrt() * field_mass.sqrt(),
        cross_term: (lhs * lhs - diagonal).abs(),
        cross_envelope,
        pieces: norms,
        sparsity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::PhaseFunction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn parabola_patch(rings: usize) -> SurfacePatch {
        build_patch(&PhaseFunction::power(1, 2.0).unwrap(), rings).unwrap()
    }

    fn random_field(seed: u64, center: &[f64], radius: f64, h: f64) -> SampleSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = SampleSet::ball(center, radius, h, |_| Complex64::new(0.0, 0.0)).unwrap();
        let values = (0..base.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        base.with_values(values).unwrap()
    }

    #[test]
    fn delta_restricts_to_one() {
        let patch = parabola_patch(64);
        let f = SampleSet::new(2, vec![vec![0.0, 0.0]], vec![Complex64::new(4.0, 0.0)], 0.25).unwrap();
        for v in restrict(&f, &patch).unwrap() {
            assert!((v - 1.0).norm() < 1e-15);
        }
        let empty = SampleSet::new(2, vec![], vec![], 1.0).unwrap();
        assert!(restrict(&empty, &patch).is_err());
    }

    #[test]
    fn translation_modulates() {
        let patch = parabola_patch(64);
        let f = random_field(1, &[0.0, 0.0], 1.5, 0.5);
        let shift = [2.5, -1.25];
        let a = restrict(&f, &patch).unwrap();
        let b = restrict(&f.translated(&shift), &patch).unwrap();
        for (i, (x, y)) in a.iter().zip(&b).enumerate() {
            let m = Complex64::from_polar(1.0, -dot(patch.node(i), &shift));
            assert!((x * m - y).norm() < 1e-12);
        }
    }

    #[test]
    fn adjoint_identity() {
        let patch = build_patch(&PhaseFunction::power(2, 2.0).unwrap(), 32).unwrap();
        let f = random_field(2, &[0.3, -0.2, 0.1], 1.2, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g: Vec<Complex64> = (0..patch.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let lhs = sigma_inner(&patch, &restrict(&f, &patch).unwrap(), &g);
        let points: Vec<Vec<f64>> = f.points().map(|p| p.to_vec()).collect();
        let rhs = f.inner(&extend(&g, &patch, &points).unwrap());
        assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm());
    }

    #[test]
    fn extension_of_one_is_conjugate_transform() {
        let patch = parabola_patch(128);
        let ones = vec![Complex64::new(1.0, 0.0); patch.len()];
        let z = vec![1.3, 0.7];
        let e = extend(&ones, &patch, std::slice::from_ref(&z)).unwrap()[0];
        let minus = patch.surface_measure_transform(&[-z[0], -z[1]]).unwrap();
        assert!((e - minus).norm() <= 1e-14 * patch.total_measure());

        let twice: Vec<Complex64> = ones.iter().map(|v| v * 2.0).collect();
        let e2 = extend(&twice, &patch, &[z]).unwrap()[0];
        assert_eq!(e2, e * 2.0);
    }

    #[test]
    fn restrict_extend_kernel() {
        let patch = parabola_patch(48);
        let samples = SampleSet::ball(&[0.0, 0.0], 2.0, 0.5, |_| Complex64::new(1.0, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g: Vec<Complex64> = (0..patch.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), 0.0))
            .collect();
        let points: Vec<Vec<f64>> = samples.points().map(|p| p.to_vec()).collect();
        let ext = extend(&g, &patch, &points).unwrap();
        let composed = restrict(&samples.with_values(ext).unwrap(), &patch).unwrap();
        // kernel K(ζ) = cell Σ_p e^{−iζ·p}
        let kernel = |zeta: Vec<f64>| -> Complex64 {
            samples
                .points()
                .map(|p| Complex64::from_polar(samples.cell(), -dot(&zeta, p)))
                .sum()
        };
        for j in [0, 7, 20, 51, 95] {
            let direct: Complex64 = (0..patch.len())
                .map(|i| {
                    let zeta: Vec<f64> = patch.node(j).iter().zip(patch.node(i)).map(|(a, b)| a - b).collect();
                    g[i] * patch.weights()[i] * kernel(zeta)
                })
                .sum();
            assert!((composed[j] - direct).norm() <= 1e-10 * direct.norm().max(1.0));
        }
    }

    #[test]
    fn parabola_decay_rate() {
        let phase = PhaseFunction::power(1, 2.0).unwrap();
        let patch = build_patch(&phase, rings_for_frequency(&phase, 400.0).unwrap()).unwrap();
        let fit = fit_decay(&patch, &decay_directions(2, 16), 10.0, 400.0, 40).unwrap();
        assert!(fit.rho_hat > 0.4, "rho_hat = {}", fit.rho_hat);
        assert!(fit.rho_hat < 0.7, "rho_hat = {}", fit.rho_hat);
        assert!(fit.to_csv().lines().count() == 1 + 16 * 40);
    }

    #[test]
    fn slope_of_exact_power() {
        let pts: Vec<(f64, f64)> = (1..10).map(|k| (k as f64, 3.0 * (k as f64).powf(-0.75))).collect();
        assert!((log_log_slope(&pts).unwrap() + 0.75).abs() < 1e-12);
        assert!(log_log_slope(&[(1.0, 1.0)]).is_err());
    }

    fn two_ball_collection(separation: f64, radius: f64) -> SparseCollection {
        // stationary direction for ξ = 1.25 on the parabola: z ∥ (−2.5, 1)
        let u = [-2.5 / 7.25f64.sqrt(), 1.0 / 7.25f64.sqrt()];
        SparseCollection::new(
            vec![vec![0.0, 0.0], vec![separation * u[0], separation * u[1]]],
            radius,
            2.0,
        )
        .unwrap()
    }

    #[test]
    fn orthogonality_basics() {
        let patch = parabola_patch(rings_for_frequency(&PhaseFunction::power(1, 2.0).unwrap(), 80.0).unwrap());
        let bump = ModulatedBump::new(2).unwrap();
        let col = two_ball_collection(64.0, 2.0);
        let fields: Vec<SampleSet> = col
            .centers
            .iter()
            .enumerate()
            .map(|(i, z)| random_field(10 + i as u64, z, 2.0, 0.25))
            .collect();
        let r = sparse_orthogonality_test(&col, &fields, &patch, &bump).unwrap();
        assert!(r.lhs > 0.0 && r.rhs > 0.0);
        assert!(r.cross_term <= r.cross_envelope * (1.0 + 1e-12));
        let diag: f64 = r.pieces.iter().map(|v| v * v).sum();
        assert!(r.cross_term < 0.5 * diag);

        let zeros: Vec<SampleSet> = fields.iter().map(|f| f.map(|_, _| Complex64::new(0.0, 0.0))).collect();
        let z = sparse_orthogonality_test(&col, &zeros, &patch, &bump).unwrap();
        assert_eq!((z.lhs, z.rhs, z.cross_term), (0.0, 0.0, 0.0));
    }

    #[test]
    fn orthogonality_preconditions() {
        let patch = parabola_patch(64);
        let bump = ModulatedBump::new(2).unwrap();
        let close = two_ball_collection(10.0, 2.0);
        let fields: Vec<SampleSet> = close.centers.iter().map(|z| random_field(1, z, 2.0, 0.5)).collect();
        assert!(matches!(
            sparse_orthogonality_test(&close, &fields, &patch, &bump),
            Err(Error::Precondition(_))
        ));
        let col = two_ball_collection(64.0, 2.0);
        let outside = vec![random_field(1, &[0.0, 0.0], 3.0, 0.5), random_field(2, &col.centers[1], 1.0, 0.5)];
        assert!(matches!(
            sparse_orthogonality_test(&col, &outside, &patch, &bump),
            Err(Error::Precondition(_))
        ));
    }
}
