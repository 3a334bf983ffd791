//! Mixed space-time norms, Sobolev norms, the scaling exponent and dilations.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::phase::PhaseFunction;
use crate::spectral::{pairwise_sum, propagate, GridSpec, Lattice, SpaceTimeField, SpatialField};

/// A Lebesgue exponent in `[1, ∞]`, kept exact when it is rational.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Rational(Rational64),
    Real(f64),
    Infinity,
}

impl Exponent {
    pub fn int(v: i64) -> Self {
        Exponent::Rational(Rational64::from_integer(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Exponent::Rational(Rational64::new(num, den))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Exponent::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
            Exponent::Real(v) => *v,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// `1/p` exactly, when available.
    pub fn reciprocal_exact(&self) -> Option<Rational64> {
        match self {
            Exponent::Rational(r) => Some(r.recip()),
            Exponent::Real(_) => None,
            Exponent::Infinity => Some(Rational64::zero()),
        }
    }

    pub fn reciprocal(&self) -> f64 {
        match self {
            Exponent::Infinity => 0.0,
            other => 1.0 / other.to_f64(),
        }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        let ok = match self {
            Exponent::Infinity => true,
            Exponent::Rational(r) => *r >= Rational64::from_integer(1),
            Exponent::Real(v) => v.is_finite() && *v >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(field, format!("exponent {self} is not in [1, inf]")))
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Rational(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Exponent::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Exponent::Real(v) => write!(f, "{v}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
            return Ok(Exponent::Infinity);
        }
        if let Some((a, b)) = t.split_once('/') {
            let num: i64 = a.trim().parse().map_err(|_| Error::argument(format!("bad exponent {s:?}")))?;
            let den: i64 = b.trim().parse().map_err(|_| Error::argument(format!("bad exponent {s:?}")))?;
            if den == 0 {
                return Err(Error::argument("exponent has zero denominator"));
            }
            return Ok(Exponent::Rational(Rational64::new(num, den)));
        }
        if let Ok(i) = t.parse::<i64>() {
            return Ok(Exponent::int(i));
        }
        t.parse::<f64>()
            .map(Exponent::Real)
            .map_err(|_| Error::argument(format!("bad exponent {s:?}")))
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Rational(r) if r.is_integer() => s.serialize_i64(*r.numer()),
            Exponent::Real(v) => s.serialize_f64(*v),
            other => s.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Int(i) => Ok(Exponent::int(i)),
            Repr::Float(v) => Ok(Exponent::Real(v)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Exact rational form of a float with a short binary expansion (e.g. `2.0`, `1.5`).
pub fn dyadic_rational(v: f64) -> Option<Rational64> {
    let mut scale: i64 = 1;
    for _ in 0..20 {
        let scaled = v * scale as f64;
        if scaled.fract() == 0.0 && scaled.abs() < 1e15 {
            return Some(Rational64::new(scaled as i64, scale));
        }
        scale *= 2;
    }
    None
}

/// Norm `L^q_x(L^r_t)`: inner norm in time, outer in space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedNormSpec {
    pub q: Exponent,
    pub r: Exponent,
}

impl MixedNormSpec {
    pub fn new(q: Exponent, r: Exponent) -> Result<Self> {
        let spec = MixedNormSpec { q, r };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.q.validate("q")?;
        self.r.validate("r")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityExponent {
    pub s: f64,
    /// Exact value when `m`, `q` and `r` are rational.
    pub exact: Option<String>,
    pub n: usize,
    pub m: f64,
    pub q: Exponent,
    pub r: Exponent,
}

/// `s = n(1/2 − 1/q) − m/r`.
pub fn regularity_exponent(n: usize, m: f64, q: Exponent, r: Exponent) -> RegularityExponent {
    let exact = match (dyadic_rational(m), q.reciprocal_exact(), r.reciprocal_exact()) {
        (Some(m), Some(iq), Some(ir)) => {
            let n = Rational64::from_integer(n as i64);
            Some(n * (Rational64::new(1, 2) - iq) - m * ir)
        }
        _ => None,
    };
    let s = match exact {
        Some(v) => v.to_f64().unwrap_or(f64::NAN),
        None => n as f64 * (0.5 - q.reciprocal()) - m * r.reciprocal(),
    };
    RegularityExponent {
        s,
        exact: exact.map(|v| {
            if v.is_integer() {
                v.numer().to_string()
            } else {
                format!("{}/{}", v.numer(), v.denom())
            }
        }),
        n,
        m,
        q,
        r,
    }
}

/// The second candidate `(2 − m)/4` for the `L⁶_x L²_t` estimate in the plane.
pub fn l6_l2_displayed_exponent(m: f64) -> f64 {
    (2.0 - m) / 4.0
}

/// Origin-centred closed ball of radius `radius` times the time interval `[t0, t1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub radius: f64,
    pub time: [f64; 2],
}

fn lp_of(values: &[f64], p: Exponent, measure: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    match p {
        Exponent::Infinity => values.iter().cloned().fold(0.0, f64::max),
        _ => {
            let pf = p.to_f64();
            let scale = values.iter().cloned().fold(0.0, f64::max);
            if scale == 0.0 {
                return 0.0;
            }
            // factor out the maximum so large exponents do not overflow
            let powered: Vec<f64> = if pf == 2.0 {
                values.iter().map(|v| (v / scale) * (v / scale)).collect()
            } else {
                values.iter().map(|v| (v / scale).powf(pf)).collect()
            };
            scale * (measure * pairwise_sum(&powered)).powf(1.0 / pf)
        }
    }
}

/// Mixed norm of a generic table: `point_count` spatial points, each with a time series.
pub fn mixed_norm_table(
    point_count: usize,
    series: impl Fn(usize) -> Vec<f64> + Sync,
    dt: f64,
    cell: f64,
    spec: &MixedNormSpec,
) -> f64 {
    let inner: Vec<f64> = (0..point_count)
        .into_par_iter()
        .map(|p| lp_of(&series(p), spec.r, dt))
        .collect();
    lp_of(&inner, spec.q, cell)
}

fn region_indices(u: &SpaceTimeField, region: Option<&Region>) -> Result<(Vec<usize>, Vec<usize>)> {
    region_samples(&u.lattice, &u.grid.times(), region)
}

fn region_samples(lattice: &Lattice, times: &[f64], region: Option<&Region>) -> Result<(Vec<usize>, Vec<usize>)> {
    let (space, time): (Vec<usize>, Vec<usize>) = match region {
        None => ((0..lattice.len()).collect(), (0..times.len()).collect()),
        Some(reg) => {
            if !(reg.radius >= 0.0) || !(reg.time[1] > reg.time[0]) {
                return Err(Error::argument("region must have a nonnegative radius and t1 > t0"));
            }
            let space = (0..lattice.len())
                .filter(|&i| {
                    let p = lattice.position(i);
                    (p[0] * p[0] + p[1] * p[1]).sqrt() <= reg.radius
                })
                .collect();
            let time = times
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= reg.time[0] && t < reg.time[1])
                .map(|(i, _)| i)
                .collect();
            (space, time)
        }
    };
    if space.is_empty() || time.is_empty() {
        return Err(Error::argument("integration region contains no samples"));
    }
    Ok((space, time))
}

/// `‖u‖_{L^q_x L^r_t}` by Riemann sums, optionally over a region `𝔹_R × [t0, t1)`.
pub fn mixed_norm(u: &SpaceTimeField, spec: &MixedNormSpec, region: Option<&Region>) -> Result<f64> {
    spec.validate()?;
    let (space, time) = region_indices(u, region)?;
    let len = u.lattice.len();
    Ok(mixed_norm_table(
        space.len(),
        |p| time.iter().map(|&t| u.samples[t * len + space[p]].norm()).collect(),
        u.grid.dt(),
        u.lattice.cell(),
        spec,
    ))
}

/// `‖u‖_{L^r_t L^q_x}`, the norm with the order of integration exchanged.
pub fn mixed_norm_time_outer(u: &SpaceTimeField, spec: &MixedNormSpec) -> Result<f64> {
    spec.validate()?;
    let inner: Vec<f64> = (0..u.time_samples())
        .into_par_iter()
        .map(|t| {
            let abs: Vec<f64> = u.slice(t).iter().map(|v| v.norm()).collect();
            lp_of(&abs, spec.q, u.lattice.cell())
        })
        .collect();
    Ok(lp_of(&inner, spec.r, u.grid.dt()))
}

/// Several `‖e^{itΦ(D)}f‖_{L^q_x L^r_t}` in one pass over the time grid.
///
/// Agrees with [`mixed_norm`] of the propagated field, but keeps only one running
/// sum per spatial point and distinct `r`, so large lattices need no space-time array.
pub fn mixed_norms_streamed(
    f: &SpatialField,
    phase: &PhaseFunction,
    grid: &GridSpec,
    specs: &[MixedNormSpec],
    region: Option<&Region>,
) -> Result<Vec<f64>> {
    grid.validate()?;
    for spec in specs {
        spec.validate()?;
    }
    let lattice = grid.lattice()?;
    if lattice != f.lattice {
        return Err(Error::argument("field lattice does not match the grid"));
    }
    if phase.n() != lattice.n {
        return Err(Error::argument("phase and lattice dimensions differ"));
    }
    let times = grid.times();
    let (space, time) = region_samples(&lattice, &times, region)?;
    let mut inner_exponents: Vec<Exponent> = Vec::new();
    for spec in specs {
        if !inner_exponents.contains(&spec.r) {
            inner_exponents.push(spec.r);
        }
    }
    let mut sums = vec![vec![0.0f64; space.len()]; inner_exponents.len()];
    let spectrum = f.spectrum();
    let phases = lattice.phase_values(phase);
    let plan = lattice.plan();
    let mut slice = vec![Complex64::zero(); lattice.len()];
    for &ti in &time {
        let t = times[ti];
        for ((s, v), &p) in slice.iter_mut().zip(&spectrum).zip(&phases) {
            *s = v * Complex64::from_polar(1.0, t * p);
        }
        plan.inverse(&mut slice);
        let modulus_sq: Vec<f64> = space.par_iter().map(|&i| slice[i].norm_sqr()).collect();
        for (acc, r) in sums.iter_mut().zip(&inner_exponents) {
            let modulus_sq = &modulus_sq;
            // Even integer exponents avoid powf, which dominates the scan otherwise.
            let half = r.to_f64() / 2.0;
            let even = half.fract() == 0.0 && half <= i32::MAX as f64;
            acc.par_iter_mut().zip(modulus_sq).for_each(|(a, &v2)| match r {
                Exponent::Infinity => *a = (*a).max(v2.sqrt()),
                _ if even => *a += v2.powi(half as i32),
                _ => *a += v2.powf(half),
            });
        }
    }
    let dt = grid.dt();
    Ok(specs
        .iter()
        .map(|spec| {
            let idx = inner_exponents.iter().position(|r| *r == spec.r).unwrap_or(0);
            let inner: Vec<f64> = match spec.r {
                Exponent::Infinity => sums[idx].clone(),
                r => {
                    let rf = r.to_f64();
                    sums[idx].iter().map(|a| (dt * a).powf(1.0 / rf)).collect()
                }
            };
            lp_of(&inner, spec.q, lattice.cell())
        })
        .collect())
}

/// `(Σ w(ξ)^{2s} |f̂(ξ)|²)^{1/2}` over the lattice with `w = |ξ|` or `(1 + |ξ|²)^{1/2}`.
pub fn sobolev_norm(f: &SpatialField, s: f64, homogeneous: bool) -> Result<f64> {
    let spectrum = f.spectrum();
    let radii = f.lattice.radii();
    let peak = spectrum.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let dc = spectrum[0].norm();
    if homogeneous && s <= -(f.lattice.n as f64) / 2.0 && dc > 1e-12 * peak {
        return Err(Error::IllPosed(format!(
            "homogeneous norm of order {s} is infinite for data with a nonzero mean"
        )));
    }
    let terms: Vec<f64> = spectrum
        .iter()
        .zip(&radii)
        .map(|(v, &r)| {
            let w = if homogeneous {
                if r == 0.0 {
                    return 0.0;
                }
                r
            } else {
                (1.0 + r * r).sqrt()
            };
            let weight = if s == 0.0 { 1.0 } else { w.powf(2.0 * s) };
            weight * v.norm_sqr()
        })
        .collect();
    let scale = f.lattice.cell() / f.lattice.len() as f64;
    Ok((scale * pairwise_sum(&terms)).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRatio {
    pub numerator: f64,
    pub denominator: f64,
    pub s: f64,
    pub ratio: f64,
}

/// `‖e^{itΦ(D)}f‖_{L^q_x L^r_t} / ‖f‖_{Ḣ^s}` with the scaling exponent `s`.
pub fn estimate_ratio(
    f: &SpatialField,
    phase: &PhaseFunction,
    spec: &MixedNormSpec,
    grid: &GridSpec,
    region: Option<&Region>,
) -> Result<EstimateRatio> {
    if f.data.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
        return Err(Error::argument("estimate ratio of zero data"));
    }
    let s = regularity_exponent(f.lattice.n, phase.m(), spec.q, spec.r).s;
    let u = propagate(f, phase, grid)?;
    let numerator = mixed_norm(&u, spec, region)?;
    let denominator = sobolev_norm(f, s, true)?;
    if !(denominator > 0.0) {
        return Err(Error::argument("Sobolev norm of the data vanishes"));
    }
    Ok(EstimateRatio {
        numerator,
        denominator,
        s,
        ratio: numerator / denominator,
    })
}

/// Default fraction of energy a field may carry where a dilation would alias or wrap.
pub const RESCALE_TOL: f64 = 1e-10;

/// `f(λx)` on the same lattice for `λ = 2^k`, see [`rescale_with_tolerance`].
pub fn rescale(f: &SpatialField, lam: f64) -> Result<SpatialField> {
    rescale_with_tolerance(f, lam, RESCALE_TOL)
}

/// `f(λx)` on the same lattice for `λ = 2^k`.
///
/// For `k > 0` the samples are read off the finer points of the original lattice
/// and points whose preimage leaves the domain are set to zero; for `k < 0` the
/// spectrum is resampled on the coarser frequency lattice. `tol` bounds the
/// relative energy that may alias in frequency or leave the domain in space.
pub fn rescale_with_tolerance(f: &SpatialField, lam: f64, tol: f64) -> Result<SpatialField> {
    let k = lam.log2();
    if !(lam > 0.0) || k.fract() != 0.0 {
        return Err(Error::argument(format!("dilation factor {lam} is not a power of two")));
    }
    let k = k as i32;
    let l = f.lattice;
    if k == 0 {
        return Ok(f.clone());
    }
    let factor = 1usize << k.unsigned_abs();
    if factor >= l.points {
        return Err(Error::argument("dilation factor exceeds the lattice size"));
    }
    let half = (l.points / 2) as i64;
    let spectrum = f.spectrum();
    let total: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
    if k > 0 {
        let limit = half / factor as i64;
        let aliased: f64 = spectrum
            .iter()
            .enumerate()
            .filter(|(i, _)| l.wave(*i)[..l.n].iter().any(|w| w.abs() >= limit))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        if aliased > tol * total {
            return Err(Error::argument(format!(
                "rescaled band exceeds the Nyquist frequency (relative energy {:e} above {})",
                aliased / total,
                l.nyquist() / lam
            )));
        }
        let data = (0..l.len())
            .map(|i| {
                let idx = l.split(i);
                let mut src = [0usize; 2];
                for d in 0..l.n {
                    let j = factor as i64 * (idx[d] as i64 - half) + half;
                    if j < 0 || j >= l.points as i64 {
                        return Complex64::new(0.0, 0.0);
                    }
                    src[d] = j as usize;
                }
                f.data[l.flat(src)]
            })
            .collect();
        SpatialField::new(l, data)
    } else {
        let limit = half / factor as i64;
        let sq_total = f.l2_norm_sq() / l.cell();
        let outside: f64 = f
            .data
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let idx = l.split(*i);
                idx[..l.n].iter().any(|&j| (j as i64 - half).abs() >= limit)
            })
            .map(|(_, v)| v.norm_sqr())
            .sum();
        if outside > tol * sq_total {
            return Err(Error::argument(format!(
                "dilated field does not fit in the periodic domain (relative energy {:e} outside)",
                outside / sq_total
            )));
        }
        let gain = (factor as f64).powi(l.n as i32);
        let out: Vec<Complex64> = (0..l.len())
            .map(|i| {
                let w = l.wave(i);
                let src: Vec<i64> = w[..l.n].iter().map(|&v| v * factor as i64).collect();
                match l.wave_index(&src) {
                    Some(j) => spectrum[j] * gain,
                    None => Complex64::new(0.0, 0.0),
                }
            })
            .collect();
        Ok(SpatialField::from_spectrum(l, out))
    }
}

/// Grid for dilated data: same lattice and sample count, time span scaled by `λ^{−m}`.
pub fn rescaled_grid(grid: &GridSpec, lam: f64, m: f64) -> GridSpec {
    let s = lam.powf(-m);
    GridSpec {
        time_span: [grid.time_span[0] * s, grid.time_span[1] * s],
        ..grid.clone()
    }
}

/// Indicator-like field helper used in tests: `1` on lattice points where `pred` holds.
pub fn indicator(lattice: Lattice, pred: impl Fn(&[f64]) -> bool) -> SpatialField {
    SpatialField::from_fn(lattice, |x| {
        if pred(x) {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}
