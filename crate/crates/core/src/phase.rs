//! Homogeneous phase functions and the structural checks they must pass.
//!
//! A phase `Φ` is real, smooth away from the origin and homogeneous of degree
//! `m ≥ 1`. The built-in families are the power symbols `|ξ|^m` and homogeneous
//! polynomials (the anisotropic quartic is a fixed polynomial). Derivatives are
//! closed form; polynomials are differentiated term by term.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One term `coeff · ξ^powers` of a polynomial phase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub powers: Vec<u32>,
    pub coeff: f64,
}

impl Monomial {
    fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PhaseFamily {
    /// `|ξ|^m`.
    Power,
    /// `ξ₁⁴ + 2ξ₁³ξ₂ − 2ξ₁ξ₂³ + ξ₂⁴`.
    QuarticAnisotropic,
    Polynomial,
}

impl fmt::Display for PhaseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PhaseFamily::Power => "power",
            PhaseFamily::QuarticAnisotropic => "quartic-anisotropic",
            PhaseFamily::Polynomial => "polynomial",
        };
        f.write_str(s)
    }
}

/// Config-file form of a phase: a family string plus its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhaseSpec {
    Power { n: usize, m: f64 },
    QuarticAnisotropic {},
    Polynomial { n: usize, coefficients: Vec<Monomial> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhaseSpec", into = "PhaseSpec")]
pub struct PhaseFunction {
    family: PhaseFamily,
    n: usize,
    m: f64,
    terms: Vec<Monomial>,
}

/// Result of [`PhaseFunction::evaluate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Evaluation {
    Value(f64),
    Gradient(Vec<f64>),
    Hessian(Vec<Vec<f64>>),
}

impl TryFrom<PhaseSpec> for PhaseFunction {
    type Error = Error;

    fn try_from(spec: PhaseSpec) -> Result<Self> {
        match spec {
            PhaseSpec::Power { n, m } => PhaseFunction::power(n, m),
            PhaseSpec::QuarticAnisotropic {} => Ok(PhaseFunction::quartic_anisotropic()),
            PhaseSpec::Polynomial { n, coefficients } => PhaseFunction::polynomial(n, coefficients),
        }
    }
}

impl From<PhaseFunction> for PhaseSpec {
    fn from(p: PhaseFunction) -> Self {
        match p.family {
            PhaseFamily::Power => PhaseSpec::Power { n: p.n, m: p.m },
            PhaseFamily::QuarticAnisotropic => PhaseSpec::QuarticAnisotropic {},
            PhaseFamily::Polynomial => PhaseSpec::Polynomial {
                n: p.n,
                coefficients: p.terms,
            },
        }
    }
}

fn check_dimension(n: usize) -> Result<()> {
    if n == 1 || n == 2 {
        Ok(())
    } else {
        Err(Error::argument(format!("spatial dimension must be 1 or 2, got {n}")))
    }
}

impl PhaseFunction {
    pub fn power(n: usize, m: f64) -> Result<Self> {
        check_dimension(n)?;
        if !(m.is_finite() && m >= 1.0) {
            return Err(Error::argument(format!("homogeneity degree must be >= 1, got {m}")));
        }
        Ok(PhaseFunction {
            family: PhaseFamily::Power,
            n,
            m,
            terms: Vec::new(),
        })
    }

    pub fn quartic_anisotropic() -> Self {
        let t = |a: u32, b: u32, c: f64| Monomial {
            powers: vec![a, b],
            coeff: c,
        };
        PhaseFunction {
            family: PhaseFamily::QuarticAnisotropic,
            n: 2,
            m: 4.0,
            terms: vec![t(4, 0, 1.0), t(3, 1, 2.0), t(1, 3, -2.0), t(0, 4, 1.0)],
        }
    }

    /// A homogeneous polynomial; the degree of homogeneity is the common total degree.
    pub fn polynomial(n: usize, terms: Vec<Monomial>) -> Result<Self> {
        check_dimension(n)?;
        let terms: Vec<Monomial> = terms.into_iter().filter(|t| t.coeff != 0.0).collect();
        let first = terms
            .first()
            .ok_or_else(|| Error::argument("polynomial phase has no nonzero terms"))?;
        let degree = first.degree();
        for t in &terms {
            if t.powers.len() != n {
                return Err(Error::argument(format!(
                    "monomial {:?} does not have {n} exponents",
                    t.powers
                )));
            }
            if t.degree() != degree {
                return Err(Error::argument("polynomial phase is not homogeneous"));
            }
            if !t.coeff.is_finite() {
                return Err(Error::argument("non-finite polynomial coefficient"));
            }
        }
        if degree < 1 {
            return Err(Error::argument("polynomial phase must have degree >= 1"));
        }
        Ok(PhaseFunction {
            family: PhaseFamily::Polynomial,
            n,
            m: degree as f64,
            terms,
        })
    }

    pub fn family(&self) -> &PhaseFamily {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Homogeneity degree.
    pub fn m(&self) -> f64 {
        self.m
    }

    fn check_point(&self, xi: &[f64]) -> Result<()> {
        if xi.len() != self.n {
            return Err(Error::argument(format!(
                "point has {} coordinates, phase lives in dimension {}",
                xi.len(),
                self.n
            )));
        }
        if xi.iter().all(|&v| v == 0.0) {
            return Err(Error::Domain("phase derivatives are undefined at xi = 0".into()));
        }
        Ok(())
    }

    pub fn evaluate(&self, xi: &[f64], order: u8) -> Result<Evaluation> {
        match order {
            0 => self.value(xi).map(Evaluation::Value),
            1 => self.gradient(xi).map(Evaluation::Gradient),
            2 => self.hessian(xi).map(Evaluation::Hessian),
            _ => Err(Error::argument(format!("derivative order {order} is not supported"))),
        }
    }

    pub fn value(&self, xi: &[f64]) -> Result<f64> {
        self.check_point(xi)?;
        Ok(self.value_unchecked(xi))
    }

    /// Value without the domain check. Returns 0 at the origin, the homogeneous extension.
    pub(crate) fn value_unchecked(&self, xi: &[f64]) -> f64 {
        match self.family {
            PhaseFamily::Power => {
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                if r2 == 0.0 {
                    0.0
                } else if self.m == 2.0 {
                    r2
                } else {
                    r2.powf(0.5 * self.m)
                }
            }
            _ => self
                .terms
                .iter()
                .map(|t| t.coeff * monomial(xi, &t.powers))
                .sum(),
        }
    }

    pub fn gradient(&self, xi: &[f64]) -> Result<Vec<f64>> {
        self.check_point(xi)?;
        Ok(match self.family {
            PhaseFamily::Power => {
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                let scale = self.m * r2.powf(0.5 * self.m - 1.0);
                xi.iter().map(|v| scale * v).collect()
            }
            _ => (0..self.n)
                .map(|i| {
                    self.terms
                        .iter()
                        .map(|t| t.coeff * monomial_derivative(xi, &t.powers, &[i]))
                        .sum()
                })
                .collect(),
        })
    }

    pub fn hessian(&self, xi: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_point(xi)?;
        let n = self.n;
        Ok(match self.family {
            PhaseFamily::Power => {
                // m r^{m-2} (I + (m-2) ξξᵀ / r²)
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                let scale = self.m * r2.powf(0.5 * self.m - 1.0);
                let rank_one = (self.m - 2.0) / r2;
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let delta = if i == j { 1.0 } else { 0.0 };
                                scale * (delta + rank_one * xi[i] * xi[j])
                            })
                            .collect()
                    })
                    .collect()
            }
            _ => (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            self.terms
                                .iter()
                                .map(|t| t.coeff * monomial_derivative(xi, &t.powers, &[i, j]))
                                .sum()
                        })
                        .collect()
                })
                .collect(),
        })
    }
}

fn monomial(xi: &[f64], powers: &[u32]) -> f64 {
    xi.iter()
        .zip(powers)
        .map(|(&x, &p)| x.powi(p as i32))
        .product()
}

/// Partial derivative of `ξ^powers` with respect to the listed coordinates.
fn monomial_derivative(xi: &[f64], powers: &[u32], wrt: &[usize]) -> f64 {
    let mut p: Vec<u32> = powers.to_vec();
    let mut factor = 1.0;
    for &i in wrt {
        if p[i] == 0 {
            return 0.0;
        }
        factor *= p[i] as f64;
        p[i] -= 1;
    }
    factor * monomial(xi, &p)
}

/// Absolute eigenvalues (= singular values) of a symmetric 1×1 or 2×2 matrix.
pub fn symmetric_singular_values(h: &[Vec<f64>]) -> Vec<f64> {
    match h.len() {
        1 => vec![h[0][0].abs()],
        2 => {
            let (a, b, d) = (h[0][0], 0.5 * (h[0][1] + h[1][0]), h[1][1]);
            let mean = 0.5 * (a + d);
            let radius = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            let mut s = vec![(mean + radius).abs(), (mean - radius).abs()];
            s.sort_by(|x, y| y.total_cmp(x));
            s
        }
        _ => unreachable!("phase dimension is 1 or 2"),
    }
}

/// Count of singular values at or above `tol` times the largest one.
pub fn numerical_rank(h: &[Vec<f64>], tol: f64) -> usize {
    let s = symmetric_singular_values(h);
    let largest = s.iter().cloned().fold(0.0_f64, f64::max);
    if largest == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v >= tol * largest).count()
}

/// Sign of `Φ` over the sampled unit sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignPattern {
    Positive,
    Negative,
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub mu: f64,
    pub m_estimated: f64,
    pub grad_min_on_sphere: f64,
    pub hessian_min_rank: usize,
    pub rho: f64,
    /// `n / rho`; `None` when the Hessian vanishes somewhere (rank 0).
    pub gamma: Option<f64>,
    pub homogeneity_residual: f64,
    pub sign_pattern: SignPattern,
    pub passed: bool,
    pub reasons: Vec<String>,
}

/// Deterministic points on the unit sphere: `±1` for `n = 1`, equally spaced
/// angles starting at `(1, 0)` for `n = 2`.
pub fn sphere_points(n: usize, samples: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        _ => (0..samples)
            .map(|i| {
                let theta = std::f64::consts::TAU * i as f64 / samples as f64;
                vec![theta.cos(), theta.sin()]
            })
            .collect(),
    }
}

/// Default relative threshold for numerical rank and the homogeneity residual.
pub const DEFAULT_TOL: f64 = 1e-8;

pub fn validate_condition1(phase: &PhaseFunction, sphere_samples: usize, tol: f64) -> Result<ConditionReport> {
    if sphere_samples < 16 {
        return Err(Error::argument("at least 16 sphere samples are required"));
    }
    if !(tol > 0.0) {
        return Err(Error::argument("tolerance must be positive"));
    }
    let n = phase.n();
    let points = sphere_points(n, sphere_samples);

    let mut abs_max = 0.0_f64;
    let mut abs_min = f64::INFINITY;
    let mut grad_min = f64::INFINITY;
    let mut min_rank = usize::MAX;
    let mut residual = 0.0_f64;
    let mut m_sum = 0.0;
    let mut m_count = 0usize;
    let (mut positive, mut negative) = (false, false);

    for xi in &points {
        let v = phase.value(xi)?;
        let g = phase.gradient(xi)?;
        let h = phase.hessian(xi)?;
        if !v.is_finite() || g.iter().any(|x| !x.is_finite()) || h.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("non-finite phase data at {xi:?}")));
        }
        abs_max = abs_max.max(v.abs());
        abs_min = abs_min.min(v.abs());
        if v > 0.0 {
            positive = true;
        } else if v < 0.0 {
            negative = true;
        }
        grad_min = grad_min.min(g.iter().map(|x| x * x).sum::<f64>().sqrt());
        min_rank = min_rank.min(numerical_rank(&h, tol));

        for lambda in [2.0_f64, 4.0] {
            let scaled: Vec<f64> = xi.iter().map(|x| lambda * x).collect();
            let vs = phase.value(&scaled)?;
            let lm = lambda.powf(phase.m());
            if v != 0.0 {
                residual = residual.max((vs - lm * v).abs() / (lm * v.abs()));
                m_sum += (vs.abs() / v.abs()).ln() / lambda.ln();
                m_count += 1;
            }
        }
    }

    let mut reasons = Vec::new();
    if abs_min <= tol * abs_max {
        reasons.push(format!("phase vanishes on the unit sphere (min |phi| = {abs_min:e})"));
    }
    let mu = if abs_min > 0.0 {
        abs_max.max(1.0 / abs_min).max(1.0)
    } else {
        f64::INFINITY
    };
    let m_estimated = if m_count > 0 { m_sum / m_count as f64 } else { f64::NAN };
    let sign_pattern = match (positive, negative) {
        (true, true) => SignPattern::Mixed,
        (false, true) => SignPattern::Negative,
        _ => SignPattern::Positive,
    };
    if grad_min <= tol {
        reasons.push(format!("gradient vanishes on the sphere (min |grad| = {grad_min:e})"));
    }
    if min_rank < 1 {
        reasons.push("Hessian has rank 0 somewhere on the sphere".to_string());
    }
    if !(residual < tol) {
        reasons.push(format!("homogeneity residual {residual:e} exceeds tolerance"));
    }
    let rho = min_rank as f64 / 2.0;
    let gamma = (min_rank > 0).then(|| n as f64 / rho);
    Ok(ConditionReport {
        mu,
        m_estimated,
        grad_min_on_sphere: grad_min,
        hessian_min_rank: min_rank,
        rho,
        gamma,
        homogeneity_residual: residual,
        sign_pattern,
        passed: reasons.is_empty(),
        reasons,
    })
}

impl PhaseFunction {
    /// The bound `μ` as measured by [`validate_condition1`] with default sampling.
    pub fn measured_mu(&self) -> Result<f64> {
        Ok(validate_condition1(self, 256, DEFAULT_TOL)?.mu)
    }
}
