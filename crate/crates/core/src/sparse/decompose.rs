//! Layered sparse decomposition of a cube set.
//!
//! Radii follow `R_0 = 1`, `R_k = (|E|·R_{k−1})^γ`. A cell goes to the first layer
//! `k` with `|E ∩ B(x, R_k)| ≤ |E|^{k/K}`. Each layer is covered by a greedy maximal
//! `R_k`-net, every net ball by a maximal `R_{k−1}`-net, and the resulting small
//! balls are grouped greedily into collections whose centers are `R_k`-separated.
//! Since `N ≤ |E|`, such a collection is `(N, R_{k−1})`-sparse.

use std::cmp::Ordering;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Serialize, Serializer};

use super::cubes::CubeSet;
use super::{SparsityCheck, WorstPair};
use crate::error::{Error, Result};

/// Coordinates are kept below this bound so squared distances fit comfortably in `u128`.
const COORD_LIMIT: i64 = 1 << 40;
/// Exact radii beyond this many bits are tracked by their logarithm only.
const EXACT_BITS: f64 = (1u64 << 20) as f64;

/// A radius known exactly as an integer (integral γ) or through its base-2 logarithm.
#[derive(Clone, Debug, PartialEq)]
pub struct Radius {
    log2: f64,
    exact: Option<BigUint>,
    square: Option<u128>,
}

impl Radius {
    pub fn one() -> Self {
        Radius::from_exact(BigUint::one())
    }

    fn from_exact(v: BigUint) -> Self {
        let bits = v.bits();
        let log2 = if bits <= 1000 {
            v.to_f64().expect("finite").log2()
        } else {
            // leading 64 bits carry all the precision an f64 can hold
            let shift = bits - 64;
            (&v >> shift).to_f64().expect("finite").log2() + shift as f64
        };
        let square = if bits <= 63 { v.to_u128().map(|x| x * x) } else { None };
        Radius { log2, exact: Some(v), square }
    }

    fn from_log2(log2: f64) -> Self {
        Radius { log2, exact: None, square: None }
    }

    pub fn log2(&self) -> f64 {
        self.log2
    }

    pub fn exact(&self) -> Option<&BigUint> {
        self.exact.as_ref()
    }

    pub fn to_f64(&self) -> f64 {
        self.log2.exp2()
    }

    /// Exact decimal digits, or a `2^x` expression for non-integral radii.
    pub fn to_decimal(&self) -> String {
        match &self.exact {
            Some(v) => v.to_str_radix(10),
            None => format!("2^{}", self.log2),
        }
    }

    /// Compares a squared distance against `R²`.
    fn cmp_square(&self, d2: u128) -> Ordering {
        if let Some(s) = self.square {
            return d2.cmp(&s);
        }
        if self.log2 >= 64.0 {
            return Ordering::Less;
        }
        (d2 as f64).partial_cmp(&(2.0 * self.log2).exp2()).unwrap_or(Ordering::Less)
    }

    fn covers(&self, d2: u128) -> bool {
        self.cmp_square(d2) != Ordering::Greater
    }

    fn sum(&self, other: &Radius) -> Radius {
        match (&self.exact, &other.exact) {
            (Some(a), Some(b)) => Radius::from_exact(a + b),
            _ => {
                let (hi, lo) = if self.log2 >= other.log2 { (self, other) } else { (other, self) };
                Radius::from_log2(hi.log2 + (1.0 + (lo.log2 - hi.log2).exp2()).log2())
            }
        }
    }
}

impl Serialize for Radius {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            decimal: &'a str,
            log2: f64,
            exact: bool,
        }
        Repr {
            decimal: &self.to_decimal(),
            log2: self.log2,
            exact: self.exact.is_some(),
        }
        .serialize(s)
    }
}

fn integral_gamma(gamma: f64) -> Option<u32> {
    (gamma.fract() == 0.0 && gamma <= 64.0).then_some(gamma as u32)
}

/// `R_0, …, R_K` from the recursion `R_k = (|E|·R_{k−1})^γ`.
pub fn recursive_radius(cells: usize, gamma: f64, k_max: usize) -> Vec<Radius> {
    let e_log = (cells as f64).log2();
    let mut out = vec![Radius::one()];
    for _ in 0..k_max {
        let prev = out.last().expect("non-empty");
        let log2 = gamma * (e_log + prev.log2);
        let next = match (integral_gamma(gamma), &prev.exact) {
            (Some(g), Some(p)) if log2 <= EXACT_BITS => Radius::from_exact((BigUint::from(cells) * p).pow(g)),
            _ => Radius::from_log2(log2),
        };
        out.push(next);
    }
    out
}

/// `|E|^{(γ^{k+1}−γ)/(γ−1)}` for integral γ.
pub fn closed_form_radius(cells: usize, gamma: u32, k: u32) -> BigUint {
    let g = BigUint::from(gamma);
    let exponent = (g.pow(k + 1) - &g) / (&g - BigUint::one());
    let exponent = exponent.to_u32().expect("closed-form exponent fits in u32");
    BigUint::from(cells).pow(exponent)
}

fn dist2(a: &[i64], b: &[i64]) -> u128 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (*x as i128 - *y as i128).unsigned_abs();
            d * d
        })
        .sum()
}

/// Exact sparsity check for collections whose centers sit on the integer lattice.
pub fn is_sparse_cells(centers: &[Vec<i64>], radius: &Radius, gamma: f64) -> SparsityCheck {
    let n = centers.len();
    let req_log2 = if n == 0 { f64::NEG_INFINITY } else { gamma * ((n as f64).log2() + radius.log2) };
    let required_sq: Option<u128> = match (integral_gamma(gamma), radius.exact()) {
        (Some(g), Some(r)) if n > 0 && req_log2 < 63.0 => (BigUint::from(n) * r).pow(g).to_u128().map(|x| x * x),
        _ => None,
    };
    let mut worst: Option<(usize, usize, u128)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let d2 = dist2(&centers[i], &centers[j]);
            if worst.is_none_or(|w| d2 < w.2) {
                worst = Some((i, j, d2));
            }
        }
    }
    let sparse = match worst {
        None => true,
        Some((_, _, d2)) => match required_sq {
            Some(req) => d2 >= req,
            None if req_log2 >= 63.0 => false,
            None => (d2 as f64).sqrt() >= req_log2.exp2(),
        },
    };
    SparsityCheck {
        sparse,
        required: req_log2.exp2(),
        worst: worst.map(|(i, j, d2)| WorstPair { i, j, distance: (d2 as f64).sqrt() }),
        vacuous: n == 0,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BallRecord {
    /// Index of the enclosing `R_k` net ball within the layer.
    pub net_ball: usize,
    /// Cell index of the center; the geometric center is offset by 1/2 along each axis.
    pub center: Vec<i64>,
    pub cells: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CollectionRecord {
    pub balls: Vec<BallRecord>,
}

impl CollectionRecord {
    pub fn centers(&self) -> Vec<Vec<i64>> {
        self.balls.iter().map(|b| b.center.clone()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Layer {
    pub k: usize,
    /// `R_k`, the net scale.
    pub radius: Radius,
    /// `R_{k−1}`, the radius of the balls in the collections.
    pub ball_radius: Radius,
    pub cells: Vec<Vec<i64>>,
    pub net_centers: Vec<Vec<i64>>,
    pub sub_net_sizes: Vec<usize>,
    pub collections: Vec<CollectionRecord>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverageEntry {
    pub cell: Vec<i64>,
    pub layer: usize,
    pub collection: usize,
    pub ball: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionResult {
    #[serde(rename = "K")]
    pub k_layers: usize,
    pub gamma: f64,
    pub dim: usize,
    pub cell_count: usize,
    pub radii: Vec<Radius>,
    /// Non-empty layers in increasing `k`.
    pub layers: Vec<Layer>,
    pub coverage: Vec<CoverageEntry>,
    /// `max_k (#collections in layer k) / |E|^{1/K}`.
    pub collection_constant: f64,
    /// `max_i (#sub-net(i)) / |E|^{1/K}`.
    pub sub_net_constant: f64,
}

impl DecompositionResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Greedy maximal net: a point joins when it is farther than `r` from every chosen center.
fn greedy_net(points: &[&Vec<i64>], r: &Radius) -> Vec<usize> {
    let mut centers: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if centers.iter().all(|&c| !r.covers(dist2(p, points[c]))) {
            centers.push(i);
        }
    }
    centers
}

/// Index into `centers` of the first center within `r` of `p`.
fn first_cover(p: &[i64], centers: &[&Vec<i64>], r: &Radius) -> usize {
    centers
        .iter()
        .position(|c| r.covers(dist2(p, c)))
        .expect("maximal net covers its point set")
}

pub fn decompose(e: &CubeSet, k_layers: usize, gamma: f64) -> Result<DecompositionResult> {
    if e.len() <= 1 {
        return Err(Error::Precondition(format!(
            "decomposition needs |E| > 1, got {}",
            e.len()
        )));
    }
    if k_layers == 0 {
        return Err(Error::argument("K must be at least 1"));
    }
    if !(gamma >= 2.0 && gamma.is_finite()) {
        return Err(Error::argument(format!("gamma must be at least 2, got {gamma}")));
    }
    if e.cells().flatten().any(|&c| c.abs() >= COORD_LIMIT) {
        return Err(Error::argument("cell coordinates must be below 2^40 in magnitude".to_string()));
    }

    let total = e.len();
    let dim = e.dim();
    let big_total = BigUint::from(total);
    let radii = recursive_radius(total, gamma, k_layers);
    let cells: Vec<&Vec<i64>> = e.cells().collect();

    // layer rule: count^K ≤ |E|^k, exact in integers
    let mut layer_of = vec![0usize; total];
    for (i, x) in cells.iter().enumerate() {
        layer_of[i] = (1..=k_layers)
            .find(|&k| {
                let count = cells.iter().filter(|y| radii[k].covers(dist2(x, y))).count();
                BigUint::from(count).pow(k_layers as u32) <= big_total.pow(k as u32)
            })
            .expect("the last layer always qualifies");
    }

    let root = total as f64;
    let scale = root.powf(1.0 / k_layers as f64);
    let packing = BigUint::from(3u32).pow(dim as u32);
    let mut layers = Vec::new();
    let mut coverage = Vec::with_capacity(total);
    let mut collection_constant: f64 = 0.0;
    let mut sub_net_constant: f64 = 0.0;

    for k in 1..=k_layers {
        let members: Vec<&Vec<i64>> = cells
            .iter()
            .zip(&layer_of)
            .filter(|(_, &l)| l == k)
            .map(|(c, _)| *c)
            .collect();
        if members.is_empty() {
            continue;
        }
        let (r_k, r_prev) = (&radii[k], &radii[k - 1]);
        let net: Vec<&Vec<i64>> = greedy_net(&members, r_k).into_iter().map(|i| members[i]).collect();

        let mut parts: Vec<Vec<&Vec<i64>>> = vec![Vec::new(); net.len()];
        for p in &members {
            parts[first_cover(p, &net, r_k)].push(p);
        }

        let outer = r_k.sum(r_prev);
        let mut balls: Vec<BallRecord> = Vec::new();
        let mut sub_net_sizes = Vec::with_capacity(net.len());
        for (i, part) in parts.iter().enumerate() {
            let sub: Vec<&Vec<i64>> = greedy_net(part, r_prev).into_iter().map(|j| part[j]).collect();
            // Every sub-center failed layer k−1, so its R_{k−1}-ball holds more than
            // |E|^{(k−1)/K} cells, and a point lies in at most 3^d of these balls.
            let nearby = cells.iter().filter(|y| outer.covers(dist2(net[i], y))).count();
            let lhs = BigUint::from(sub.len()).pow(k_layers as u32) * big_total.pow(k as u32 - 1);
            let rhs = (&packing * BigUint::from(nearby)).pow(k_layers as u32);
            if lhs > rhs {
                return Err(Error::Assertion(format!(
                    "layer {k}, net ball {i} centered at {:?}: {} sub-balls exceed the packing bound \
                     3^{dim}·{nearby}/|E|^{{{}/{k_layers}}}",
                    net[i],
                    sub.len(),
                    k - 1
                )));
            }
            sub_net_sizes.push(sub.len());
            sub_net_constant = sub_net_constant.max(sub.len() as f64 / scale);

            let mut sub_cells: Vec<Vec<Vec<i64>>> = vec![Vec::new(); sub.len()];
            for p in part {
                sub_cells[first_cover(p, &sub, r_prev)].push((*p).clone());
            }
            for (c, cs) in sub.iter().zip(sub_cells) {
                balls.push(BallRecord {
                    net_ball: i,
                    center: (*c).clone(),
                    cells: cs,
                });
            }
        }

        let mut collections: Vec<CollectionRecord> = Vec::new();
        for ball in balls {
            let slot = collections.iter().position(|col| {
                col.balls
                    .iter()
                    .all(|b| r_k.cmp_square(dist2(&b.center, &ball.center)) != Ordering::Less)
            });
            match slot {
                Some(s) => collections[s].balls.push(ball),
                None => collections.push(CollectionRecord { balls: vec![ball] }),
            }
        }

        for (ci, col) in collections.iter().enumerate() {
            let check = is_sparse_cells(&col.centers(), r_prev, gamma);
            if !check.sparse {
                return Err(Error::Assertion(format!(
                    "layer {k}, collection {ci} is not sparse: closest pair {:?} vs required {}",
                    check.worst, check.required
                )));
            }
            for (bi, ball) in col.balls.iter().enumerate() {
                for cell in &ball.cells {
                    coverage.push(CoverageEntry {
                        cell: cell.clone(),
                        layer: k,
                        collection: ci,
                        ball: bi,
                    });
                }
            }
        }
        collection_constant = collection_constant.max(collections.len() as f64 / scale);

        layers.push(Layer {
            k,
            radius: r_k.clone(),
            ball_radius: r_prev.clone(),
            cells: members.into_iter().cloned().collect(),
            net_centers: net.into_iter().cloned().collect(),
            sub_net_sizes,
            collections,
        });
    }

    coverage.sort_by(|a, b| a.cell.cmp(&b.cell));
    if coverage.len() != total || coverage.windows(2).any(|w| w[0].cell == w[1].cell) {
        return Err(Error::Assertion("coverage map is not a partition of E".into()));
    }

    Ok(DecompositionResult {
        k_layers,
        gamma,
        dim,
        cell_count: total,
        radii,
        layers,
        coverage,
        collection_constant,
        sub_net_constant,
    })
}

impl DecompositionResult {
    pub fn collection_count(&self, k: usize) -> usize {
        self.layers
            .iter()
            .find(|l| l.k == k)
            .map_or(0, |l| l.collections.len())
    }

    pub fn is_trivial(&self) -> bool {
        self.layers.iter().all(|l| l.collections.len() <= 1)
    }
}
