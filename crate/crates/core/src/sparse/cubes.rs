use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite union of unit lattice cubes in `ℤ^d`, indexed by their lower corners.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeSet {
    dim: usize,
    cells: BTreeSet<Vec<i64>>,
}

impl CubeSet {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::argument("cube set dimension must be positive"));
        }
        Ok(CubeSet { dim, cells: BTreeSet::new() })
    }

    pub fn from_cells(dim: usize, cells: impl IntoIterator<Item = Vec<i64>>) -> Result<Self> {
        let mut set = CubeSet::new(dim)?;
        for c in cells {
            set.insert(c)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, cell: Vec<i64>) -> Result<bool> {
        if cell.len() != self.dim {
            return Err(Error::argument(format!(
                "cell {cell:?} does not have dimension {}",
                self.dim
            )));
        }
        Ok(self.cells.insert(cell))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn contains(&self, cell: &[i64]) -> bool {
        self.cells.contains(cell)
    }

    /// Cells in lexicographic order.
    pub fn cells(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.cells.iter()
    }

    /// Lebesgue measure; cubes have unit side.
    pub fn measure(&self) -> f64 {
        self.cells.len() as f64
    }

    /// Plain text: one cell per line, coordinates separated by spaces.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.cells {
            let line: Vec<String> = c.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    /// Parses [`CubeSet::to_text`] output. Blank lines and lines starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<i64>()
                        .map_err(|e| Error::argument(format!("line {}: bad coordinate {tok:?}: {e}", no + 1)))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        let dim = rows
            .first()
            .map(|r| r.len())
            .ok_or_else(|| Error::argument("cube set file has no cells"))?;
        CubeSet::from_cells(dim, rows)
    }
}

/// Cells of `E` whose fibers over the spatial projection have `2^{j−1} < #E_x ≤ 2^j`;
/// singleton fibers form stratum `j = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub j: u32,
    pub cells: CubeSet,
    /// Number of distinct spatial cells under the stratum.
    pub projection: usize,
}

fn stratum_index(count: usize) -> u32 {
    // smallest j with count ≤ 2^j
    usize::BITS - (count - 1).leading_zeros()
}

/// Groups cells by the dyadic size of their time fiber (the last coordinate is time).
pub fn fiber_stratify(e: &CubeSet) -> Result<Vec<Stratum>> {
    if e.dim() < 2 {
        return Err(Error::argument("fiber stratification needs at least one spatial and one time axis"));
    }
    let mut fibers: BTreeMap<&[i64], Vec<&Vec<i64>>> = BTreeMap::new();
    for c in e.cells() {
        fibers.entry(&c[..e.dim() - 1]).or_default().push(c);
    }
    let mut strata: BTreeMap<u32, Stratum> = BTreeMap::new();
    for cells in fibers.values() {
        let j = stratum_index(cells.len());
        let s = strata.entry(j).or_insert_with(|| Stratum {
            j,
            cells: CubeSet::new(e.dim()).expect("positive dimension"),
            projection: 0,
        });
        s.projection += 1;
        for c in cells {
            s.cells.insert((*c).clone())?;
        }
    }
    Ok(strata.into_values().collect())
}
