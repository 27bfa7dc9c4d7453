//! Dose grid geometry.
//!
//! Doses are 1-based pairs `(j, k)`: `j` indexes agent A (`1..=J`), `k`
//! indexes agent B (`1..=K`). Matrices are stored row-major by agent-B level,
//! matching the scenario file layout (row `k` holds the `J` agent-A levels).

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Dose {
    pub j: usize,
    pub k: usize,
}

impl Dose {
    pub const fn new(j: usize, k: usize) -> Self {
        Dose { j, k }
    }

    /// Anti-diagonal index `j + k - 1`; the lowest dose is in zone 1.
    pub fn zone(self) -> usize {
        self.j + self.k - 1
    }

    /// True when `self` is known to be no more toxic than `other`.
    pub fn precedes_or_eq(self, other: Dose) -> bool {
        self.j <= other.j && self.k <= other.k
    }

    /// Shift by signed offsets; `None` if either index would drop below 1.
    pub fn offset(self, dj: isize, dk: isize) -> Option<Dose> {
        let j = self.j as isize + dj;
        let k = self.k as isize + dk;
        (j >= 1 && k >= 1).then(|| Dose::new(j as usize, k as usize))
    }

    /// Key used to rank doses that are otherwise tied: lower zone first, then lower `j`.
    pub(crate) fn height(self) -> (usize, usize) {
        (self.j + self.k, self.j)
    }
}

impl fmt::Display for Dose {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.j, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DoseGrid {
    #[serde(rename = "J")]
    pub j_levels: usize,
    #[serde(rename = "K")]
    pub k_levels: usize,
}

impl DoseGrid {
    pub fn new(j_levels: usize, k_levels: usize) -> Result<Self> {
        if j_levels == 0 || k_levels == 0 {
            return Err(Error::param(format!(
                "grid needs at least one level per agent, got {j_levels}x{k_levels}"
            )));
        }
        Ok(DoseGrid { j_levels, k_levels })
    }

    pub fn len(&self) -> usize {
        self.j_levels * self.k_levels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, dose: Dose) -> bool {
        (1..=self.j_levels).contains(&dose.j) && (1..=self.k_levels).contains(&dose.k)
    }

    pub fn check(&self, dose: Dose) -> Result<()> {
        if self.contains(dose) {
            Ok(())
        } else {
            Err(Error::OutOfGrid {
                dose,
                j_levels: self.j_levels,
                k_levels: self.k_levels,
            })
        }
    }

    pub fn lowest(&self) -> Dose {
        Dose::new(1, 1)
    }

    pub fn highest(&self) -> Dose {
        Dose::new(self.j_levels, self.k_levels)
    }

    pub fn index(&self, dose: Dose) -> usize {
        debug_assert!(self.contains(dose), "{dose} outside grid");
        (dose.k - 1) * self.j_levels + (dose.j - 1)
    }

    pub fn dose_at(&self, index: usize) -> Dose {
        Dose::new(index % self.j_levels + 1, index / self.j_levels + 1)
    }

    /// All doses in storage order.
    pub fn doses(self) -> impl Iterator<Item = Dose> {
        (0..self.len()).map(move |i| self.dose_at(i))
    }

    /// In-grid doses reached by the given offsets, in the order listed.
    pub fn moves(&self, from: Dose, offsets: &[(isize, isize)]) -> Vec<Dose> {
        offsets
            .iter()
            .filter_map(|&(dj, dk)| from.offset(dj, dk))
            .filter(|d| self.contains(*d))
            .collect()
    }

    /// The 8-neighbourhood of `from` plus `from` itself.
    pub fn neighbourhood(&self, from: Dose) -> Vec<Dose> {
        let mut out = Vec::with_capacity(9);
        for dk in -1..=1 {
            for dj in -1..=1 {
                if let Some(d) = from.offset(dj, dk).filter(|d| self.contains(*d)) {
                    out.push(d);
                }
            }
        }
        out
    }
}

/// A value per dose combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseMatrix<T> {
    grid: DoseGrid,
    data: Vec<T>,
}

impl<T: Clone> DoseMatrix<T> {
    pub fn filled(grid: DoseGrid, value: T) -> Self {
        DoseMatrix {
            grid,
            data: vec![value; grid.len()],
        }
    }
}

impl<T> DoseMatrix<T> {
    pub fn from_vec(grid: DoseGrid, data: Vec<T>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.j_levels,
                grid.k_levels,
                data.len()
            )));
        }
        Ok(DoseMatrix { grid, data })
    }

    pub fn from_fn(grid: DoseGrid, mut f: impl FnMut(Dose) -> T) -> Self {
        let data = grid.doses().map(&mut f).collect();
        DoseMatrix { grid, data }
    }

    pub fn grid(&self) -> DoseGrid {
        self.grid
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn iter(&self) -> impl Iterator<Item = (Dose, &T)> + '_ {
        self.data
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.grid.dose_at(i), v))
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> DoseMatrix<U> {
        DoseMatrix {
            grid: self.grid,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Rows by agent-B level, each holding the `J` agent-A values.
    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.data.chunks(self.grid.j_levels)
    }
}

impl<T> Index<Dose> for DoseMatrix<T> {
    type Output = T;
    fn index(&self, dose: Dose) -> &T {
        &self.data[self.grid.index(dose)]
    }
}

impl<T> IndexMut<Dose> for DoseMatrix<T> {
    fn index_mut(&mut self, dose: Dose) -> &mut T {
        let i = self.grid.index(dose);
        &mut self.data[i]
    }
}
