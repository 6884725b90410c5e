//! Sampling boxes in parameter space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Index = [usize; 3];

/// A box [lo, hi] ⊂ R³ sampled with n[a] equispaced nodes along axis a.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
    pub n: [usize; 3],
    /// Anchor node where initial data is prescribed.
    pub base: Index,
}

impl ParameterGrid {
    /// Grid anchored at the lowest corner. An axis with a single node must
    /// have lo == hi.
    pub fn new(lo: [f64; 3], hi: [f64; 3], n: [usize; 3]) -> Result<Self> {
        for a in 0..3 {
            if n[a] == 0 {
                return Err(Error::InvalidGrid(format!("axis {a} has no nodes")));
            }
            if !(lo[a].is_finite() && hi[a].is_finite()) {
                return Err(Error::InvalidGrid(format!("axis {a} bounds are not finite")));
            }
            if n[a] == 1 && lo[a] != hi[a] {
                return Err(Error::InvalidGrid(format!("axis {a} has one node but lo != hi")));
            }
            if n[a] > 1 && lo[a] >= hi[a] {
                return Err(Error::InvalidGrid(format!("axis {a} needs lo < hi")));
            }
        }
        Ok(Self { lo, hi, n, base: [0; 3] })
    }

    /// The cube [-r, r]³ with n nodes per axis, anchored at the central node.
    pub fn cube(r: f64, n: usize) -> Result<Self> {
        Ok(Self::new([-r; 3], [r; 3], [n; 3])?.centered())
    }

    pub fn with_base(mut self, base: Index) -> Result<Self> {
        if (0..3).any(|a| base[a] >= self.n[a]) {
            return Err(Error::InvalidGrid(format!("base {base:?} outside {:?}", self.n)));
        }
        self.base = base;
        Ok(self)
    }

    pub fn centered(mut self) -> Self {
        self.base = [self.n[0] / 2, self.n[1] / 2, self.n[2] / 2];
        self
    }

    pub fn len(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn step(&self, axis: usize) -> f64 {
        if self.n[axis] > 1 {
            (self.hi[axis] - self.lo[axis]) / (self.n[axis] - 1) as f64
        } else {
            0.0
        }
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if i + 1 == self.n[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + i as f64 * self.step(axis)
        }
    }

    pub fn point(&self, idx: Index) -> [f64; 3] {
        [self.coord(0, idx[0]), self.coord(1, idx[1]), self.coord(2, idx[2])]
    }

    /// Row-major position of a node; lexicographic in (i₁, i₂, i₃).
    pub fn linear(&self, idx: Index) -> usize {
        (idx[0] * self.n[1] + idx[1]) * self.n[2] + idx[2]
    }

    pub fn unravel(&self, k: usize) -> Index {
        let i3 = k % self.n[2];
        let r = k / self.n[2];
        [r / self.n[1], r % self.n[1], i3]
    }

    pub fn indices(&self) -> impl Iterator<Item = Index> + '_ {
        (0..self.len()).map(|k| self.unravel(k))
    }

    pub fn diameter(&self) -> f64 {
        (0..3).map(|a| (self.hi[a] - self.lo[a]).powi(2)).sum::<f64>().sqrt()
    }

    /// Largest box edge, used to scale absolute tolerances.
    pub fn scale(&self) -> f64 {
        (0..3).map(|a| self.hi[a] - self.lo[a]).fold(0.0, f64::max).max(1.0)
    }

    pub fn corner_far_from_base(&self) -> Index {
        let mut idx = [0; 3];
        for a in 0..3 {
            idx[a] = if self.base[a] * 2 < self.n[a] { self.n[a] - 1 } else { 0 };
        }
        idx
    }

    /// Same nodes as `other` (bases may differ).
    pub fn same_nodes(&self, other: &Self) -> bool {
        self.lo == other.lo && self.hi == other.hi && self.n == other.n
    }

    /// 2-D slice obtained by fixing `axis` at node `i`.
    pub fn slice(&self, axis: usize, i: usize) -> Result<Self> {
        if i >= self.n[axis] {
            return Err(Error::InvalidGrid(format!("slice index {i} out of range")));
        }
        let mut g = self.clone();
        let x = self.coord(axis, i);
        g.lo[axis] = x;
        g.hi[axis] = x;
        g.n[axis] = 1;
        g.base[axis] = 0;
        Ok(g)
    }
}
