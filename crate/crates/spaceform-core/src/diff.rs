//! Finite-difference stencils on grid-sampled scalar fields.
//!
//! Interior nodes use the centered stencil of the requested order; near a face
//! the window slides inward and becomes one-sided with the same number of
//! points. Order 2 is the classic (−½, 0, ½)/Δ interior and (−3/2, 2, −½)/Δ
//! face stencil. Values marked NaN poison every derivative whose window
//! touches them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Index, ParameterGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Stencil {
    #[default]
    Order2,
    Order4,
    Order6,
}

impl Stencil {
    pub fn order(self) -> usize {
        match self {
            Stencil::Order2 => 2,
            Stencil::Order4 => 4,
            Stencil::Order6 => 6,
        }
    }

    pub fn from_order(p: usize) -> Result<Self> {
        match p {
            2 => Ok(Stencil::Order2),
            4 => Ok(Stencil::Order4),
            6 => Ok(Stencil::Order6),
            _ => Err(Error::InvalidParams(format!("stencil order must be 2, 4 or 6, got {p}"))),
        }
    }
}

/// Fornberg's recursion: weights for the m-th derivative at x0 from nodes xs.
pub fn fd_weights(x0: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

#[derive(Debug, Clone)]
struct AxisTable {
    /// (first node of window, weights) per node along the axis; `None` when
    /// the axis is too short for any stencil.
    d1: Vec<Option<(usize, Vec<f64>)>>,
    d2: Vec<Option<(usize, Vec<f64>)>>,
}

fn axis_table(n: usize, step: f64, order: usize) -> AxisTable {
    let build = |m: usize| -> Vec<Option<(usize, Vec<f64>)>> {
        (0..n)
            .map(|i| {
                let centered = order + 1;
                let mut width = centered;
                let half = order / 2;
                let fits = i >= half && i + half < n;
                if !fits && m == 2 {
                    width += 1;
                }
                // shrink the order when the axis is too short
                while width > n && width > m + 1 {
                    width -= 1;
                }
                if width > n || n < m + 1 {
                    return None;
                }
                let start =
                    if fits && width == centered { i - half } else { i.saturating_sub(width / 2).min(n - width) };
                let xs: Vec<f64> = (start..start + width).map(|k| k as f64 - i as f64).collect();
                let w = fd_weights(0.0, &xs, m);
                let scale = step.powi(m as i32);
                Some((start, w.into_iter().map(|x| x / scale).collect()))
            })
            .collect()
    };
    AxisTable { d1: build(1), d2: build(2) }
}

/// Differentiation operator for one grid and stencil order.
#[derive(Debug, Clone)]
pub struct Differ {
    grid: ParameterGrid,
    stencil: Stencil,
    tables: [AxisTable; 3],
}

impl Differ {
    pub fn new(grid: &ParameterGrid, stencil: Stencil) -> Self {
        let p = stencil.order();
        let tables = [0, 1, 2].map(|a| axis_table(grid.n[a], grid.step(a), p));
        Self { grid: grid.clone(), stencil, tables }
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn grid(&self) -> &ParameterGrid {
        &self.grid
    }

    /// Errors unless every axis has at least `min` nodes.
    pub fn require(grid: &ParameterGrid, min: usize) -> Result<()> {
        for a in 0..3 {
            if grid.n[a] < min {
                return Err(Error::GridTooCoarse { axis: a, n: grid.n[a], min });
            }
        }
        Ok(())
    }

    fn apply(&self, table: &Option<(usize, Vec<f64>)>, values: &[f64], idx: Index, axis: usize) -> f64 {
        match table {
            None => f64::NAN,
            Some((start, w)) => {
                let mut j = idx;
                let mut acc = 0.0;
                for (k, wk) in w.iter().enumerate() {
                    j[axis] = start + k;
                    acc += wk * values[self.grid.linear(j)];
                }
                acc
            }
        }
    }

    /// ∂/∂u_axis of a node-sampled field at one node.
    pub fn d1(&self, values: &[f64], idx: Index, axis: usize) -> f64 {
        self.apply(&self.tables[axis].d1[idx[axis]], values, idx, axis)
    }

    /// ∂²/∂u_axis² at one node.
    pub fn d2(&self, values: &[f64], idx: Index, axis: usize) -> f64 {
        self.apply(&self.tables[axis].d2[idx[axis]], values, idx, axis)
    }

    /// Whole-grid first derivative.
    pub fn d1_field(&self, values: &[f64], axis: usize) -> Vec<f64> {
        self.grid.indices().map(|idx| self.d1(values, idx, axis)).collect()
    }

    /// Whole-grid second derivative; mixed partials differentiate twice.
    pub fn d2_field(&self, values: &[f64], a: usize, b: usize) -> Vec<f64> {
        if a == b {
            self.grid.indices().map(|idx| self.d2(values, idx, a)).collect()
        } else {
            self.d1_field(&self.d1_field(values, a), b)
        }
    }
}
