//! Position samples of a map from the parameter box into the ambient space.

use serde::{Deserialize, Serialize};

use crate::ambient::SpaceFormSpec;
use crate::diff::{Differ, Stencil};
use crate::error::{Error, Result};
use crate::grid::ParameterGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionSample {
    pub grid: ParameterGrid,
    pub spec: SpaceFormSpec,
    /// One ambient point per node; `None` marks a masked node.
    pub positions: Vec<Option<Vec<f64>>>,
}

pub type Sym3 = [[f64; 3]; 3];

impl ImmersionSample {
    pub fn new(grid: ParameterGrid, spec: SpaceFormSpec, positions: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if positions.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        for p in positions.iter().flatten() {
            spec.ambient.check(p)?;
        }
        Ok(Self { grid, spec, positions })
    }

    /// Sample a map at every node.
    pub fn from_fn(grid: ParameterGrid, spec: SpaceFormSpec, f: impl Fn([f64; 3]) -> Option<Vec<f64>>) -> Result<Self> {
        let positions = grid.indices().map(|i| f(grid.point(i))).collect();
        Self::new(grid, spec, positions)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn count_valid(&self) -> usize {
        self.positions.iter().filter(|p| p.is_some()).count()
    }

    /// Component a of every node, NaN where masked.
    pub(crate) fn component(&self, a: usize) -> Vec<f64> {
        self.positions.iter().map(|p| p.as_ref().map_or(f64::NAN, |x| x[a])).collect()
    }

    /// ∂f/∂u_axis per node (NaN where unavailable).
    pub(crate) fn tangents(&self, d: &Differ) -> [Vec<Vec<f64>>; 3] {
        let comps: Vec<Vec<f64>> = (0..self.dim()).map(|a| self.component(a)).collect();
        [0, 1, 2].map(|axis| {
            let per_comp: Vec<Vec<f64>> = comps.iter().map(|c| d.d1_field(c, axis)).collect();
            (0..self.grid.len()).map(|k| per_comp.iter().map(|c| c[k]).collect()).collect()
        })
    }

    /// First fundamental form g_ij = ⟨∂ᵢf, ∂ⱼf⟩ per node; `None` where a
    /// stencil touches a masked node.
    pub fn first_fundamental_form(&self, stencil: Stencil) -> Vec<Option<Sym3>> {
        let d = Differ::new(&self.grid, stencil);
        let t = self.tangents(&d);
        (0..self.grid.len())
            .map(|k| {
                let mut g = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in i..3 {
                        g[i][j] = self.spec.ambient.inner_unchecked(&t[i][k], &t[j][k]);
                        g[j][i] = g[i][j];
                    }
                }
                g.iter().flatten().all(|x| x.is_finite()).then_some(g)
            })
            .collect()
    }
}
