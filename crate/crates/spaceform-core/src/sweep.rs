//! Line-by-line RK4 integration of linear PDE systems over a grid.
//!
//! Starting from the base node the state is carried along the first sweep
//! axis, then from every node of that line along the second axis, then from
//! every node of the resulting plane along the third. Each line is integrated
//! sequentially; lines of the second and third stage run in parallel.

use rayon::prelude::*;

use crate::grid::{Index, ParameterGrid};

/// Right-hand side of the system restricted to a u_axis line.
pub trait LineSystem: Sync {
    fn dim(&self) -> usize;
    /// d y / d u_axis at the point of the line through `anchor` with
    /// coordinate t.
    fn rhs(&self, axis: usize, anchor: Index, t: f64, y: &[f64], dy: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub order: [usize; 3],
    pub max_step: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self { order: [0, 1, 2], max_step: 1e-2 }
    }
}

fn rk4_step<S: LineSystem>(
    sys: &S,
    axis: usize,
    anchor: Index,
    t: f64,
    h: f64,
    y: &mut [f64],
    work: &mut [Vec<f64>; 5],
) {
    let [k1, k2, k3, k4, tmp] = work;
    sys.rhs(axis, anchor, t, y, k1);
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * h * k1[i];
    }
    sys.rhs(axis, anchor, t + 0.5 * h, tmp, k2);
    for i in 0..y.len() {
        tmp[i] = y[i] + 0.5 * h * k2[i];
    }
    sys.rhs(axis, anchor, t + 0.5 * h, tmp, k3);
    for i in 0..y.len() {
        tmp[i] = y[i] + h * k3[i];
    }
    sys.rhs(axis, anchor, t + h, tmp, k4);
    for i in 0..y.len() {
        y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Integrate along the u_axis line through `start`, writing the state at
/// every node of the line. Returns (node index along axis, state) pairs.
fn integrate_line<S: LineSystem>(
    sys: &S,
    grid: &ParameterGrid,
    axis: usize,
    start: Index,
    y0: &[f64],
    max_step: f64,
) -> Vec<(usize, Vec<f64>)> {
    let n = grid.n[axis];
    let d = sys.dim();
    let mut work = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
    let mut out = vec![(start[axis], y0.to_vec())];
    for dir in [1isize, -1] {
        let mut y = y0.to_vec();
        let mut i = start[axis] as isize;
        loop {
            let j = i + dir;
            if j < 0 || j >= n as isize {
                break;
            }
            let t0 = grid.coord(axis, i as usize);
            let t1 = grid.coord(axis, j as usize);
            let m = ((t1 - t0).abs() / max_step).ceil().max(1.0) as usize;
            let h = (t1 - t0) / m as f64;
            for s in 0..m {
                let t = t0 + s as f64 * h;
                rk4_step(sys, axis, start, t, h, &mut y, &mut work);
            }
            out.push((j as usize, y.clone()));
            i = j;
        }
    }
    out
}

/// Sweep-integrate from `y0` at the grid base. Result is row-major (see
/// [`ParameterGrid::linear`]) with `sys.dim()` entries per node.
pub fn sweep<S: LineSystem>(sys: &S, grid: &ParameterGrid, y0: &[f64], opts: SweepOptions) -> Vec<f64> {
    let d = sys.dim();
    assert_eq!(y0.len(), d);
    let mut out = vec![f64::NAN; grid.len() * d];
    let [a0, a1, a2] = opts.order;
    let base = grid.base;

    let write = |out: &mut Vec<f64>, idx: Index, y: &[f64]| {
        let k = grid.linear(idx);
        out[k * d..(k + 1) * d].copy_from_slice(y);
    };

    // stage 1: the a0 line through the base
    let mut line: Vec<(Index, Vec<f64>)> = integrate_line(sys, grid, a0, base, y0, opts.max_step)
        .into_iter()
        .map(|(i, y)| {
            let mut idx = base;
            idx[a0] = i;
            (idx, y)
        })
        .collect();
    line.sort_by_key(|(idx, _)| idx[a0]);

    // stage 2: a1 lines through the stage-1 nodes
    let plane: Vec<(Index, Vec<f64>)> = line
        .par_iter()
        .flat_map_iter(|(start, y)| {
            let start = *start;
            integrate_line(sys, grid, a1, start, y, opts.max_step).into_iter().map(move |(i, y)| {
                let mut idx = start;
                idx[a1] = i;
                (idx, y)
            })
        })
        .collect();

    // stage 3: a2 lines through the plane
    let volume: Vec<(Index, Vec<f64>)> = plane
        .par_iter()
        .flat_map_iter(|(start, y)| {
            let start = *start;
            integrate_line(sys, grid, a2, start, y, opts.max_step).into_iter().map(move |(i, y)| {
                let mut idx = start;
                idx[a2] = i;
                (idx, y)
            })
        })
        .collect();
    for (idx, y) in volume {
        write(&mut out, idx, &y);
    }
    out
}
