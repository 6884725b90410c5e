//! Moving-frame reconstruction of the immersion from (v, h, V).
//!
//! Along the uᵢ-line the frame (f, X₁, X₂, X₃, N) evolves by
//!
//! ```text
//! ∂f/∂uᵢ  = vᵢXᵢ
//! ∂Xⱼ/∂uᵢ = h_ji Xᵢ                                  (j ≠ i)
//! ∂Xᵢ/∂uᵢ = −Σ_{k≠i} h_ki X_k + εVᵢN − c vᵢ f
//! ∂N/∂uᵢ  = −VᵢXᵢ
//! ```

use serde::{Deserialize, Serialize};

use crate::ambient::SpaceFormSpec;
use crate::diff::{Differ, Stencil};
use crate::error::{Error, Result};
use crate::grid::{Index, ParameterGrid};
use crate::immersion::{ImmersionSample, Sym3};
use crate::report::{Accumulator, ReportMetadata, ResidualReport};
use crate::sweep::{sweep, LineSystem, SweepOptions};
use crate::triples::{triple_residuals, TripleField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameState {
    pub f: Vec<f64>,
    pub x: [Vec<f64>; 3],
    pub n: Vec<f64>,
}

impl FrameState {
    /// Standard initial frame: f = 0, N = εE₄ when c = 0; f = E₅/√|c|,
    /// N = E₄ when c ≠ 0; Xᵢ = Eᵢ.
    pub fn standard(spec: &SpaceFormSpec) -> Self {
        let d = spec.dim();
        let e = |i: usize, s: f64| {
            let mut v = vec![0.0; d];
            v[i] = s;
            v
        };
        if spec.c == 0.0 {
            Self { f: vec![0.0; d], x: [e(0, 1.0), e(1, 1.0), e(2, 1.0)], n: e(3, spec.eps()) }
        } else {
            Self { f: e(4, 1.0 / spec.c.abs().sqrt()), x: [e(0, 1.0), e(1, 1.0), e(2, 1.0)], n: e(3, 1.0) }
        }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(5 * self.dim());
        out.extend_from_slice(&self.f);
        for x in &self.x {
            out.extend_from_slice(x);
        }
        out.extend_from_slice(&self.n);
        out
    }

    pub fn from_flat(y: &[f64], d: usize) -> Self {
        let part = |k: usize| y[k * d..(k + 1) * d].to_vec();
        Self { f: part(0), x: [part(1), part(2), part(3)], n: part(4) }
    }

    fn check_dims(&self, spec: &SpaceFormSpec) -> Result<()> {
        spec.ambient.check(&self.f)?;
        for x in &self.x {
            spec.ambient.check(x)?;
        }
        spec.ambient.check(&self.n)
    }

    /// Largest entry of Gram(X₁,X₂,X₃,N[,√|c|f]) − diag(1,1,1,ε[,sign c]).
    pub fn gram_defect(&self, spec: &SpaceFormSpec) -> f64 {
        let mut vecs: Vec<Vec<f64>> = self.x.to_vec();
        vecs.push(self.n.clone());
        let mut target = vec![1.0, 1.0, 1.0, spec.eps()];
        if spec.c != 0.0 {
            let r = spec.c.abs().sqrt();
            vecs.push(self.f.iter().map(|x| r * x).collect());
            target.push(spec.c.signum());
        }
        let mut worst = 0.0f64;
        for a in 0..vecs.len() {
            for b in a..vecs.len() {
                let g = spec.ambient.inner_unchecked(&vecs[a], &vecs[b]);
                let want = if a == b { target[a] } else { 0.0 };
                worst = worst.max((g - want).abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameOptions {
    pub sweep: SweepOptions,
    /// Reject triples whose residual exceeds this (skipped when `None` or
    /// when the grid is too coarse for finite differences).
    pub integrability_tol: Option<f64>,
    /// Reject initial frames whose Gram defect exceeds this.
    pub init_tol: Option<f64>,
}

impl Default for FrameOptions {
    fn default() -> Self {
        Self { sweep: SweepOptions::default(), integrability_tol: Some(1e-8), init_tol: Some(1e-8) }
    }
}

impl FrameOptions {
    pub fn unchecked() -> Self {
        Self { integrability_tol: None, init_tol: None, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct FrameField {
    pub grid: ParameterGrid,
    pub spec: SpaceFormSpec,
    pub states: Vec<FrameState>,
    pub triple: TripleField,
    pub options: FrameOptions,
}

impl FrameField {
    pub fn state(&self, idx: Index) -> &FrameState {
        &self.states[self.grid.linear(idx)]
    }

    pub fn positions(&self) -> ImmersionSample {
        ImmersionSample {
            grid: self.grid.clone(),
            spec: self.spec.clone(),
            positions: self.states.iter().map(|s| Some(s.f.clone())).collect(),
        }
    }
}

struct FrameSystem<'a> {
    triple: &'a TripleField,
    d: usize,
    eps: f64,
    c: f64,
}

impl LineSystem for FrameSystem<'_> {
    fn dim(&self) -> usize {
        5 * self.d
    }

    fn rhs(&self, i: usize, anchor: Index, t: f64, y: &[f64], dy: &mut [f64]) {
        let s = self.triple.on_line(i, anchor, t);
        let d = self.d;
        let f = &y[0..d];
        let x = |j: usize| &y[(1 + j) * d..(2 + j) * d];
        let n = &y[4 * d..5 * d];
        for a in 0..d {
            dy[a] = s.v[i] * x(i)[a];
            let mut dxi = self.eps * s.big_v[i] * n[a] - self.c * s.v[i] * f[a];
            for j in 0..3 {
                if j != i {
                    dy[(1 + j) * d + a] = s.h[j][i] * x(i)[a];
                    dxi -= s.h[j][i] * x(j)[a];
                }
            }
            dy[(1 + i) * d + a] = dxi;
            dy[4 * d + a] = -s.big_v[i] * x(i)[a];
        }
    }
}

fn check_triple(t: &TripleField, tol: Option<f64>) -> Result<()> {
    let Some(tol) = tol else { return Ok(()) };
    match triple_residuals(t) {
        Ok(r) if r.max() <= tol => Ok(()),
        Ok(r) => Err(Error::PreconditionFailed(format!(
            "triple residual {:e} exceeds integrability tolerance {tol:e}",
            r.max()
        ))),
        Err(Error::GridTooCoarse { .. }) => Ok(()),
        Err(e) => Err(e),
    }
}

/// Sweep-integrate the frame system from `init` at the grid base.
pub fn integrate_frame(
    t: &TripleField,
    init: &FrameState,
    grid: &ParameterGrid,
    opts: FrameOptions,
) -> Result<FrameField> {
    let t = t.on_grid(grid)?;
    let spec = t.spec.clone();
    init.check_dims(&spec)?;
    check_triple(&t, opts.integrability_tol)?;
    if let Some(tol) = opts.init_tol {
        let defect = init.gram_defect(&spec);
        if defect > tol {
            return Err(Error::PreconditionFailed(format!("initial frame Gram defect {defect:e}")));
        }
        if !spec.on_space_form(&init.f, tol) {
            return Err(Error::PreconditionFailed("initial position is off the space form".into()));
        }
    }
    let d = spec.dim();
    let sys = FrameSystem { triple: &t, d, eps: spec.eps(), c: spec.c };
    let flat = sweep(&sys, grid, &init.to_flat(), opts.sweep);
    let mut states = Vec::with_capacity(grid.len());
    for (k, y) in flat.chunks(5 * d).enumerate() {
        if y.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteState { index: grid.unravel(k) });
        }
        states.push(FrameState::from_flat(y, d));
    }
    Ok(FrameField { grid: grid.clone(), spec, states, triple: t, options: opts })
}

fn metadata(opts: &FrameOptions) -> ReportMetadata {
    ReportMetadata {
        scheme: Some(format!("rk4 sweep {:?}", opts.sweep.order)),
        step: Some(opts.sweep.max_step),
        stencil: None,
    }
}

/// Gram-matrix defect of the frame at every node.
pub fn frame_gram_residual(ff: &FrameField) -> ResidualReport {
    let mut acc = Accumulator::new("gram");
    for idx in ff.grid.indices() {
        acc.add(ff.state(idx).gram_defect(&ff.spec), idx);
    }
    ResidualReport { entries: vec![acc.finish()], metadata: metadata(&ff.options) }
}

/// Difference between the sweeps (u₁,u₂,u₃) and (u₃,u₂,u₁): entry
/// `far_corner` compares f at the corner farthest from the base, entry
/// `grid` compares f over all nodes.
pub fn path_independence_residual(
    t: &TripleField,
    init: &FrameState,
    grid: &ParameterGrid,
    opts: FrameOptions,
) -> Result<ResidualReport> {
    let mut o1 = FrameOptions { integrability_tol: None, ..opts };
    o1.sweep.order = [0, 1, 2];
    let mut o2 = o1;
    o2.sweep.order = [2, 1, 0];
    let a = integrate_frame(t, init, grid, o1)?;
    let b = integrate_frame(t, init, grid, o2)?;
    let diff = |idx: Index| a.state(idx).f.iter().zip(&b.state(idx).f).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let corner = grid.corner_far_from_base();
    let mut far = Accumulator::new("far_corner");
    far.add(diff(corner), corner);
    let mut all = Accumulator::new("grid");
    for idx in grid.indices() {
        all.add(diff(idx), idx);
    }
    Ok(ResidualReport { entries: vec![far.finish(), all.finish()], metadata: metadata(&o1) })
}

#[derive(Debug, Clone)]
pub struct MetricSamples {
    pub g: Vec<Option<Sym3>>,
    /// `offdiagonal`: |g_ij|, i ≠ j; `diagonal`: |g_ii − vᵢ²|.
    pub report: ResidualReport,
}

/// Induced metric ⟨∂ᵢf, ∂ⱼf⟩ by finite differences, compared with diag(v²).
pub fn induced_metric(ff: &FrameField, stencil: Stencil) -> Result<MetricSamples> {
    Differ::require(&ff.grid, 5)?;
    let g = ff.positions().first_fundamental_form(stencil);
    let mut off = Accumulator::new("offdiagonal");
    let mut dia = Accumulator::new("diagonal");
    for idx in ff.grid.indices() {
        let Some(m) = g[ff.grid.linear(idx)] else { continue };
        let Some(s) = ff.triple.sample(idx) else { continue };
        for i in 0..3 {
            dia.add(m[i][i] - s.v[i] * s.v[i], idx);
            for j in i + 1..3 {
                off.add(m[i][j], idx);
            }
        }
    }
    Ok(MetricSamples {
        g,
        report: ResidualReport {
            entries: vec![off.finish(), dia.finish()],
            metadata: ReportMetadata { stencil: Some(format!("order {}", stencil.order())), ..metadata(&ff.options) },
        },
    })
}
