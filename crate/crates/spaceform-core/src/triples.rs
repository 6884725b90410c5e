//! Holonomic data (v, h, V): integrability residuals, first integrals and
//! classification.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::SpaceFormSpec;
use crate::diff::{Differ, Stencil};
use crate::error::{Error, Result};
use crate::grid::{Index, ParameterGrid};
use crate::report::{Accumulator, ReportMetadata, ResidualReport};

/// Names of the residual families reported by [`triple_residuals`].
pub mod family {
    /// ∂vᵢ/∂uⱼ − h_ji vⱼ
    pub const V_TRANSPORT: &str = "v_transport";
    /// ∂h_ik/∂uⱼ − h_ij h_jk
    pub const H_TRANSPORT: &str = "h_transport";
    /// ∂h_ij/∂uᵢ + ∂h_ji/∂uⱼ + h_ki h_kj + εVᵢVⱼ + c vᵢvⱼ
    pub const GAUSS: &str = "gauss";
    /// ∂Vᵢ/∂uⱼ − h_ji Vⱼ
    pub const CODAZZI: &str = "codazzi";
    /// δᵢ∂vᵢ/∂uᵢ + δⱼh_ij vⱼ + δ_k h_ik v_k
    pub const V_BALANCE: &str = "v_balance";
    /// δᵢ∂Vᵢ/∂uᵢ + δⱼh_ij Vⱼ + δ_k h_ik V_k
    pub const BIG_V_BALANCE: &str = "V_balance";
}

/// Values of (v, h, V) at one point. The diagonal of `h` is unused.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TripleSample {
    pub v: [f64; 3],
    pub h: [[f64; 3]; 3],
    pub big_v: [f64; 3],
}

impl TripleSample {
    pub fn constant(v: [f64; 3], big_v: [f64; 3]) -> Self {
        Self { v, h: [[0.0; 3]; 3], big_v }
    }

    pub fn nan() -> Self {
        Self { v: [f64::NAN; 3], h: [[f64::NAN; 3]; 3], big_v: [f64::NAN; 3] }
    }

    pub fn is_finite(&self) -> bool {
        self.v.iter().chain(self.big_v.iter()).chain(self.h.iter().flatten()).all(|x| x.is_finite())
    }

    fn lincomb(terms: &[(f64, TripleSample)]) -> Self {
        let mut out = TripleSample::default();
        for (w, s) in terms {
            for i in 0..3 {
                out.v[i] += w * s.v[i];
                out.big_v[i] += w * s.big_v[i];
                for j in 0..3 {
                    out.h[i][j] += w * s.h[i][j];
                }
            }
        }
        out
    }
}

pub type TripleFn = Arc<dyn Fn([f64; 3]) -> TripleSample + Send + Sync>;

#[derive(Clone)]
pub enum TripleData {
    /// Exact callables, evaluated anywhere.
    Closed(TripleFn),
    /// Node samples; `None` marks a masked node.
    Sampled(Vec<Option<TripleSample>>),
}

/// Holonomic data on a parameter box.
#[derive(Clone)]
pub struct TripleField {
    pub grid: ParameterGrid,
    pub delta: [f64; 3],
    pub spec: SpaceFormSpec,
    pub data: TripleData,
    /// Stencil used whenever derivatives of the data are needed.
    pub stencil: Stencil,
    pub label: String,
}

impl fmt::Debug for TripleField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.data {
            TripleData::Closed(_) => "closed".to_string(),
            TripleData::Sampled(s) => format!("sampled({})", s.len()),
        };
        f.debug_struct("TripleField")
            .field("label", &self.label)
            .field("grid", &self.grid)
            .field("delta", &self.delta)
            .field("spec", &self.spec)
            .field("data", &kind)
            .finish()
    }
}

fn check_delta(delta: [f64; 3]) -> Result<()> {
    if delta.iter().all(|&d| d == 1.0 || d == -1.0) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("δ entries must be ±1, got {delta:?}")))
    }
}

impl TripleField {
    pub fn closed(
        grid: ParameterGrid,
        delta: [f64; 3],
        spec: SpaceFormSpec,
        f: impl Fn([f64; 3]) -> TripleSample + Send + Sync + 'static,
    ) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            grid,
            delta,
            spec,
            data: TripleData::Closed(Arc::new(f)),
            stencil: Stencil::Order2,
            label: String::new(),
        })
    }

    pub fn sampled(
        grid: ParameterGrid,
        delta: [f64; 3],
        spec: SpaceFormSpec,
        samples: Vec<Option<TripleSample>>,
    ) -> Result<Self> {
        check_delta(delta)?;
        if samples.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid,
            delta,
            spec,
            data: TripleData::Sampled(samples),
            stencil: Stencil::Order2,
            label: String::new(),
        })
    }

    /// Constant data with h = 0.
    pub fn constant(
        grid: ParameterGrid,
        delta: [f64; 3],
        spec: SpaceFormSpec,
        v: [f64; 3],
        big_v: [f64; 3],
    ) -> Result<Self> {
        let s = TripleSample::constant(v, big_v);
        Self::closed(grid, delta, spec, move |_| s)
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.data, TripleData::Closed(_))
    }

    /// Same data on another grid. Sampled fields only accept the same nodes.
    pub fn on_grid(&self, grid: &ParameterGrid) -> Result<Self> {
        if !self.is_closed_form() && !self.grid.same_nodes(grid) {
            return Err(Error::GridMismatch);
        }
        let mut t = self.clone();
        t.grid = grid.clone();
        Ok(t)
    }

    pub fn sample(&self, idx: Index) -> Option<TripleSample> {
        match &self.data {
            TripleData::Closed(f) => Some(f(self.grid.point(idx))),
            TripleData::Sampled(s) => s[self.grid.linear(idx)],
        }
    }

    pub fn is_valid(&self, idx: Index) -> bool {
        match &self.data {
            TripleData::Closed(_) => true,
            TripleData::Sampled(s) => s[self.grid.linear(idx)].is_some(),
        }
    }

    /// Data at the point of the u_axis line through `anchor` with coordinate t.
    /// Sampled data is interpolated by cubic Lagrange polynomials along the
    /// line; a masked node in the window yields NaN.
    pub fn on_line(&self, axis: usize, anchor: Index, t: f64) -> TripleSample {
        match &self.data {
            TripleData::Closed(f) => {
                let mut p = self.grid.point(anchor);
                p[axis] = t;
                f(p)
            }
            TripleData::Sampled(s) => {
                let n = self.grid.n[axis];
                if n == 1 {
                    return s[self.grid.linear(anchor)].unwrap_or_else(TripleSample::nan);
                }
                let step = self.grid.step(axis);
                let x = (t - self.grid.lo[axis]) / step;
                let width = n.min(4);
                let cell = (x.floor().max(0.0) as usize).min(n - 2);
                let start = cell.saturating_sub(1).min(n - width);
                let mut terms = Vec::with_capacity(width);
                for a in start..start + width {
                    let mut w = 1.0;
                    for b in start..start + width {
                        if a != b {
                            w *= (x - b as f64) / (a as f64 - b as f64);
                        }
                    }
                    let mut idx = anchor;
                    idx[axis] = a;
                    match s[self.grid.linear(idx)] {
                        Some(v) => terms.push((w, v)),
                        None => return TripleSample::nan(),
                    }
                }
                TripleSample::lincomb(&terms)
            }
        }
    }

    /// Sample every node (masked nodes become `None`).
    pub fn samples(&self) -> Vec<Option<TripleSample>> {
        match &self.data {
            TripleData::Closed(f) => {
                let pts: Vec<[f64; 3]> = self.grid.indices().map(|i| self.grid.point(i)).collect();
                pts.par_iter().map(|&p| Some(f(p))).collect()
            }
            TripleData::Sampled(s) => s.clone(),
        }
    }

    /// Apply a pointwise map, keeping the representation.
    pub fn map_samples(
        &self,
        spec: SpaceFormSpec,
        f: impl Fn(&TripleSample) -> TripleSample + Send + Sync + 'static,
    ) -> Self {
        let data = match &self.data {
            TripleData::Closed(g) => {
                let g = g.clone();
                TripleData::Closed(Arc::new(move |u| f(&g(u))))
            }
            TripleData::Sampled(s) => TripleData::Sampled(s.iter().map(|x| x.as_ref().map(&f)).collect()),
        };
        Self {
            grid: self.grid.clone(),
            delta: self.delta,
            spec,
            data,
            stencil: self.stencil,
            label: self.label.clone(),
        }
    }

    fn scalar_fields(&self) -> ScalarFields {
        ScalarFields::from_samples(&self.samples())
    }
}

/// The 15 scalar components laid out on the grid; NaN at masked nodes.
pub(crate) struct ScalarFields {
    pub v: [Vec<f64>; 3],
    pub h: [[Vec<f64>; 3]; 3],
    pub big_v: [Vec<f64>; 3],
}

impl ScalarFields {
    pub(crate) fn from_samples(s: &[Option<TripleSample>]) -> Self {
        let get = |f: &dyn Fn(&TripleSample) -> f64| -> Vec<f64> {
            s.iter().map(|x| x.as_ref().map_or(f64::NAN, f)).collect()
        };
        Self {
            v: [0, 1, 2].map(|i| get(&|t| t.v[i])),
            h: [0, 1, 2].map(|i| [0, 1, 2].map(|j| get(&|t| t.h[i][j]))),
            big_v: [0, 1, 2].map(|i| get(&|t| t.big_v[i])),
        }
    }
}

pub(crate) fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

/// Finite-difference residuals of the integrability system and of the two
/// balance equations.
pub fn triple_residuals(t: &TripleField) -> Result<ResidualReport> {
    Differ::require(&t.grid, 5)?;
    let d = Differ::new(&t.grid, t.stencil);
    let s = t.scalar_fields();
    let eps = t.spec.eps();
    let c = t.spec.c;
    let delta = t.delta;
    let g = &t.grid;

    // derivative tables: dv[i][j] = ∂v_i/∂u_j, dh[i][k][j] = ∂h_ik/∂u_j
    let dv: Vec<Vec<Vec<f64>>> = (0..3).map(|i| (0..3).map(|j| d.d1_field(&s.v[i], j)).collect()).collect();
    let dbig: Vec<Vec<Vec<f64>>> = (0..3).map(|i| (0..3).map(|j| d.d1_field(&s.big_v[i], j)).collect()).collect();
    let dh: Vec<Vec<Vec<Vec<f64>>>> = (0..3)
        .map(|i| {
            (0..3)
                .map(|k| if i == k { vec![vec![]; 3] } else { (0..3).map(|j| d.d1_field(&s.h[i][k], j)).collect() })
                .collect()
        })
        .collect();

    let mut acc: Vec<Accumulator> = [
        family::V_TRANSPORT,
        family::H_TRANSPORT,
        family::GAUSS,
        family::CODAZZI,
        family::V_BALANCE,
        family::BIG_V_BALANCE,
    ]
    .iter()
    .map(|n| Accumulator::new(*n))
    .collect();

    for idx in g.indices() {
        let k0 = g.linear(idx);
        if s.v[0][k0].is_nan() {
            continue;
        }
        let v = |i: usize| s.v[i][k0];
        let bv = |i: usize| s.big_v[i][k0];
        let h = |i: usize, j: usize| s.h[i][j][k0];
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                acc[0].add(dv[i][j][k0] - h(j, i) * v(j), idx);
                acc[3].add(dbig[i][j][k0] - h(j, i) * bv(j), idx);
                let k = 3 - i - j;
                acc[1].add(dh[i][k][j][k0] - h(i, j) * h(j, k), idx);
                if i < j {
                    let r =
                        dh[i][j][i][k0] + dh[j][i][j][k0] + h(k, i) * h(k, j) + eps * bv(i) * bv(j) + c * v(i) * v(j);
                    acc[2].add(r, idx);
                }
            }
            let (j, k) = others(i);
            acc[4].add(delta[i] * dv[i][i][k0] + delta[j] * h(i, j) * v(j) + delta[k] * h(i, k) * v(k), idx);
            acc[5].add(delta[i] * dbig[i][i][k0] + delta[j] * h(i, j) * bv(j) + delta[k] * h(i, k) * bv(k), idx);
        }
    }
    Ok(ResidualReport {
        entries: acc.into_iter().map(Accumulator::finish).collect(),
        metadata: ReportMetadata {
            scheme: Some("finite differences".into()),
            step: Some((0..3).map(|a| g.step(a)).fold(0.0, f64::max)),
            stencil: Some(format!("order {}", t.stencil.order())),
        },
    })
}

/// The δ-weighted sums Σδv², ΣδvV, ΣδV².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstIntegralTriple {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl FirstIntegralTriple {
    pub fn of(delta: [f64; 3], s: &TripleSample) -> Self {
        let mut k = [0.0; 3];
        for i in 0..3 {
            k[0] += delta[i] * s.v[i] * s.v[i];
            k[1] += delta[i] * s.v[i] * s.big_v[i];
            k[2] += delta[i] * s.big_v[i] * s.big_v[i];
        }
        Self { k1: k[0], k2: k[1], k3: k[2] }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.k1, self.k2, self.k3]
    }
}

pub fn first_integrals(t: &TripleField, p: Index) -> Result<FirstIntegralTriple> {
    if (0..3).any(|a| p[a] >= t.grid.n[a]) {
        return Err(Error::PreconditionFailed(format!("node {p:?} outside the grid")));
    }
    let s = t.sample(p).ok_or_else(|| Error::PreconditionFailed(format!("node {p:?} is masked")))?;
    Ok(FirstIntegralTriple::of(t.delta, &s))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassKind {
    ProblemStar,
    ConformallyFlat,
    Neither,
}

/// A candidate target space form Q⁴_s̃(c̃) with C = ε̃(c − c̃).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBranch {
    pub eps_tilde: f64,
    pub c_tilde: f64,
    pub spec: SpaceFormSpec,
    /// The branch ε̃ = ε̂ε realized by the companion second fundamental form.
    pub companion: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub kind: ClassKind,
    pub integrals: FirstIntegralTriple,
    pub eps_hat: Option<f64>,
    pub c_const: Option<f64>,
    pub branches: Vec<TargetBranch>,
    /// Coordinate relabeling bringing δ to its canonical form:
    /// canonical slot a holds original axis `permutation[a]`.
    pub permutation: [usize; 3],
}

impl Classification {
    pub fn companion_branch(&self) -> Option<&TargetBranch> {
        self.branches.iter().find(|b| b.companion)
    }

    /// Same kind, same ε̂ and C within `tol`.
    pub fn same_class(&self, other: &Self, tol: f64) -> bool {
        if self.kind != other.kind {
            return false;
        }
        match (self.c_const, other.c_const) {
            (Some(a), Some(b)) => self.eps_hat == other.eps_hat && (a - b).abs() <= tol * a.abs().max(1.0),
            (None, None) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DeltaPattern {
    /// exactly one −1; canonical (1,−1,1)
    OneMinus([usize; 3]),
    AllMinus,
    Other,
}

fn delta_pattern(delta: [f64; 3]) -> DeltaPattern {
    let minus: Vec<usize> = (0..3).filter(|&i| delta[i] < 0.0).collect();
    match minus.as_slice() {
        [0] => DeltaPattern::OneMinus([1, 0, 2]),
        [1] => DeltaPattern::OneMinus([0, 1, 2]),
        [2] => DeltaPattern::OneMinus([0, 2, 1]),
        [_, _, _] => DeltaPattern::AllMinus,
        _ => DeltaPattern::Other,
    }
}

/// Reference first integrals after checking they are constant over the grid.
pub fn constant_integrals(t: &TripleField, tol: f64) -> Result<FirstIntegralTriple> {
    let samples = t.samples();
    let reference =
        t.sample(t.grid.base).or_else(|| samples.iter().flatten().next().copied()).ok_or(Error::EmptyDomain)?;
    let k0 = FirstIntegralTriple::of(t.delta, &reference).as_array();
    let mut drift = [0.0f64; 3];
    for s in samples.iter().flatten() {
        let k = FirstIntegralTriple::of(t.delta, s).as_array();
        for a in 0..3 {
            drift[a] = drift[a].max((k[a] - k0[a]).abs());
        }
    }
    for a in 0..3 {
        let allowed = tol * k0[a].abs().max(1.0);
        if !(drift[a] <= allowed) {
            return Err(Error::NotAFirstIntegralSolution {
                name: format!("K{}", a + 1),
                drift: drift[a],
                tol: allowed,
            });
        }
    }
    Ok(FirstIntegralTriple { k1: k0[0], k2: k0[1], k3: k0[2] })
}

pub const DEFAULT_CLASSIFY_TOL: f64 = 1e-6;

/// Classify against the Problem-* pattern (ε̂, 0, C) and the conformally
/// flat pattern (0, 0, 1). δ-vectors are compared up to a permutation of
/// the coordinates.
pub fn classify(t: &TripleField, tol: f64) -> Result<Classification> {
    let k = constant_integrals(t, tol)?;
    let close = |x: f64, y: f64| (x - y).abs() <= tol * y.abs().max(1.0);
    let pattern = delta_pattern(t.delta);
    let neither = |permutation| Classification {
        kind: ClassKind::Neither,
        integrals: k,
        eps_hat: None,
        c_const: None,
        branches: vec![],
        permutation,
    };
    let identity = [0, 1, 2];

    if close(k.k1, 0.0) && close(k.k2, 0.0) && close(k.k3, 1.0) {
        if let DeltaPattern::OneMinus(p) = pattern {
            return Ok(Classification {
                kind: ClassKind::ConformallyFlat,
                integrals: k,
                eps_hat: None,
                c_const: None,
                branches: vec![],
                permutation: p,
            });
        }
        return Ok(neither(identity));
    }

    if !close(k.k2, 0.0) || close(k.k3, 0.0) {
        return Ok(neither(identity));
    }
    let eps_hat = if close(k.k1, 1.0) {
        1.0
    } else if close(k.k1, -1.0) {
        -1.0
    } else {
        return Ok(neither(identity));
    };
    let cc = k.k3;
    let permutation = match (pattern, eps_hat > 0.0, cc > 0.0) {
        (DeltaPattern::OneMinus(p), true, _) => p,
        (DeltaPattern::OneMinus(p), false, true) => p,
        (DeltaPattern::AllMinus, false, false) => identity,
        _ => return Ok(neither(identity)),
    };
    let eps = t.spec.eps();
    let mut branches = Vec::new();
    for eps_tilde in [1.0, -1.0] {
        let c_tilde = t.spec.c - cc / eps_tilde;
        branches.push(TargetBranch {
            eps_tilde,
            c_tilde,
            spec: SpaceFormSpec::with_eps(c_tilde, eps_tilde)?,
            companion: eps_tilde == eps_hat * eps,
        });
    }
    Ok(Classification {
        kind: ClassKind::ProblemStar,
        integrals: k,
        eps_hat: Some(eps_hat),
        c_const: Some(cc),
        branches,
        permutation,
    })
}

/// λᵢ = Vᵢ/vᵢ at a node.
pub fn principal_curvatures(t: &TripleField, p: Index) -> Result<[f64; 3]> {
    let s = t.sample(p).ok_or_else(|| Error::PreconditionFailed(format!("node {p:?} is masked")))?;
    if s.v.contains(&0.0) {
        return Err(Error::DegenerateTriple { index: p });
    }
    Ok([0, 1, 2].map(|i| s.big_v[i] / s.v[i]))
}

/// Ṽⱼ = (−1)^{j+1} δⱼ (vᵢV_k − v_kVᵢ), (i, k) the complement of j in
/// increasing order (j counted from 1).
pub fn companion_sample(delta: [f64; 3], s: &TripleSample) -> [f64; 3] {
    [0, 1, 2].map(|j| {
        let (i, k) = others(j);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sign * delta[j] * (s.v[i] * s.big_v[k] - s.v[k] * s.big_v[i])
    })
}

/// Companion data (v, h, Ṽ), living in the target space form of the
/// companion branch. The sign of Ṽ is fixed by the formula above; −Ṽ gives a
/// congruent companion.
pub fn companion_v(t: &TripleField, tol: f64) -> Result<TripleField> {
    let cls = classify(t, tol)?;
    if cls.kind != ClassKind::ProblemStar {
        return Err(Error::PreconditionFailed(format!("companion needs Problem-* data, got {:?}", cls.kind)));
    }
    let branch = cls.companion_branch().expect("problem-star has a companion branch");
    let delta = t.delta;
    Ok(t.map_samples(branch.spec.clone(), move |s| TripleSample { v: s.v, h: s.h, big_v: companion_sample(delta, s) })
        .with_label(format!("{} companion", t.label)))
}

/// Which first integrals the reconstructed data should carry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CurvatureTarget {
    /// (K1, K2, K3) = (0, 0, 1)
    ConformallyFlat,
    /// (K1, K2, K3) = (ε̂, 0, C)
    ProblemStar { eps_hat: f64, c_const: f64 },
}

impl CurvatureTarget {
    fn integrals(self) -> [f64; 3] {
        match self {
            CurvatureTarget::ConformallyFlat => [0.0, 0.0, 1.0],
            CurvatureTarget::ProblemStar { eps_hat, c_const } => [eps_hat, 0.0, c_const],
        }
    }
}

/// Metric coefficients vⱼ with prescribed principal curvatures:
/// δⱼvⱼ² = (K3 − (λᵢ+λ_k)K2 + λᵢλ_k K1)/((λⱼ−λᵢ)(λⱼ−λ_k)).
pub fn v_from_curvatures(
    lambda: [f64; 3],
    delta: [f64; 3],
    target: CurvatureTarget,
) -> std::result::Result<[f64; 3], Option<usize>> {
    let [k1, k2, k3] = target.integrals();
    let mut v = [0.0; 3];
    for j in 0..3 {
        let (i, k) = others(j);
        let den = (lambda[j] - lambda[i]) * (lambda[j] - lambda[k]);
        if den == 0.0 {
            return Err(None);
        }
        let r = delta[j] * (k3 - (lambda[i] + lambda[k]) * k2 + lambda[i] * lambda[k] * k1) / den;
        if !(r > 0.0) {
            return Err(Some(j));
        }
        v[j] = r.sqrt();
    }
    Ok(v)
}

/// Rebuild (v, h, V) from principal-curvature fields: v as above, V = λv, h
/// from finite differences of v.
pub fn triple_from_curvatures(
    grid: &ParameterGrid,
    lambda: impl Fn([f64; 3]) -> [f64; 3] + Sync,
    delta: [f64; 3],
    spec: SpaceFormSpec,
    target: CurvatureTarget,
    stencil: Stencil,
) -> Result<TripleField> {
    check_delta(delta)?;
    let mut lam = Vec::with_capacity(grid.len());
    let mut vs = Vec::with_capacity(grid.len());
    for idx in grid.indices() {
        let l = lambda(grid.point(idx));
        let scale = l.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        for a in 0..3 {
            for b in a + 1..3 {
                if (l[a] - l[b]).abs() <= 1e-12 * scale {
                    return Err(Error::UmbilicSet { index: idx });
                }
            }
        }
        let v = v_from_curvatures(l, delta, target).map_err(|e| match e {
            Some(j) => Error::BranchViolation { j: j + 1, index: idx },
            None => Error::UmbilicSet { index: idx },
        })?;
        lam.push(l);
        vs.push(v);
    }
    let d = Differ::new(grid, stencil);
    let vf: [Vec<f64>; 3] = [0, 1, 2].map(|i| vs.iter().map(|v| v[i]).collect());
    // dv[j][i] = ∂v_j/∂u_i
    let dv: Vec<Vec<Vec<f64>>> = (0..3)
        .map(|j| (0..3).map(|i| if grid.n[i] > 1 { d.d1_field(&vf[j], i) } else { vec![0.0; grid.len()] }).collect())
        .collect();
    let samples = (0..grid.len())
        .map(|k| {
            let v = vs[k];
            let mut h = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        h[i][j] = dv[j][i][k] / v[i];
                    }
                }
            }
            Some(TripleSample { v, h, big_v: [0, 1, 2].map(|i| lam[k][i] * v[i]) })
        })
        .collect();
    Ok(TripleField::sampled(grid.clone(), delta, spec, samples)?.with_stencil(stencil))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const D: [f64; 3] = [1.0, -1.0, 1.0];

    fn flat() -> SpaceFormSpec {
        SpaceFormSpec::new(0.0, 0).unwrap()
    }

    fn cube() -> ParameterGrid {
        ParameterGrid::cube(1.0, 21).unwrap()
    }

    fn seed62(a: f64) -> TripleField {
        TripleField::constant(cube(), D, flat(), [1.0, 0.0, 0.0], [0.0, a, 0.0]).unwrap()
    }

    fn seed63() -> TripleField {
        TripleField::constant(cube(), D, flat(), [0.0, 1.0, 1.0], [1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn seeds_have_zero_residuals() {
        for t in [seed62(1.0), seed62(2.0f64.sqrt()), seed63()] {
            let r = triple_residuals(&t).unwrap();
            assert_eq!(r.entries.len(), 6);
            assert_eq!(r.max(), 0.0);
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let g = ParameterGrid::cube(1.0, 4).unwrap();
        let t = TripleField::constant(g, D, flat(), [1.0, 0.0, 0.0], [0.0; 3]).unwrap();
        assert!(matches!(triple_residuals(&t), Err(Error::GridTooCoarse { .. })));
    }

    /// Bumping h₁₂ at a single node of the conformally flat seed. With v₁ = 0
    /// the bump is invisible to ∂vᵢ/∂uⱼ = h_ji vⱼ; it shows up in the
    /// derivative terms at the neighbours (±0.1/(2Δ)) and in the v-balance at
    /// the node itself (δ₂·0.1·v₂).
    #[test]
    fn perturbed_h12_stencil_values() {
        let g = cube();
        let mut samples = seed63().samples();
        let p = [7, 9, 12];
        samples[g.linear(p)].as_mut().unwrap().h[0][1] += 0.1;
        let t = TripleField::sampled(g.clone(), D, flat(), samples).unwrap();
        let r = triple_residuals(&t).unwrap();
        let step = g.step(0);
        let e = |n: &str| r.entry(n).unwrap().clone();
        assert_eq!(e(family::V_TRANSPORT).max, 0.0);
        assert_abs_diff_eq!(e(family::H_TRANSPORT).max, 0.1 / (2.0 * step), epsilon = 1e-12);
        let gauss = e(family::GAUSS);
        assert_abs_diff_eq!(gauss.max, 0.1 / (2.0 * step), epsilon = 1e-12);
        let am = gauss.argmax.unwrap();
        let dist: usize = (0..3).map(|a| am[a].abs_diff(p[a])).sum();
        assert_eq!(dist, 1);
        assert_abs_diff_eq!(e(family::V_BALANCE).max, 0.1, epsilon = 1e-15);
        assert_eq!(e(family::V_BALANCE).argmax, Some(p));
        assert_abs_diff_eq!(e(family::CODAZZI).max, 0.1, epsilon = 1e-15);
        assert_eq!(e(family::CODAZZI).argmax, Some(p));
    }

    #[test]
    fn first_integral_examples() {
        let k = first_integrals(&seed62(1.0), [0, 0, 0]).unwrap();
        assert_eq!(k.as_array(), [1.0, 0.0, -1.0]);
        assert_eq!(first_integrals(&seed63(), [3, 4, 5]).unwrap().as_array(), [0.0, 0.0, 1.0]);
        let z = TripleField::constant(cube(), D, flat(), [0.0; 3], [0.0; 3]).unwrap();
        assert_eq!(first_integrals(&z, [1, 1, 1]).unwrap().as_array(), [0.0; 3]);
        assert!(first_integrals(&z, [21, 0, 0]).is_err());
    }

    #[test]
    fn classification_examples() {
        let c = classify(&seed62(1.0), 1e-6).unwrap();
        assert_eq!(c.kind, ClassKind::ProblemStar);
        assert_eq!(c.eps_hat, Some(1.0));
        assert_eq!(c.c_const, Some(-1.0));
        let b = c.branches.iter().find(|b| b.eps_tilde == 1.0).unwrap();
        assert_eq!(b.c_tilde, 1.0);
        assert!(b.companion);
        assert_eq!(c.branches.iter().find(|b| b.eps_tilde == -1.0).unwrap().c_tilde, -1.0);

        assert_eq!(classify(&seed63(), 1e-6).unwrap().kind, ClassKind::ConformallyFlat);
        let n = TripleField::constant(cube(), D, flat(), [2.0, 0.0, 0.0], [0.0; 3]).unwrap();
        let cn = classify(&n, 1e-6).unwrap();
        assert_eq!(cn.kind, ClassKind::Neither);
        assert_eq!(cn.integrals.k1, 4.0);
    }

    #[test]
    fn delta_rules() {
        // ε̂ = −1 with C < 0 needs δ = (−1,−1,−1)
        let g = cube();
        let good = TripleField::constant(g.clone(), [-1.0; 3], flat(), [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]).unwrap();
        let c = classify(&good, 1e-6).unwrap();
        assert_eq!((c.kind, c.eps_hat, c.c_const), (ClassKind::ProblemStar, Some(-1.0), Some(-1.0)));
        let bad = TripleField::constant(g.clone(), [1.0, 1.0, 1.0], flat(), [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(classify(&bad, 1e-6).unwrap().kind, ClassKind::Neither);
        // ε̂ = −1, C > 0 with δ = (1,−1,1)
        let pos = TripleField::constant(g.clone(), D, flat(), [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]).unwrap();
        let c = classify(&pos, 1e-6).unwrap();
        assert_eq!((c.eps_hat, c.c_const), (Some(-1.0), Some(4.0)));
    }

    #[test]
    fn permuted_deltas_classify_alike() {
        let g = cube();
        let a = TripleField::constant(g.clone(), [-1.0, 1.0, 1.0], flat(), [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]).unwrap();
        let ca = classify(&a, 1e-6).unwrap();
        assert_eq!(ca.kind, ClassKind::ConformallyFlat);
        assert_eq!(ca.permutation, [1, 0, 2]);
    }

    #[test]
    fn drifting_integrals_rejected() {
        let t =
            TripleField::closed(cube(), D, flat(), |u| TripleSample::constant([1.0 + 0.1 * u[0], 0.0, 0.0], [0.0; 3]))
                .unwrap();
        assert!(matches!(classify(&t, 1e-6), Err(Error::NotAFirstIntegralSolution { .. })));
    }

    #[test]
    fn principal_curvature_examples() {
        let t = TripleField::constant(cube(), D, flat(), [1.0, 2.0, 4.0], [3.0, 2.0, 2.0]).unwrap();
        assert_eq!(principal_curvatures(&t, [0, 0, 0]).unwrap(), [3.0, 1.0, 0.5]);
        assert!(matches!(principal_curvatures(&seed63(), [0, 0, 0]), Err(Error::DegenerateTriple { .. })));
        let u = TripleField::constant(cube(), D, flat(), [1.0, 2.0, 4.0], [0.5, 1.0, 2.0]).unwrap();
        assert_eq!(principal_curvatures(&u, [1, 2, 3]).unwrap(), [0.5; 3]);
    }

    #[test]
    fn companion_examples() {
        let a = 3.0f64.sqrt();
        let t = companion_v(&seed62(a), 1e-6).unwrap();
        let s = t.sample([0, 0, 0]).unwrap();
        assert_eq!(s.big_v, [0.0, 0.0, a]);
        assert_abs_diff_eq!(t.spec.c, 3.0, epsilon = 1e-15);
        assert_eq!(companion_sample(D, &TripleSample::constant([1.0, 2.0, 3.0], [0.0; 3])), [0.0; 3]);
        assert!(matches!(companion_v(&seed63(), 1e-6), Err(Error::PreconditionFailed(_))));
    }

    #[test]
    fn curvature_reconstruction_examples() {
        let v = v_from_curvatures([-1.0, 0.0, 1.0], D, CurvatureTarget::ConformallyFlat).unwrap();
        assert_abs_diff_eq!(v[0], 0.5f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v[2], 0.5f64.sqrt(), epsilon = 1e-15);
        let k: f64 = (0..3).map(|i| D[i] * v[i] * v[i]).sum();
        assert_abs_diff_eq!(k, 0.0, epsilon = 1e-15);
        assert!(v_from_curvatures([1.0, 2.0, 3.0], D, CurvatureTarget::ConformallyFlat).is_ok());
        assert_eq!(v_from_curvatures([1.0, 2.0, 3.0], [1.0; 3], CurvatureTarget::ConformallyFlat), Err(Some(1)));

        let g = ParameterGrid::cube(0.5, 7).unwrap();
        let t = triple_from_curvatures(
            &g,
            |_| [-1.0, 0.0, 1.0],
            D,
            flat(),
            CurvatureTarget::ConformallyFlat,
            Stencil::Order2,
        )
        .unwrap();
        let s = t.sample([2, 3, 4]).unwrap();
        assert_eq!(s.h, [[0.0; 3]; 3]);
        assert!(matches!(
            triple_from_curvatures(
                &g,
                |_| [1.0, 1.0, 2.0],
                D,
                flat(),
                CurvatureTarget::ConformallyFlat,
                Stencil::Order2
            ),
            Err(Error::UmbilicSet { .. })
        ));
        assert!(matches!(
            triple_from_curvatures(
                &g,
                |_| [1.0, 2.0, 3.0],
                [1.0; 3],
                flat(),
                CurvatureTarget::ConformallyFlat,
                Stencil::Order2
            ),
            Err(Error::BranchViolation { j: 2, .. })
        ));
    }

    #[test]
    fn sampled_line_interpolation_is_cubic_exact() {
        let g = ParameterGrid::new([0.0; 3], [1.0, 1.0, 1.0], [6, 2, 2]).unwrap();
        let f = |u: [f64; 3]| TripleSample::constant([u[0].powi(3) - u[0], 1.0, 0.0], [0.0; 3]);
        let closed = TripleField::closed(g.clone(), D, flat(), f).unwrap();
        let sampled = TripleField::sampled(g.clone(), D, flat(), closed.samples()).unwrap();
        for t in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let a = sampled.on_line(0, [0, 1, 0], t).v[0];
            assert_abs_diff_eq!(a, t.powi(3) - t, epsilon = 1e-13);
        }
    }

    fn random_problem_star(a: [f64; 3], b: [f64; 3], eps_hat: f64) -> Option<TripleSample> {
        // build (v, V) with prescribed δ-Gram using λ's and the reconstruction
        let cc = -1.0 - a[0].abs();
        let l = [a[0], a[0] + 0.5 + b[0].abs(), a[0] + 1.5 + b[0].abs() + b[1].abs()];
        let v = v_from_curvatures(l, D, CurvatureTarget::ProblemStar { eps_hat, c_const: cc }).ok()?;
        Some(TripleSample::constant(v, [0, 1, 2].map(|i| l[i] * v[i])))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn delta_gram_and_companion_gauss(
            a in prop::array::uniform3(-2.0f64..2.0),
            b in prop::array::uniform3(-2.0f64..2.0),
            c in -2.0f64..2.0,
        ) {
            let s = random_problem_star(a, b, 1.0);
            prop_assume!(s.is_some());
            let s = s.unwrap();
            let k = FirstIntegralTriple::of(D, &s);
            let cc = k.k3;
            let vt = companion_sample(D, &s);
            let m = cc.abs().sqrt();
            let cols = [s.v, s.big_v.map(|x| x / m), vt.map(|x| x / m)];
            let target = [1.0, cc.signum(), -cc.signum()];
            let scale = s.v.iter().chain(s.big_v.iter()).fold(1.0f64, |m, x| m.max(x.abs()));
            for p in 0..3 {
                for q in 0..3 {
                    let g: f64 = (0..3).map(|i| D[i] * cols[p][i] * cols[q][i]).sum();
                    let want = if p == q { target[p] } else { 0.0 };
                    prop_assert!((g - want).abs() <= 1e-10 * scale.powi(4), "{p}{q}: {g} vs {want}");
                }
            }
            // companion Gauss identity with ε̃ = ε̂ε, c̃ = c − ε̃C
            let eps = 1.0;
            let eps_t = 1.0 * eps;
            let ct = c - eps_t * cc;
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        let lhs = c * s.v[i] * s.v[j] + eps * s.big_v[i] * s.big_v[j];
                        let rhs = ct * s.v[i] * s.v[j] + eps_t * vt[i] * vt[j];
                        prop_assert!((lhs - rhs).abs() <= 1e-10 * scale.powi(4));
                    }
                }
            }
        }

        #[test]
        fn curvatures_roundtrip(l0 in -3.0f64..3.0, d1 in 0.1f64..2.0, d2 in 0.1f64..2.0) {
            let l = [l0, l0 + d1, l0 + d1 + d2];
            let g = ParameterGrid::cube(0.2, 5).unwrap();
            let t = triple_from_curvatures(&g, |_| l, D, flat(), CurvatureTarget::ConformallyFlat, Stencil::Order2).unwrap();
            let got = principal_curvatures(&t, [1, 2, 3]).unwrap();
            for i in 0..3 {
                prop_assert!((got[i] - l[i]).abs() <= 1e-12 * l[i].abs().max(1.0));
            }
        }

        #[test]
        fn integrals_constant_when_residuals_vanish(a in 0.1f64..3.0) {
            let t = seed62(a);
            let r = triple_residuals(&t).unwrap().max();
            let k0 = first_integrals(&t, t.grid.base).unwrap().as_array();
            for idx in [[0, 0, 0], [20, 3, 7], [5, 20, 20]] {
                let k = first_integrals(&t, idx).unwrap().as_array();
                for x in 0..3 {
                    prop_assert!((k[x] - k0[x]).abs() <= 10.0 * r * t.grid.diameter());
                }
            }
        }
    }
}
