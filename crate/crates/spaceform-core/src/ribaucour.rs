//! Ribaucour transforms of holonomic data.
//!
//! The state (γ, v′, φ, ψ, β) evolves along the uᵢ-line by
//!
//! ```text
//! ∂φ/∂uᵢ  = vᵢγᵢ
//! ∂γⱼ/∂uᵢ = h_ji γᵢ                                         (j ≠ i)
//! ∂γᵢ/∂uᵢ = (vᵢ − v′ᵢ)ψ − Σ_{j≠i} h_ji γⱼ + βVᵢ − cφvᵢ
//! ∂β/∂uᵢ  = −εVᵢγᵢ
//! ∂ψ/∂uᵢ  = −γᵢv′ᵢψ/φ
//! ∂v′ⱼ/∂uᵢ = h′_ij v′ᵢ                                       (j ≠ i)
//! ∂v′ᵢ/∂uᵢ = −δᵢ(δⱼh′_ij v′ⱼ + δ_k h′_ik v′_k)
//! ```
//!
//! with h′_ij = h_ij + (v′ⱼ − vⱼ)γᵢ/φ. The quantities
//! K₁ = Σγ² + εβ² + cφ² − 2φψ and K₂ = Σδv′² are first integrals.

use serde::{Deserialize, Serialize};

use crate::ambient::{geodesic_coefficients, SpaceFormSpec};
use crate::error::{Error, Result};
use crate::frame::FrameField;
use crate::grid::{Index, ParameterGrid};
use crate::immersion::ImmersionSample;
use crate::report::{Accumulator, ReportMetadata, ResidualReport};
use crate::sweep::{sweep, LineSystem, SweepOptions};
use crate::triples::{others, triple_residuals, TripleField, TripleSample};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RibaucourState {
    pub gamma: [f64; 3],
    pub vprime: [f64; 3],
    pub phi: f64,
    pub psi: f64,
    pub beta: f64,
}

impl RibaucourState {
    pub fn to_flat(&self) -> [f64; 9] {
        let [g1, g2, g3] = self.gamma;
        let [w1, w2, w3] = self.vprime;
        [g1, g2, g3, w1, w2, w3, self.phi, self.psi, self.beta]
    }

    pub fn from_flat(y: &[f64]) -> Self {
        Self { gamma: [y[0], y[1], y[2]], vprime: [y[3], y[4], y[5]], phi: y[6], psi: y[7], beta: y[8] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|x| x.is_finite())
    }

    pub fn k1(&self, spec: &SpaceFormSpec) -> f64 {
        let g2: f64 = self.gamma.iter().map(|g| g * g).sum();
        g2 + spec.eps() * self.beta * self.beta + spec.c * self.phi * self.phi - 2.0 * self.phi * self.psi
    }

    pub fn k2(&self, delta: [f64; 3]) -> f64 {
        (0..3).map(|i| delta[i] * self.vprime[i] * self.vprime[i]).sum()
    }

    /// Ω = φΣδⱼv′ⱼVⱼ − εβ(K₂ − Σδⱼvⱼv′ⱼ).
    pub fn omega(&self, s: &TripleSample, delta: [f64; 3], eps: f64, k2: f64) -> f64 {
        let a: f64 = (0..3).map(|j| delta[j] * self.vprime[j] * s.big_v[j]).sum();
        let b: f64 = (0..3).map(|j| delta[j] * s.v[j] * self.vprime[j]).sum();
        self.phi * a - eps * self.beta * (k2 - b)
    }

    /// h′_ij = h_ij + (v′ⱼ − vⱼ)γᵢ/φ.
    pub fn h_prime(&self, s: &TripleSample) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    h[i][j] = s.h[i][j] + (self.vprime[j] - s.v[j]) * self.gamma[i] / self.phi;
                }
            }
        }
        h
    }
}

/// Initial data to be completed by [`seed_state`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RibaucourRequest {
    pub gamma: [f64; 3],
    pub beta: f64,
    pub phi: f64,
    /// Desired v′; projected onto {Ω = 0, K₂ = target}.
    pub vprime: [f64; 3],
}

fn dot_delta(delta: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| delta[i] * a[i] * b[i]).sum()
}

/// Smallest-|s| real root of a s² + b s + c = 0.
fn nearest_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(f64::MIN_POSITIVE);
    if a.abs() <= 1e-14 * scale {
        return (b.abs() > 1e-14 * scale).then(|| -c / b);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < -1e-12 * scale * scale {
        return None;
    }
    let r = disc.max(0.0).sqrt();
    let q = -0.5 * (b + b.signum() * r);
    let roots = [q / a, if q != 0.0 { c / q } else { 0.0 }];
    roots.into_iter().min_by(|x, y| x.abs().total_cmp(&y.abs()))
}

/// Complete a request into a state with K₁ = 0, K₂ = `k2_target` and Ω = 0
/// at `base`. ψ comes from K₁ = 0. v′ is projected onto the plane Ω = 0
/// (Ω is affine in v′) and then moved within the plane onto the quadric
/// Σδv′² = K₂: first by rescaling about the foot of the plane, and when
/// that has no real solution, along the projected gradient of the quadric.
pub fn seed_state(t: &TripleField, base: Index, req: &RibaucourRequest, k2_target: f64) -> Result<RibaucourState> {
    if req.phi == 0.0 || !req.phi.is_finite() {
        return Err(Error::SingularPhi { value: req.phi });
    }
    let s = t.sample(base).ok_or_else(|| Error::PreconditionFailed(format!("base node {base:?} is masked")))?;
    let spec = &t.spec;
    let eps = spec.eps();
    let delta = t.delta;
    let g2: f64 = req.gamma.iter().map(|g| g * g).sum();
    let psi = (g2 + eps * req.beta * req.beta + spec.c * req.phi * req.phi) / (2.0 * req.phi);
    let scale = 1.0 + g2.sqrt() + req.beta.abs() + req.phi.abs();
    if psi.abs() <= 1e-12 * scale {
        return Err(Error::SingularPsi { value: psi });
    }

    // Ω(v′) = ⟨w, v′⟩_δ − κ with w = φV + εβv, κ = εβK₂.
    let w = [0, 1, 2].map(|j| req.phi * s.big_v[j] + eps * req.beta * s.v[j]);
    let kappa = eps * req.beta * k2_target;
    let normal = [0, 1, 2].map(|j| delta[j] * w[j]);
    let nn: f64 = normal.iter().map(|x| x * x).sum();
    let r = req.vprime;
    let tol = 1e-12 * (1.0 + k2_target.abs() + r.iter().map(|x| x * x).sum::<f64>());

    let (foot, p) = if nn <= 1e-24 {
        if kappa.abs() > 1e-12 {
            return Err(Error::ConstraintUnsatisfiable("Ω is a nonzero constant".into()));
        }
        ([0.0; 3], r)
    } else {
        let off = (normal.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() - kappa) / nn;
        let p = [0, 1, 2].map(|j| r[j] - off * normal[j]);
        (normal.map(|x| x * kappa / nn), p)
    };
    let tangent = |x: [f64; 3]| -> [f64; 3] {
        if nn <= 1e-24 {
            return x;
        }
        let o = normal.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / nn;
        [0, 1, 2].map(|j| x[j] - o * normal[j])
    };
    let on_quadric = |x: [f64; 3]| (dot_delta(delta, x, x) - k2_target).abs() <= tol;

    let mut vprime = None;
    if on_quadric(p) {
        vprime = Some(p);
    }
    if vprime.is_none() {
        // rescale about the foot: x = foot + σ (p − foot), σ near 1
        let dvec = [0, 1, 2].map(|j| p[j] - foot[j]);
        let a = dot_delta(delta, dvec, dvec);
        let b = 2.0 * dot_delta(delta, foot, dvec);
        let c0 = dot_delta(delta, foot, foot) - k2_target;
        // roots of a σ² + b σ + c0, shifted to be nearest σ = 1
        if let Some(ds) = nearest_root(a, 2.0 * a + b, a + b + c0) {
            let sigma = 1.0 + ds;
            if sigma > 0.0 {
                vprime = Some([0, 1, 2].map(|j| foot[j] + sigma * dvec[j]));
            }
        }
    }
    if vprime.is_none() {
        let m = tangent([0, 1, 2].map(|j| delta[j] * p[j]));
        let a = dot_delta(delta, m, m);
        let b = 2.0 * dot_delta(delta, p, m);
        let c0 = dot_delta(delta, p, p) - k2_target;
        if let Some(tau) = nearest_root(a, b, c0) {
            vprime = Some([0, 1, 2].map(|j| p[j] + tau * m[j]));
        }
    }
    let vprime = vprime.ok_or_else(|| {
        Error::ConstraintUnsatisfiable(format!("the plane Ω = 0 misses the quadric Σδv′² = {k2_target}"))
    })?;
    let st = RibaucourState { gamma: req.gamma, vprime, phi: req.phi, psi, beta: req.beta };
    let om = st.omega(&s, delta, eps, k2_target);
    let k2 = st.k2(delta);
    if om.abs() > 1e-9 * scale.powi(2) || (k2 - k2_target).abs() > 1e-9 * (1.0 + k2_target.abs()) {
        return Err(Error::ConstraintUnsatisfiable(format!("projection left Ω = {om:e}, K₂ = {k2}")));
    }
    Ok(st)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RibaucourOptions {
    pub sweep: SweepOptions,
    /// Nodes with |φ| or |ψ| below this are masked; `None` means
    /// 10⁻⁶ · box scale.
    pub mask_tol: Option<f64>,
    pub integrability_tol: Option<f64>,
}

impl Default for RibaucourOptions {
    fn default() -> Self {
        Self { sweep: SweepOptions::default(), mask_tol: None, integrability_tol: Some(1e-8) }
    }
}

#[derive(Debug, Clone)]
pub struct RibaucourField {
    pub grid: ParameterGrid,
    pub spec: SpaceFormSpec,
    pub delta: [f64; 3],
    pub states: Vec<RibaucourState>,
    /// true where the node is excluded (φ or ψ near zero, or non-finite).
    pub mask: Vec<bool>,
    pub source: TripleField,
    pub k1_target: f64,
    pub k2_target: f64,
    pub mask_tol: f64,
}

impl RibaucourField {
    pub fn state(&self, idx: Index) -> Option<&RibaucourState> {
        let k = self.grid.linear(idx);
        (!self.mask[k]).then(|| &self.states[k])
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Number of adjacent node pairs across which v′ᵢ changes sign.
    pub fn vprime_sign_changes(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for idx in self.grid.indices() {
            let Some(a) = self.state(idx) else { continue };
            for axis in 0..3 {
                let mut j = idx;
                j[axis] += 1;
                if j[axis] >= self.grid.n[axis] {
                    continue;
                }
                if let Some(b) = self.state(j) {
                    for (i, o) in out.iter_mut().enumerate() {
                        if a.vprime[i] * b.vprime[i] < 0.0 {
                            *o += 1;
                        }
                    }
                }
            }
        }
        out
    }
}

struct RibSystem<'a> {
    triple: &'a TripleField,
    delta: [f64; 3],
    eps: f64,
    c: f64,
}

impl LineSystem for RibSystem<'_> {
    fn dim(&self) -> usize {
        9
    }

    fn rhs(&self, i: usize, anchor: Index, t: f64, y: &[f64], dy: &mut [f64]) {
        let s = self.triple.on_line(i, anchor, t);
        let st = RibaucourState::from_flat(y);
        let hp = st.h_prime(&s);
        let (g, w, phi, psi, beta) = (st.gamma, st.vprime, st.phi, st.psi, st.beta);
        let d = self.delta;
        let mut dgi = (s.v[i] - w[i]) * psi + beta * s.big_v[i] - self.c * phi * s.v[i];
        for j in 0..3 {
            if j != i {
                dy[j] = s.h[j][i] * g[i];
                dgi -= s.h[j][i] * g[j];
                dy[3 + j] = hp[i][j] * w[i];
            }
        }
        dy[i] = dgi;
        let (j, k) = others(i);
        dy[3 + i] = -d[i] * (d[j] * hp[i][j] * w[j] + d[k] * hp[i][k] * w[k]);
        dy[6] = s.v[i] * g[i];
        dy[7] = -g[i] * w[i] * psi / phi;
        dy[8] = -self.eps * s.big_v[i] * g[i];
    }
}

/// Sweep-integrate the Ribaucour system from `init` at the grid base.
pub fn integrate_ribaucour(
    t: &TripleField,
    init: &RibaucourState,
    grid: &ParameterGrid,
    opts: RibaucourOptions,
) -> Result<RibaucourField> {
    let t = t.on_grid(grid)?;
    if let Some(tol) = opts.integrability_tol {
        match triple_residuals(&t) {
            Ok(r) if r.max() > tol => {
                return Err(Error::PreconditionFailed(format!(
                    "triple residual {:e} exceeds integrability tolerance {tol:e}",
                    r.max()
                )))
            }
            Ok(_) | Err(Error::GridTooCoarse { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let mask_tol = opts.mask_tol.unwrap_or(1e-6 * grid.scale());
    if init.phi.abs() < mask_tol {
        return Err(Error::SingularPhi { value: init.phi });
    }
    if init.psi.abs() < mask_tol {
        return Err(Error::SingularPsi { value: init.psi });
    }
    if !init.is_finite() {
        return Err(Error::NonFiniteState { index: grid.base });
    }
    let spec = t.spec.clone();
    let sys = RibSystem { triple: &t, delta: t.delta, eps: spec.eps(), c: spec.c };
    let flat = sweep(&sys, grid, &init.to_flat(), opts.sweep);
    let states: Vec<RibaucourState> = flat.chunks(9).map(RibaucourState::from_flat).collect();
    let mask = states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            !s.is_finite() || s.phi.abs() < mask_tol || s.psi.abs() < mask_tol || !t.is_valid(grid.unravel(k))
        })
        .collect();
    Ok(RibaucourField {
        grid: grid.clone(),
        spec,
        delta: t.delta,
        states,
        mask,
        k1_target: init.k1(&t.spec),
        k2_target: init.k2(t.delta),
        source: t,
        mask_tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InvariantDrift {
    pub k1: f64,
    pub k2: f64,
    pub omega: f64,
}

impl InvariantDrift {
    pub fn max(&self) -> f64 {
        self.k1.max(self.k2).max(self.omega)
    }
}

/// Per-node K₁, K₂ and Ω relative to their targets (0, K₂-target, 0).
pub fn invariant_report(rf: &RibaucourField) -> ResidualReport {
    let eps = rf.spec.eps();
    let mut k1 = Accumulator::new("K1");
    let mut k2 = Accumulator::new("K2");
    let mut om = Accumulator::new("Omega");
    for idx in rf.grid.indices() {
        let (Some(st), Some(s)) = (rf.state(idx), rf.source.sample(idx)) else { continue };
        k1.add(st.k1(&rf.spec), idx);
        k2.add(st.k2(rf.delta) - rf.k2_target, idx);
        om.add(st.omega(&s, rf.delta, eps, rf.k2_target), idx);
    }
    ResidualReport {
        entries: vec![k1.finish(), k2.finish(), om.finish()],
        metadata: ReportMetadata { scheme: Some("rk4 sweep".into()), step: None, stencil: None },
    }
}

pub fn invariant_drift(rf: &RibaucourField) -> InvariantDrift {
    let r = invariant_report(rf);
    InvariantDrift { k1: r.entries[0].max, k2: r.entries[1].max, omega: r.entries[2].max }
}

/// F′ = F − (1/ψ)(ΣγᵢXᵢ + βN + cφF) at every unmasked node.
pub fn transform_immersion(ff: &FrameField, rf: &RibaucourField) -> Result<ImmersionSample> {
    if !ff.grid.same_nodes(&rf.grid) || ff.spec != rf.spec {
        return Err(Error::GridMismatch);
    }
    let c = ff.spec.c;
    let positions = ff
        .grid
        .indices()
        .map(|idx| {
            let st = rf.state(idx)?;
            let fr = ff.state(idx);
            Some(
                (0..fr.dim())
                    .map(|a| {
                        let g = st.gamma[0] * fr.x[0][a]
                            + st.gamma[1] * fr.x[1][a]
                            + st.gamma[2] * fr.x[2][a]
                            + st.beta * fr.n[a]
                            + c * st.phi * fr.f[a];
                        fr.f[a] - g / st.psi
                    })
                    .collect(),
            )
        })
        .collect();
    ImmersionSample::new(ff.grid.clone(), ff.spec.clone(), positions)
}

/// The transformed data (v′, h′, V′) with V′ᵢ = Vᵢ + (vᵢ − v′ᵢ)εβ/φ.
pub fn transformed_triple(t: &TripleField, rf: &RibaucourField) -> Result<TripleField> {
    if !t.grid.same_nodes(&rf.grid) {
        return Err(Error::GridMismatch);
    }
    let eps = rf.spec.eps();
    let samples: Vec<Option<TripleSample>> = rf
        .grid
        .indices()
        .map(|idx| {
            let st = rf.state(idx)?;
            let s = t.sample(idx)?;
            Some(TripleSample {
                v: st.vprime,
                h: st.h_prime(&s),
                big_v: [0, 1, 2].map(|i| s.big_v[i] + (s.v[i] - st.vprime[i]) * eps * st.beta / st.phi),
            })
        })
        .collect();
    if samples.iter().all(|s| s.is_none()) {
        return Err(Error::EmptyDomain);
    }
    Ok(TripleField::sampled(rf.grid.clone(), t.delta, t.spec.clone(), samples)?
        .with_stencil(t.stencil)
        .with_label(format!("{} ribaucour", t.label)))
}

/// Data of the parallel hypersurface at signed distance τ:
/// vᵗ = φ(τ)v − ψ(τ)V/√|c|, Vᵗ = ε̌√|c|ψ(τ)v + φ(τ)V with ε̌ = ε·sign c,
/// (φ, ψ) = (cos, sin) or (cosh, sinh) of √|c|τ for ε̌ = 1 or −1; h is kept.
pub fn parallel_triple(t: &TripleField, tau: f64) -> Result<TripleField> {
    let c = t.spec.c;
    if c == 0.0 {
        return Err(Error::FlatAmbientUnsupported);
    }
    let r = c.abs().sqrt();
    let check = t.spec.eps() * c.signum();
    let (ph, ps) = geodesic_coefficients(check, r * tau);
    Ok(t.map_samples(t.spec.clone(), move |s| TripleSample {
        v: [0, 1, 2].map(|i| ph * s.v[i] - ps / r * s.big_v[i]),
        h: s.h,
        big_v: [0, 1, 2].map(|i| check * r * ps * s.v[i] + ph * s.big_v[i]),
    }))
}
