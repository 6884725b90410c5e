//! Explicit constructions: trivial seeds, the φ-families of Ribaucour
//! transforms with their closed-form data, the explicit coordinate lists of
//! the transformed hypersurfaces, helices, rotation hypersurfaces and
//! generalized cones.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::ambient::{geodesic_coefficients, SpaceFormSpec};
use crate::diff::fd_weights;
use crate::error::{Error, Result};
use crate::frame::FrameState;
use crate::grid::ParameterGrid;
use crate::report::{Accumulator, ReportMetadata, ResidualEntry, ResidualReport};
use crate::ribaucour::{RibaucourRequest, RibaucourState};
use crate::triples::{TripleField, TripleSample};

const DELTA_ONE_MINUS: [f64; 3] = [1.0, -1.0, 1.0];

// ---------------------------------------------------------------------------
// trivial seeds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrivialSeedKind {
    #[serde(rename = "problemstar_e1_Cneg")]
    ProblemStarE1CNeg,
    #[serde(rename = "problemstar_e1_Cpos")]
    ProblemStarE1CPos,
    #[serde(rename = "problemstar_em1_Cpos")]
    ProblemStarEm1CPos,
    #[serde(rename = "problemstar_em1_Cneg")]
    ProblemStarEm1CNeg,
    #[serde(rename = "cflat")]
    Cflat,
}

impl TrivialSeedKind {
    pub const ALL: [TrivialSeedKind; 5] = [
        TrivialSeedKind::ProblemStarE1CNeg,
        TrivialSeedKind::ProblemStarE1CPos,
        TrivialSeedKind::ProblemStarEm1CPos,
        TrivialSeedKind::ProblemStarEm1CNeg,
        TrivialSeedKind::Cflat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrivialSeedKind::ProblemStarE1CNeg => "problemstar_e1_Cneg",
            TrivialSeedKind::ProblemStarE1CPos => "problemstar_e1_Cpos",
            TrivialSeedKind::ProblemStarEm1CPos => "problemstar_em1_Cpos",
            TrivialSeedKind::ProblemStarEm1CNeg => "problemstar_em1_Cneg",
            TrivialSeedKind::Cflat => "cflat",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// C used when none is given.
    pub fn default_c(self) -> f64 {
        match self {
            TrivialSeedKind::ProblemStarE1CNeg | TrivialSeedKind::ProblemStarEm1CNeg => -1.0,
            _ => 1.0,
        }
    }

    /// (δ, v, V) of the seed for the constant C.
    pub fn data(self, c_const: f64) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let r = c_const.abs().sqrt();
        match self {
            TrivialSeedKind::ProblemStarE1CNeg => (DELTA_ONE_MINUS, [1.0, 0.0, 0.0], [0.0, r, 0.0]),
            TrivialSeedKind::ProblemStarE1CPos => (DELTA_ONE_MINUS, [1.0, 0.0, 0.0], [0.0, 0.0, r]),
            TrivialSeedKind::ProblemStarEm1CPos => (DELTA_ONE_MINUS, [0.0, 1.0, 0.0], [0.0, 0.0, r]),
            TrivialSeedKind::ProblemStarEm1CNeg => ([-1.0; 3], [0.0, 0.0, 1.0], [r, 0.0, 0.0]),
            TrivialSeedKind::Cflat => (DELTA_ONE_MINUS, [0.0, 1.0, 1.0], [1.0, 0.0, 0.0]),
        }
    }
}

/// Constant seed with h = 0. `c_const` is C for the Problem-* kinds (its
/// sign must match the kind) and must be absent or 1 for `cflat`.
pub fn trivial_seed(
    kind: TrivialSeedKind,
    c_const: Option<f64>,
    spec: SpaceFormSpec,
    grid: ParameterGrid,
) -> Result<TripleField> {
    let cc = c_const.unwrap_or(kind.default_c());
    let ok = match kind {
        TrivialSeedKind::ProblemStarE1CNeg | TrivialSeedKind::ProblemStarEm1CNeg => cc < 0.0,
        TrivialSeedKind::ProblemStarE1CPos | TrivialSeedKind::ProblemStarEm1CPos => cc > 0.0,
        TrivialSeedKind::Cflat => cc == 1.0,
    };
    if !ok || !cc.is_finite() {
        return Err(Error::InvalidParams(format!("C = {cc} is inconsistent with seed {}", kind.name())));
    }
    let (delta, v, big_v) = kind.data(cc);
    Ok(TripleField::constant(grid, delta, spec, v, big_v)?.with_label(kind.name()))
}

/// Closed-form frame of the constant data (v, h = 0, V) started from
/// [`FrameState::standard`] at u = 0. Each axis may carry v or V but not
/// both; with c ≠ 0 at most one axis carries v, and at most one axis
/// carries V.
pub fn constant_seed_frame(spec: &SpaceFormSpec, v: [f64; 3], big_v: [f64; 3], u: [f64; 3]) -> Result<FrameState> {
    let v_axes: Vec<usize> = (0..3).filter(|&i| v[i] != 0.0).collect();
    let w_axes: Vec<usize> = (0..3).filter(|&i| big_v[i] != 0.0).collect();
    if v_axes.iter().any(|i| w_axes.contains(i)) || w_axes.len() > 1 || (spec.c != 0.0 && v_axes.len() > 1) {
        return Err(Error::PreconditionFailed("constant data has no closed-form frame of this shape".into()));
    }
    let mut fr = FrameState::standard(spec);
    let d = spec.dim();
    let unit = |i: usize| {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        e
    };
    if spec.c == 0.0 {
        for &m in &v_axes {
            fr.f[m] = v[m] * u[m];
        }
    } else if let Some(&m) = v_axes.first() {
        let r = spec.c.abs().sqrt();
        let (cs, sn) = geodesic_coefficients(spec.c.signum(), r * v[m] * u[m]);
        fr.f = vec![0.0; d];
        fr.f[4] = cs / r;
        fr.f[m] = sn / r;
        let mut x = unit(m);
        x[m] = cs;
        x[4] = -spec.c.signum() * sn;
        fr.x[m] = x;
    }
    if let Some(&k) = w_axes.first() {
        let eps = spec.eps();
        let n0 = fr.n[3];
        let (cs, sn) = geodesic_coefficients(eps, big_v[k] * u[k]);
        let mut x = vec![0.0; d];
        x[k] = cs;
        x[3] = eps * n0 * sn;
        let mut n = vec![0.0; d];
        n[3] = n0 * cs;
        n[k] = -sn;
        fr.x[k] = x;
        fr.n = n;
    }
    Ok(fr)
}

// ---------------------------------------------------------------------------
// φ-families

/// Which seed the family transforms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiBranch {
    /// seed v = (1,0,0), V = a·e₂, δ = (1,−1,1), C = −a²
    NegC { a: f64 },
    /// seed v = (1,0,0), V = b·e₃, δ = (1,−1,1), C = b²
    PosC { b: f64 },
    /// seed v = (0,1,1), V = e₁, δ = (1,−1,1), c = 0
    ConformallyFlat,
}

/// Ribaucour data built from three functions φᵢ(uᵢ) with φᵢ″ = κᵢφᵢ,
/// subject to Σᵢ(φᵢ′² − κᵢφᵢ²) = 0. Each φᵢ is stored by its value and
/// slope at uᵢ = 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiFamily {
    pub branch: PhiBranch,
    pub k: f64,
    pub c: f64,
    pub eps: f64,
    pub initial: [[f64; 2]; 3],
}

/// (C, S, C′, S′) with C(0) = 1, S′(0) = 1 and C″ = κC, S″ = κS.
fn oscillator(kappa: f64, x: f64) -> (f64, f64, f64, f64) {
    let (cs, sn) = geodesic_coefficients(-kappa, x);
    (cs, sn, kappa * sn, cs)
}

impl PhiFamily {
    pub fn new(branch: PhiBranch, k: f64, c: f64, eps: f64, initial: [[f64; 2]; 3]) -> Result<Self> {
        let fam = Self { branch, k, c, eps, initial };
        fam.validate_shape()?;
        let defect = fam.constraint_sum();
        let scale: f64 = fam.term_scale();
        if defect.abs() > 1e-10 * scale.max(1.0) {
            return Err(Error::InvalidParams(format!("φ-constraint violated: Σ(φ′² − κφ²) = {defect:e}")));
        }
        Ok(fam)
    }

    /// Like [`PhiFamily::new`], replacing the slope of φ_`slot` by the value
    /// that satisfies the constraint (keeping the sign of the given slope).
    pub fn solving_slope(
        branch: PhiBranch,
        k: f64,
        c: f64,
        eps: f64,
        mut initial: [[f64; 2]; 3],
        slot: usize,
    ) -> Result<Self> {
        let probe = Self { branch, k, c, eps, initial };
        probe.validate_shape()?;
        let kappa = probe.kappa();
        let rest: f64 = (0..3)
            .map(|i| {
                if i == slot {
                    -kappa[i] * initial[i][0].powi(2)
                } else {
                    initial[i][1].powi(2) - kappa[i] * initial[i][0].powi(2)
                }
            })
            .sum();
        if rest > 0.0 {
            return Err(Error::ConstraintUnsatisfiable(format!("slope of φ{} would need to be imaginary", slot + 1)));
        }
        let sign = if initial[slot][1] < 0.0 { -1.0 } else { 1.0 };
        initial[slot][1] = sign * (-rest).sqrt();
        Self::new(branch, k, c, eps, initial)
    }

    /// The transform of the seed with v = (1,0,0), V = e₂ in R⁴, K = 1:
    /// φ₁ = √2ρcosθ cosh(u₁+θ₁), φ₂ = ρ sin(√2u₂+θ₂), φ₃ = √2ρ sinθ cosh(u₃+θ₃).
    pub fn r4(rho: f64, theta: f64) -> Self {
        Self::r4_with_phases(rho, theta, [0.0; 3])
    }

    pub fn r4_with_phases(rho: f64, theta: f64, phases: [f64; 3]) -> Self {
        let initial = Self::r4_initial(rho, theta, phases);
        Self { branch: PhiBranch::NegC { a: 1.0 }, k: 1.0, c: 0.0, eps: 1.0, initial }
    }

    /// The companion transform into S⁴ (seed v = (1,0,0), V = e₃, c = 1,
    /// K = −2), built from the same φ's as [`PhiFamily::r4`].
    pub fn s4(rho: f64, theta: f64) -> Self {
        Self::s4_with_phases(rho, theta, [0.0; 3])
    }

    pub fn s4_with_phases(rho: f64, theta: f64, phases: [f64; 3]) -> Self {
        let initial = Self::r4_initial(rho, theta, phases);
        Self { branch: PhiBranch::PosC { b: 1.0 }, k: -2.0, c: 1.0, eps: 1.0, initial }
    }

    fn r4_initial(rho: f64, theta: f64, [t1, t2, t3]: [f64; 3]) -> [[f64; 2]; 3] {
        let r1 = SQRT_2 * rho * theta.cos();
        let r3 = SQRT_2 * rho * theta.sin();
        [[r1 * t1.cosh(), r1 * t1.sinh()], [rho * t2.sin(), SQRT_2 * rho * t2.cos()], [r3 * t3.cosh(), r3 * t3.sinh()]]
    }

    /// Conformally flat transforms of v = (0,1,1), V = e₁ in R⁴ with ε = 1 and
    /// K < 0: φ₁ = √(|K|/|K−1|)ρcosθ cos(√|K−1|u₁ − θ₁),
    /// φ₂ = ρ cosh(√|K|u₂ + θ₂), φ₃ = ρ sinθ cos(√|K|u₃ − θ₃).
    pub fn cflat(k: f64, rho: f64, theta: f64) -> Result<Self> {
        Self::cflat_with_phases(k, rho, theta, [0.0; 3])
    }

    pub fn cflat_with_phases(k: f64, rho: f64, theta: f64, [t1, t2, t3]: [f64; 3]) -> Result<Self> {
        if !(k < 0.0) {
            return Err(Error::InvalidParams(format!("this parametrization needs K < 0, got {k}")));
        }
        let w1 = (k - 1.0).abs().sqrt();
        let w = k.abs().sqrt();
        let r1 = (k.abs() / (k - 1.0).abs()).sqrt() * rho * theta.cos();
        let r3 = rho * theta.sin();
        let initial = [
            [r1 * t1.cos(), r1 * w1 * t1.sin()],
            [rho * t2.cosh(), rho * w * t2.sinh()],
            [r3 * t3.cos(), r3 * w * t3.sin()],
        ];
        Ok(Self { branch: PhiBranch::ConformallyFlat, k, c: 0.0, eps: 1.0, initial })
    }

    fn validate_shape(&self) -> Result<()> {
        if !(self.k != 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParams("K must be finite and nonzero".into()));
        }
        if self.eps != 1.0 && self.eps != -1.0 {
            return Err(Error::InvalidParams(format!("ε must be ±1, got {}", self.eps)));
        }
        match self.branch {
            PhiBranch::NegC { a } if !(a != 0.0 && a.is_finite()) => {
                Err(Error::InvalidParams("a must be nonzero".into()))
            }
            PhiBranch::PosC { b } if !(b != 0.0 && b.is_finite()) => {
                Err(Error::InvalidParams("b must be nonzero".into()))
            }
            PhiBranch::ConformallyFlat if self.c != 0.0 => {
                Err(Error::InvalidParams("the conformally flat family lives in c = 0".into()))
            }
            _ => Ok(()),
        }
    }

    fn term_scale(&self) -> f64 {
        let kappa = self.kappa();
        (0..3).map(|i| self.initial[i][1].powi(2) + (kappa[i] * self.initial[i][0].powi(2)).abs()).sum()
    }

    /// κᵢ in φᵢ″ = κᵢφᵢ.
    pub fn kappa(&self) -> [f64; 3] {
        let (k, c, e) = (self.k, self.c, self.eps);
        match self.branch {
            PhiBranch::NegC { a } => [k * a - c, -(e * a * a + k * a), k * a],
            PhiBranch::PosC { b } => [-(k + c), k, -(k + e * b * b)],
            PhiBranch::ConformallyFlat => [k - e, -k, k],
        }
    }

    /// (φᵢ(uᵢ), φᵢ′(uᵢ)).
    pub fn phis(&self, u: [f64; 3]) -> [(f64, f64); 3] {
        let kappa = self.kappa();
        [0, 1, 2].map(|i| {
            let (cs, sn, dc, ds) = oscillator(kappa[i], u[i]);
            let [a, b] = self.initial[i];
            (a * cs + b * sn, a * dc + b * ds)
        })
    }

    /// φᵢ′² − κᵢφᵢ², each constant in uᵢ.
    pub fn brackets(&self, u: [f64; 3]) -> [f64; 3] {
        let kappa = self.kappa();
        let p = self.phis(u);
        [0, 1, 2].map(|i| p[i].1 * p[i].1 - kappa[i] * p[i].0 * p[i].0)
    }

    /// Σᵢ(φᵢ′² − κᵢφᵢ²) from the initial data.
    pub fn constraint_sum(&self) -> f64 {
        let kappa = self.kappa();
        (0..3).map(|i| self.initial[i][1].powi(2) - kappa[i] * self.initial[i][0].powi(2)).sum()
    }

    pub fn spec(&self) -> Result<SpaceFormSpec> {
        SpaceFormSpec::with_eps(self.c, self.eps)
    }

    pub fn delta(&self) -> [f64; 3] {
        DELTA_ONE_MINUS
    }

    /// Seed (v, V).
    pub fn seed_data(&self) -> ([f64; 3], [f64; 3]) {
        match self.branch {
            PhiBranch::NegC { a } => ([1.0, 0.0, 0.0], [0.0, a, 0.0]),
            PhiBranch::PosC { b } => ([1.0, 0.0, 0.0], [0.0, 0.0, b]),
            PhiBranch::ConformallyFlat => ([0.0, 1.0, 1.0], [1.0, 0.0, 0.0]),
        }
    }

    pub fn seed_triple(&self, grid: ParameterGrid) -> Result<TripleField> {
        let (v, big_v) = self.seed_data();
        Ok(TripleField::constant(grid, self.delta(), self.spec()?, v, big_v)?.with_label("phi-family seed"))
    }

    /// Σδv′² carried by the family.
    pub fn k2_target(&self) -> f64 {
        match self.branch {
            PhiBranch::ConformallyFlat => 0.0,
            _ => 1.0,
        }
    }

    /// The Ribaucour state at u.
    pub fn state(&self, u: [f64; 3]) -> Result<RibaucourState> {
        let [(p1, d1), (p2, d2), (p3, d3)] = self.phis(u);
        let (k, e) = (self.k, self.eps);
        let num = p1 * p1 - p2 * p2 + p3 * p3;
        let scale = 1.0 + p1.abs() + p2.abs() + p3.abs();
        let tiny = 1e-14 * scale;
        let (phi, beta, gamma, den) = match self.branch {
            PhiBranch::NegC { a } => (p1 / (k * a), e * p2 / k, [d1 / (k * a), -d2 / (k * a), d3 / (k * a)], p1),
            PhiBranch::PosC { b } => (-p1 / k, e * b * p3 / k, [-d1 / k, d2 / k, -d3 / k], p1),
            PhiBranch::ConformallyFlat => ((p3 - p2) / k, e * p1 / k, [-d1 / k, -d2 / k, d3 / k], p3 - p2),
        };
        if den.abs() <= tiny {
            return Err(Error::SingularPhi { value: phi });
        }
        let psi = num / (2.0 * den);
        if psi.abs() <= tiny {
            return Err(Error::SingularPsi { value: psi });
        }
        let vprime = match self.branch {
            PhiBranch::ConformallyFlat => [p1 / psi, 1.0 - p2 / psi, 1.0 - p3 / psi],
            _ => [1.0 - p1 / psi, -p2 / psi, -p3 / psi],
        };
        Ok(RibaucourState { gamma, vprime, phi, psi, beta })
    }

    /// The state at u as a request for [`crate::ribaucour::seed_state`].
    pub fn request(&self, u: [f64; 3]) -> Result<RibaucourRequest> {
        let st = self.state(u)?;
        Ok(RibaucourRequest { gamma: st.gamma, beta: st.beta, phi: st.phi, vprime: st.vprime })
    }

    /// Closed-form frame of the seed at u.
    pub fn seed_frame(&self, u: [f64; 3]) -> Result<FrameState> {
        let (v, big_v) = self.seed_data();
        constant_seed_frame(&self.spec()?, v, big_v, u)
    }

    /// F′ = F − (ΣγᵢXᵢ + βN + cφF)/ψ evaluated from the closed forms.
    pub fn transformed_point(&self, u: [f64; 3]) -> Result<Vec<f64>> {
        let st = self.state(u)?;
        let fr = self.seed_frame(u)?;
        Ok((0..fr.dim())
            .map(|a| {
                let g = st.gamma[0] * fr.x[0][a]
                    + st.gamma[1] * fr.x[1][a]
                    + st.gamma[2] * fr.x[2][a]
                    + st.beta * fr.n[a]
                    + self.c * st.phi * fr.f[a];
                fr.f[a] - g / st.psi
            })
            .collect())
    }

    /// Closed-form transformed data (v′, h′, V′); NaN where the state is
    /// singular.
    pub fn transformed_triple(&self, grid: ParameterGrid) -> Result<TripleField> {
        let fam = *self;
        let (v, big_v) = self.seed_data();
        let seed = TripleSample::constant(v, big_v);
        let eps = self.eps;
        Ok(TripleField::closed(grid, self.delta(), self.spec()?, move |u| match fam.state(u) {
            Ok(st) => TripleSample {
                v: st.vprime,
                h: st.h_prime(&seed),
                big_v: [0, 1, 2].map(|i| big_v[i] + (v[i] - st.vprime[i]) * eps * st.beta / st.phi),
            },
            Err(_) => TripleSample::nan(),
        })?
        .with_label("phi-family transform"))
    }
}

/// The closed-form Ribaucour state of a family at u.
pub fn phi_state(fam: &PhiFamily, u: [f64; 3]) -> Result<RibaucourState> {
    fam.state(u)
}

// ---------------------------------------------------------------------------
// explicit coordinate lists

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplicitPair {
    /// f′ in R⁴ from the seed v = (1,0,0), V = e₂.
    R4Pair,
    /// f̃′ in S⁴ ⊂ R⁵; evaluated without correction, see [`s4_component_report`].
    S4Pair,
    /// Conformally flat f′ in R⁴ for K = −1.
    CflatKMinus1,
}

impl ExplicitPair {
    pub fn name(self) -> &'static str {
        match self {
            ExplicitPair::R4Pair => "r4_pair",
            ExplicitPair::S4Pair => "s4_pair",
            ExplicitPair::CflatKMinus1 => "cflat_K_minus1",
        }
    }
}

/// Literal evaluation of the explicit coordinate functions. The R⁴ list is
/// read with the factor φ₂ dropped from the last component (the only
/// reading consistent with the construction); the other two lists are
/// evaluated as written.
pub fn explicit_fprime(which: ExplicitPair, theta: f64, u: [f64; 3]) -> Result<Vec<f64>> {
    let [u1, u2, u3] = u;
    let (ct, st) = (theta.cos(), theta.sin());
    let r2u = |x: f64| SQRT_2 * x;
    let hinv = match which {
        ExplicitPair::R4Pair => {
            2.0 * ct * ct * u1.cosh().powi(2) - r2u(u2).sin().powi(2) + 2.0 * st * st * u3.cosh().powi(2)
        }
        ExplicitPair::S4Pair => {
            2.0 * ct * ct * u1.cos().powi(2) - r2u(u2).sin().powi(2) + 2.0 * st * st * u3.cosh().powi(2)
        }
        ExplicitPair::CflatKMinus1 => {
            ct * ct * r2u(u1).cos().powi(2) - 2.0 * u2.cosh().powi(2) + 2.0 * st * st * u3.cos().powi(2)
        }
    };
    if hinv.abs() <= 1e-14 {
        return Err(Error::SingularDenominator { at: u });
    }
    let h = 1.0 / hinv;
    Ok(match which {
        ExplicitPair::R4Pair => {
            let gh = 2.0 * ct * u1.cosh() * h;
            let (c2, s2) = (r2u(u2).cos(), r2u(u2).sin());
            vec![
                u1 - 2.0 * gh * ct * u1.sinh(),
                gh * (2.0 * c2 * u2.cos() + SQRT_2 * s2 * u2.sin()),
                -2.0 * gh * st * u3.sinh(),
                gh * (2.0 * c2 * u2.sin() - SQRT_2 * s2 * u2.cos()),
            ]
        }
        ExplicitPair::S4Pair => {
            let gh = 2.0 * ct * u1.cosh() * h;
            vec![
                u1.sin() + gh * (ct * u1.cos() * u1.sinh() + ct * u1.sin() * u1.cosh()),
                -gh * r2u(u2).cos(),
                gh * (st * u3.cos() * u3.sinh() - st * u3.sin() * u3.cosh()),
                gh * (st * u3.sin() * u3.sinh() + st * u3.cos() * u3.cosh()),
                u1.cos() + gh * (ct * u1.cos() * u1.cosh() - ct * u1.sin() * u1.sinh()),
            ]
        }
        ExplicitPair::CflatKMinus1 => {
            let gh = (u2.cosh() - st * u3.cos()) * h;
            let (c2, s2) = (r2u(u1).cos(), r2u(u1).sin());
            vec![
                2.0 * ct * gh * (SQRT_2 * c2 * u1.sin() - s2 * u1.cos()),
                u2 + 4.0 * u2.sinh() * gh,
                u3 + 4.0 * st * u3.sin() * gh,
                -2.0 * ct * (s2 * u1.sin() + c2 * u1.sin()) * gh,
            ]
        }
    })
}

/// The closed-form family whose transform an explicit list describes
/// (ρ = 1, zero phases).
pub fn explicit_family(which: ExplicitPair, theta: f64) -> PhiFamily {
    match which {
        ExplicitPair::R4Pair => PhiFamily::r4(1.0, theta),
        ExplicitPair::S4Pair => PhiFamily::s4(1.0, theta),
        ExplicitPair::CflatKMinus1 => PhiFamily::cflat(-1.0, 1.0, theta).expect("K = −1 is admissible"),
    }
}

/// Per-component comparison of an explicit list against the closed-form
/// transform, for both signs of the explicit component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedComponentMatch {
    pub component: usize,
    /// max |explicit − closed form|
    pub same_sign: f64,
    /// max |explicit + closed form|
    pub flipped_sign: f64,
    /// +1 or −1: the sign with the smaller discrepancy.
    pub best_sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub which: ExplicitPair,
    pub theta: f64,
    pub components: Vec<SignedComponentMatch>,
    /// max |⟨f,f⟩ − 1| of the explicit list (S⁴ only, else 0).
    pub explicit_sphere_defect: f64,
    /// Nodes skipped because either side was singular.
    pub skipped: usize,
}

/// Compare an explicit list with the closed-form transform on a grid. The
/// explicit list is never corrected; the report says which components agree
/// and with which sign.
pub fn s4_component_report(theta: f64, grid: &ParameterGrid) -> ComponentReport {
    component_report(ExplicitPair::S4Pair, theta, grid)
}

pub fn component_report(which: ExplicitPair, theta: f64, grid: &ParameterGrid) -> ComponentReport {
    let fam = explicit_family(which, theta);
    let dim = if which == ExplicitPair::S4Pair { 5 } else { 4 };
    let mut same = vec![0.0f64; dim];
    let mut flip = vec![0.0f64; dim];
    let mut sphere = 0.0f64;
    let mut skipped = 0;
    for idx in grid.indices() {
        let u = grid.point(idx);
        let (Ok(p), Ok(q)) = (explicit_fprime(which, theta, u), fam.transformed_point(u)) else {
            skipped += 1;
            continue;
        };
        for a in 0..dim {
            same[a] = same[a].max((p[a] - q[a]).abs());
            flip[a] = flip[a].max((p[a] + q[a]).abs());
        }
        if which == ExplicitPair::S4Pair {
            sphere = sphere.max((p.iter().map(|x| x * x).sum::<f64>() - 1.0).abs());
        }
    }
    let components = (0..dim)
        .map(|a| SignedComponentMatch {
            component: a + 1,
            same_sign: same[a],
            flipped_sign: flip[a],
            best_sign: if flip[a] < same[a] { -1.0 } else { 1.0 },
        })
        .collect();
    ComponentReport { which, theta, components, explicit_sphere_defect: sphere, skipped }
}

// ---------------------------------------------------------------------------
// helices

/// Coordinates (x₁, x₄, x₅) of the 3-space containing a profile curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfilePlane {
    /// Orthonormal basis with ⟨eᵢ,eᵢ⟩ = signs[i]; the height is along e₁.
    Diagonal { signs: [f64; 3] },
    /// e₁, e₄ null with ⟨e₁,e₄⟩ = 1 and ⟨e₅,e₅⟩ = sigma; the height
    /// ⟨γ, e₄⟩ is the e₁-coordinate.
    Null { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HelixSample {
    pub s: f64,
    pub point: [f64; 3],
    pub height: f64,
}

/// A unit-speed curve in Q²(c) ⊂ R³ whose height γ_v satisfies
/// γ_v″ + c_h·γ_v = 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelixProfile {
    pub c_h: f64,
    pub c: f64,
    pub plane: ProfilePlane,
    /// γ_v(0), γ_v′(0).
    pub height0: [f64; 2],
    pub samples: Vec<HelixSample>,
    /// `oscillator`: γ_v″ + c_h·γ_v and `speed`: ⟨γ′,γ′⟩ − 1, by finite
    /// differences over the samples.
    pub report: ResidualReport,
}

const GL_NODES: [f64; 5] =
    [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// ∫₀ˢ f by composite 5-point Gauss–Legendre.
fn quad(s: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if s == 0.0 {
        return Ok(0.0);
    }
    let panels = (s.abs() / 0.05).ceil().max(1.0) as usize;
    let w = s / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * w;
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            acc += wt * f(mid + 0.5 * w * x)?;
        }
    }
    Ok(0.5 * w * acc)
}

/// Finite-difference weights for sample k from a window of up to 7 points.
fn window(n: usize, k: usize) -> (usize, usize) {
    let m = 7.min(n);
    let start = k.saturating_sub(m / 2).min(n - m);
    (start, start + m)
}

impl HelixProfile {
    fn validate(&self) -> Result<()> {
        if self.c == 0.0 || !self.c.is_finite() {
            return Err(Error::FlatAmbientUnsupported);
        }
        match self.plane {
            ProfilePlane::Diagonal { signs } if signs.iter().any(|&x| x != 1.0 && x != -1.0) => {
                Err(Error::InvalidParams("profile plane signs must be ±1".into()))
            }
            ProfilePlane::Null { sigma } if sigma != 1.0 && sigma != -1.0 => {
                Err(Error::InvalidParams("profile plane sign must be ±1".into()))
            }
            _ => Ok(()),
        }
    }

    /// (γ_v(s), γ_v′(s)) in closed form.
    pub fn height(&self, s: f64) -> (f64, f64) {
        let (cs, sn) = geodesic_coefficients(self.c_h, s);
        let [a, b] = self.height0;
        (a * cs + b * sn, -self.c_h * a * sn + b * cs)
    }

    /// Diagonal planes: R² = ρq, ⟨w′,w′⟩ = aR′² + bR²α′². Returns (ρ, a, b, hyperbolic, q-sign).
    fn complement(&self, signs: [f64; 3], g: f64) -> (f64, f64, f64, bool) {
        let q = 1.0 / self.c - signs[0] * g * g;
        if signs[1] == signs[2] {
            (1.0 / signs[1], signs[1], signs[1], false)
        } else if q > 0.0 {
            (1.0, 1.0, -1.0, true)
        } else {
            (-1.0, -1.0, 1.0, true)
        }
    }

    fn q(&self, signs: [f64; 3], g: f64) -> f64 {
        1.0 / self.c - signs[0] * g * g
    }

    fn alpha_rate(&self, signs: [f64; 3], q0: f64, t: f64) -> Result<f64> {
        let (g, dg) = self.height(t);
        let q = self.q(signs, g);
        if q * q0 <= 0.0 {
            return Err(Error::InvalidParams(format!("profile passes through its axis near s = {t}")));
        }
        let (rho, a, b, _) = self.complement(signs, self.height(0.0).0);
        let r2 = rho * q;
        if !(r2 > 0.0) {
            return Err(Error::InvalidParams("the height function is not realizable in this plane".into()));
        }
        let r = r2.sqrt();
        let dr = rho * (-2.0 * signs[0] * g * dg) / (2.0 * r);
        let rate2 = (1.0 - signs[0] * dg * dg - a * dr * dr) / (b * r2);
        if rate2 < -1e-12 {
            return Err(Error::InvalidParams(format!("unit speed impossible at s = {t}")));
        }
        Ok(rate2.max(0.0).sqrt())
    }

    fn null_rate(&self, sigma: f64, t: f64) -> Result<f64> {
        let (g, dg) = self.height(t);
        if g.abs() <= 1e-12 {
            return Err(Error::SingularOrbit);
        }
        let p = dg / g;
        let rad = sigma * (1.0 + p * p / self.c);
        if rad < -1e-12 {
            return Err(Error::InvalidParams(format!("unit speed impossible at s = {t}")));
        }
        Ok(rad.max(0.0).sqrt() / g)
    }

    /// The curve point (x₁, x₄, x₅) at s.
    pub fn point(&self, s: f64) -> Result<[f64; 3]> {
        self.validate()?;
        let (g, _) = self.height(s);
        match self.plane {
            ProfilePlane::Diagonal { signs } => {
                let g0 = self.height(0.0).0;
                let q0 = self.q(signs, g0);
                let (rho, _, _, hyperbolic) = self.complement(signs, g0);
                let alpha = quad(s, |t| self.alpha_rate(signs, q0, t))?;
                let q = self.q(signs, g);
                let r = (rho * q).sqrt();
                if !hyperbolic {
                    return Ok([g, r * alpha.cos(), r * alpha.sin()]);
                }
                // indefinite complement: the spacelike slot carries cosh when q > 0
                let pos = if signs[1] > 0.0 { 1 } else { 2 };
                let (a, b) = if q0 > 0.0 { (alpha.cosh(), alpha.sinh()) } else { (alpha.sinh(), alpha.cosh()) };
                let mut out = [g, 0.0, 0.0];
                out[pos] = r * a;
                out[3 - pos] = r * b;
                Ok(out)
            }
            ProfilePlane::Null { sigma } => {
                let w = quad(s, |t| self.null_rate(sigma, t))?;
                if g.abs() <= 1e-12 {
                    return Err(Error::SingularOrbit);
                }
                let x5 = g * w;
                Ok([g, (1.0 / self.c - sigma * x5 * x5) / (2.0 * g), x5])
            }
        }
    }

    /// ⟨x, y⟩ in the profile 3-space.
    pub fn inner(&self, x: [f64; 3], y: [f64; 3]) -> f64 {
        match self.plane {
            ProfilePlane::Diagonal { signs } => (0..3).map(|i| signs[i] * x[i] * y[i]).sum(),
            ProfilePlane::Null { sigma } => x[0] * y[1] + x[1] * y[0] + sigma * x[2] * y[2],
        }
    }

    /// γ_v″ + c·γ_v over the samples, by finite differences.
    pub fn oscillator_residual(&self, c: f64) -> ResidualEntry {
        let mut acc = Accumulator::new("oscillator");
        let s: Vec<f64> = self.samples.iter().map(|x| x.s).collect();
        let hv: Vec<f64> = self.samples.iter().map(|x| x.height).collect();
        if s.len() >= 3 {
            for k in 0..s.len() {
                let (a, b) = window(s.len(), k);
                let w = fd_weights(s[k], &s[a..b], 2);
                let d2: f64 = (a..b).map(|j| w[j - a] * hv[j]).sum();
                acc.add(d2 + c * hv[k], [k, 0, 0]);
            }
        }
        acc.finish()
    }

    fn speed_residual(&self) -> ResidualEntry {
        let mut acc = Accumulator::new("speed");
        let s: Vec<f64> = self.samples.iter().map(|x| x.s).collect();
        if s.len() >= 3 {
            for k in 0..s.len() {
                let (a, b) = window(s.len(), k);
                let w = fd_weights(s[k], &s[a..b], 1);
                let d = [0, 1, 2].map(|c| (a..b).map(|j| w[j - a] * self.samples[j].point[c]).sum::<f64>());
                acc.add(self.inner(d, d) - 1.0, [k, 0, 0]);
            }
        }
        acc.finish()
    }
}

/// A c_h-helix in Q²(c) with height γ_v(0), γ_v′(0) = `height0`, sampled at
/// the strictly increasing `s_samples`.
pub fn helix(c_h: f64, c: f64, plane: ProfilePlane, height0: [f64; 2], s_samples: &[f64]) -> Result<HelixProfile> {
    if s_samples.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParams("helix samples must be strictly increasing".into()));
    }
    let mut hp = HelixProfile { c_h, c, plane, height0, samples: vec![], report: ResidualReport::default() };
    hp.validate()?;
    hp.samples = s_samples
        .iter()
        .map(|&s| Ok(HelixSample { s, point: hp.point(s)?, height: hp.height(s).0 }))
        .collect::<Result<_>>()?;
    let osc = hp.oscillator_residual(c_h);
    let speed = hp.speed_residual();
    hp.report = ResidualReport {
        entries: vec![osc, speed],
        metadata: ReportMetadata {
            scheme: Some("gauss-legendre quadrature".into()),
            step: None,
            stencil: Some("7-point".into()),
        },
    };
    Ok(hp)
}

// ---------------------------------------------------------------------------
// rotation hypersurfaces

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationType {
    Spherical,
    Hyperbolic,
    Parabolic,
}

/// Coordinates of the rotation basis e₁..e₅ in the canonical coordinates of
/// the ambient model, chosen by matching signatures.
fn rotation_basis(kind: RotationType, profile: &HelixProfile, spec: &SpaceFormSpec) -> Result<[Vec<f64>; 5]> {
    let sig = spec.ambient.signature().to_vec();
    let d = sig.len();
    let mut used = vec![false; d];
    let mut take = |sign: f64| -> Result<usize> {
        let i = (0..d)
            .find(|&i| !used[i] && sig[i] == sign)
            .ok_or_else(|| Error::InvalidParams("rotation basis does not fit the ambient signature".into()))?;
        used[i] = true;
        Ok(i)
    };
    let unit = |i: usize, s: f64| {
        let mut e = vec![0.0; d];
        e[i] = s;
        e
    };
    match (kind, profile.plane) {
        (RotationType::Spherical, ProfilePlane::Diagonal { signs }) if signs[0] == 1.0 => {
            let e1 = take(1.0)?;
            let e2 = take(1.0)?;
            let e3 = take(1.0)?;
            let e4 = take(signs[1])?;
            let e5 = take(signs[2])?;
            Ok([unit(e1, 1.0), unit(e2, 1.0), unit(e3, 1.0), unit(e4, 1.0), unit(e5, 1.0)])
        }
        (RotationType::Hyperbolic, ProfilePlane::Diagonal { signs }) if signs[0] == -1.0 && signs[1] == 1.0 => {
            let e1 = take(-1.0)?;
            let e2 = take(1.0)?;
            let e3 = take(1.0)?;
            let e4 = take(1.0)?;
            let e5 = take(signs[2])?;
            Ok([unit(e1, 1.0), unit(e2, 1.0), unit(e3, 1.0), unit(e4, 1.0), unit(e5, 1.0)])
        }
        (RotationType::Parabolic, ProfilePlane::Null { sigma }) => {
            let e2 = take(1.0)?;
            let e3 = take(1.0)?;
            let e5 = take(sigma)?;
            let t = take(-1.0)?;
            let s = take(1.0)?;
            let r = 1.0 / SQRT_2;
            let mut e1 = vec![0.0; d];
            e1[t] = r;
            e1[s] = r;
            let mut e4 = vec![0.0; d];
            e4[t] = -r;
            e4[s] = r;
            Ok([e1, unit(e2, 1.0), unit(e3, 1.0), e4, unit(e5, 1.0)])
        }
        _ => Err(Error::InvalidParams(format!("profile plane does not match a {kind:?} rotation"))),
    }
}

/// Orthogonal chart of S² (spherical type) or H² (hyperbolic type), with
/// φ(0) = (1,0,0).
fn orbit_chart(kind: RotationType, [u1, u2]: [f64; 2]) -> [f64; 3] {
    match kind {
        RotationType::Hyperbolic => [u1.cosh() * u2.cosh(), u1.sinh(), u1.cosh() * u2.sinh()],
        _ => [u1.cos() * u2.cos(), u1.cos() * u2.sin(), u1.sin()],
    }
}

/// The rotation hypersurface through the profile at (s, u), in the
/// canonical coordinates of `spec`:
/// spherical/hyperbolic f = (γ₁φ₁, γ₁φ₂, γ₁φ₃, γ₄, γ₅), parabolic
/// f = (γ₁, γ₁u₁, γ₁u₂, γ₄ − ½γ₁(u₁² + u₂²), γ₅) in the rotation basis.
pub fn rotation_hypersurface(
    kind: RotationType,
    profile: &HelixProfile,
    spec: &SpaceFormSpec,
    s: f64,
    u: [f64; 2],
) -> Result<Vec<f64>> {
    if spec.c == 0.0 {
        return Err(Error::FlatAmbientUnsupported);
    }
    if profile.c != spec.c {
        return Err(Error::InvalidParams(format!("profile lies in Q²({}), ambient has c = {}", profile.c, spec.c)));
    }
    let basis = rotation_basis(kind, profile, spec)?;
    let [g1, g4, g5] = profile.point(s)?;
    if g1.abs() <= 1e-12 {
        return Err(Error::SingularOrbit);
    }
    let coef = match kind {
        RotationType::Parabolic => [g1, g1 * u[0], g1 * u[1], g4 - 0.5 * g1 * (u[0] * u[0] + u[1] * u[1]), g5],
        _ => {
            let p = orbit_chart(kind, u);
            [g1 * p[0], g1 * p[1], g1 * p[2], g4, g5]
        }
    };
    let d = spec.dim();
    Ok((0..d).map(|a| (0..5).map(|j| coef[j] * basis[j][a]).sum()).collect())
}

// ---------------------------------------------------------------------------
// generalized cones

/// An umbilical hypersurface Q³(c̄) of Q⁴(c).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UmbilicHypersurface {
    /// ⟨x − center, x − center⟩ = radius² in R⁴ (c = 0); c̄ = 1/radius².
    Sphere { center: Vec<f64>, radius: f64 },
    /// Q⁴(c) ∩ {⟨x, axis⟩ = level}; an affine hyperplane when c = 0.
    Section { axis: Vec<f64>, level: f64 },
}

impl UmbilicHypersurface {
    pub fn c_bar(&self, spec: &SpaceFormSpec) -> Result<f64> {
        match self {
            UmbilicHypersurface::Sphere { radius, .. } => {
                if spec.c != 0.0 {
                    return Err(Error::InvalidParams("sphere description needs c = 0".into()));
                }
                Ok(1.0 / (radius * radius))
            }
            UmbilicHypersurface::Section { axis, level } => {
                let aa = spec.inner(axis, axis)?;
                if aa == 0.0 {
                    return Err(Error::InvalidParams("section axis must be non-null".into()));
                }
                if spec.c == 0.0 {
                    return Ok(0.0);
                }
                Ok(1.0 / (1.0 / spec.c - level * level / aa))
            }
        }
    }

    /// Whether g lies on the hypersurface.
    pub fn contains(&self, spec: &SpaceFormSpec, g: &[f64], tol: f64) -> Result<bool> {
        if !spec.on_space_form(g, tol) {
            return Ok(false);
        }
        Ok(match self {
            UmbilicHypersurface::Sphere { center, radius } => {
                let d: Vec<f64> = g.iter().zip(center).map(|(x, z)| x - z).collect();
                (spec.inner(&d, &d)? - radius * radius).abs() <= tol
            }
            UmbilicHypersurface::Section { axis, level } => (spec.inner(g, axis)? - level).abs() <= tol,
        })
    }

    /// Unit normal ξ of the inclusion at g, tangent to Q⁴(c).
    pub fn normal(&self, spec: &SpaceFormSpec, g: &[f64]) -> Result<Vec<f64>> {
        let raw: Vec<f64> = match self {
            UmbilicHypersurface::Sphere { center, .. } => g.iter().zip(center).map(|(x, z)| x - z).collect(),
            UmbilicHypersurface::Section { axis, .. } => {
                let ag = spec.inner(axis, g)?;
                axis.iter().zip(g).map(|(a, x)| a - spec.c * ag * x).collect()
            }
        };
        let nn = spec.inner(&raw, &raw)?;
        if !(nn > 0.0) {
            return Err(Error::InvalidTangent(format!("umbilical normal has ⟨ξ,ξ⟩ = {nn}")));
        }
        Ok(raw.iter().map(|x| x / nn.sqrt()).collect())
    }
}

/// G(x, t) = exp_{g(x)}(t ξ(g(x))).
pub fn generalized_cone(spec: &SpaceFormSpec, q3: &UmbilicHypersurface, g: &[f64], t: f64) -> Result<Vec<f64>> {
    let c_bar = q3.c_bar(spec)?;
    if c_bar < spec.c {
        return Err(Error::InvalidParams(format!("umbilical hypersurface needs c̄ ≥ c, got c̄ = {c_bar}")));
    }
    if !q3.contains(spec, g, 1e-8)? {
        return Err(Error::PreconditionFailed("surface point is off the umbilical hypersurface".into()));
    }
    let xi = q3.normal(spec, g)?;
    spec.geodesic(g, &xi, t)
}

/// Cone in R⁴ over the flat torus of radii (r₁, √(1−r₁²)) in the unit S³:
/// G(u) = (cosh(a u₃)/a)·g(a u₁, a u₂), i.e. geodesic parameter
/// t = cosh(a u₃)/a − 1. The coordinates are principal with
/// v = (r₁cosh, r₂cosh, sinh)(a u₃), V = (−a r₂, a r₁, 0) and
/// δ = (1, 1, −1), so the data are of Problem * type with C = a².
pub fn clifford_cone(r1: f64, a: f64, u: [f64; 3]) -> Result<Vec<f64>> {
    if !(r1 > 0.0 && r1 < 1.0) || a <= 0.0 {
        return Err(Error::InvalidParams("need 0 < r₁ < 1 and a > 0".into()));
    }
    let r2 = (1.0 - r1 * r1).sqrt();
    let (x1, x2) = (a * u[0], a * u[1]);
    let g = vec![r1 * x1.cos(), r1 * x1.sin(), r2 * x2.cos(), r2 * x2.sin()];
    let spec = SpaceFormSpec::new(0.0, 0)?;
    let q3 = UmbilicHypersurface::Sphere { center: vec![0.0; 4], radius: 1.0 };
    generalized_cone(&spec, &q3, &g, (a * u[2]).cosh() / a - 1.0)
}

/// The closed-form data of [`clifford_cone`].
pub fn clifford_cone_triple(r1: f64, a: f64, grid: ParameterGrid) -> Result<TripleField> {
    if !(r1 > 0.0 && r1 < 1.0) || a <= 0.0 {
        return Err(Error::InvalidParams("need 0 < r₁ < 1 and a > 0".into()));
    }
    let r2 = (1.0 - r1 * r1).sqrt();
    TripleField::closed(grid, [1.0, 1.0, -1.0], SpaceFormSpec::new(0.0, 0)?, move |u| {
        let (ch, sh) = ((a * u[2]).cosh(), (a * u[2]).sinh());
        let mut h = [[0.0; 3]; 3];
        h[2][0] = a * r1;
        h[2][1] = a * r2;
        TripleSample { v: [r1 * ch, r2 * ch, sh], h, big_v: [-a * r2, a * r1, 0.0] }
    })
    .map(|t| t.with_label("clifford cone"))
}

// ---------------------------------------------------------------------------
// registry

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GalleryItem {
    pub name: &'static str,
    pub description: &'static str,
    /// Ambient dimension of the evaluated point.
    pub dim: usize,
}

pub const GALLERY: &[GalleryItem] = &[
    GalleryItem { name: "r4_pair", description: "explicit coordinates of the R⁴ transform (θ-family)", dim: 4 },
    GalleryItem { name: "s4_pair", description: "explicit coordinates of the S⁴ companion, uncorrected", dim: 5 },
    GalleryItem { name: "cflat_K_minus1", description: "explicit conformally flat coordinates, K = −1", dim: 4 },
    GalleryItem { name: "r4_closed_form", description: "closed-form Ribaucour transform, R⁴ branch", dim: 4 },
    GalleryItem { name: "s4_closed_form", description: "closed-form Ribaucour transform, S⁴ branch", dim: 5 },
    GalleryItem { name: "cflat_closed_form", description: "closed-form conformally flat transform, K = −1", dim: 4 },
    GalleryItem { name: "clifford_cone", description: "cone over the Clifford torus, r₁ = 1/√2, a = 1", dim: 4 },
    GalleryItem { name: "problemstar_e1_Cneg", description: "seed v=(1,0,0), V=(0,1,0) in R⁴", dim: 4 },
    GalleryItem { name: "problemstar_e1_Cpos", description: "seed v=(1,0,0), V=(0,0,1) in R⁴", dim: 4 },
    GalleryItem { name: "problemstar_em1_Cpos", description: "seed v=(0,1,0), V=(0,0,1) in R⁴", dim: 4 },
    GalleryItem { name: "problemstar_em1_Cneg", description: "seed v=(0,0,1), V=(1,0,0) in R⁴", dim: 4 },
    GalleryItem { name: "cflat", description: "seed v=(0,1,1), V=(1,0,0) in R⁴", dim: 4 },
];

/// Default θ for named evaluations.
pub const DEFAULT_THETA: f64 = FRAC_PI_4;

/// Evaluate a named gallery item at u.
pub fn gallery_eval(name: &str, theta: f64, u: [f64; 3]) -> Result<Vec<f64>> {
    let pair = |w| explicit_fprime(w, theta, u);
    match name {
        "r4_pair" => pair(ExplicitPair::R4Pair),
        "s4_pair" => pair(ExplicitPair::S4Pair),
        "cflat_K_minus1" => pair(ExplicitPair::CflatKMinus1),
        "r4_closed_form" => PhiFamily::r4(1.0, theta).transformed_point(u),
        "s4_closed_form" => PhiFamily::s4(1.0, theta).transformed_point(u),
        "cflat_closed_form" => PhiFamily::cflat(-1.0, 1.0, theta)?.transformed_point(u),
        "clifford_cone" => clifford_cone(1.0 / SQRT_2, 1.0, u),
        other => {
            let kind = TrivialSeedKind::from_name(other)
                .ok_or_else(|| Error::InvalidParams(format!("unknown gallery item {other:?}")))?;
            let (_, v, big_v) = kind.data(kind.default_c());
            Ok(constant_seed_frame(&SpaceFormSpec::new(0.0, 0)?, v, big_v, u)?.f)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triples::{classify, first_integrals, triple_residuals, ClassKind};
    use approx::assert_abs_diff_eq;

    fn grid() -> ParameterGrid {
        ParameterGrid::cube(1.0, 5).unwrap()
    }

    #[test]
    fn seeds_match_table() {
        let flat = SpaceFormSpec::new(0.0, 0).unwrap();
        let t = trivial_seed(TrivialSeedKind::ProblemStarE1CNeg, Some(-1.0), flat.clone(), grid()).unwrap();
        let s = t.sample([0, 0, 0]).unwrap();
        assert_eq!((s.v, s.big_v, t.delta), ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, -1.0, 1.0]));
        let t = trivial_seed(TrivialSeedKind::Cflat, None, flat.clone(), grid()).unwrap();
        let s = t.sample([1, 2, 3]).unwrap();
        assert_eq!((s.v, s.big_v, t.delta), ([0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, -1.0, 1.0]));
        let t = trivial_seed(TrivialSeedKind::ProblemStarEm1CNeg, Some(-4.0), flat.clone(), grid()).unwrap();
        let s = t.sample([0, 0, 0]).unwrap();
        assert_eq!((s.v, s.big_v, t.delta), ([0.0, 0.0, 1.0], [2.0, 0.0, 0.0], [-1.0; 3]));
        assert!(s.h.iter().flatten().all(|x| *x == 0.0));
    }

    #[test]
    fn seed_sign_checked() {
        let flat = SpaceFormSpec::new(0.0, 0).unwrap();
        for (kind, bad) in [
            (TrivialSeedKind::ProblemStarE1CNeg, 1.0),
            (TrivialSeedKind::ProblemStarE1CPos, -1.0),
            (TrivialSeedKind::ProblemStarEm1CPos, -2.0),
            (TrivialSeedKind::ProblemStarEm1CNeg, 0.5),
            (TrivialSeedKind::Cflat, 2.0),
        ] {
            assert!(matches!(trivial_seed(kind, Some(bad), flat.clone(), grid()), Err(Error::InvalidParams(_))));
        }
    }

    #[test]
    fn seeds_classify_as_their_kind() {
        let flat = SpaceFormSpec::new(0.0, 0).unwrap();
        for kind in TrivialSeedKind::ALL {
            let cc = kind.default_c() * 2.0;
            let cc = if kind == TrivialSeedKind::Cflat { 1.0 } else { cc };
            let t = trivial_seed(kind, Some(cc), flat.clone(), grid()).unwrap();
            let cls = classify(&t, 1e-9).unwrap();
            let want = if kind == TrivialSeedKind::Cflat { ClassKind::ConformallyFlat } else { ClassKind::ProblemStar };
            assert_eq!(cls.kind, want, "{kind:?}");
            if want == ClassKind::ProblemStar {
                assert_abs_diff_eq!(cls.c_const.unwrap(), cc, epsilon = 1e-12);
                let eh = if matches!(kind, TrivialSeedKind::ProblemStarE1CNeg | TrivialSeedKind::ProblemStarE1CPos) {
                    1.0
                } else {
                    -1.0
                };
                assert_eq!(cls.eps_hat, Some(eh));
            }
        }
    }

    #[test]
    fn r4_state_at_origin() {
        // φ₁ = φ₃ = 1, φ₂ = 0, φ₂′ = √2 at u = 0 for ρ = 1, θ = π/4
        let st = PhiFamily::r4(1.0, FRAC_PI_4).state([0.0; 3]).unwrap();
        assert_abs_diff_eq!(st.psi, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.phi, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.beta, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.gamma[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.gamma[1], -SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(st.gamma[2], 0.0, epsilon = 1e-15);
        for (a, b) in st.vprime.iter().zip([0.0, 0.0, -1.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn constraint_brackets_constant() {
        let fams = [
            PhiFamily::r4(1.3, 0.4),
            PhiFamily::r4_with_phases(0.8, 1.1, [0.2, -0.3, 0.5]),
            PhiFamily::s4(1.0, 0.3),
            PhiFamily::cflat(-1.0, 1.0, 0.3).unwrap(),
            PhiFamily::cflat_with_phases(-2.5, 0.7, 1.0, [0.1, 0.2, 0.3]).unwrap(),
        ];
        for fam in fams {
            let b0 = fam.brackets([0.0; 3]);
            for u in [[0.3, -0.7, 0.9], [-1.0, 1.0, 0.2]] {
                let b = fam.brackets(u);
                for i in 0..3 {
                    assert!((b[i] - b0[i]).abs() <= 1e-12 * (1.0 + b0[i].abs()), "{fam:?}");
                }
                assert!(b.iter().sum::<f64>().abs() <= 1e-10);
            }
            assert!(PhiFamily::new(fam.branch, fam.k, fam.c, fam.eps, fam.initial).is_ok());
        }
    }

    #[test]
    fn constraint_violation_rejected() {
        let mut init = PhiFamily::r4(1.0, 0.3).initial;
        init[1][1] += 0.1;
        assert!(PhiFamily::new(PhiBranch::NegC { a: 1.0 }, 1.0, 0.0, 1.0, init).is_err());
        let fixed = PhiFamily::solving_slope(PhiBranch::NegC { a: 1.0 }, 1.0, 0.0, 1.0, init, 1).unwrap();
        assert_abs_diff_eq!(fixed.initial[1][1], SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn cflat_degenerate_branch() {
        // θ = π/2 kills φ₁, hence β ≡ 0 and V′ = V
        let fam = PhiFamily::cflat(-1.0, 1.0, std::f64::consts::FRAC_PI_2).unwrap();
        let st = fam.state([0.2, 0.4, -0.3]).unwrap();
        assert!(st.beta.abs() < 1e-15);
        let t = fam.transformed_triple(grid()).unwrap();
        let s = t.on_grid(&grid()).unwrap().sample([1, 3, 2]).unwrap();
        for (a, b) in s.big_v.iter().zip([1.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn singular_psi_reported() {
        // θ = π/2 in the conformally flat family: φ₁ ≡ 0 and ψ's numerator
        // −cosh²u₂ + cos²u₃ vanishes at the origin
        let fam = PhiFamily::cflat(-1.0, 1.0, std::f64::consts::FRAC_PI_2).unwrap();
        assert!(matches!(fam.state([0.0; 3]), Err(Error::SingularPhi { .. }) | Err(Error::SingularPsi { .. })));
        // R⁴ family: ψ vanishes where φ₁² + φ₃² = φ₂², e.g. θ = 0, cosh²u₁·2 = sin²(√2u₂) never; use a phase
        let fam = PhiFamily::r4_with_phases(1.0, 0.0, [0.0, std::f64::consts::FRAC_PI_2, 0.0]);
        let st = fam.state([0.0; 3]).unwrap();
        assert!(st.psi.is_finite());
        let fam = PhiFamily::r4(1.0, std::f64::consts::FRAC_PI_2);
        assert!(matches!(fam.state([0.0; 3]), Err(Error::SingularPhi { .. })));
    }

    #[test]
    fn seed_frame_solves_frame_system() {
        let specs = [
            SpaceFormSpec::new(0.0, 0),
            SpaceFormSpec::new(1.0, 0),
            SpaceFormSpec::new(-2.0, 1),
            SpaceFormSpec::new(0.5, 1),
        ];
        for spec in specs.map(|s| s.unwrap()) {
            let (v, big_v) = ([0.0, 1.3, 0.0], [0.0, 0.0, 0.7]);
            let u = [0.3, -0.4, 0.5];
            let h = 1e-5;
            let fr = constant_seed_frame(&spec, v, big_v, u).unwrap();
            assert!(fr.gram_defect(&spec) < 1e-13);
            assert!(spec.on_space_form(&fr.f, 1e-12));
            for i in 0..3 {
                let mut up = u;
                up[i] += h;
                let mut dn = u;
                dn[i] -= h;
                let a = constant_seed_frame(&spec, v, big_v, up).unwrap();
                let b = constant_seed_frame(&spec, v, big_v, dn).unwrap();
                let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q) / (2.0 * h)).collect::<Vec<_>>();
                let df = d(&a.f, &b.f);
                let dxi = d(&a.x[i], &b.x[i]);
                let dn_ = d(&a.n, &b.n);
                for k in 0..spec.dim() {
                    assert_abs_diff_eq!(df[k], v[i] * fr.x[i][k], epsilon = 1e-8);
                    let want = spec.eps() * big_v[i] * fr.n[k] - spec.c * v[i] * fr.f[k];
                    assert_abs_diff_eq!(dxi[k], want, epsilon = 1e-8);
                    assert_abs_diff_eq!(dn_[k], -big_v[i] * fr.x[i][k], epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn explicit_r4_matches_closed_form() {
        for theta in [0.3, FRAC_PI_4, 1.2] {
            let fam = PhiFamily::r4(1.0, theta);
            for u in [[0.0; 3], [0.3, -0.2, 0.5], [-0.9, 0.7, 0.1]] {
                let p = explicit_fprime(ExplicitPair::R4Pair, theta, u).unwrap();
                let q = fam.transformed_point(u).unwrap();
                for a in 0..4 {
                    assert_abs_diff_eq!(p[a], q[a], epsilon = 1e-13);
                }
            }
            let o = explicit_fprime(ExplicitPair::R4Pair, theta, [0.0; 3]).unwrap();
            assert_abs_diff_eq!(o[1], 2.0 * theta.cos(), epsilon = 1e-15);
            assert_eq!([o[0], o[2], o[3]], [0.0; 3]);
        }
    }

    #[test]
    fn explicit_r4_vertical_branch() {
        let p = explicit_fprime(ExplicitPair::R4Pair, std::f64::consts::FRAC_PI_2, [0.4, 0.1, 0.2]).unwrap();
        assert_abs_diff_eq!(p[0], 0.4, epsilon = 1e-15);
        assert!(p[1..].iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn explicit_cflat_origin() {
        let p = explicit_fprime(ExplicitPair::CflatKMinus1, 0.3, [0.0; 3]).unwrap();
        assert!(p.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn explicit_s4_report_flags_components() {
        let g = ParameterGrid::cube(0.5, 5).unwrap();
        let r = s4_component_report(0.3, &g);
        assert_eq!(r.components.len(), 5);
        assert!(r.explicit_sphere_defect > 0.1);
        // the middle component agrees with the closed form up to sign
        // no component of the explicit list agrees with the transform
        assert!(r.components.iter().all(|c| c.same_sign.min(c.flipped_sign) > 0.1));
    }

    #[test]
    fn closed_form_transform_is_a_solution() {
        // steep near the faces; order-6 error is ~1e-5 at 33 nodes
        let g = ParameterGrid::cube(0.5, 33).unwrap();
        for fam in [PhiFamily::r4(1.0, 0.7), PhiFamily::s4(1.0, 0.7), PhiFamily::cflat(-1.0, 1.0, 0.3).unwrap()] {
            let t = fam.transformed_triple(g.clone()).unwrap().with_stencil(crate::diff::Stencil::Order6);
            let r = triple_residuals(&t).unwrap();
            assert!(r.max() < 5e-5, "{fam:?}: {r:?}");
            let k = first_integrals(&t, [4, 4, 4]).unwrap();
            assert!(k.k1.abs() > 0.0 || fam.branch == PhiBranch::ConformallyFlat);
        }
    }

    #[test]
    fn helix_height_solves_oscillator() {
        let s: Vec<f64> = (0..101).map(|k| -0.5 + 0.01 * k as f64).collect();
        let hp = helix(0.5, 1.0, ProfilePlane::Diagonal { signs: [1.0; 3] }, [0.5, 0.1], &s).unwrap();
        assert!(hp.report.entry("oscillator").unwrap().max < 1e-8);
        assert!(hp.report.entry("speed").unwrap().max < 1e-8);
        for x in &hp.samples {
            assert_abs_diff_eq!(hp.inner(x.point, x.point), 1.0, epsilon = 1e-12);
        }
        // c_h = 0: affine height
        let hp = helix(0.0, 1.0, ProfilePlane::Diagonal { signs: [1.0; 3] }, [0.3, 0.2], &s).unwrap();
        for x in &hp.samples {
            assert_abs_diff_eq!(x.height, 0.3 + 0.2 * x.s, epsilon = 1e-15);
        }
        // constant height: residual against another c is |c·γ_v|
        let hp = helix(0.0, 1.0, ProfilePlane::Diagonal { signs: [1.0; 3] }, [0.4, 0.0], &s).unwrap();
        assert_abs_diff_eq!(hp.oscillator_residual(2.0).max, 0.8, epsilon = 1e-9);
    }

    #[test]
    fn helix_in_other_planes() {
        let s: Vec<f64> = (0..41).map(|k| -0.4 + 0.02 * k as f64).collect();
        for (c, plane, h0) in [
            (-1.0, ProfilePlane::Diagonal { signs: [-1.0, 1.0, 1.0] }, [1.5, 0.1]),
            (-1.0, ProfilePlane::Diagonal { signs: [1.0, 1.0, -1.0] }, [0.5, 0.1]),
            (-1.0, ProfilePlane::Null { sigma: 1.0 }, [1.0, 0.2]),
        ] {
            let hp = helix(-0.5, c, plane, h0, &s).unwrap();
            assert!(hp.report.max() < 1e-8, "{plane:?}: {:?}", hp.report);
            for x in &hp.samples {
                assert_abs_diff_eq!(hp.inner(x.point, x.point), 1.0 / c, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rotation_at_basepoint() {
        let s: Vec<f64> = vec![0.0];
        let sphere = SpaceFormSpec::new(1.0, 0).unwrap();
        let hp = helix(0.5, 1.0, ProfilePlane::Diagonal { signs: [1.0; 3] }, [0.5, 0.1], &s).unwrap();
        let p = rotation_hypersurface(RotationType::Spherical, &hp, &sphere, 0.0, [0.0, 0.0]).unwrap();
        let g = hp.point(0.0).unwrap();
        assert_eq!(p, vec![g[0], 0.0, 0.0, g[1], g[2]]);
        assert_abs_diff_eq!(sphere.inner(&p, &p).unwrap(), 1.0, epsilon = 1e-14);

        let hyp = SpaceFormSpec::new(-1.0, 0).unwrap();
        let hp = helix(-0.5, -1.0, ProfilePlane::Null { sigma: 1.0 }, [1.0, 0.2], &s).unwrap();
        let p = rotation_hypersurface(RotationType::Parabolic, &hp, &hyp, 0.3, [0.2, -0.1]).unwrap();
        assert_abs_diff_eq!(hyp.inner(&p, &p).unwrap(), -1.0, epsilon = 1e-12);
        let p0 = rotation_hypersurface(RotationType::Parabolic, &hp, &hyp, 0.3, [0.0, 0.0]).unwrap();
        let g = hp.point(0.3).unwrap();
        // rotation basis: e₁ = (E₅+E₄)/√2, e₄ = (−E₅+E₄)/√2, e₅ = E₃
        let r = 1.0 / SQRT_2;
        let want = [0.0, 0.0, g[2], r * (g[0] + g[1]), r * (g[0] - g[1])];
        for a in 0..5 {
            assert_abs_diff_eq!(p0[a], want[a], epsilon = 1e-14);
        }
    }

    #[test]
    fn rotation_singular_orbit() {
        let sphere = SpaceFormSpec::new(1.0, 0).unwrap();
        let hp = helix(1.0, 1.0, ProfilePlane::Diagonal { signs: [1.0; 3] }, [0.0, 0.5], &[0.0]).unwrap();
        assert!(matches!(
            rotation_hypersurface(RotationType::Spherical, &hp, &sphere, 0.0, [0.1, 0.2]),
            Err(Error::SingularOrbit)
        ));
    }

    #[test]
    fn cone_basics() {
        let flat = SpaceFormSpec::new(0.0, 0).unwrap();
        let q3 = UmbilicHypersurface::Sphere { center: vec![0.0; 4], radius: 1.0 };
        let g = [0.6, 0.0, 0.0, 0.8];
        assert_eq!(generalized_cone(&flat, &q3, &g, 0.0).unwrap(), g.to_vec());
        let p = generalized_cone(&flat, &q3, &g, 0.5).unwrap();
        for a in 0..4 {
            assert_abs_diff_eq!(p[a], 1.5 * g[a], epsilon = 1e-15);
        }
        // small sphere in S⁴: c̄ = 1/(1 − k²)
        let s4 = SpaceFormSpec::new(1.0, 0).unwrap();
        let sec = UmbilicHypersurface::Section { axis: vec![0.0, 0.0, 0.0, 0.0, 1.0], level: 0.6 };
        assert_abs_diff_eq!(sec.c_bar(&s4).unwrap(), 1.0 / 0.64, epsilon = 1e-12);
        let g = [0.8, 0.0, 0.0, 0.0, 0.6];
        let p = generalized_cone(&s4, &sec, &g, 0.3).unwrap();
        assert_abs_diff_eq!(s4.inner(&p, &p).unwrap(), 1.0, epsilon = 1e-14);
        assert!(generalized_cone(&s4, &sec, &[1.0, 0.0, 0.0, 0.0, 0.0], 0.3).is_err());
    }

    #[test]
    fn clifford_cone_data() {
        let g = ParameterGrid::new([-0.5, -0.5, 0.5], [0.5, 0.5, 1.5], [9, 9, 9]).unwrap();
        let t = clifford_cone_triple(0.6, 1.3, g.clone()).unwrap().with_stencil(crate::diff::Stencil::Order6);
        assert!(triple_residuals(&t).unwrap().max() < 1e-5);
        let cls = classify(&t, 1e-9).unwrap();
        assert_eq!(cls.kind, ClassKind::ProblemStar);
        assert_eq!(cls.eps_hat, Some(1.0));
        assert_abs_diff_eq!(cls.c_const.unwrap(), 1.69, epsilon = 1e-12);
        let p = clifford_cone(0.6, 1.3, [0.1, 0.2, 0.7]).unwrap();
        let r = (1.3f64 * 0.7).cosh() / 1.3;
        assert_abs_diff_eq!(p.iter().map(|x| x * x).sum::<f64>().sqrt(), r, epsilon = 1e-14);
    }

    #[test]
    fn registry_evaluates_every_item() {
        for item in GALLERY {
            let p = gallery_eval(item.name, DEFAULT_THETA, [0.1, 0.2, 0.7]).unwrap();
            assert_eq!(p.len(), item.dim, "{}", item.name);
        }
        assert_eq!(gallery_eval("cflat_K_minus1", DEFAULT_THETA, [0.0; 3]).unwrap(), vec![0.0; 4]);
        assert!(gallery_eval("nope", 0.0, [0.0; 3]).is_err());
    }
}
