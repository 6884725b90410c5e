//! Geometric checks computed from position samples: fundamental forms,
//! principal curvatures, compatibility residuals, paired Gauss relations,
//! conformal-flatness residuals and metric comparison.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambient::SpaceFormSpec;
use crate::diff::{Differ, Stencil};
use crate::error::{Error, Result};
use crate::grid::{Index, ParameterGrid};
use crate::immersion::{ImmersionSample, Sym3};
use crate::report::{Accumulator, ReportMetadata, ResidualEntry, ResidualReport};
use crate::triples::{family, others, triple_residuals, TripleField, TripleSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub stencil: Stencil,
    /// Largest relative off-diagonal part of I and II accepted as principal
    /// coordinates.
    pub offdiag_tol: f64,
    /// Nodes with min|λᵢ − λⱼ| below this fraction of max|λ| are skipped
    /// where distinct curvatures are required.
    pub distinct_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { stencil: Stencil::Order6, offdiag_tol: 1e-3, distinct_tol: 1e-4 }
    }
}

impl VerifyOptions {
    fn metadata(&self, grid: &ParameterGrid) -> ReportMetadata {
        ReportMetadata {
            scheme: Some("finite differences".into()),
            step: Some((0..3).map(|a| grid.step(a)).fold(0.0, f64::max)),
            stencil: Some(format!("order {}", self.stencil.order())),
        }
    }
}

/// I, II and the unit normal per node; `None` where a stencil touches a
/// masked node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FundamentalForms {
    pub grid: ParameterGrid,
    pub spec: SpaceFormSpec,
    pub first: Vec<Option<Sym3>>,
    pub second: Vec<Option<Sym3>>,
    pub normal: Vec<Option<Vec<f64>>>,
    /// ⟨N, N⟩.
    pub eps: f64,
    pub stencil: Stencil,
}

/// Vector orthogonal (in `signature`) to every row.
fn signed_cross(rows: &[Vec<f64>], signature: &[f64]) -> Vec<f64> {
    let d = signature.len();
    let m = rows.len();
    (0..d)
        .map(|a| {
            let minor = DMatrix::from_fn(m, m, |r, col| rows[r][if col < a { col } else { col + 1 }]);
            let sign = if (a + m).is_multiple_of(2) { 1.0 } else { -1.0 };
            sign * minor.determinant() * signature[a]
        })
        .collect()
}

fn det3(g: &Sym3) -> f64 {
    Matrix3::from_fn(|i, j| g[i][j]).determinant()
}

/// Fundamental forms by finite differences. The normal is fixed at the
/// grid base node and continued so that ε⟨N(p), N(q)⟩ > 0 between
/// neighbouring nodes.
pub fn fundamental_forms(s: &ImmersionSample, stencil: Stencil) -> Result<FundamentalForms> {
    let grid = &s.grid;
    Differ::require(grid, 5)?;
    let d = Differ::new(grid, stencil);
    let dim = s.dim();
    let sig = s.spec.ambient.signature().to_vec();
    let comps: Vec<Vec<f64>> = (0..dim).map(|a| s.component(a)).collect();
    let first = s.first_fundamental_form(stencil);
    let tangents = s.tangents(&d);
    // second derivatives, pairs (a,b) with a ≤ b
    let pairs: Vec<(usize, usize)> = (0..3).flat_map(|a| (a..3).map(move |b| (a, b))).collect();
    let second_d: Vec<Vec<Vec<f64>>> =
        pairs.par_iter().map(|&(a, b)| comps.iter().map(|c| d.d2_field(c, a, b)).collect()).collect();

    let raw: Vec<Option<(Vec<f64>, f64)>> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let g = first[k]?;
            let p = s.positions[k].as_ref()?;
            let mut rows: Vec<Vec<f64>> = (0..3).map(|i| tangents[i][k].clone()).collect();
            if s.spec.c != 0.0 {
                rows.push(p.clone());
            }
            let n = signed_cross(&rows, &sig);
            let nn = s.spec.ambient.inner_unchecked(&n, &n);
            if !(nn.is_finite() && nn != 0.0) || det3(&g).abs() <= 1e-14 * (g[0][0] * g[1][1] * g[2][2]).abs() {
                return Some((vec![f64::NAN; dim], 0.0));
            }
            let scale = nn.abs().sqrt();
            Some((n.iter().map(|x| x / scale).collect(), nn.signum()))
        })
        .collect();
    for (k, r) in raw.iter().enumerate() {
        if let Some((n, _)) = r {
            if n[0].is_nan() {
                return Err(Error::DegenerateMetric { index: grid.unravel(k) });
            }
        }
    }
    let eps = raw.iter().flatten().map(|x| x.1).next().unwrap_or(s.spec.eps());
    let mut normal: Vec<Option<Vec<f64>>> = raw.into_iter().map(|r| r.map(|x| x.0)).collect();
    orient(grid, &s.spec, eps, &mut normal);

    let second = (0..grid.len())
        .map(|k| {
            let n = normal[k].as_ref()?;
            let mut ii = [[0.0; 3]; 3];
            for (p, &(a, b)) in pairs.iter().enumerate() {
                let dd: Vec<f64> = (0..dim).map(|c| second_d[p][c][k]).collect();
                ii[a][b] = s.spec.ambient.inner_unchecked(&dd, n);
                ii[b][a] = ii[a][b];
            }
            ii.iter().flatten().all(|x| x.is_finite()).then_some(ii)
        })
        .collect();
    Ok(FundamentalForms { grid: grid.clone(), spec: s.spec.clone(), first, second, normal, eps, stencil })
}

/// Visit nodes by distance from the base and flip each normal to agree with
/// an already visited neighbour.
fn orient(grid: &ParameterGrid, spec: &SpaceFormSpec, eps: f64, normal: &mut [Option<Vec<f64>>]) {
    let base = grid.base;
    let dist = |i: Index| (0..3).map(|a| i[a].abs_diff(base[a])).sum::<usize>();
    let mut order: Vec<Index> = grid.indices().collect();
    order.sort_by_key(|&i| (dist(i), i));
    let mut anchor: Option<Vec<f64>> = None;
    for idx in order {
        let k = grid.linear(idx);
        let Some(n) = normal[k].clone() else { continue };
        let mut reference = None;
        for a in 0..3 {
            if idx[a] == base[a] {
                continue;
            }
            let mut j = idx;
            j[a] = if idx[a] > base[a] { idx[a] - 1 } else { idx[a] + 1 };
            if let Some(m) = &normal[grid.linear(j)] {
                reference = Some(m.clone());
                break;
            }
        }
        let reference = reference.or_else(|| anchor.clone());
        if let Some(m) = reference {
            if eps * spec.ambient.inner_unchecked(&n, &m) < 0.0 {
                normal[k] = Some(n.iter().map(|x| -x).collect());
            }
        }
        if anchor.is_none() {
            anchor = normal[k].clone();
        }
    }
}

impl FundamentalForms {
    /// II_ii / I_ii.
    pub fn coordinate_curvatures(&self) -> Vec<Option<[f64; 3]>> {
        self.first.iter().zip(&self.second).map(|(g, b)| Some(coordinate_curvature(&(*g)?, &(*b)?))).collect()
    }

    /// Eigenvalues of I⁻¹II in increasing order.
    pub fn principal_curvatures(&self) -> Vec<Option<[f64; 3]>> {
        self.first.iter().zip(&self.second).map(|(g, b)| shape_eigenvalues(&(*g)?, &(*b)?)).collect()
    }

    /// Largest relative off-diagonal part of I and II at node k.
    fn offdiag(&self, k: usize) -> Option<f64> {
        let g = self.first[k]?;
        let b = self.second[k]?;
        let lam = coordinate_curvature(&g, &b);
        let lmax = lam.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in i + 1..3 {
                let s = (g[i][i] * g[j][j]).abs().sqrt();
                worst = worst.max(g[i][j].abs() / s).max(b[i][j].abs() / (s * (1.0 + lmax)));
            }
        }
        Some(worst)
    }

    /// (v, h, V) read off from I and II: vᵢ = √I_ii, Vᵢ = II_ii/vᵢ and
    /// h_ij = (∂vⱼ/∂uᵢ)/vᵢ by finite differences.
    pub fn extract_triple(&self, delta: [f64; 3], opts: &VerifyOptions) -> Result<TripleField> {
        let grid = &self.grid;
        for k in 0..grid.len() {
            if let Some(o) = self.offdiag(k) {
                if o > opts.offdiag_tol {
                    return Err(Error::NonHolonomicSample { index: grid.unravel(k), offdiag: o });
                }
            }
        }
        let d = Differ::new(grid, opts.stencil);
        let v: [Vec<f64>; 3] =
            [0, 1, 2].map(|i| self.first.iter().map(|g| g.map_or(f64::NAN, |g| g[i][i].sqrt())).collect());
        let dv: Vec<Vec<Vec<f64>>> = (0..3).map(|j| (0..3).map(|i| d.d1_field(&v[j], i)).collect()).collect();
        let samples = (0..grid.len())
            .map(|k| {
                let b = self.second[k]?;
                let vk = [v[0][k], v[1][k], v[2][k]];
                if vk.iter().any(|x| !x.is_finite()) {
                    return None;
                }
                let mut h = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        if i != j {
                            h[i][j] = dv[j][i][k] / vk[i];
                        }
                    }
                }
                let s = TripleSample { v: vk, h, big_v: [0, 1, 2].map(|i| b[i][i] / vk[i]) };
                s.is_finite().then_some(s)
            })
            .collect();
        Ok(TripleField::sampled(grid.clone(), delta, self.spec.clone(), samples)?
            .with_stencil(opts.stencil)
            .with_label("extracted"))
    }
}

fn shape_eigenvalues(g: &Sym3, b: &Sym3) -> Option<[f64; 3]> {
    let g = Matrix3::from_fn(|i, j| g[i][j]);
    let b = Matrix3::from_fn(|i, j| b[i][j]);
    let li = g.cholesky()?.l().try_inverse()?;
    let s = li * b * li.transpose();
    let e = SymmetricEigen::new((s + s.transpose()) * 0.5);
    let mut ev = [e.eigenvalues[0], e.eigenvalues[1], e.eigenvalues[2]];
    ev.sort_by(f64::total_cmp);
    Some(ev)
}

fn coordinate_curvature(g: &Sym3, b: &Sym3) -> [f64; 3] {
    [0, 1, 2].map(|i| b[i][i] / g[i][i])
}

/// Compatibility residuals of the data read off from the sample: transport
/// of h, the Gauss equations and the Codazzi equations.
pub fn gauss_codazzi_residual(s: &ImmersionSample, opts: &VerifyOptions) -> Result<ResidualReport> {
    let ff = fundamental_forms(s, opts.stencil)?;
    let t = ff.extract_triple([1.0; 3], opts)?;
    let full = triple_residuals(&t)?;
    let keep = [family::H_TRANSPORT, family::GAUSS, family::CODAZZI];
    Ok(ResidualReport {
        entries: full.entries.into_iter().filter(|e| keep.contains(&e.name.as_str())).collect(),
        metadata: opts.metadata(&s.grid),
    })
}

/// The relations c + ελᵢλⱼ = c̃ + ε̃μᵢμⱼ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub lambda: Vec<Option<[f64; 3]>>,
    pub mu: Vec<Option<[f64; 3]>>,
    /// max residual of pair (i, j); symmetric with zero diagonal.
    pub matrix: [[f64; 3]; 3],
    pub report: ResidualReport,
}

pub fn pair_gauss_relation(
    grid: &ParameterGrid,
    lambda: &[Option<[f64; 3]>],
    mu: &[Option<[f64; 3]>],
    c: f64,
    c_tilde: f64,
    eps: f64,
    eps_tilde: f64,
) -> Result<PairReport> {
    if lambda.len() != grid.len() || mu.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let mut acc: Vec<Accumulator> =
        [(0, 1), (0, 2), (1, 2)].iter().map(|(i, j)| Accumulator::new(format!("pair_{}{}", i + 1, j + 1))).collect();
    for (k, (l, m)) in lambda.iter().zip(mu).enumerate() {
        let (Some(l), Some(m)) = (l, m) else { continue };
        let idx = grid.unravel(k);
        for (p, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
            acc[p].add(c + eps * l[i] * l[j] - c_tilde - eps_tilde * m[i] * m[j], idx);
        }
    }
    let entries: Vec<ResidualEntry> = acc.into_iter().map(Accumulator::finish).collect();
    let mut matrix = [[0.0; 3]; 3];
    for (p, (i, j)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        matrix[i][j] = entries[p].max;
        matrix[j][i] = entries[p].max;
    }
    Ok(PairReport {
        lambda: lambda.to_vec(),
        mu: mu.to_vec(),
        matrix,
        report: ResidualReport { entries, metadata: ReportMetadata::default() },
    })
}

/// μⱼ = Ṽⱼ/vⱼ of the companion, from data on the same grid.
pub fn companion_curvatures(t: &TripleField) -> Vec<Option<[f64; 3]>> {
    t.samples()
        .iter()
        .map(|s| {
            let s = s.as_ref()?;
            let w = crate::triples::companion_sample(t.delta, s);
            let mu = [0, 1, 2].map(|i| w[i] / s.v[i]);
            mu.iter().all(|x| x.is_finite()).then_some(mu)
        })
        .collect()
}

/// Relations of a cone pair whose `ruling` curvature vanishes:
/// c − c̃ + ελᵢλⱼ = ε̃μᵢμⱼ with μᵢ = μⱼ, and c − c̃ = ε̃μᵢμ_ruling.
#[allow(clippy::too_many_arguments)]
pub fn cone_relation_residual(
    grid: &ParameterGrid,
    lambda: &[Option<[f64; 3]>],
    mu: &[Option<[f64; 3]>],
    c: f64,
    c_tilde: f64,
    eps: f64,
    eps_tilde: f64,
    ruling: usize,
) -> Result<ResidualReport> {
    if lambda.len() != grid.len() || mu.len() != grid.len() || ruling > 2 {
        return Err(Error::GridMismatch);
    }
    let (i, j) = others(ruling);
    let mut zero = Accumulator::new("ruling_curvature");
    let mut pair = Accumulator::new("pair_product");
    let mut rule = Accumulator::new("ruling_product");
    let mut equal = Accumulator::new("mu_equal");
    for (k, (l, m)) in lambda.iter().zip(mu).enumerate() {
        let (Some(l), Some(m)) = (l, m) else { continue };
        let idx = grid.unravel(k);
        zero.add(l[ruling], idx);
        pair.add(c - c_tilde + eps * l[i] * l[j] - eps_tilde * m[i] * m[j], idx);
        rule.add(c - c_tilde - eps_tilde * m[i] * m[ruling], idx);
        rule.add(c - c_tilde - eps_tilde * m[j] * m[ruling], idx);
        equal.add(m[i] - m[j], idx);
    }
    Ok(ResidualReport {
        entries: vec![zero.finish(), pair.finish(), rule.finish(), equal.finish()],
        metadata: ReportMetadata::default(),
    })
}

/// c − c̃ + ελλ_profile for both orbit curvatures λ, and their difference.
pub fn rotation_relation_residual(
    grid: &ParameterGrid,
    lambda: &[Option<[f64; 3]>],
    c: f64,
    c_tilde: f64,
    eps: f64,
    profile: usize,
) -> Result<ResidualReport> {
    if lambda.len() != grid.len() || profile > 2 {
        return Err(Error::GridMismatch);
    }
    let (i, j) = others(profile);
    let mut rel = Accumulator::new("profile_relation");
    let mut equal = Accumulator::new("orbit_equal");
    for (k, l) in lambda.iter().enumerate() {
        let Some(l) = l else { continue };
        let idx = grid.unravel(k);
        rel.add(c - c_tilde + eps * l[i] * l[profile], idx);
        rel.add(c - c_tilde + eps * l[j] * l[profile], idx);
        equal.add(l[i] - l[j], idx);
    }
    Ok(ResidualReport { entries: vec![rel.finish(), equal.finish()], metadata: ReportMetadata::default() })
}

fn distinct(l: &[f64; 3], tol: f64) -> bool {
    let m = l.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let gap = (l[0] - l[1]).abs().min((l[0] - l[2]).abs()).min((l[1] - l[2]).abs());
    gap >= tol * m && m > 0.0
}

/// ∂φⱼ/∂uᵢ − h_ij φᵢ with φⱼ = vⱼ(λᵢλⱼ + λ_kλⱼ − λᵢλ_k), λ = V/v. Nodes
/// without three distinct curvatures are skipped.
pub fn schouten_codazzi_residual(t: &TripleField, opts: &VerifyOptions) -> Result<ResidualReport> {
    Differ::require(&t.grid, 5)?;
    let grid = &t.grid;
    let samples = t.samples();
    let mut phi: [Vec<f64>; 3] = [0, 1, 2].map(|_| vec![f64::NAN; grid.len()]);
    let mut keep = vec![false; grid.len()];
    let mut first_umbilic = None;
    for (k, s) in samples.iter().enumerate() {
        let Some(s) = s else { continue };
        if s.v.contains(&0.0) {
            return Err(Error::DegenerateTriple { index: grid.unravel(k) });
        }
        let l = [0, 1, 2].map(|i| s.big_v[i] / s.v[i]);
        for j in 0..3 {
            let (i, kk) = others(j);
            phi[j][k] = s.v[j] * (l[i] * l[j] + l[kk] * l[j] - l[i] * l[kk]);
        }
        // constant λ's are accepted even when two coincide only if all differ
        if distinct(&l, opts.distinct_tol) {
            keep[k] = true;
        } else if first_umbilic.is_none() {
            first_umbilic = Some(grid.unravel(k));
        }
    }
    if !keep.iter().any(|&x| x) {
        return Err(Error::UmbilicSet { index: first_umbilic.unwrap_or(grid.base) });
    }
    let d = Differ::new(grid, t.stencil);
    let dphi: Vec<Vec<Vec<f64>>> = (0..3).map(|j| (0..3).map(|i| d.d1_field(&phi[j], i)).collect()).collect();
    let mut acc = Accumulator::new("schouten_codazzi");
    for (k, s) in samples.iter().enumerate() {
        let Some(s) = s else { continue };
        if !keep[k] {
            continue;
        }
        let idx = grid.unravel(k);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    acc.add(dphi[j][i][k] - s.h[i][j] * phi[i][k], idx);
                }
            }
        }
    }
    Ok(ResidualReport {
        entries: vec![acc.finish()],
        metadata: ReportMetadata { stencil: Some(format!("order {}", t.stencil.order())), ..opts.metadata(grid) },
    })
}

/// max |v₂² − v₁² − v₃²| over the valid nodes.
pub fn hj_relation_residual(t: &TripleField) -> f64 {
    t.samples()
        .iter()
        .flatten()
        .map(|s| (s.v[1] * s.v[1] - s.v[0] * s.v[0] - s.v[2] * s.v[2]).abs())
        .fold(0.0, f64::max)
}

/// |I_a − I_b| entrywise over nodes valid in both.
pub fn isometry_check(a: &ImmersionSample, b: &ImmersionSample, opts: &VerifyOptions) -> Result<ResidualReport> {
    if !a.grid.same_nodes(&b.grid) {
        return Err(Error::GridMismatch);
    }
    Differ::require(&a.grid, 5)?;
    let ga = a.first_fundamental_form(opts.stencil);
    let gb = b.first_fundamental_form(opts.stencil);
    let mut acc = Accumulator::new("metric");
    for (k, (x, y)) in ga.iter().zip(&gb).enumerate() {
        let (Some(x), Some(y)) = (x, y) else { continue };
        let idx = a.grid.unravel(k);
        for i in 0..3 {
            for j in i..3 {
                acc.add(x[i][j] - y[i][j], idx);
            }
        }
    }
    Ok(ResidualReport { entries: vec![acc.finish()], metadata: opts.metadata(&a.grid) })
}
