//! Turning a configuration into core objects.

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use spaceform_core::ambient::SpaceFormSpec;
use spaceform_core::frame::{integrate_frame, FrameField, FrameOptions, FrameState};
use spaceform_core::gallery::{clifford_cone_triple, trivial_seed, PhiFamily, TrivialSeedKind};
use spaceform_core::grid::ParameterGrid;
use spaceform_core::immersion::ImmersionSample;
use spaceform_core::ribaucour::{
    integrate_ribaucour, seed_state, transform_immersion, transformed_triple, RibaucourField, RibaucourOptions,
    RibaucourRequest, RibaucourState,
};
use spaceform_core::triples::{TripleField, TripleSample};

use crate::config::{ExperimentConfig, PresetName};
use crate::error::{CliError, Result};

pub fn ambient_spec(cfg: &ExperimentConfig) -> Result<SpaceFormSpec> {
    let a = cfg.ambient.unwrap_or(crate::config::AmbientConfig { c: 0.0, s: 0 });
    SpaceFormSpec::new(a.c, a.s).map_err(|e| CliError::schema("/ambient", e.to_string()))
}

fn same_space(a: &SpaceFormSpec, b: &SpaceFormSpec) -> bool {
    a.c == b.c && a.s == b.s
}

/// The seed triple on the configured grid.
pub fn seed_triple(cfg: &ExperimentConfig) -> Result<TripleField> {
    let grid = cfg.grid.build()?;
    let theta = cfg.seed.theta.unwrap_or(FRAC_PI_4);
    let t = if let Some(inline) = &cfg.seed.inline {
        let spec = ambient_spec(cfg)?;
        let s = TripleSample { v: inline.v, h: inline.h.unwrap_or([[0.0; 3]; 3]), big_v: inline.big_v };
        TripleField::closed(grid, inline.delta, spec, move |_| s)
            .map_err(|e| CliError::schema("/seed/inline/delta", e.to_string()))?
            .with_label("inline")
    } else {
        let name = cfg.seed.gallery.as_deref().expect("validated seed");
        let t = if let Some(kind) = TrivialSeedKind::from_name(name) {
            trivial_seed(kind, cfg.seed.c_const, ambient_spec(cfg)?, grid)
                .map_err(|e| CliError::schema("/seed", e.to_string()))?
        } else {
            let t = match name {
                "clifford_cone" => clifford_cone_triple(1.0 / SQRT_2, 1.0, grid)?,
                "r4_closed_form" => PhiFamily::r4(1.0, theta).transformed_triple(grid)?,
                "s4_closed_form" => PhiFamily::s4(1.0, theta).transformed_triple(grid)?,
                "cflat_closed_form" => PhiFamily::cflat(-1.0, 1.0, theta)?.transformed_triple(grid)?,
                other => {
                    return Err(CliError::schema(
                        "/seed/gallery",
                        format!("{other:?} is not a gallery item with holonomic data"),
                    ))
                }
            };
            if let Some(spec) = cfg.ambient.map(|_| ambient_spec(cfg)).transpose()? {
                if !same_space(&spec, &t.spec) {
                    return Err(CliError::schema(
                        "/ambient",
                        format!("{name} lives in c = {}, s = {}", t.spec.c, t.spec.s),
                    ));
                }
            }
            t
        };
        t.with_label(name)
    };
    Ok(t.with_stencil(cfg.grid.stencil.into()))
}

/// The configured φ-family, if the Ribaucour section uses one.
pub fn family(cfg: &ExperimentConfig) -> Result<Option<PhiFamily>> {
    let Some(r) = &cfg.ribaucour else { return Ok(None) };
    if let Some(f) = &r.family {
        let fam = match f.solve_slope {
            Some(slot) if slot > 2 => {
                return Err(CliError::schema("/ribaucour/family/solve_slope", "slot must be 0, 1 or 2"))
            }
            Some(slot) => PhiFamily::solving_slope(f.branch, f.k, f.c, f.eps, f.initial, slot),
            None => PhiFamily::new(f.branch, f.k, f.c, f.eps, f.initial),
        };
        return fam.map(Some).map_err(|e| CliError::schema("/ribaucour/family", e.to_string()));
    }
    if let Some(p) = &r.preset {
        let fam = match p.name {
            PresetName::R4 => Ok(PhiFamily::r4_with_phases(p.rho, p.theta, p.phases)),
            PresetName::S4 => Ok(PhiFamily::s4_with_phases(p.rho, p.theta, p.phases)),
            PresetName::Cflat => PhiFamily::cflat_with_phases(p.k, p.rho, p.theta, p.phases),
        };
        return fam.map(Some).map_err(|e| CliError::schema("/ribaucour/preset", e.to_string()));
    }
    Ok(None)
}

/// Checks that a family transforms the configured seed.
fn check_family_seed(fam: &PhiFamily, seed: &TripleField) -> Result<()> {
    let (v, big_v) = fam.seed_data();
    let spec = fam.spec()?;
    let base = seed.grid.base;
    let s = seed.sample(base).ok_or(spaceform_core::Error::DegenerateTriple { index: base })?;
    let close = |a: [f64; 3], b: [f64; 3]| (0..3).all(|i| (a[i] - b[i]).abs() <= 1e-12 * (1.0 + b[i].abs()));
    let h_zero = s.h.iter().flatten().all(|x| x.abs() <= 1e-12);
    if !(same_space(&spec, &seed.spec) && seed.delta == fam.delta() && close(s.v, v) && close(s.big_v, big_v) && h_zero)
    {
        return Err(CliError::schema(
            "/ribaucour",
            format!(
                "family transforms the seed v = {v:?}, V = {big_v:?} in c = {}, s = {}; configured seed differs",
                spec.c, spec.s
            ),
        ));
    }
    Ok(())
}

pub struct Transform {
    pub frame: FrameField,
    pub rib: RibaucourField,
    pub image: ImmersionSample,
    pub family: Option<PhiFamily>,
}

pub fn frame_options(cfg: &ExperimentConfig) -> FrameOptions {
    FrameOptions { integrability_tol: Some(cfg.tolerances.integrability), ..FrameOptions::default() }
}

/// Frame of the seed: the family's closed-form frame at the base node when
/// a family is configured, the standard frame otherwise.
pub fn seed_frame(cfg: &ExperimentConfig, seed: &TripleField, fam: Option<&PhiFamily>) -> Result<FrameField> {
    let grid = &seed.grid;
    let init = match fam {
        Some(f) => f.seed_frame(grid.point(grid.base))?,
        None => FrameState::standard(&seed.spec),
    };
    Ok(integrate_frame(seed, &init, grid, frame_options(cfg))?)
}

fn initial_state(cfg: &ExperimentConfig, seed: &TripleField, fam: Option<&PhiFamily>) -> Result<RibaucourState> {
    let grid: &ParameterGrid = &seed.grid;
    if let Some(f) = fam {
        return Ok(f.state(grid.point(grid.base))?);
    }
    let st = cfg.ribaucour.as_ref().and_then(|r| r.state).expect("validated ribaucour section");
    let req = RibaucourRequest { gamma: st.gamma, beta: st.beta, phi: st.phi, vprime: st.vprime };
    Ok(seed_state(seed, grid.base, &req, st.k2)?)
}

/// Runs the Ribaucour pipeline when the config has a Ribaucour section.
pub fn transform(cfg: &ExperimentConfig, seed: &TripleField) -> Result<Option<Transform>> {
    if cfg.ribaucour.is_none() {
        return Ok(None);
    }
    let fam = family(cfg)?;
    if let Some(f) = &fam {
        check_family_seed(f, seed)?;
    }
    let frame = seed_frame(cfg, seed, fam.as_ref())?;
    let init = initial_state(cfg, seed, fam.as_ref())?;
    let opts = RibaucourOptions {
        mask_tol: cfg.tolerances.mask,
        integrability_tol: Some(cfg.tolerances.integrability),
        ..RibaucourOptions::default()
    };
    let rib = integrate_ribaucour(seed, &init, &seed.grid, opts)?;
    let image = transform_immersion(&frame, &rib)?;
    Ok(Some(Transform { frame, rib, image, family: fam }))
}

/// The triple a check should run on: the closed-form transformed triple of
/// a family, the sampled transformed triple of a raw state, or the seed.
pub fn analysis_triple(cfg: &ExperimentConfig, seed: &TripleField) -> Result<TripleField> {
    let stencil = cfg.grid.stencil.into();
    if let Some(f) = family(cfg)? {
        check_family_seed(&f, seed)?;
        return Ok(f.transformed_triple(seed.grid.clone())?.with_stencil(stencil).with_label("transformed"));
    }
    match transform(cfg, seed)? {
        Some(tr) => Ok(transformed_triple(seed, &tr.rib)?.with_stencil(stencil).with_label("transformed")),
        None => Ok(seed.clone()),
    }
}

/// The field written by the exports: the transformed immersion when a
/// Ribaucour section is present, otherwise the seed immersion.
pub fn final_field(cfg: &ExperimentConfig) -> Result<ImmersionSample> {
    let seed = seed_triple(cfg)?;
    match transform(cfg, &seed)? {
        Some(tr) => Ok(tr.image),
        None => Ok(seed_frame(cfg, &seed, None)?.positions()),
    }
}
