//! One function per subcommand. Each returns the report and, where the
//! command produces one, the field to export.

use serde::Serialize;
use spaceform_core::frame::{
    frame_gram_residual, integrate_frame, path_independence_residual, FrameOptions, FrameState,
};
use spaceform_core::immersion::ImmersionSample;
use spaceform_core::report::{Accumulator, ResidualEntry, ResidualReport};
use spaceform_core::ribaucour::{invariant_report, transformed_triple};
use spaceform_core::triples::{classify, companion_v, triple_residuals, ClassKind, Classification};
use spaceform_core::verify::{
    fundamental_forms, hj_relation_residual, isometry_check, pair_gauss_relation, schouten_codazzi_residual,
    VerifyOptions,
};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::pipeline::{analysis_triple, frame_options, seed_triple, transform};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub passed: bool,
    pub threshold: f64,
    pub residuals: ResidualReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    pub notes: Vec<String>,
}

impl RunReport {
    fn new(command: &str, threshold: f64, residuals: ResidualReport) -> Self {
        let passed = residuals.entries.iter().all(|e| e.max <= threshold && !e.max.is_nan());
        Self { command: command.into(), passed, threshold, residuals, classification: None, notes: vec![] }
    }
}

pub struct Outcome {
    pub report: RunReport,
    pub field: Option<ImmersionSample>,
}

fn verify_options(cfg: &ExperimentConfig) -> VerifyOptions {
    VerifyOptions { stencil: cfg.grid.stencil.into(), ..VerifyOptions::default() }
}

fn renamed(mut r: ResidualReport, prefix: &str) -> Vec<ResidualEntry> {
    for e in &mut r.entries {
        e.name = format!("{prefix}{}", e.name);
    }
    r.entries
}

pub fn verify_triple(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = seed_triple(cfg)?;
    let residuals = triple_residuals(&seed)?;
    let mut report = RunReport::new("verify-triple", cfg.tolerances.integrability, residuals);
    match classify(&seed, cfg.tolerances.classify) {
        Ok(c) => report.classification = Some(c),
        Err(e) => report.notes.push(format!("not classified: {e}")),
    }
    Ok(Outcome { report, field: None })
}

pub fn integrate_frame_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = seed_triple(cfg)?;
    let init = FrameState::standard(&seed.spec);
    let opts = frame_options(cfg);
    let frame = integrate_frame(&seed, &init, &seed.grid, opts)?;
    let mut residuals = frame_gram_residual(&frame);
    let path = path_independence_residual(&seed, &init, &seed.grid, opts)?;
    residuals.entries.extend(renamed(path, "path_"));
    let report = RunReport::new("integrate-frame", cfg.tolerances.report, residuals);
    Ok(Outcome { report, field: Some(frame.positions()) })
}

pub fn ribaucour_cmd(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = seed_triple(cfg)?;
    let tr = transform(cfg, &seed)?
        .ok_or_else(|| CliError::schema("/ribaucour", "the ribaucour command needs a `ribaucour` section"))?;
    let mut residuals = invariant_report(&tr.rib);
    if let Some(fam) = &tr.family {
        let g = &tr.image.grid;
        let mut acc = Accumulator::new("closed_form");
        for idx in g.indices() {
            let Some(x) = &tr.image.positions[g.linear(idx)] else { continue };
            if let Ok(y) = fam.transformed_point(g.point(idx)) {
                acc.add(x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max), idx);
            }
        }
        residuals.push(acc.finish());
    }
    let mut report = RunReport::new("ribaucour", cfg.tolerances.report, residuals);
    report.notes.push(format!("{} of {} nodes masked", tr.rib.masked_count(), tr.rib.grid.len()));
    let image_triple = match &tr.family {
        Some(f) => f.transformed_triple(seed.grid.clone())?,
        None => transformed_triple(&seed, &tr.rib)?,
    };
    match (classify(&seed, cfg.tolerances.classify), classify(&image_triple, cfg.tolerances.classify)) {
        (Ok(src), Ok(dst)) => {
            if let Some(st) = cfg.ribaucour.as_ref().and_then(|r| r.state) {
                let expected = match src.kind {
                    ClassKind::ProblemStar => src.eps_hat,
                    ClassKind::ConformallyFlat => Some(0.0),
                    ClassKind::Neither => None,
                };
                if let Some(k) = expected.filter(|k| (k - st.k2).abs() > cfg.tolerances.classify) {
                    report.notes.push(format!("Ω is only preserved for K₂ = {k}; config has {}", st.k2));
                }
            }
            if !dst.same_class(&src, cfg.tolerances.classify) {
                report.passed = false;
                report.notes.push(format!("transformed data is {:?}, seed is {:?}", dst.kind, src.kind));
            }
            report.classification = Some(dst);
        }
        (_, Err(e)) | (Err(e), _) => report.notes.push(format!("not classified: {e}")),
    }
    Ok(Outcome { report, field: Some(tr.image) })
}

pub fn pair_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = seed_triple(cfg)?;
    let t = analysis_triple(cfg, &seed)?;
    let cls = classify(&t, cfg.tolerances.classify)?;
    let comp = companion_v(&t, cfg.tolerances.classify)?;
    let branch = cls.companion_branch().expect("problem-star data has a companion");
    if let Some(target) = cfg.target {
        if (target.c - comp.spec.c).abs() > cfg.tolerances.classify * target.c.abs().max(1.0) || target.s != comp.spec.s
        {
            return Err(CliError::schema(
                "/target",
                format!("the companion lives in c = {}, s = {}", comp.spec.c, comp.spec.s),
            ));
        }
    }
    // the exact data is integrated as is; an FD precheck would be limited by the grid
    let opts = FrameOptions { integrability_tol: None, ..frame_options(cfg) };
    let a = integrate_frame(&t, &FrameState::standard(&t.spec), &t.grid, opts)?.positions();
    let b = integrate_frame(&comp, &FrameState::standard(&comp.spec), &comp.grid, opts)?.positions();
    let vo = verify_options(cfg);
    let mut residuals = isometry_check(&a, &b, &vo)?;
    let fa = fundamental_forms(&a, vo.stencil)?;
    let fb = fundamental_forms(&b, vo.stencil)?;
    let pair = pair_gauss_relation(
        &t.grid,
        &fa.coordinate_curvatures(),
        &fb.coordinate_curvatures(),
        t.spec.c,
        branch.c_tilde,
        t.spec.eps(),
        branch.eps_tilde,
    )?;
    residuals.entries.extend(pair.report.entries);
    let mut report = RunReport::new("pair-check", cfg.tolerances.report, residuals);
    report.notes.push(format!("companion in c = {}, s = {}", comp.spec.c, comp.spec.s));
    report.classification = Some(cls);
    Ok(Outcome { report, field: Some(a) })
}

pub fn cflat_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seed = seed_triple(cfg)?;
    let t = analysis_triple(cfg, &seed)?;
    let mut residuals = schouten_codazzi_residual(&t, &verify_options(cfg))?;
    let mut hj = Accumulator::new("hj_relation");
    hj.add(hj_relation_residual(&t), t.grid.base);
    residuals.push(hj.finish());
    let mut report = RunReport::new("cflat-check", cfg.tolerances.report, residuals);
    match classify(&t, cfg.tolerances.classify) {
        Ok(c) => {
            if c.kind != ClassKind::ConformallyFlat {
                report.passed = false;
                report.notes.push(format!("data classifies as {:?}", c.kind));
            }
            report.classification = Some(c);
        }
        Err(e) => {
            report.passed = false;
            report.notes.push(format!("not classified: {e}"));
        }
    }
    Ok(Outcome { report, field: None })
}
