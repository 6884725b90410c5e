//! `spaceform-lab`: config-driven experiments on holonomic hypersurfaces.
//!
//! Exit codes: 0 when every residual is under its threshold, 2 when some
//! threshold is exceeded (reports and exports are still written), 1 on
//! usage or configuration errors.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod pipeline;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use spaceform_core::gallery::{gallery_eval, DEFAULT_THETA, GALLERY};

use crate::commands::Outcome;
use crate::config::{load_config, ExperimentConfig, ObjOutput};
use crate::error::{CliError, Result};
use crate::export::{export_csv, export_obj, ObjSlice};

pub const THREADS_ENV: &str = "SPACEFORM_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "spaceform-lab", version, about = "Holonomic hypersurfaces in 4-dimensional space forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrability residuals and classification of the seed data
    VerifyTriple(RunArgs),
    /// Integrate the moving frame of the seed
    IntegrateFrame(RunArgs),
    /// Ribaucour transform of the seed
    Ribaucour(RunArgs),
    /// Isometry and Gauss relations between a hypersurface and its companion
    PairCheck(RunArgs),
    /// Conformal flatness checks
    CflatCheck(RunArgs),
    /// Named example hypersurfaces
    Gallery {
        #[command(subcommand)]
        action: GalleryCmd,
    },
    /// Write the CSV/OBJ outputs of a config without checking thresholds
    Export(ExportArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `outputs.report`
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `outputs.csv`
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Overrides `outputs.obj.path`
    #[arg(long)]
    obj: Option<PathBuf>,
    #[arg(long, requires = "obj")]
    slice_axis: Option<usize>,
    #[arg(long, requires = "obj", allow_negative_numbers = true)]
    slice_value: Option<f64>,
    #[arg(long, requires = "obj", value_delimiter = ',')]
    projection: Option<Vec<usize>>,
}

#[derive(Debug, Subcommand)]
enum GalleryCmd {
    List,
    Eval {
        #[arg(long)]
        name: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        at: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_THETA, allow_negative_numbers = true)]
        theta: f64,
    },
}

/// Run with the process's stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

pub fn run_with<I, T>(argv: I, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command, out, err)) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))
}

fn dispatch(cmd: Command, out: &mut (dyn Write + Send), err: &mut (dyn Write + Send)) -> Result<i32> {
    let (args, f): (RunArgs, fn(&ExperimentConfig) -> Result<Outcome>) = match cmd {
        Command::VerifyTriple(a) => (a, commands::verify_triple),
        Command::IntegrateFrame(a) => (a, commands::integrate_frame_cmd),
        Command::Ribaucour(a) => (a, commands::ribaucour_cmd),
        Command::PairCheck(a) => (a, commands::pair_check),
        Command::CflatCheck(a) => (a, commands::cflat_check),
        Command::Gallery { action } => return gallery(action, out),
        Command::Export(a) => return export(a, err),
    };
    let mut cfg = load_config(&args.config)?;
    if args.report.is_some() {
        cfg.outputs.report = args.report;
    }
    let outcome = f(&cfg)?;
    if let Some(field) = &outcome.field {
        write_exports(&cfg, field, err)?;
    }
    let r = &outcome.report;
    if let Some(path) = &cfg.outputs.report {
        let mut text = serde_json::to_string_pretty(r).expect("reports serialize");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))?;
    }
    for e in &r.residuals.entries {
        let _ = writeln!(out, "{:<20} max {:.3e}  mean {:.3e}", e.name, e.max, e.mean);
    }
    for n in &r.notes {
        let _ = writeln!(out, "note: {n}");
    }
    let _ = writeln!(out, "{}: {} (threshold {:e})", r.command, if r.passed { "PASS" } else { "FAIL" }, r.threshold);
    Ok(if r.passed { 0 } else { 2 })
}

fn write_exports(
    cfg: &ExperimentConfig,
    field: &spaceform_core::immersion::ImmersionSample,
    err: &mut (dyn Write + Send),
) -> Result<()> {
    if let Some(path) = &cfg.outputs.csv {
        if export_csv(field, path)? == 0 {
            let _ = writeln!(err, "warning: every node is masked; {} has only a header", path.display());
        }
    }
    if let Some(o) = &cfg.outputs.obj {
        let slice = ObjSlice { axis: o.axis, value: o.value, projection: o.projection.clone() };
        export_obj(field, &slice, &o.path)?;
    }
    Ok(())
}

fn export(a: ExportArgs, err: &mut (dyn Write + Send)) -> Result<i32> {
    let mut cfg = load_config(&a.config)?;
    if a.csv.is_some() {
        cfg.outputs.csv = a.csv;
    }
    if let Some(path) = a.obj {
        let base = cfg.outputs.obj.take();
        let obj = ObjOutput {
            path,
            axis: a.slice_axis.or(base.as_ref().map(|o| o.axis)).unwrap_or(2),
            value: a.slice_value.or(base.as_ref().map(|o| o.value)).unwrap_or(0.0),
            projection: a.projection.or(base.map(|o| o.projection)).unwrap_or_else(|| vec![0, 1, 2]),
        };
        cfg.outputs.obj = Some(obj);
    }
    if cfg.outputs.csv.is_none() && cfg.outputs.obj.is_none() {
        return Err(CliError::Usage("export needs a CSV or OBJ output".into()));
    }
    let field = pipeline::final_field(&cfg)?;
    write_exports(&cfg, &field, err)?;
    Ok(0)
}

fn gallery(action: GalleryCmd, out: &mut (dyn Write + Send)) -> Result<i32> {
    match action {
        GalleryCmd::List => {
            for item in GALLERY {
                let _ = writeln!(out, "{:<22} R{}  {}", item.name, item.dim, item.description);
            }
        }
        GalleryCmd::Eval { name, at, theta } => {
            let u: [f64; 3] = at
                .try_into()
                .map_err(|v: Vec<f64>| CliError::Usage(format!("--at needs three coordinates, got {}", v.len())))?;
            let x = gallery_eval(&name, theta, u)?;
            // adding +0.0 prints −0 as 0
            let parts: Vec<String> = x.iter().map(|c| format!("{}", c + 0.0)).collect();
            let _ = writeln!(out, "({})", parts.join(","));
        }
    }
    Ok(0)
}
