mod config;
mod render;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gb_core::analysis::check_admissibility;
use gb_core::energy::{energy_report_for_field, theta_sweep};
use gb_core::{build_strain_field, json, AreaMode, StrainField};
use serde::Serialize;

use crate::config::Config;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Inadmissible(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Inadmissible(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) | CliError::Inadmissible(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<gb_core::Error> for CliError {
    fn from(e: gb_core::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "gb", version, about = "Grain-boundary dislocation construction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration; the built-in default is used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Main output file (JSON, or SVG for `render`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// CSV output for `sweep`.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// SVG output for `render`.
    #[arg(long, global = true)]
    svg: Option<PathBuf>,
    /// Previously built field to check instead of building one.
    #[arg(long, global = true)]
    field: Option<PathBuf>,
    /// Count whole core bands, including parts outside the domain.
    #[arg(long, global = true)]
    unclipped_cores: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build the strain field and write it as JSON.
    Build,
    /// Check admissibility of the field.
    Check,
    /// Evaluate elastic and core energy with the predicted constants.
    Energy,
    /// Energy over a grid of misorientation angles with a log-linear fit.
    Sweep,
    /// Draw the deformed lattice as SVG.
    Render,
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}"))),
    }
}

fn write_json<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut s = json::to_string(value).map_err(|e| CliError::Validation(format!("serialization failed: {e}")))?;
    s.push('\n');
    write_output(path, s.as_bytes())
}

fn load_field(path: &Path) -> Result<StrainField, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read field {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("invalid field file {}: {e}", path.display())))
}

fn field_for(cfg: &Config) -> Result<StrainField, CliError> {
    match &cfg.field {
        Some(path) => load_field(path),
        None => Ok(build_strain_field(&cfg.params()?)?),
    }
}

#[derive(Serialize)]
struct SweepOutput<'a> {
    rows: &'a [gb_core::SweepRow],
    fit: gb_core::LinearFit,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.unclipped_cores {
        cfg.core_area = AreaMode::Unclipped;
    }
    for (flag, slot) in [(cli.out, &mut cfg.out), (cli.csv, &mut cfg.csv), (cli.svg, &mut cfg.svg), (cli.field, &mut cfg.field)] {
        if flag.is_some() {
            *slot = flag;
        }
    }
    let out = cfg.out.as_deref();

    match cli.command {
        Command::Build => {
            let f = field_for(&cfg)?;
            eprintln!("built {} cells and {} cores", f.cells.len(), f.cores.len());
            write_json(out, &f)
        }
        Command::Check => {
            let f = field_for(&cfg)?;
            let report = check_admissibility(&f, &cfg.check_options());
            write_json(out, &report)?;
            eprintln!(
                "H1 {} (max off-core jump {:.3e}), H2 {}, H3 {}, continuity {}",
                verdict(report.h1_ok),
                report.max_offcore_jump,
                verdict(report.h2_ok),
                verdict(report.h3_ok),
                verdict(report.continuity_ok)
            );
            if report.admissible() {
                Ok(())
            } else {
                Err(CliError::Inadmissible(format!("field is not admissible: {} violation(s)", report.violations.len())))
            }
        }
        Command::Energy => {
            let f = field_for(&cfg)?;
            let report = energy_report_for_field(&f, &cfg.energy_options())?;
            eprintln!("total energy {:.6e}, ratio to bound {:.6}", report.total, report.ratio);
            write_json(out, &report)
        }
        Command::Sweep => {
            let thetas: Vec<f64> = cfg.sweep.sin_values()?.into_iter().map(f64::asin).collect();
            let result = theta_sweep(&cfg.params()?, &thetas, &cfg.energy_options())?;
            if let Some(path) = &cfg.csv {
                let mut w = csv::Writer::from_path(path)
                    .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
                for row in &result.rows {
                    w.serialize(row).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
                }
                w.flush().map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            }
            eprintln!(
                "fit: slope {:.6}, intercept {:.6}, R^2 {:.6}",
                result.fit.slope, result.fit.intercept, result.fit.r_squared
            );
            write_json(out, &SweepOutput { rows: &result.rows, fit: result.fit })
        }
        Command::Render => {
            let f = field_for(&cfg)?;
            let r = render::render_svg(&f, &cfg.render)?;
            eprintln!("rendered {} lattice points", r.points);
            write_output(cfg.svg.as_deref().or(out), r.svg.as_bytes())
        }
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
