//! Command line. Exit codes: 0 all verdicts pass, 1 some verdict fails,
//! 2 configuration or usage error, 3 numerical failure.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Loaded;
use crate::pipeline::{self, Context, PipelineError, SweepOptions};

#[derive(Debug, Parser)]
#[command(name = "magwell", version, about = "Spectral experiments for periodic magnetic wells")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Also write plot series and bitmaps.
    #[arg(long, global = true)]
    pub plot_data: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the standing assumptions on the field and label the wells.
    CheckField,
    /// Full sweep over h with all verdicts.
    Sweep {
        /// Override the sweep values (repeatable).
        #[arg(long = "h")]
        h: Vec<f64>,
        /// Rewrite the golden file (needs MAGWELL_GOLDEN_UPDATE=1).
        #[arg(long)]
        golden_update: bool,
    },
    /// Supercell and well spectra.
    Spectrum {
        #[arg(long = "h")]
        h: Vec<f64>,
        /// Write the operator as a COO file and the well mask as PGM.
        #[arg(long)]
        export_matrix: bool,
    },
    /// Quasimode residuals and spectral hits.
    Quasimode {
        /// Center as `x,y`.
        #[arg(long, value_parser = parse_point)]
        y: Option<[f64; 2]>,
        #[arg(long = "h")]
        h: Vec<f64>,
    },
    /// Agmon distances, weight admissibility, energy identity and resolvent.
    Agmon {
        #[arg(long = "h")]
        h: f64,
        /// Weight parameter in (0, 1], overriding `agmon.eps`.
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Recompute verdicts from a stored sweep.
    Report,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts[..] {
        [x, y] => Ok([
            x.parse().map_err(|e| format!("bad x: {e}"))?,
            y.parse().map_err(|e| format!("bad y: {e}"))?,
        ]),
        _ => Err(format!("expected `x,y`, got `{s}`")),
    }
}

fn nonempty(v: Vec<f64>) -> Option<Vec<f64>> {
    (!v.is_empty()).then_some(v)
}

fn load(common: &Common) -> Result<Loaded, PipelineError> {
    Ok(match &common.config {
        Some(p) => Loaded::from_path(p)?,
        None => crate::config::RunConfig::default().resolve(std::path::Path::new("."))?,
    })
}

/// Runs a parsed command and returns its exit code, printing verdict lines
/// to stdout and errors to stderr.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(outcome) => {
            for l in &outcome.lines {
                println!("{l}");
            }
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<pipeline::Outcome, PipelineError> {
    let c = &cli.common;
    if let Command::Report = cli.command {
        let out = match (&c.out, &c.config) {
            (Some(o), _) => o.clone(),
            (None, _) => load(c)?.output_dir(None),
        };
        return pipeline::cmd_report(&out);
    }
    let ctx = Context::new(load(c)?, c.out.as_deref(), c.jobs, c.plot_data)?;
    match cli.command {
        Command::CheckField => pipeline::cmd_check_field(&ctx),
        Command::Sweep { h, golden_update } => pipeline::cmd_sweep(
            &ctx,
            &SweepOptions {
                h: nonempty(h),
                golden_update,
            },
        ),
        Command::Spectrum { h, export_matrix } => pipeline::cmd_spectrum(&ctx, nonempty(h), export_matrix),
        Command::Quasimode { y, h } => pipeline::cmd_quasimode(&ctx, y, nonempty(h)),
        Command::Agmon { h, eps } => pipeline::cmd_agmon(&ctx, h, eps),
        Command::Report => unreachable!("handled above"),
    }
}
