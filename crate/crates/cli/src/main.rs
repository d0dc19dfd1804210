mod commands;
mod config;
mod report;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{Context, Known, Settings};

/// Polychromatic ptychography experiments: simulation, amplitude-flow
/// reconstruction, the PIM baseline and trace reports.
#[derive(Parser, Debug)]
#[command(name = "polyptych", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML file overlaid on the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter set.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(config::PRESETS))]
    preset: Option<String>,
    /// Noise and shift-order seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Verify descent certificates at every step.
    #[arg(long)]
    check: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct Input {
    #[command(flatten)]
    common: Common,
    /// Directory written by `simulate`; the data is simulated afresh when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate noisy polychromatic diffraction data.
    Simulate(Common),
    /// Recover the object with the probe known.
    ReconObject(Input),
    /// Recover the probe with the object known.
    ReconWindow(Input),
    /// Recover object and probe by alternating amplitude flow.
    ReconBlind {
        #[command(flatten)]
        input: Input,
        /// Continue from a checkpoint directory.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run the PIM baseline.
    Pim(Input),
    /// Compare trace CSVs, ordered by final objective.
    Report {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        /// Drop rows of the first N outer iterations.
        #[arg(long, default_value_t = 0)]
        skip_first: usize,
        /// Also write report.json and the plot-ready report.csv here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn context(c: &Common) -> Result<Context> {
    if let Some(k) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()?;
    }
    let settings = Settings {
        config: c.config.clone(),
        preset: c.preset.clone(),
        seed: c.seed,
        out: c.out.clone(),
        check: c.check,
    };
    Context::prepare(&settings, std::env::vars())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(c) => commands::simulate(&context(&c)?),
        Command::ReconObject(i) => {
            commands::recon_nonblind(&context(&i.common)?, i.data.as_deref(), Known::Probe)
        }
        Command::ReconWindow(i) => {
            commands::recon_nonblind(&context(&i.common)?, i.data.as_deref(), Known::Object)
        }
        Command::ReconBlind { input, resume } => commands::recon_blind(
            &context(&input.common)?,
            input.data.as_deref(),
            resume.as_deref(),
        ),
        Command::Pim(i) => commands::pim(&context(&i.common)?, i.data.as_deref()),
        Command::Report {
            traces,
            skip_first,
            out,
        } => {
            let summaries = report::report(&traces, skip_first, out.as_deref())?;
            report::print_table(&summaries);
            Ok(())
        }
    }
}
