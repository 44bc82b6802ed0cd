//! Command-line front end over [`crate::pipeline`].

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Fidelity, RunConfig};
use crate::error::{Error, Result};
use crate::pipeline;

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "PLENUMLAB_THREADS";

#[derive(Debug, Parser)]
#[command(name = "plenumlab", version, about = "Lower-plenum flow simulation, surrogate training and mesh studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output artifact (a directory for meshstudy and eval).
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Override a config key, e.g. `--set solver.dt=0.001`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, value_enum)]
    fidelity: Option<Fidelity>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKindArg {
    Drift,
    Blobs,
    Noise,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ForecasterArg {
    Lstm,
    Convlstm,
    Deeponet,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the transient solver and record the sensor planes.
    Simulate(Common),
    /// Compare two datasets, or run and compare the fine/medium/coarse triplet.
    Meshstudy {
        #[command(flatten)]
        common: Common,
        /// Reference and comparison datasets.
        #[arg(num_args = 0..=2)]
        datasets: Vec<PathBuf>,
    },
    /// Write the checkerboard mask as CSV.
    Mask(Common),
    /// Generate a synthetic dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<SynthKindArg>,
        /// Number of snapshots.
        #[arg(long = "T", value_name = "T")]
        t_len: Option<usize>,
    },
    /// Train the inpainting network.
    TrainInpaint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a one-step forecaster.
    TrainForecast {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<ForecasterArg>,
    },
    /// Score a checkpoint on a dataset's test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Verify the autodiff gradients against finite differences.
    Gradcheck(Common),
    /// Export a dataset as CSV.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Reproduce an artifact from its sidecar.
    Rerun {
        sidecar: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn resolve(common: &Common, mut extra: Vec<String>) -> Result<RunConfig> {
    let mut sets = common.set.clone();
    if let Some(s) = common.seed {
        sets.push(format!("seed={s}"));
    }
    if let Some(f) = common.fidelity {
        sets.push(format!("fidelity=\"{}\"", f.label()));
    }
    sets.append(&mut extra);
    RunConfig::load(common.config.as_deref(), &sets)
}

/// Validates the worker cap. Execution is serial, so any valid value
/// behaves like 1.
pub fn thread_cap() -> Result<usize> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(Error::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
    }
}

fn execute(cli: Cli) -> Result<()> {
    thread_cap()?;
    match cli.command {
        Command::Simulate(c) => pipeline::simulate(&resolve(&c, vec![])?, &c.out).map(drop),
        Command::Mask(c) => pipeline::mask(&resolve(&c, vec![])?, &c.out).map(drop),
        Command::Gradcheck(c) => pipeline::gradcheck(&resolve(&c, vec![])?, &c.out).map(drop),
        Command::Meshstudy { common, datasets } => {
            if datasets.len() == 1 {
                return Err(Error::Usage("meshstudy expects two datasets or none".into()));
            }
            pipeline::meshstudy(&resolve(&common, vec![])?, &datasets, &common.out).map(drop)
        }
        Command::Synth { common, kind, t_len } => {
            let mut extra = Vec::new();
            if let Some(k) = kind {
                extra.push(format!("synth.kind=\"{}\"", k.to_possible_value().expect("named").get_name()));
            }
            if let Some(t) = t_len {
                extra.push(format!("synth.t_len={t}"));
            }
            pipeline::synth(&resolve(&common, extra)?, &common.out).map(drop)
        }
        Command::TrainInpaint { common, data } => pipeline::train_inpaint(&resolve(&common, vec![])?, &[data], &common.out).map(drop),
        Command::TrainForecast { common, data, kind } => {
            let extra = kind.map(|k| format!("forecast.kind=\"{}\"", k.to_possible_value().expect("named").get_name())).into_iter().collect();
            pipeline::train_forecast(&resolve(&common, extra)?, &[data], &common.out).map(drop)
        }
        Command::Eval { common, checkpoint, data } => pipeline::eval(&resolve(&common, vec![])?, &[checkpoint, data], &common.out).map(drop),
        Command::Export { common, data } => pipeline::export_csv(&resolve(&common, vec![])?, &[data], &common.out),
        Command::Rerun { sidecar, out } => pipeline::rerun(&sidecar, &out),
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code: 0 on success, 2 for usage errors, 1 for
/// runtime errors.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}
