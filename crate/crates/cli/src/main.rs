use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use fas_lora_cli::{load_config, run, CliError, ExperimentSpec, Mode};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    ChannelStats,
    Analyze,
    Simulate,
    Sweep,
    PhyDemo,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::ChannelStats => Mode::ChannelStats,
            ModeArg::Analyze => Mode::Analyze,
            ModeArg::Simulate => Mode::Simulate,
            ModeArg::Sweep => Mode::Sweep,
            ModeArg::PhyDemo => Mode::PhyDemo,
        }
    }
}

/// Coverage analysis and simulation of FAS-equipped LoRa gateways.
#[derive(Debug, Parser)]
#[command(name = "fas-lora", version)]
struct Args {
    mode: ModeArg,
    /// Flat `key = value` configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn resolve(args: &Args) -> Result<ExperimentSpec, CliError> {
    let mut spec = match &args.config {
        Some(p) => load_config(p)?,
        None => ExperimentSpec::default(),
    };
    spec.mode = args.mode.into();
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(o) = &args.out {
        spec.output = o.clone();
    }
    if let Some(w) = args.workers {
        spec.workers = w;
    }
    spec.validate()?;
    Ok(spec)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match resolve(&args).and_then(|spec| run(&spec)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fas-lora: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
