// SPDX-License-Identifier: Apache-2.0

//! `netlist-sentinel`: feature extraction, training and explained
//! classification of gate-level netlist nets.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 success with a
//! solver convergence warning.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "netlist-sentinel",
    version,
    about = "Explainable hardware-trojan triage for gate-level netlists"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON run configuration
    #[arg(long, global = true, env = "NETLIST_SENTINEL_CONFIG")]
    config: Option<PathBuf>,
    /// Seed for the split, cross-validation folds and synthesis
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Neighbor shells per case explanation
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Registration threshold for property votes
    #[arg(long, global = true)]
    threshold: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse netlists (named PART-VERSION.v) and write one feature CSV
    Extract {
        #[arg(required = true)]
        netlists: Vec<PathBuf>,
    },
    /// Split a feature CSV into train.csv and test.csv
    Split { csv: PathBuf },
    /// Train the property ensemble and/or the case-based model
    Train {
        csv: PathBuf,
        #[arg(long, value_enum, default_value_t = Arch::Both)]
        arch: Arch,
    },
    /// Classify and explain one sample
    Explain {
        /// Directory written by `train`
        #[arg(long)]
        artifacts: PathBuf,
        /// Five comma-separated features: LGFi,FFi,FFo,PI,PO
        #[arg(long, conflicts_with_all = ["csv", "row"])]
        sample: Option<String>,
        /// Take the sample from this feature CSV ...
        #[arg(long, requires = "row")]
        csv: Option<PathBuf>,
        /// ... at this 1-based data row
        #[arg(long, requires = "csv")]
        row: Option<usize>,
        #[arg(long, value_enum, default_value_t = Arch::Both)]
        arch: Arch,
        /// Print the JSON document instead of the text report
        #[arg(long)]
        json: bool,
    },
    /// Evaluate trained artifacts on a test CSV
    Eval {
        #[arg(long)]
        artifacts: PathBuf,
        test: PathBuf,
        #[arg(long, value_enum, default_value_t = Arch::Both)]
        arch: Arch,
    },
    /// Generate a synthetic netlist with a trojan and its manifest
    Synth {
        #[arg(long, default_value_t = 4)]
        trigger_width: usize,
        #[arg(long, value_enum, default_value_t = PayloadArg::MuxLeak)]
        payload: PayloadArg,
        #[arg(long, default_value_t = 150)]
        host_gates: usize,
        /// Number of netlists; seeds run upward from --seed
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arch {
    Prop,
    Case,
    Both,
}

impl Arch {
    pub fn prop(self) -> bool {
        matches!(self, Arch::Prop | Arch::Both)
    }

    pub fn case(self) -> bool {
        matches!(self, Arch::Case | Arch::Both)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PayloadArg {
    MuxLeak,
    XorCorrupt,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

pub fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

/// What a successful command reports back.
pub enum Outcome {
    Done,
    ConvergenceWarning,
}

fn resolve_config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.split.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(k) = common.k {
        cfg.casexai.k = k;
    }
    if let Some(t) = common.threshold {
        cfg.propxai.threshold = t;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome, Failure> {
    let cfg = resolve_config(&cli.common)?;
    match cli.command {
        Command::Extract { netlists } => commands::extract(&cfg, &netlists),
        Command::Split { csv } => commands::split(&cfg, &csv),
        Command::Train { csv, arch } => commands::train(&cfg, &csv, arch),
        Command::Explain {
            artifacts,
            sample,
            csv,
            row,
            arch,
            json,
        } => {
            let sample = match (sample, csv, row) {
                (Some(s), _, _) => commands::Sample::Inline(s),
                (None, Some(csv), Some(row)) => commands::Sample::Row(csv, row),
                _ => return Err(usage(anyhow::anyhow!("give --sample or --csv with --row"))),
            };
            commands::explain(&cfg, &artifacts, sample, arch, json)
        }
        Command::Eval { artifacts, test, arch } => commands::eval(&cfg, &artifacts, &test, arch),
        Command::Synth {
            trigger_width,
            payload,
            host_gates,
            count,
        } => {
            let payload = match payload {
                PayloadArg::MuxLeak => netlist_sentinel::synthgen::Payload::MuxLeak,
                PayloadArg::XorCorrupt => netlist_sentinel::synthgen::Payload::XorCorrupt,
            };
            commands::synth(&cfg, trigger_width, payload, host_gates, count)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::ConvergenceWarning) => {
            eprintln!("warning: at least one solver hit its iteration limit");
            ExitCode::from(3)
        }
        Err(f) => {
            let (Failure::Usage(e) | Failure::Data(e)) = &f;
            eprintln!("error: {e:#}");
            ExitCode::from(f.code())
        }
    }
}
