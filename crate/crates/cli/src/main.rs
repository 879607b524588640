//! `lowlight`: dataset generation, classical reconstruction and scoring.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod report;

#[derive(Parser)]
#[command(name = "lowlight", version, about = "Phase retrieval under low photon flux")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset(s) described by a config file.
    Dataset {
        config: PathBuf,
        /// Replace existing dataset directories.
        #[arg(long)]
        force: bool,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Output root, overriding `dataset.output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reconstruct one split of a dataset with a classical method.
    Reconstruct {
        dataset: PathBuf,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = UnmeasuredArg::Free)]
        unmeasured: UnmeasuredArg,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Score reconstructions against ground truth.
    ///
    /// Inputs are reconstruction directories; a dataset directory given as
    /// input is scored as method `truth` against itself.
    Evaluate {
        inputs: Vec<PathBuf>,
        /// Datasets to pair with; defaults to the one each input records.
        #[arg(long = "dataset")]
        datasets: Vec<PathBuf>,
        /// Tab-separated summary table.
        #[arg(long)]
        report: PathBuf,
        /// SVG plot of mean PCC against photon count.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Per-example scores.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Generate every level of a config, reconstruct the test splits with
    /// both methods and write the report and plot.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        force: bool,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Gs,
    Approximant,
}

impl MethodArg {
    pub fn name(self) -> &'static str {
        match self {
            MethodArg::Gs => "gs",
            MethodArg::Approximant => "approximant",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum UnmeasuredArg {
    Free,
    Zero,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Dataset {
            config,
            force,
            threads,
            out,
        } => commands::dataset(&config, out.as_deref(), threads, force).map(|_| ()),
        Command::Reconstruct {
            dataset,
            method,
            out,
            split,
            max_iter,
            tol,
            unmeasured,
            threads,
            force,
        } => {
            let opts = lowlight::GsOptions {
                max_iter,
                tol,
                unmeasured: match unmeasured {
                    UnmeasuredArg::Free => lowlight::Unmeasured::Free,
                    UnmeasuredArg::Zero => lowlight::Unmeasured::Zero,
                },
                offset: 0.0,
            };
            let job = commands::ReconstructJob {
                dataset: &dataset,
                method,
                split: &split,
                out: &out,
                opts,
                threads,
                force,
            };
            commands::reconstruct(&job)
        }
        Command::Evaluate {
            inputs,
            datasets,
            report,
            plot,
            records,
        } => commands::evaluate(&inputs, &datasets, &report, plot.as_deref(), records.as_deref()),
        Command::Sweep {
            config,
            force,
            threads,
            out,
        } => commands::sweep(&config, out.as_deref(), threads, force),
    }
}

/// 2: configuration, 3: data, 4: numerical degeneracy.
fn exit_code(err: &anyhow::Error) -> u8 {
    use lowlight::Error as E;
    match err.chain().find_map(|c| c.downcast_ref::<E>()) {
        Some(E::ConfigInvalid(_) | E::UnknownClass(_) | E::CalibrationMissing(_) | E::SamplingViolation { .. }) => 2,
        Some(E::DegenerateImage(_) | E::InsufficientFrames(_)) => 4,
        Some(_) => 3,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
