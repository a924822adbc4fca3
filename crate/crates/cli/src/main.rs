//! `emtomo` — one entry point for the whole pipeline: dataset generation,
//! the three training stages, inversion, solver validation, and metric
//! reports.
//!
//! Every run resolves its configuration as preset (`--scale`) -> TOML file
//! (`--config`) -> individual flags, honors `--seed`, supports `--dry-run`
//! (print the resolved config, no side effects), and writes exactly one
//! `report.json` under `--out`. Failures exit nonzero with a single
//! machine-parsable line: `error[<class>]: <message>`.

mod commands;
mod report;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "emtomo", version, about = "2-D EM inverse imaging pipeline")]
struct Cli {
    /// Scale preset providing every default.
    #[arg(long, global = true, default_value = "desk")]
    scale: String,
    /// TOML file overriding any subset of the preset.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    /// Master seed for this run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for artifacts and the run report.
    #[arg(long, global = true, default_value = "emtomo-out")]
    out: std::path::PathBuf,
    /// Linear-solver backend: dense | fft.
    #[arg(long, global = true)]
    solver: Option<String>,
    /// Solver relative-residual tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Generation parallelism (training stays single-threaded).
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Opt-in data-parallel batch gradients for the conv surrogate's
    /// training (changes floating-point summation order; 1 = reproducible
    /// default).
    #[arg(long, global = true, default_value_t = 1)]
    train_workers: usize,
    /// Print the resolved configuration and exit without side effects.
    #[arg(long, global = true, default_value_t = false)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a paired (image, fields) dataset.
    GenData {
        /// Sample count (defaults to the preset's).
        #[arg(long)]
        n: Option<usize>,
        /// Add white Gaussian noise at this SNR (dB) to stored amplitudes.
        #[arg(long)]
        snr_db: Option<f64>,
        /// Also dump sample 0's complex fields and Green operators under
        /// <out>/debug/.
        #[arg(long, default_value_t = false)]
        dump_debug: bool,
    },
    /// Train the adversarial autoencoder on dataset images.
    TrainAae {
        #[arg(long)]
        dataset: std::path::PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Save intermediate checkpoints every K epochs (0 = final only).
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Train the CNN forward surrogate on (image, fields) pairs.
    TrainFnn {
        #[arg(long)]
        dataset: std::path::PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the tandem inverse network against frozen checkpoints.
    TrainInn {
        #[arg(long)]
        dataset: std::path::PathBuf,
        /// AAE bundle providing the frozen generator.
        #[arg(long)]
        aae: std::path::PathBuf,
        /// FNN bundle providing the frozen surrogate.
        #[arg(long)]
        fnn: std::path::PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// KL weight of the composite loss.
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Reconstruct scatterers from field amplitudes.
    Invert {
        /// INN bundle.
        #[arg(long)]
        model: std::path::PathBuf,
        #[arg(long)]
        aae: std::path::PathBuf,
        #[arg(long)]
        fnn: std::path::PathBuf,
        /// Take inputs (and ground truth) from this dataset...
        #[arg(long)]
        dataset: Option<std::path::PathBuf>,
        /// ...at these global sample indices.
        #[arg(long, value_delimiter = ',')]
        index: Vec<usize>,
        /// ...or read one amplitude per line from a CSV/plain-text file.
        #[arg(long)]
        fields: Option<std::path::PathBuf>,
    },
    /// Run the solver check suite (quadrature, analytic cylinder,
    /// reciprocity, path agreement) and report per-check residuals.
    ValidateSolver,
    /// Aggregate metrics for trained models over a dataset split.
    Report {
        #[arg(long)]
        dataset: std::path::PathBuf,
        /// Split name: train | val | test.
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        aae: Option<std::path::PathBuf>,
        #[arg(long)]
        fnn: Option<std::path::PathBuf>,
        /// INN bundle; needs --aae and --fnn for its frozen parts.
        #[arg(long)]
        inn: Option<std::path::PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => {}
        Err(e) => {
            match e.downcast_ref::<emtomo::Error>() {
                Some(err) => eprintln!("error[{}]: {err}", err.class()),
                None => eprintln!("error[cli]: {e:#}"),
            }
            std::process::exit(1);
        }
    }
}
