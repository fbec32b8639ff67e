use clap::{Parser, Subcommand};
use cransim::commands::{self, Overrides};
use std::path::PathBuf;

/// Delay-minimizing uplink resource allocation for fronthaul-limited CRAN
/// clusters: closed-form joint fronthaul/power policies in the time-average
/// and discounted regimes, plus the Monte-Carlo experiments that compare
/// them.
#[derive(Parser)]
#[command(name = "cransim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct RunArgs {
    /// Config file (TOML); a manifest from a previous run also works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shipped preset: fig2, fig3, fig4, or pareto.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory for CSVs, plots, and the manifest.
    #[arg(long, default_value = "runs")]
    out_dir: PathBuf,
    /// Override the cluster base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also emit SVG plots next to the CSVs.
    #[arg(long)]
    plot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured experiment and write CSV artifacts.
    Simulate(RunArgs),
    /// Calibrate the Lagrange multipliers and write them to a file.
    Tune {
        #[command(flatten)]
        run: RunArgs,
        /// Where to write the tuned multipliers.
        #[arg(long, default_value = "multipliers.toml")]
        out: PathBuf,
    },
    /// Run the oracle validation suites.
    Validate {
        /// fast (seconds) or full (million-sample oracles).
        #[arg(long, default_value = "fast")]
        level: String,
    },
    /// Run the Pareto weight sweep (shortcut for the pareto preset).
    Pareto(RunArgs),
    /// Check geometric-horizon vs discounted equivalence on toy MDPs.
    Lemma2 {
        /// Continue-probabilities to test.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.5, 0.9])]
        mu: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn setup_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn overrides(args: &RunArgs) -> Overrides {
    Overrides {
        seed: args.seed,
        trials: args.trials,
        emit_plots: args.plot,
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate(args) => {
            setup_threads(args.threads);
            commands::cmd_simulate(
                args.config.as_deref(),
                args.preset.as_deref(),
                &args.out_dir,
                &overrides(&args),
            )
        }
        Command::Tune { run, out } => {
            setup_threads(run.threads);
            commands::cmd_tune(run.config.as_deref(), run.preset.as_deref(), &out, &overrides(&run))
        }
        Command::Validate { level } => commands::cmd_validate(&level),
        Command::Pareto(args) => {
            setup_threads(args.threads);
            let preset = args.preset.clone().or_else(|| {
                if args.config.is_none() {
                    Some("pareto".to_string())
                } else {
                    None
                }
            });
            commands::cmd_simulate(
                args.config.as_deref(),
                preset.as_deref(),
                &args.out_dir,
                &overrides(&args),
            )
        }
        Command::Lemma2 { mu, trials, seed } => commands::cmd_lemma2(&mu, trials, seed),
    };
    std::process::exit(code);
}
