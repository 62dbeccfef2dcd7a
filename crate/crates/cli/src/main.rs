use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dosm_cli::commands::{self, SpectrumArgs};

/// Distributed online submodular maximization testbed.
#[derive(Parser)]
#[command(name = "dosm", version, about)]
struct Cli {
    /// Master seed; overrides the config's seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (defaults to the available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a topology's spectral profile and the default parameters it
    /// prescribes.
    Spectrum {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Generator spec: path:4, ring:8, complete:5, star:6, random:6:2.
        #[arg(long)]
        topology: Option<String>,
        /// Edge-list file with one "i j" pair per line.
        #[arg(long)]
        edges: Option<PathBuf>,
        /// Horizon the parameters are sized for.
        #[arg(long)]
        horizon: Option<usize>,
        /// Decision dimension the parameters are sized for.
        #[arg(long)]
        dimension: Option<usize>,
        /// Also write the mixing matrix as CSV.
        #[arg(long)]
        export_matrix: Option<PathBuf>,
    },
    /// Run one experiment per seed and write regret traces.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Measure final regret across a grid of horizons.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated horizons; falls back to the config's list.
        #[arg(long, value_delimiter = ',')]
        horizons: Vec<usize>,
    },
    /// Run the self-check suites.
    Verify {
        /// Run a single suite by name instead of all of them.
        #[arg(long)]
        suite: Option<String>,
    },
    /// Render a regret trace CSV as an SVG chart.
    Plot {
        /// Trace CSV produced by `run`.
        #[arg(long)]
        input: PathBuf,
        /// Output file name (default: the input's stem with .svg).
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DOSM_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Spectrum {
            config,
            topology,
            edges,
            horizon,
            dimension,
            export_matrix,
        } => commands::cmd_spectrum(
            &SpectrumArgs {
                config: config.clone(),
                topology: topology.clone(),
                edges: edges.clone(),
                horizon: *horizon,
                dimension: *dimension,
                export_matrix: export_matrix.clone(),
            },
            cli.seed.unwrap_or(0),
            &cli.out,
        ),
        Command::Run { config } => commands::cmd_run(config, cli.seed, &cli.out),
        Command::Sweep { config, horizons } => {
            commands::cmd_sweep(config, horizons, cli.seed, &cli.out, cli.jobs)
        }
        Command::Verify { suite } => {
            commands::cmd_verify(suite.as_deref(), cli.seed.unwrap_or(0))
        }
        Command::Plot { input, output } => {
            commands::cmd_plot(input, output.as_deref(), &cli.out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
