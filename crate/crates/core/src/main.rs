use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isodrum::cli::{self, CliError};

#[derive(Parser)]
#[command(name = "isodrum", version, about = "Isospectral drums with densities and potentials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; 0 uses the machine default.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct Common {
    /// Experiment config (key = value or JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides solver.seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write domain descriptions and grid dumps.
    Build(Common),
    /// Compute the lowest eigenvalues.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the operator in MatrixMarket format.
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Isospectrality report for the pair.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        dump_matrix: bool,
    },
    /// Richardson extrapolation of a CSV of `h,E` rows or of the config's grid sweep.
    Extrapolate {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        csv: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Exponent p of the error expansion in h^p.
        #[arg(long, default_value_t = 2.0)]
        order: f64,
    },
    /// Write the sampled field as a binary dump.
    FieldDump(Common),
}

fn config(path: &PathBuf, seed: Option<u64>) -> Result<isodrum::config::ExperimentConfig, CliError> {
    let mut cfg = cli::load_config(path)?;
    if let Some(s) = seed {
        cfg.solver.seed = s;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<String, CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Build(c) => cli::cmd_build(&config(&c.config, c.seed)?, &c.out),
        Command::Solve { common: c, dump_matrix } => {
            cli::cmd_solve(&config(&c.config, c.seed)?, &c.out, dump_matrix)
        }
        Command::Compare { common: c, dump_matrix } => {
            cli::cmd_compare(&config(&c.config, c.seed)?, &c.out, dump_matrix)
        }
        Command::Extrapolate {
            csv,
            config: cfg,
            out,
            seed,
            order,
        } => match (csv, cfg) {
            (Some(csv), _) => cli::cmd_extrapolate_csv(&csv, order),
            (None, Some(cfg)) => cli::cmd_extrapolate_sweep(&config(&cfg, seed)?, &out, order),
            (None, None) => unreachable!("clap requires one of --csv, --config"),
        },
        Command::FieldDump(c) => cli::cmd_field_dump(&config(&c.config, c.seed)?, &c.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("isodrum: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
