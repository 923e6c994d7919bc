use std::path::PathBuf;
use std::process::ExitCode;

use arraymech_cli::config::CONFIG_HELP;
use arraymech_cli::{execute, Command, RunOptions};
use clap::{Args, Parser, Subcommand};

/// Collective mechanics of laser-illuminated 2D atom arrays.
#[derive(Parser, Debug)]
#[command(name = "arraymech", version, after_long_help = CONFIG_HELP)]
struct Cli {
    /// Run every loop on one thread (results are identical either way).
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Cooperative shift and width, excited population, reflectivity, effective temperature.
    Response(RunArgs),
    /// Finite-array collective modes with stability and gap classification.
    Modes(RunArgs),
    /// Infinite-lattice spectrum over the Brillouin zone.
    BzSpectrum(RunArgs),
    /// Monte Carlo Langevin dynamics with the closed-form overlay.
    Dynamics {
        #[command(flatten)]
        run: RunArgs,
        /// Shorthand for --set dynamics.seed=<SEED>.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Static shift, position diffusion, escape time and photon budget.
    Heating(RunArgs),
    /// Repeat `modes` or `response` over the values in the [sweep] section.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Sweep points evaluated concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the built-in invariant suite; exit status 0 only if every check passes.
    Validate {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Override a configuration key, e.g. --set lattice.a=0.6 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory [default: $ARRAYMECH_OUT/<command> or ./arraymech-out/<command>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write into an existing non-empty output directory.
    #[arg(long)]
    force: bool,
}

fn options(run: RunArgs, sequential: bool) -> RunOptions {
    RunOptions {
        config: Some(run.config),
        overrides: run.overrides,
        out: run.out,
        out_root: std::env::var_os("ARRAYMECH_OUT").map(PathBuf::from),
        force: run.force,
        sequential,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let seq = cli.sequential;
    let (command, opts) = match cli.command {
        Cmd::Response(r) => (Command::Response, options(r, seq)),
        Cmd::Modes(r) => (Command::Modes, options(r, seq)),
        Cmd::BzSpectrum(r) => (Command::BzSpectrum, options(r, seq)),
        Cmd::Heating(r) => (Command::Heating, options(r, seq)),
        Cmd::Dynamics { run, seed } => {
            let mut o = options(run, seq);
            if let Some(s) = seed {
                o.overrides.push(format!("dynamics.seed={s}"));
            }
            (Command::Dynamics, o)
        }
        Cmd::Sweep { run, jobs } => (Command::Sweep { jobs }, options(run, seq)),
        Cmd::Validate { out, force } => (
            Command::Validate,
            RunOptions {
                out,
                out_root: None,
                force,
                sequential: seq,
                ..RunOptions::default()
            },
        ),
    };
    match execute(command, &opts) {
        Ok((dir, summary)) => {
            if command != Command::Validate {
                println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
                println!("wrote {}", dir.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
