use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use aogqa_cli::commands::{self, RunOptions};

#[derive(Parser)]
#[command(
    name = "aogqa",
    version,
    about = "And-Or graph learning with question-answer annotation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON); defaults to `<out>/config.json`.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the world and store it with the config.
    Init(Common),
    /// Run the learning loop.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        iterations: Option<usize>,
        /// Error rate of the simulated annotator.
        #[arg(long)]
        oracle_error: Option<f64>,
        /// Session service to take answers from instead of the simulated annotator.
        #[arg(long)]
        live: Option<String>,
    },
    /// Evaluate the learned graph on the held-out scenes.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Evaluate the world's generator graph instead.
        #[arg(long)]
        generator: bool,
    },
    /// Learning curves as CSV and SVG.
    Report(Common),
    /// Serve annotation sessions over HTTP.
    Serve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Init(c) => {
            let world = commands::init(c.config.as_deref(), c.seed, &c.out)?;
            println!(
                "{} scenes, {} held out",
                world.scenes.len(),
                world.heldout.len()
            );
        }
        Command::Run {
            common,
            iterations,
            oracle_error,
            live,
        } => {
            let opts = RunOptions {
                config: common.config,
                seed: common.seed,
                iterations,
                oracle_error,
                live,
                out: common.out,
            };
            let l = commands::run(&opts)?;
            println!(
                "{} storylines, cost {:.1}",
                l.storylines_run(),
                l.ledger.cost
            );
        }
        Command::Eval { common, generator } => {
            let r = commands::eval(
                common.config.as_deref(),
                common.seed,
                &common.out,
                generator,
            )?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::Report(c) => {
            let n = commands::report(&c.out)?;
            println!("{n} rows");
        }
        Command::Serve { common, addr } => {
            commands::serve(common.config.as_deref(), common.seed, &common.out, addr)?
        }
    }
    Ok(())
}
