use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fsci::config::ScenarioConfig;
use fsci::scenario::{run_scenario, RunOptions};

#[derive(Parser)]
#[command(name = "fsci", version, about = "Unfitted fluid-structure-contact interaction solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        output_dir: PathBuf,
        /// Write VTK fields every N steps (overrides the scenario).
        #[arg(long, value_name = "N")]
        write_fields_every: Option<usize>,
        /// Also write cut polygons and interface samples with the fields.
        #[arg(long)]
        debug_cut: bool,
        /// Write per-sample interface diagnostics every step.
        #[arg(long)]
        debug_interface: bool,
        #[arg(long, value_name = "N")]
        checkpoint_every: Option<usize>,
        /// Continue from a checkpoint file.
        #[arg(long, value_name = "FILE")]
        restart: Option<PathBuf>,
    },
    /// Parse and validate a scenario file, then print it with defaults.
    Check { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            output_dir,
            write_fields_every,
            debug_cut,
            debug_interface,
            checkpoint_every,
            restart,
        } => ScenarioConfig::read(&config).and_then(|cfg| {
            let base = config.parent().map(PathBuf::from).unwrap_or_default();
            let opts = RunOptions {
                output_dir,
                write_fields_every,
                checkpoint_every,
                debug_cut,
                debug_interface,
                restart,
            };
            run_scenario(&cfg, &base, &opts).map(|s| {
                log::info!("finished {} steps, t = {}", s.steps, s.final_time);
            })
        }),
        Command::Check { config } => ScenarioConfig::read(&config).map(|cfg| print!("{}", cfg.to_toml())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
