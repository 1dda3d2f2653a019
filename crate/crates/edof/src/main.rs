use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edof::{commands, CliError, CliResult, Flags, Parallel, PipelineConfig};

/// Extended depth of field from a grid of differently focused views.
#[derive(Parser)]
#[command(name = "edof", version)]
struct Cli {
    /// Print the summary as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `rng_seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic grid with its ground truth.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Register and warp the views onto a shared canvas.
    Align {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        skip_align: bool,
    },
    /// Train the fusion network.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Align, select, fuse and evaluate.
    Run {
        #[command(flatten)]
        common: Common,
        /// Use the views unregistered.
        #[arg(long)]
        skip_align: bool,
        /// Fuse every usable view of each block in index order.
        #[arg(long)]
        skip_optimize: bool,
        /// Train the network before running.
        #[arg(long)]
        train: bool,
    },
    /// Information entropy, local contrast and optional SSIM of an image.
    Eval {
        image: PathBuf,
        #[arg(long)]
        reference: Option<PathBuf>,
    },
}

fn load(common: &Common) -> CliResult<PipelineConfig> {
    let mut cfg = PipelineConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.rng_seed = s;
    }
    Ok(cfg)
}

fn dispatch(command: &Command) -> CliResult<serde_json::Value> {
    match command {
        Command::Synth { common } => commands::synth(&load(common)?),
        Command::Align { common, skip_align } => {
            let flags = Flags {
                skip_align: *skip_align,
                ..Flags::default()
            };
            commands::align(&load(common)?, flags, &Parallel::from_env())
        }
        Command::Train { common } => commands::train(&load(common)?, &Parallel::from_env()),
        Command::Run {
            common,
            skip_align,
            skip_optimize,
            train,
        } => {
            let flags = Flags {
                skip_align: *skip_align,
                skip_optimize: *skip_optimize,
                train: *train,
            };
            commands::run(&load(common)?, flags, &Parallel::from_env())
        }
        Command::Eval { image, reference } => commands::eval(image, reference.as_deref().map(Path::new)),
    }
}

fn print_plain(value: &serde_json::Value, prefix: &str) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                print_plain(v, &key);
            }
        }
        other => println!("{prefix}: {other}"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(summary) => {
            if cli.json {
                println!("{summary}");
            } else {
                print_plain(&summary, "");
            }
            ExitCode::SUCCESS
        }
        Err(e) => report(&e, cli.json),
    }
}

fn report(e: &CliError, json: bool) -> ExitCode {
    if json {
        println!("{}", serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() }));
    }
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
