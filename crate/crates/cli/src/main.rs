//! `waveunet` command-line tool.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error,
//! 4 numerical failure.

mod commands;
mod presets;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use waveunet::audio::WavFormat;
use waveunet::eval::SdrMode;

#[derive(Parser)]
#[command(name = "waveunet", version, about = "Train, run and evaluate Wave-U-Net source separation models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a JSON training config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Continue from `<out>/last.ckpt`.
        #[arg(long)]
        resume: bool,
    },
    /// Separate a WAV file into one WAV per source.
    Separate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Pcm16)]
        format: Format,
    },
    /// Score a checkpoint on a dataset directory with segment-wise SDR.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        segment_seconds: f64,
        #[arg(long, value_enum, default_value_t = Mode::Plain)]
        mode: Mode,
    },
    /// Print the smallest valid (input, output) sizes for a desired output.
    Sizes {
        #[arg(long)]
        levels: usize,
        #[arg(long)]
        fd: usize,
        #[arg(long)]
        fu: usize,
        /// Desired output length in samples.
        #[arg(long)]
        out: usize,
        /// Same-padded convolutions without input context.
        #[arg(long)]
        no_context: bool,
    },
    /// Print the block-by-block shape table of a model.
    Trace {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Emit JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pcm16,
    Float32,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Plain,
    Projected,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(f) = configure_threads() {
        eprintln!("error: {}", f.message);
        return ExitCode::from(f.code);
    }
    let result = match cli.command {
        Command::Train { config, out, resume } => commands::train(&config, &out, resume),
        Command::Separate {
            checkpoint,
            input,
            out,
            format,
        } => commands::separate(
            &checkpoint,
            &input,
            &out,
            match format {
                Format::Pcm16 => WavFormat::Pcm16,
                Format::Float32 => WavFormat::Float32,
            },
        ),
        Command::Evaluate {
            checkpoint,
            dataset,
            out,
            segment_seconds,
            mode,
        } => commands::evaluate(
            &checkpoint,
            &dataset,
            &out,
            segment_seconds,
            match mode {
                Mode::Plain => SdrMode::Plain,
                Mode::Projected => SdrMode::Projected,
            },
        ),
        Command::Sizes {
            levels,
            fd,
            fu,
            out,
            no_context,
        } => commands::sizes(levels, fd, fu, out, !no_context),
        Command::Trace { preset, config, json } => commands::trace(preset.as_deref(), config.as_deref(), json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn configure_threads() -> Result<(), commands::Failure> {
    let Ok(value) = std::env::var("WAVEUNET_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| commands::Failure::usage(format!("WAVEUNET_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| commands::Failure::usage(format!("cannot configure worker threads: {e}")))
}
