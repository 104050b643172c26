//! `greenseg`: segment, evaluate, simulate and bench from the command line.
//!
//! Exit codes: 0 success, 2 bad input (missing file, parse or config error),
//! 3 no ground plane found in any frame.

mod bench;
mod evaluate;
mod segment;
mod simulate;

use std::path::Path;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use greenseg_core::SegParams;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NO_PLANE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "greenseg",
    version,
    about = "Ground segmentation for greenhouse RGB-D point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label a cloud (or every cloud in a directory) and write the outputs.
    Segment(segment::SegmentArgs),
    /// Score a labeled cloud against reference labels.
    Evaluate(evaluate::EvaluateArgs),
    /// Generate synthetic frames with per-point truth labels.
    Simulate(simulate::SimulateArgs),
    /// Compare both algorithms over synthetic presets or a frame directory.
    Bench(bench::BenchArgs),
}

pub fn load_params(path: Option<&Path>) -> anyhow::Result<SegParams> {
    Ok(match path {
        Some(p) => SegParams::load(p)?,
        None => SegParams::default(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Segment(a) => segment::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
