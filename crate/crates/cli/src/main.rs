//! `belltag` — simulate a two-station Bell experiment and analyze the
//! recorded time-tag streams offline.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "belltag",
    version,
    about = "Two-station Bell/CHSH experiment simulator and offline time-tag analyzer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Experiment config (TOML). Defaults are used when omitted.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the outcome model:
    /// quantum | lhv-deterministic | lhv-detection-loophole.
    #[arg(long)]
    model: Option<String>,
    /// Override the run duration in seconds.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a run and write one binary tag stream per station.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write plain-text exports of both streams.
        #[arg(long)]
        text: bool,
    },
    /// Analyze two tag streams: offset recovery, 16 rates, correlations, S.
    Analyze {
        /// Alice's stream (station 0).
        alice: PathBuf,
        /// Bob's stream (station 1).
        bob: PathBuf,
        /// Coincidence window (full width), seconds.
        #[arg(long, default_value_t = 6e-9)]
        window: f64,
        /// Offset search half-range, seconds.
        #[arg(long, default_value_t = 1e-3)]
        search_range: f64,
        /// Count all in-window pairs instead of one-to-one matching.
        #[arg(long)]
        all_pairs: bool,
        /// Write CSV reports into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep Alice's analyzer offset and fit the coincidence sinusoids.
    Scan {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory for the scan tables.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Number of scan points.
        #[arg(long, default_value_t = 41)]
        points: u32,
        /// Seconds per point.
        #[arg(long, default_value_t = 5.0)]
        dwell: f64,
        /// First analyzer offset, degrees.
        #[arg(long, default_value_t = 0.0)]
        start_deg: f64,
        /// Swept range, degrees.
        #[arg(long, default_value_t = 90.0)]
        range_deg: f64,
        /// Compute expected rates instead of sampling (validation aid).
        #[arg(long)]
        noiseless: bool,
    },
    /// Check the space-like-separation timing budget.
    Audit {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Replay a recorded pair of streams for the per-event audit.
        #[arg(long, requires = "bob")]
        alice: Option<PathBuf>,
        #[arg(long, requires = "alice")]
        bob: Option<PathBuf>,
        /// Coincidence window for the stream replay, seconds.
        #[arg(long, default_value_t = 6e-9)]
        window: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { cfg, out, text } => commands::simulate(&cfg, &out, text),
        Command::Analyze {
            alice,
            bob,
            window,
            search_range,
            all_pairs,
            out,
        } => commands::analyze(&alice, &bob, window, search_range, all_pairs, out.as_deref()),
        Command::Scan {
            cfg,
            out,
            points,
            dwell,
            start_deg,
            range_deg,
            noiseless,
        } => commands::scan(&cfg, &out, points, dwell, start_deg, range_deg, noiseless),
        Command::Audit {
            cfg,
            alice,
            bob,
            window,
        } => commands::audit(&cfg, alice.as_deref(), bob.as_deref(), window),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
