mod commands;
mod config;
mod manifest;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use ambihedge::pipeline::{ClassificationMode, SampleFilter};
use clap::{Parser, Subcommand};

use crate::config::Config;

#[derive(Parser, Debug)]
#[command(name = "ambihedge", version, about = "Ambiguity attitudes from belief-hedging choices")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Occupation classification: working-age or extended.
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<ClassificationMode>,
    /// Comma-separated sample filters: necessity, other-entrepreneurs, on-call-temp.
    #[arg(long, global = true, value_parser = parse_filters)]
    filters: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draws a synthetic population, runs it through the questionnaire and builds a study dataset.
    Simulate {
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        waves: Option<u32>,
        #[arg(long)]
        depth: Option<u32>,
    },
    /// Serves the questionnaire over HTTP.
    ElicitServe {
        #[arg(long)]
        addr: Option<SocketAddr>,
        /// Event log path.
        #[arg(long)]
        log: Option<PathBuf>,
        /// Derive session seeds from the master seed instead of OS entropy. For testing only.
        #[arg(long)]
        deterministic: bool,
    },
    /// Fits each respondent's attitudes from interval transcripts.
    Estimate {
        #[arg(long)]
        transcripts: Option<PathBuf>,
        /// Known profiles to score the estimates against.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Runs the occupational-choice regressions.
    Analyze {
        /// Directory with history, covariates, measurements and estimates; defaults to --out.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Writes descriptive, correlation and spell-duration tables.
    Tables {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Monte Carlo of marginal-effect attenuation under measurement noise.
    Attenuation {
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
}

fn parse_mode(s: &str) -> Result<ClassificationMode, String> {
    s.parse().map_err(|e: ambihedge::pipeline::PipelineError| e.to_string())
}

fn parse_filters(s: &str) -> Result<String, String> {
    SampleFilter::parse_list(s).map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.mode {
        cfg.analysis.mode = m;
    }
    if let Some(f) = cli.filters {
        cfg.filters = f;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    SampleFilter::parse_list(&cfg.filters)?;
    std::fs::create_dir_all(&cfg.out)?;

    match cli.command {
        Command::Simulate { agents, waves, depth } => {
            if let Some(a) = agents {
                cfg.population.count = a;
            }
            if let Some(w) = waves {
                cfg.population.waves = w;
            }
            if let Some(d) = depth {
                cfg.simulation.depth = d;
            }
            commands::simulate(cfg)
        }
        Command::ElicitServe { addr, log, deterministic } => {
            if let Some(a) = addr {
                cfg.service.addr = a;
            }
            if let Some(l) = log {
                cfg.service.log = l;
            }
            commands::elicit_serve(cfg, deterministic)
        }
        Command::Estimate { transcripts, truth } => commands::estimate(cfg, transcripts, truth),
        Command::Analyze { data } => commands::analyze(cfg, data),
        Command::Tables { data } => commands::tables(cfg, data),
        Command::Attenuation { repetitions, n } => {
            if let Some(r) = repetitions {
                cfg.attenuation.repetitions = r;
            }
            if let Some(n) = n {
                cfg.attenuation.n = n;
            }
            commands::attenuation(cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
