//! Command-line front end for the pipeline stages.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use super::{Pipeline, RunConfig, Stage};
use crate::error::{MtlError, Result};
use crate::sourcemodel::SourceKind;

pub const DEFAULT_OUT: &str = "mtl-out";

#[derive(Debug, Parser)]
#[command(name = "mtl", version, about = "Meta transfer learning for lake temperature models")]
pub struct Cli {
    /// TOML run configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// global seed (overrides the config)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// worker threads (default: available parallelism)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// output directory (default: $MTL_OUT, then ./mtl-out)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// 145 sources, 305 targets and the published metamodel grid
    #[arg(long, global = true)]
    pub paper_scale: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Source and target populations with drivers and observations
    Synth,
    /// PB0 temperature fields for every lake
    Simulate,
    /// PB calibration and PGDL training for each source lake
    TrainSources,
    /// All-pairs transfer matrices for both model families
    Matrix,
    /// Metamodels and the ensemble size
    TrainMeta,
    /// Rank source models for one lake
    Rank {
        target_id: String,
        #[arg(long, default_value = "pgdl")]
        family: String,
    },
    /// Transfer to unmonitored targets
    Exp1,
    /// Sparse-data PGDL training
    Exp2,
    /// Transfer to a larger synthetic target population
    Expand,
    /// Combine experiment summaries
    Report,
    /// Every stage in order
    All,
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, cli.seed) {
        (Some(p), seed) => {
            let mut c = RunConfig::load(p)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            c
        }
        (None, Some(s)) => RunConfig::desk(s),
        (None, None) => return Err(MtlError::Config("seed is mandatory: pass --config or --seed".into())),
    };
    if cli.paper_scale {
        cfg = cfg.paper_scale();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn resolve_out(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.out.clone())
        .or_else(|| std::env::var_os("MTL_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

pub fn execute(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(cli)?;
    let out = resolve_out(cli, &cfg);
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let p = Pipeline::new(cfg, &out, workers)?;
    let stage = match &cli.command {
        Command::Rank { target_id, family } => {
            let family: SourceKind = family.parse()?;
            let ranked = p.rank(target_id, family)?;
            let mut text = String::from("rank\tsource_id\tpredicted_rmse\n");
            for s in &ranked.sources {
                text.push_str(&format!("{}\t{}\t{:.4}\n", s.rank, s.source_id, s.predicted_rmse));
            }
            return Ok(text);
        }
        Command::All => {
            p.run_all()?;
            return Ok(format!("all stages complete in {} (config {})\n", out.display(), p.config_hash()));
        }
        Command::Synth => Stage::Synth,
        Command::Simulate => Stage::Simulate,
        Command::TrainSources => Stage::TrainSources,
        Command::Matrix => Stage::Matrix,
        Command::TrainMeta => Stage::TrainMeta,
        Command::Exp1 => Stage::Exp1,
        Command::Exp2 => Stage::Exp2,
        Command::Expand => Stage::Expand,
        Command::Report => Stage::Report,
    };
    p.run(stage)?;
    Ok(format!("{} complete in {} (config {})\n", stage.name(), out.display(), p.config_hash()))
}

/// Parse arguments, run, and return the process exit code. Failures print
/// one line, `error: <code>: <message>`, on stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ").to_string();
            eprintln!("error: usage: {first}");
            return 2;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            let msg = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
            let code = e.code();
            let msg = msg.strip_prefix(&format!("{code} error: ")).unwrap_or(&msg);
            eprintln!("error: {code}: {msg}");
            1
        }
    }
}
