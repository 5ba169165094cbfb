//! Command-line driver for the curation pipeline: one subcommand per stage,
//! layered configuration and a run journal that skips repeated work.

pub mod config;
pub mod error;
pub mod features;
pub mod fixture;
pub mod io;
pub mod journal;
pub mod stages;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::*;
use error::CliError;
use journal::Ran;
use stages::Context;

#[derive(Debug, Parser)]
#[command(name = "vidcurate", version, about = "Video-text corpus curation pipeline")]
pub struct Cli {
    /// TOML file with a top-level seed and one section per stage
    #[arg(long, global = true, env = "VIDCURATE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Run journal; completed identical runs are skipped
    #[arg(long, global = true, env = "VIDCURATE_JOURNAL")]
    pub journal: Option<PathBuf>,
    /// Top-level seed from which stage seeds are split [default: 0]
    #[arg(long, global = true, env = "VIDCURATE_PIPELINE_SEED")]
    pub pipeline_seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut videos into clips and filter them by motion and length
    Segment(SegmentOptions),
    /// Caption clips at two temporal scales through external services
    Caption(CaptionOptions),
    /// Write the stand-in feature sidecar for captioned clips
    Features(FeaturesOptions),
    /// Attach aesthetic and video-text similarity scores
    Score(ScoreOptions),
    /// Select a clip subset
    Sample(SampleOptions),
    /// Build interleaved video-text sequences
    Interleave(InterleaveOptions),
    /// Corpus statistics report
    Stats(StatsOptions),
    /// Train the toy contrastive aligner on a matrix file
    AlignTrain(AlignTrainOptions),
    /// Retrieval metrics for a similarity matrix
    Eval(EvalOptions),
    /// Write a synthetic corpus with signature streams
    Fixture(FixtureOptions),
}

/// Runs one command; returns the line to print on success.
pub fn run(cli: Cli) -> Result<String, CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let ctx = Context { journal: cli.journal, seed: cli.pipeline_seed.or(file.seed).unwrap_or(0) };
    let ran = match cli.command {
        Command::Segment(o) => stages::segment(o.or(file.segment), &ctx)?,
        Command::Caption(o) => stages::caption(o.or(file.caption), &ctx)?,
        Command::Features(o) => stages::features(o.or(file.features), &ctx)?,
        Command::Score(o) => stages::score(o.or(file.score), &ctx)?,
        Command::Sample(o) => stages::sample_stage(o.or(file.sample), &ctx)?,
        Command::Interleave(o) => stages::interleave(o.or(file.interleave), &ctx)?,
        Command::Stats(o) => stages::stats(o.or(file.stats), &ctx)?,
        Command::AlignTrain(o) => stages::align_train(o.or(file.align_train), &ctx)?,
        Command::Eval(o) => return stages::eval(o.or(file.eval), &ctx).map(|(_, line)| line),
        Command::Fixture(o) => return stages::fixture(o.or(file.fixture), &ctx),
    };
    Ok(match ran {
        Ran::Done(summary) => summary,
        Ran::Skipped => "skipped: identical run already journaled".into(),
    })
}
