//! Stage settings from flags, environment and a TOML file.
//!
//! Every setting can come from a `--flag`, a `VIDCURATE_<STAGE>_<KEY>`
//! environment variable or a key in the stage's section of the file given by
//! `--config`. The first source that has a value wins, in that order, and
//! built-in defaults fill the rest:
//!
//! ```toml
//! seed = 7
//!
//! [sample]
//! strategy = "flt"
//! n = 8
//! ```
//!
//! Stage seeds default to the top-level seed split per stage.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

macro_rules! stage_options {
    ($(#[$doc:meta])* $name:ident { $( $field:ident : $ty:ty => $env:literal, $help:literal; )* }) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            $(
                #[doc = $help]
                #[arg(long, env = $env)]
                pub $field: Option<$ty>,
            )*
        }

        impl $name {
            /// Fills fields missing here from `fallback`.
            pub fn or(self, fallback: $name) -> $name {
                $name { $( $field: self.$field.or(fallback.$field), )* }
            }
        }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Random,
    Div,
    Flt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    A,
    B,
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CanonicalArg {
    FineSummary,
    Coarse,
}

stage_options!(SegmentOptions {
    manifest: PathBuf => "VIDCURATE_SEGMENT_MANIFEST", "Input manifest with video records";
    signatures: PathBuf => "VIDCURATE_SEGMENT_SIGNATURES", "Directory holding <video_id>.sig files";
    out: PathBuf => "VIDCURATE_SEGMENT_OUT", "Output manifest";
    cut_threshold: f64 => "VIDCURATE_SEGMENT_CUT_THRESHOLD", "Content delta above which a cut is placed [default: 27]";
    min_scene_frames: usize => "VIDCURATE_SEGMENT_MIN_SCENE_FRAMES", "Minimum frames between cuts [default: 15]";
    min_clip_s: f64 => "VIDCURATE_SEGMENT_MIN_CLIP_S", "Shortest kept clip in seconds [default: 2]";
    still_threshold: f64 => "VIDCURATE_SEGMENT_STILL_THRESHOLD", "Mean delta below which a clip is still [default: 1]";
    extreme_threshold: f64 => "VIDCURATE_SEGMENT_EXTREME_THRESHOLD", "Mean delta above which a clip is too dynamic [default: 80]";
});

stage_options!(CaptionOptions {
    manifest: PathBuf => "VIDCURATE_CAPTION_MANIFEST", "Input manifest";
    out: PathBuf => "VIDCURATE_CAPTION_OUT", "Output manifest";
    fine_fps: f64 => "VIDCURATE_CAPTION_FINE_FPS", "Frame rate of fine-scale captions [default: 1]";
    endpoint_fine: String => "VIDCURATE_CAPTION_ENDPOINT_FINE", "Frame captioner endpoint (http(s):// or stub://name)";
    endpoint_sum: String => "VIDCURATE_CAPTION_ENDPOINT_SUM", "Summarizer endpoint";
    endpoint_coarse: String => "VIDCURATE_CAPTION_ENDPOINT_COARSE", "Middle-frame captioner endpoint";
    timeout_ms: u64 => "VIDCURATE_CAPTION_TIMEOUT_MS", "Per-request timeout [default: 30000]";
    max_retries: u32 => "VIDCURATE_CAPTION_MAX_RETRIES", "Retries after the first attempt [default: 3]";
    backoff_base_ms: u64 => "VIDCURATE_CAPTION_BACKOFF_BASE_MS", "Wait before the first retry, doubled each retry [default: 200]";
    max_in_flight: usize => "VIDCURATE_CAPTION_MAX_IN_FLIGHT", "Concurrent requests per service [default: 8]";
    canonical: CanonicalArg => "VIDCURATE_CAPTION_CANONICAL", "Scale used for the clip caption [default: fine-summary]";
    summary_prompt: PathBuf => "VIDCURATE_CAPTION_SUMMARY_PROMPT", "File with the summarizer prompt [default: built in]";
});

stage_options!(FeaturesOptions {
    manifest: PathBuf => "VIDCURATE_FEATURES_MANIFEST", "Input manifest with captioned clips";
    out: PathBuf => "VIDCURATE_FEATURES_OUT", "Output sidecar (JSON lines)";
    dim: usize => "VIDCURATE_FEATURES_DIM", "Embedding width [default: 16]";
    frames: usize => "VIDCURATE_FEATURES_FRAMES", "Frames per clip [default: 8]";
    seed: u64 => "VIDCURATE_FEATURES_SEED", "Seed [default: split from the top-level seed]";
});

stage_options!(ScoreOptions {
    manifest: PathBuf => "VIDCURATE_SCORE_MANIFEST", "Input manifest";
    features: PathBuf => "VIDCURATE_SCORE_FEATURES", "Sidecar with frame scores and embeddings";
    out: PathBuf => "VIDCURATE_SCORE_OUT", "Output manifest";
});

stage_options!(SampleOptions {
    manifest: PathBuf => "VIDCURATE_SAMPLE_MANIFEST", "Input manifest";
    out: PathBuf => "VIDCURATE_SAMPLE_OUT", "Output subset manifest";
    strategy: StrategyArg => "VIDCURATE_SAMPLE_STRATEGY", "Sampling strategy [default: random]";
    n: usize => "VIDCURATE_SAMPLE_N", "Number of clips";
    seed: u64 => "VIDCURATE_SAMPLE_SEED", "Seed [default: split from the top-level seed]";
    top_fraction: f64 => "VIDCURATE_SAMPLE_TOP_FRACTION", "Fraction of clips kept by the similarity filter [default: 0.3]";
});

stage_options!(InterleaveOptions {
    manifest: PathBuf => "VIDCURATE_INTERLEAVE_MANIFEST", "Input manifest with captioned clips";
    out: PathBuf => "VIDCURATE_INTERLEAVE_OUT", "Output sequence file (JSON lines)";
    format: FormatArg => "VIDCURATE_INTERLEAVE_FORMAT", "Sequence format [default: a]";
    drop_prob: f64 => "VIDCURATE_INTERLEAVE_DROP_PROB", "Probability of dropping a video reference [default: 0.3]";
    seed: u64 => "VIDCURATE_INTERLEAVE_SEED", "Seed [default: split from the top-level seed]";
});

stage_options!(StatsOptions {
    manifest: PathBuf => "VIDCURATE_STATS_MANIFEST", "Input manifest";
    out: PathBuf => "VIDCURATE_STATS_OUT", "Report path ending in .json or .txt";
    tagger_table: PathBuf => "VIDCURATE_STATS_TAGGER_TABLE", "Tab-separated word/tag table from an external tagger";
});

stage_options!(AlignTrainOptions {
    pairs: PathBuf => "VIDCURATE_ALIGN_TRAIN_PAIRS", "Matrix file with the video block then the text block";
    out: PathBuf => "VIDCURATE_ALIGN_TRAIN_OUT", "Output matrix file (Wv, Wt, loss curve, tau)";
    steps: usize => "VIDCURATE_ALIGN_TRAIN_STEPS", "Gradient steps [default: 500]";
    lr: f64 => "VIDCURATE_ALIGN_TRAIN_LR", "Learning rate [default: 4e-6]";
    mask_ratio: f64 => "VIDCURATE_ALIGN_TRAIN_MASK_RATIO", "Fraction of input dimensions dropped per sample [default: 0]";
    unmasked_tail: f64 => "VIDCURATE_ALIGN_TRAIN_UNMASKED_TAIL", "Fraction of final steps trained without masking [default: 0]";
    proj_dim: usize => "VIDCURATE_ALIGN_TRAIN_PROJ_DIM", "Projection width [default: 512]";
    seed: u64 => "VIDCURATE_ALIGN_TRAIN_SEED", "Seed [default: split from the top-level seed]";
});

stage_options!(EvalOptions {
    sim: PathBuf => "VIDCURATE_EVAL_SIM", "Similarity matrix file";
    metric: String => "VIDCURATE_EVAL_METRIC", "r@<k>, topk or avg";
    k: usize => "VIDCURATE_EVAL_K", "k for topk [default: 1]";
    labels: PathBuf => "VIDCURATE_EVAL_LABELS", "Whitespace-separated target column per row [default: diagonal]";
    out: PathBuf => "VIDCURATE_EVAL_OUT", "Also write the result here";
});

stage_options!(FixtureOptions {
    out: PathBuf => "VIDCURATE_FIXTURE_OUT", "Output directory";
    videos: usize => "VIDCURATE_FIXTURE_VIDEOS", "Number of videos [default: 20]";
    seed: u64 => "VIDCURATE_FIXTURE_SEED", "Seed [default: split from the top-level seed]";
});

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub segment: SegmentOptions,
    pub caption: CaptionOptions,
    pub features: FeaturesOptions,
    pub score: ScoreOptions,
    pub sample: SampleOptions,
    pub interleave: InterleaveOptions,
    pub stats: StatsOptions,
    pub align_train: AlignTrainOptions,
    pub eval: EvalOptions,
    pub fixture: FixtureOptions,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        FileConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<FileConfig, toml::de::Error> {
        toml::from_str(text)
    }
}

pub fn require<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Config(format!("--{flag} is required (flag, environment or config file)")))
}
