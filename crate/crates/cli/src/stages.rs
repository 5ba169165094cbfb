//! One function per pipeline stage. Each reads its inputs, never modifies
//! them, and writes a single output file atomically.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use vidcurate_align::matrix::{read_matrices, write_matrix};
use vidcurate_align::{
    avg_top1_top5, recall_at_k, topk_accuracy, train_alignment, AlignTrainConfig, EmbeddingBatch,
};
use vidcurate_caption::{
    caption_clips, CanonicalSource, CaptionError, CaptionPlan, CaptionServiceSpec, CaptionServices, ClipFrames,
    DEFAULT_SUMMARY_PROMPT,
};
use vidcurate_core::corpus::overlap_asr;
use vidcurate_core::interleave::{build_format_a, build_format_b, build_format_c, InterleavedSequence};
use vidcurate_core::keyed::split_seed;
use vidcurate_core::sample::{sample, Durations, SampleError, Strategy, SubsetSpec};
use vidcurate_core::score::{score_clip, ClipFeatures};
use vidcurate_core::segment::{segment_video, SegmenterConfig, Verdict};
use vidcurate_core::signature::{signature_path, SignatureError, SignatureStream};
use vidcurate_core::stats::corpus_report;
use vidcurate_core::tagger::{LexiconTagger, PosTagger, TableTagger};
use vidcurate_core::{ClipRecord, Manifest, Millis, Record, ValidationPolicy, VideoRecord};

use crate::config::*;
use crate::error::{manifest_error, CliError};
use crate::features::{clip_features, DEFAULT_DIM, DEFAULT_FRAMES};
use crate::io::{read_input, write_atomic};
use crate::journal::{journaled, Ran, StageRun};

/// Settings shared by all stages.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub journal: Option<PathBuf>,
    pub seed: u64,
}

impl Context {
    fn stage_seed(&self, explicit: Option<u64>, stage: &str) -> u64 {
        explicit.unwrap_or_else(|| split_seed(self.seed, stage))
    }
}

fn config_json<T: Serialize>(settings: &T) -> serde_json::Value {
    serde_json::to_value(settings).expect("settings serialize")
}

fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    if !path.exists() {
        return Err(CliError::MissingInput(path.to_path_buf()));
    }
    Manifest::load(path, &ValidationPolicy::default()).map_err(|e| manifest_error(path, e))
}

fn write_manifest(path: &Path, manifest: &Manifest) -> Result<(), CliError> {
    // Outputs must satisfy the same rules as inputs.
    let text = manifest.to_text();
    Manifest::read_from(text.as_bytes(), &ValidationPolicy::default()).map_err(|e| manifest_error(path, e))?;
    write_atomic(path, text.as_bytes())
}

fn video_index(manifest: &Manifest) -> HashMap<String, VideoRecord> {
    manifest.videos().map(|v| (v.video_id.clone(), v.clone())).collect()
}

fn check_fraction(name: &str, x: f64, lo_open: bool) -> Result<(), CliError> {
    let ok = if lo_open { x > 0.0 && x <= 1.0 } else { (0.0..=1.0).contains(&x) };
    if ok {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} = {x} is out of range")))
    }
}

// ---------------------------------------------------------------- segment

pub fn segment(opts: SegmentOptions, ctx: &Context) -> Result<Ran, CliError> {
    let d = SegmenterConfig::default();
    let s = opts.or(SegmentOptions {
        cut_threshold: Some(d.cut_threshold),
        min_scene_frames: Some(d.min_scene_frames),
        min_clip_s: Some(d.min_clip.as_secs_f64()),
        still_threshold: Some(d.still_threshold),
        extreme_threshold: Some(d.extreme_threshold),
        ..Default::default()
    });
    let manifest_path = require(s.manifest.clone(), "manifest")?;
    let sig_dir = require(s.signatures.clone(), "signatures")?;
    let out = require(s.out.clone(), "out")?;
    let cfg = SegmenterConfig {
        cut_threshold: s.cut_threshold.unwrap_or(d.cut_threshold),
        min_scene_frames: s.min_scene_frames.unwrap_or(d.min_scene_frames),
        min_clip: Millis::from_secs_f64(s.min_clip_s.unwrap_or(2.0)),
        still_threshold: s.still_threshold.unwrap_or(d.still_threshold),
        extreme_threshold: s.extreme_threshold.unwrap_or(d.extreme_threshold),
    };
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let manifest = load_manifest(&manifest_path)?;
    let mut inputs = vec![manifest_path.clone()];
    inputs.extend(manifest.videos().map(|v| signature_path(&sig_dir, &v.video_id)));
    let run = StageRun { stage: "segment", config: config_json(&s), inputs, output: out.clone() };
    journaled(ctx.journal.as_deref(), run, || {
        let videos: Vec<&VideoRecord> = manifest.videos().collect();
        let per_video: Vec<Result<Segmented, CliError>> =
            videos.par_iter().map(|v| segment_one(v, &sig_dir, &cfg)).collect();
        let mut problems = Vec::new();
        let mut records = Vec::new();
        let mut tally = [0usize; 4];
        for (v, r) in videos.iter().zip(per_video) {
            match r {
                Ok((clips, counts)) => {
                    records.push(Record::Video((*v).clone()));
                    records.extend(clips.into_iter().map(Record::Clip));
                    tally.iter_mut().zip(counts).for_each(|(t, c)| *t += c);
                }
                Err(CliError::Validation { problems: p, .. }) => problems.extend(p),
                Err(e) => return Err(e),
            }
        }
        if !problems.is_empty() {
            return Err(CliError::validation("signature streams", problems));
        }
        let dropped = manifest.clips().count();
        let out_manifest = Manifest { records, ..manifest.clone() };
        write_manifest(&out, &out_manifest)?;
        let mut summary = format!(
            "segment: {} videos, {} clips kept; rejected {} still, {} extreme, {} short",
            videos.len(),
            tally[0],
            tally[1],
            tally[2],
            tally[3]
        );
        if dropped > 0 {
            summary.push_str(&format!("; replaced {dropped} existing clips"));
        }
        Ok(summary)
    })
}

/// Kept clips plus verdict counts (keep, still, extreme, short).
type Segmented = (Vec<ClipRecord>, [usize; 4]);

fn segment_one(v: &VideoRecord, dir: &Path, cfg: &SegmenterConfig) -> Result<Segmented, CliError> {
    let path = signature_path(dir, &v.video_id);
    let problem = |msg: String| CliError::validation("signature", vec![format!("{}: {msg}", v.video_id)]);
    let stream = SignatureStream::load(&path).map_err(|e| match e {
        SignatureError::Io(io) if io.kind() == std::io::ErrorKind::NotFound => CliError::MissingInput(path.clone()),
        other => problem(format!("{}: {other}", path.display())),
    })?;
    if stream.fps != v.fps {
        return Err(problem(format!("signature fps {} differs from video fps {}", stream.fps, v.fps)));
    }
    let intervals = segment_video(stream.frames, stream.fps, cfg).map_err(|e| problem(e.to_string()))?;
    if let Some(last) = intervals.last() {
        if last.end > v.duration {
            return Err(problem(format!("signature stream ends at {} s, after the video ({} s)", last.end, v.duration)));
        }
    }
    let mut counts = [0usize; 4];
    let mut clips = Vec::new();
    for iv in intervals {
        let slot = match iv.verdict {
            Verdict::Keep => 0,
            Verdict::RejectStill => 1,
            Verdict::RejectExtreme => 2,
            Verdict::RejectShort => 3,
        };
        counts[slot] += 1;
        if iv.verdict == Verdict::Keep {
            let mut c = ClipRecord::new(&v.video_id, iv.start, iv.end);
            let asr = overlap_asr(&c, &v.asr_segments);
            c.asr_text = (!asr.is_empty()).then_some(asr);
            clips.push(c);
        }
    }
    Ok((clips, counts))
}

// ---------------------------------------------------------------- caption

pub fn caption(opts: CaptionOptions, ctx: &Context) -> Result<Ran, CliError> {
    let d = CaptionServiceSpec::default();
    let s = opts.or(CaptionOptions {
        fine_fps: Some(1.0),
        timeout_ms: Some(d.timeout_ms),
        max_retries: Some(d.max_retries),
        backoff_base_ms: Some(d.backoff_base_ms),
        max_in_flight: Some(d.max_in_flight),
        canonical: Some(CanonicalArg::FineSummary),
        ..Default::default()
    });
    let manifest_path = require(s.manifest.clone(), "manifest")?;
    let out = require(s.out.clone(), "out")?;
    let spec = |endpoint: String| CaptionServiceSpec {
        endpoint,
        timeout_ms: s.timeout_ms.unwrap_or(d.timeout_ms),
        max_retries: s.max_retries.unwrap_or(d.max_retries),
        backoff_base_ms: s.backoff_base_ms.unwrap_or(d.backoff_base_ms),
        max_in_flight: s.max_in_flight.unwrap_or(d.max_in_flight),
    };
    let services = CaptionServices::from_specs(
        spec(require(s.endpoint_fine.clone(), "endpoint-fine")?),
        spec(require(s.endpoint_sum.clone(), "endpoint-sum")?),
        spec(require(s.endpoint_coarse.clone(), "endpoint-coarse")?),
    )
    .map_err(CliError::Config)?;
    let summary_prompt = match &s.summary_prompt {
        Some(p) => String::from_utf8_lossy(&read_input(p)?).into_owned(),
        None => DEFAULT_SUMMARY_PROMPT.to_string(),
    };
    let plan = CaptionPlan {
        fine_fps: s.fine_fps.unwrap_or(1.0),
        canonical_source: match s.canonical {
            Some(CanonicalArg::Coarse) => CanonicalSource::Coarse,
            _ => CanonicalSource::FineSummary,
        },
        summary_prompt,
    };
    if !(plan.fine_fps.is_finite() && plan.fine_fps > 0.0) {
        return Err(CliError::Config(format!("fine_fps = {} must be positive", plan.fine_fps)));
    }
    let manifest = load_manifest(&manifest_path)?;
    let mut inputs = vec![manifest_path.clone()];
    inputs.extend(s.summary_prompt.clone());
    let run = StageRun { stage: "caption", config: config_json(&s), inputs, output: out.clone() };
    journaled(ctx.journal.as_deref(), run, || {
        let videos = video_index(&manifest);
        let jobs: Vec<(ClipRecord, ClipFrames)> = manifest
            .clips()
            .map(|c| {
                let fps = videos[&c.video_id].fps;
                (c.clone(), ClipFrames::for_clip(c, fps))
            })
            .collect();
        let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
        let results = runtime.block_on(caption_clips(jobs, &services, &plan));
        let mut by_id: HashMap<String, ClipRecord> = HashMap::new();
        let mut failures = Vec::new();
        for r in results {
            match r {
                Ok(c) => {
                    by_id.insert(c.clip_id.clone(), c);
                }
                Err(CaptionError::Partial(p)) => {
                    failures.push(format!("{}: {:?} scale failed after {} attempts: {}", p.clip.clip_id, p.failed, p.failure.attempts, p.failure.last));
                    by_id.insert(p.clip.clip_id.clone(), p.clip);
                }
                Err(e) => failures.push(e.to_string()),
            }
        }
        let n = by_id.len();
        let records = manifest
            .records
            .iter()
            .map(|r| match r {
                Record::Clip(c) => Record::Clip(by_id.remove(&c.clip_id).unwrap_or_else(|| c.clone())),
                other => other.clone(),
            })
            .collect();
        write_manifest(&out, &Manifest { records, ..manifest.clone() })?;
        if !failures.is_empty() {
            return Err(CliError::Service(failures));
        }
        Ok(format!("caption: {n} clips captioned"))
    })
}

// ---------------------------------------------------------------- features

pub fn features(opts: FeaturesOptions, ctx: &Context) -> Result<Ran, CliError> {
    let mut s = opts.or(FeaturesOptions { dim: Some(DEFAULT_DIM), frames: Some(DEFAULT_FRAMES), ..Default::default() });
    s.seed = Some(ctx.stage_seed(s.seed, "features"));
    let manifest_path = require(s.manifest.clone(), "manifest")?;
    let out = require(s.out.clone(), "out")?;
    let (dim, frames, seed) = (s.dim.unwrap_or(DEFAULT_DIM), s.frames.unwrap_or(DEFAULT_FRAMES), s.seed.unwrap_or(0));
    if dim == 0 || frames == 0 {
        return Err(CliError::Config("dim and frames must be positive".into()));
    }
    let manifest = load_manifest(&manifest_path)?;
    let run = StageRun { stage: "features", config: config_json(&s), inputs: vec![manifest_path], output: out.clone() };
    journaled(ctx.journal.as_deref(), run, || {
        let mut text = String::new();
        let mut n = 0;
        for c in manifest.clips() {
            text.push_str(&serde_json::to_string(&clip_features(c, dim, frames, seed)).expect("features serialize"));
            text.push('\n');
            n += 1;
        }
        write_atomic(&out, text.as_bytes())?;
        Ok(format!("features: {n} clips"))
    })
}

// ---------------------------------------------------------------- score

pub fn score(opts: ScoreOptions, ctx: &Context) -> Result<Ran, CliError> {
    let manifest_path = require(opts.manifest.clone(), "manifest")?;
    let features_path = require(opts.features.clone(), "features")?;
    let out = require(opts.out.clone(), "out")?;
    let manifest = load_manifest(&manifest_path)?;
    let run = StageRun {
        stage: "score",
        config: config_json(&opts),
        inputs: vec![manifest_path, features_path.clone()],
        output: out.clone(),
    };
    journaled(ctx.journal.as_deref(), run, || {
        let text = String::from_utf8(read_input(&features_path)?)
            .map_err(|_| CliError::validation("features sidecar", vec!["not UTF-8".into()]))?;
        let mut features: HashMap<String, ClipFeatures> = HashMap::new();
        let mut problems = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            match serde_json::from_str::<ClipFeatures>(line) {
                Ok(f) => {
                    if let Some(old) = features.insert(f.clip_id.clone(), f) {
                        problems.push(format!("line {}: duplicate clip {}", i + 1, old.clip_id));
                    }
                }
                Err(e) => problems.push(format!("line {}: {e}", i + 1)),
            }
        }
        let mut records = Vec::with_capacity(manifest.records.len());
        for r in &manifest.records {
            match r {
                Record::Clip(c) => {
                    let mut c = c.clone();
                    match features.get(&c.clip_id).map(score_clip) {
                        Some(Ok(s)) => c.scores = Some(s),
                        Some(Err(e)) => problems.push(format!("{}: {e}", c.clip_id)),
                        None => problems.push(format!("{}: no features", c.clip_id)),
                    }
                    records.push(Record::Clip(c));
                }
                other => records.push(other.clone()),
            }
        }
        if !problems.is_empty() {
            return Err(CliError::validation("features sidecar", problems));
        }
        let n = manifest.clips().count();
        write_manifest(&out, &Manifest { records, ..manifest.clone() })?;
        Ok(format!("score: {n} clips scored"))
    })
}

// ---------------------------------------------------------------- sample

pub fn sample_stage(opts: SampleOptions, ctx: &Context) -> Result<Ran, CliError> {
    let mut s = opts.or(SampleOptions {
        strategy: Some(StrategyArg::Random),
        top_fraction: Some(vidcurate_core::sample::DEFAULT_TOP_FRACTION),
        ..Default::default()
    });
    s.seed = Some(ctx.stage_seed(s.seed, "sample"));
    let manifest_path = require(s.manifest.clone(), "manifest")?;
    let out = require(s.out.clone(), "out")?;
    let n = require(s.n, "n")?;
    let top_fraction = s.top_fraction.unwrap_or(0.3);
    check_fraction("top_fraction", top_fraction, true)?;
    let strategy = match s.strategy.unwrap_or(StrategyArg::Random) {
        StrategyArg::Random => Strategy::Random,
        StrategyArg::Div => Strategy::Div,
        StrategyArg::Flt => Strategy::Flt,
    };
    let spec = SubsetSpec { strategy, n, seed: s.seed.unwrap_or(0), top_fraction };
    let manifest = load_manifest(&manifest_path)?;
    let run = StageRun { stage: "sample", config: config_json(&s), inputs: vec![manifest_path], output: out.clone() };
    journaled(ctx.journal.as_deref(), run, || {
        let durations: Durations = manifest.videos().map(|v| (v.video_id.clone(), v.duration)).collect();
        let clips: Vec<ClipRecord> = manifest.clips().cloned().collect();
        let picked = sample(&clips, &durations, &spec).map_err(|e| match e {
            SampleError::BadFraction(_) => CliError::Config(e.to_string()),
            other => CliError::validation("sample input", vec![other.to_string()]),
        })?;
        let ids: HashSet<&str> = picked.iter().map(|c| c.clip_id.as_str()).collect();
        let used: HashSet<&str> = picked.iter().map(|c| c.video_id.as_str()).collect();
        let records: Vec<Record> = manifest
            .records
            .iter()
            .filter(|r| match r {
                Record::Video(v) => used.contains(v.video_id.as_str()),
                Record::Clip(c) => ids.contains(c.clip_id.as_str()),
            })
            .cloned()
            .collect();
        write_manifest(&out, &Manifest { records, ..manifest.clone() })?;
        Ok(format!("sample: {} of {} clips from {} videos", picked.len(), clips.len(), used.len()))
    })
}

// ---------------------------------------------------------------- interleave

pub fn interleave(opts: InterleaveOptions, ctx: &Context) -> Result<Ran, CliError> {
    let mut s = opts.or(InterleaveOptions {
        format: Some(FormatArg::A),
        drop_prob: Some(vidcurate_core::interleave::DEFAULT_DROP_PROB),
        ..Default::default()
    });
    s.seed = Some(ctx.stage_seed(s.seed, "interleave"));
    let manifest_path = require(s.manifest.clone(), "manifest")?;
    let out = require(s.out.clone(), "out")?;
    let drop_prob = s.drop_prob.unwrap_or(0.3);
    check_fraction("drop_prob", drop_prob, false)?;
    let (format, seed) = (s.format.unwrap_or(FormatArg::A), s.seed.unwrap_or(0));
    let manifest = load_manifest(&manifest_path)?;
    let run = StageRun { stage: "interleave", config: config_json(&s), inputs: vec![manifest_path], output: out.clone() };
    journaled(ctx.journal.as_deref(), run, || {
        let mut per_video: Vec<(String, Vec<ClipRecord>)> =
            manifest.videos().map(|v| (v.video_id.clone(), Vec::new())).collect();
        let slot: HashMap<String, usize> = per_video.iter().enumerate().map(|(i, (id, _))| (id.clone(), i)).collect();
        let mut problems = Vec::new();
        for c in manifest.clips() {
            if c.caption.is_none() {
                problems.push(format!("{}: no caption", c.clip_id));
            }
            per_video[slot[&c.video_id]].1.push(c.clone());
        }
        if !problems.is_empty() {
            return Err(CliError::validation("interleave input", problems));
        }
        per_video.retain(|(_, clips)| !clips.is_empty());
        let build = |clips: &[ClipRecord], b: bool| {
            if b { build_format_b(clips, drop_prob, seed) } else { build_format_a(clips, drop_prob, seed) }
                .map_err(|e| CliError::validation("interleave input", vec![e.to_string()]))
        };
        let mut seqs: Vec<InterleavedSequence> = Vec::new();
        match format {
            FormatArg::A | FormatArg::B => {
                for (_, clips) in &per_video {
                    seqs.push(build(clips, format == FormatArg::B)?);
                }
            }
            FormatArg::C => {
                for pair in per_video.chunks_exact(2) {
                    let first = build(&pair[0].1, false)?;
                    let second = build(&pair[1].1, false)?;
                    seqs.push(
                        build_format_c(&first, &second)
                            .map_err(|e| CliError::validation("interleave input", vec![e.to_string()]))?,
                    );
                }
            }
        }
        let mut text = String::new();
        for sq in &seqs {
            text.push_str(&sq.to_line());
            text.push('\n');
        }
        write_atomic(&out, text.as_bytes())?;
        let refs: usize = seqs.iter().map(InterleavedSequence::video_refs).sum();
        Ok(format!("interleave: {} sequences, {refs} video references", seqs.len()))
    })
}

// ---------------------------------------------------------------- stats

pub fn stats(opts: StatsOptions, ctx: &Context) -> Result<Ran, CliError> {
    let manifest_path = require(opts.manifest.clone(), "manifest")?;
    let out = require(opts.out.clone(), "out")?;
    let json = match out.extension().and_then(|e| e.to_str()) {
        Some("json") => true,
        Some("txt") => false,
        _ => return Err(CliError::Config(format!("report path {} must end in .json or .txt", out.display()))),
    };
    let tagger: Box<dyn PosTagger> = match &opts.tagger_table {
        Some(p) => Box::new(TableTagger::read_from(read_input(p)?.as_slice())?),
        None => Box::new(LexiconTagger::default()),
    };
    let manifest = load_manifest(&manifest_path)?;
    let mut inputs = vec![manifest_path];
    inputs.extend(opts.tagger_table.clone());
    let run = StageRun { stage: "stats", config: config_json(&opts), inputs, output: out.clone() };
    journaled(ctx.journal.as_deref(), run, || {
        let report = corpus_report(&manifest, tagger.as_ref());
        let text = if json { report.to_json() } else { report.to_text() };
        write_atomic(&out, text.as_bytes())?;
        Ok(format!("stats: {} clips, {} unique verbs", report.clips, report.unique_verbs))
    })
}

// ---------------------------------------------------------------- align-train

fn read_matrix_file(path: &Path) -> Result<Vec<ndarray::Array2<f64>>, CliError> {
    read_matrices(read_input(path)?.as_slice())
        .map_err(|e| CliError::validation(format!("matrix file {}", path.display()), vec![e.to_string()]))
}

pub fn align_train(opts: AlignTrainOptions, ctx: &Context) -> Result<Ran, CliError> {
    let d = AlignTrainConfig::default();
    let mut s = opts.or(AlignTrainOptions {
        steps: Some(d.steps),
        lr: Some(d.learning_rate),
        mask_ratio: Some(d.mask_ratio),
        unmasked_tail: Some(d.unmasked_tail_fraction),
        proj_dim: Some(d.proj_dim),
        ..Default::default()
    });
    s.seed = Some(ctx.stage_seed(s.seed, "align-train"));
    let pairs = require(s.pairs.clone(), "pairs")?;
    let out = require(s.out.clone(), "out")?;
    let cfg = AlignTrainConfig {
        steps: s.steps.unwrap_or(d.steps),
        learning_rate: s.lr.unwrap_or(d.learning_rate),
        mask_ratio: s.mask_ratio.unwrap_or(0.0),
        unmasked_tail_fraction: s.unmasked_tail.unwrap_or(0.0),
        seed: s.seed.unwrap_or(0),
        proj_dim: s.proj_dim.unwrap_or(d.proj_dim),
    };
    let run = StageRun { stage: "align-train", config: config_json(&s), inputs: vec![pairs.clone()], output: out.clone() };
    journaled(ctx.journal.as_deref(), run, || {
        let blocks = read_matrix_file(&pairs)?;
        let [v, t]: [ndarray::Array2<f64>; 2] = blocks.try_into().map_err(|b: Vec<_>| {
            CliError::validation("pairs file", vec![format!("expected 2 matrix blocks, got {}", b.len())])
        })?;
        let batch = |m| EmbeddingBatch::new(m).map_err(|e| CliError::validation("pairs file", vec![e.to_string()]));
        let (v, t) = (batch(v)?, batch(t)?);
        cfg.validate(v.dim()).map_err(|e| CliError::Config(e.to_string()))?;
        let trained = train_alignment(&v, &t, &cfg).map_err(|e| CliError::validation("pairs file", vec![e.to_string()]))?;
        let curve = ndarray::Array2::from_shape_vec((1, trained.loss_curve.len()), trained.loss_curve.clone())
            .expect("one row");
        let tau = ndarray::Array2::from_elem((1, 1), trained.temperature.tau());
        let mut buf = Vec::new();
        for m in [&trained.wv, &trained.wt, &curve, &tau] {
            write_matrix(&mut buf, m)?;
        }
        write_atomic(&out, &buf)?;
        let c = &trained.loss_curve;
        Ok(format!(
            "align-train: loss {:.6} -> {:.6} over {} steps, tau {:.6}",
            c[0],
            c[c.len() - 1],
            cfg.steps,
            trained.temperature.tau()
        ))
    })
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, Copy, PartialEq)]
enum Metric {
    RecallAt(usize),
    TopK(usize),
    Avg,
}

fn parse_metric(name: &str, k: usize) -> Result<Metric, CliError> {
    if let Some(k) = name.strip_prefix("r@") {
        return k.parse().map(Metric::RecallAt).map_err(|_| CliError::Config(format!("bad metric {name:?}")));
    }
    match name {
        "topk" => Ok(Metric::TopK(k)),
        "avg" => Ok(Metric::Avg),
        _ => Err(CliError::Config(format!("unknown metric {name:?}; expected r@<k>, topk or avg"))),
    }
}

/// Prints `{"metric":…,"value":…}` and, with `--out`, also writes it there.
pub fn eval(opts: EvalOptions, ctx: &Context) -> Result<(Ran, String), CliError> {
    let sim_path = require(opts.sim.clone(), "sim")?;
    let metric_name = require(opts.metric.clone(), "metric")?;
    let metric = parse_metric(&metric_name, opts.k.unwrap_or(1))?;
    let compute = || -> Result<String, CliError> {
        let blocks = read_matrix_file(&sim_path)?;
        let [sim]: [ndarray::Array2<f64>; 1] = blocks.try_into().map_err(|b: Vec<_>| {
            CliError::validation("similarity file", vec![format!("expected 1 matrix block, got {}", b.len())])
        })?;
        let targets: Vec<usize> = match &opts.labels {
            Some(p) => String::from_utf8_lossy(&read_input(p)?)
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| CliError::validation("labels", vec![format!("bad label {t:?}")])))
                .collect::<Result<_, _>>()?,
            None => (0..sim.nrows()).collect(),
        };
        let bad = |e: vidcurate_align::AlignError| match e {
            vidcurate_align::AlignError::BadK { .. } => CliError::Config(e.to_string()),
            other => CliError::validation("eval input", vec![other.to_string()]),
        };
        let value = match metric {
            Metric::RecallAt(k) => recall_at_k(&sim, &targets, k),
            Metric::TopK(k) => topk_accuracy(&sim, &targets, k),
            Metric::Avg => avg_top1_top5(&sim, &targets),
        }
        .map_err(bad)?;
        let label = match metric {
            Metric::RecallAt(k) => format!("r@{k}"),
            Metric::TopK(k) => format!("top{k}"),
            Metric::Avg => "avg_top1_top5".into(),
        };
        Ok(serde_json::json!({ "metric": label, "value": value }).to_string())
    };
    let Some(out) = opts.out.clone() else {
        let line = compute()?;
        return Ok((Ran::Done(line.clone()), line));
    };
    let mut inputs = vec![sim_path.clone()];
    inputs.extend(opts.labels.clone());
    let run = StageRun { stage: "eval", config: config_json(&opts), inputs, output: out.clone() };
    let mut printed = String::new();
    let ran = journaled(ctx.journal.as_deref(), run, || {
        let line = compute()?;
        write_atomic(&out, format!("{line}\n").as_bytes())?;
        printed = line.clone();
        Ok(line)
    })?;
    if printed.is_empty() {
        printed = fs::read_to_string(&out)?.trim_end().to_string();
    }
    Ok((ran, printed))
}

// ---------------------------------------------------------------- fixture

pub fn fixture(opts: FixtureOptions, ctx: &Context) -> Result<String, CliError> {
    let out = require(opts.out.clone(), "out")?;
    let n = opts.videos.unwrap_or(20);
    let seed = ctx.stage_seed(opts.seed, "fixture");
    let f = crate::fixture::generate(n, seed);
    crate::fixture::write(&f, &out)?;
    Ok(format!("fixture: {n} videos written to {}", out.display()))
}
