//! Corpus statistics: histograms of clip durations, caption lengths and
//! scores, unique-verb counts and per-language transcript token counts.
//!
//! Reports are built from shard partials. [`ReportPartial::merge`] is
//! associative and commutative, so any split of a manifest into disjoint
//! shards yields the same final [`Report`]. Partials carry the verb set
//! itself (with occurrence counts) rather than its size.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::corpus::Record;
use crate::manifest::Manifest;
use crate::tagger::{tokenize, PosTagger, Tag};

pub const REPORT_VERSION: u32 = 1;
const TOP_VERBS: usize = 50;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("histogram edges must be strictly ascending with at least two entries")]
    BadEdges,
}

/// Counts over bins `[e_i, e_{i+1})`; the last bin is closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Values below the first edge, above the last, or NaN.
    pub out_of_range: u64,
}

impl Histogram {
    pub fn new(edges: Vec<f64>) -> Result<Histogram, StatsError> {
        let ascending = edges.len() >= 2 && edges.windows(2).all(|w| w[0] < w[1]) && !edges[0].is_nan();
        if !ascending {
            return Err(StatsError::BadEdges);
        }
        let bins = edges.len() - 1;
        Ok(Histogram { edges, counts: vec![0; bins], out_of_range: 0 })
    }

    pub fn add(&mut self, x: f64) {
        let last = *self.edges.last().expect("at least two edges");
        if x.is_nan() || x < self.edges[0] || x > last {
            self.out_of_range += 1;
            return;
        }
        // Number of edges <= x, minus one, is the bin; x == last goes in the final bin.
        let bin = (self.edges.partition_point(|&e| e <= x) - 1).min(self.counts.len() - 1);
        self.counts[bin] += 1;
    }

    pub fn merge(&mut self, other: &Histogram) {
        debug_assert_eq!(self.edges, other.edges);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.out_of_range += other.out_of_range;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn bin_label(&self, i: usize) -> String {
        let close = if i + 1 == self.counts.len() { ']' } else { ')' };
        format!("[{}, {}{close}", fmt_edge(self.edges[i]), fmt_edge(self.edges[i + 1]))
    }
}

fn fmt_edge(e: f64) -> String {
    if e.is_infinite() {
        if e > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{e}")
    }
}

impl Serialize for Histogram {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let edges: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|&e| if e.is_finite() { serde_json::json!(e) } else { serde_json::json!(fmt_edge(e)) })
            .collect();
        let mut st = s.serialize_struct("Histogram", 3)?;
        st.serialize_field("edges", &edges)?;
        st.serialize_field("counts", &self.counts)?;
        st.serialize_field("out_of_range", &self.out_of_range)?;
        st.end()
    }
}

pub fn histogram(values: &[f64], edges: &[f64]) -> Result<Histogram, StatsError> {
    let mut h = Histogram::new(edges.to_vec())?;
    values.iter().for_each(|&v| h.add(v));
    Ok(h)
}

/// Number of distinct lowercase tokens tagged as verbs.
pub fn count_unique_verbs<S: AsRef<str>>(captions: &[S], tagger: &dyn PosTagger) -> usize {
    let mut seen = std::collections::HashSet::new();
    for c in captions {
        for tok in tokenize(c.as_ref()) {
            if !seen.contains(&tok) && tagger.tag(&tok) == Tag::Verb {
                seen.insert(tok);
            }
        }
    }
    seen.len()
}

pub fn duration_edges() -> Vec<f64> {
    vec![0.0, 10.0, 20.0, 30.0, f64::INFINITY]
}

pub fn caption_length_edges() -> Vec<f64> {
    vec![0.0, 10.0, 20.0, f64::INFINITY]
}

pub fn aesthetic_edges() -> Vec<f64> {
    (0..=10).map(f64::from).collect()
}

pub fn similarity_edges() -> Vec<f64> {
    (-10..=10).map(|i| f64::from(i) / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportPartial {
    pub videos: u64,
    pub clips: u64,
    pub captioned: u64,
    pub scored: u64,
    pub clip_seconds: Histogram,
    pub caption_words: Histogram,
    pub aesthetic: Histogram,
    pub umt_sim: Histogram,
    pub verbs: BTreeMap<String, u64>,
    pub asr_tokens: BTreeMap<String, u64>,
}

impl Default for ReportPartial {
    fn default() -> Self {
        ReportPartial {
            videos: 0,
            clips: 0,
            captioned: 0,
            scored: 0,
            clip_seconds: Histogram::new(duration_edges()).expect("static edges"),
            caption_words: Histogram::new(caption_length_edges()).expect("static edges"),
            aesthetic: Histogram::new(aesthetic_edges()).expect("static edges"),
            umt_sim: Histogram::new(similarity_edges()).expect("static edges"),
            verbs: BTreeMap::new(),
            asr_tokens: BTreeMap::new(),
        }
    }
}

impl ReportPartial {
    /// Accumulates one shard. Clip transcripts are attributed to the
    /// language of their parent video when that video is in the same shard,
    /// and to `"und"` otherwise.
    pub fn from_records(records: &[Record], tagger: &dyn PosTagger) -> ReportPartial {
        let mut p = ReportPartial::default();
        let languages: HashMap<&str, &str> = records
            .iter()
            .filter_map(|r| match r {
                Record::Video(v) => Some((v.video_id.as_str(), v.language.as_str())),
                _ => None,
            })
            .collect();
        let mut tag_cache: HashMap<String, Tag> = HashMap::new();
        for r in records {
            let c = match r {
                Record::Video(_) => {
                    p.videos += 1;
                    continue;
                }
                Record::Clip(c) => c,
            };
            p.clips += 1;
            p.clip_seconds.add(c.duration().as_secs_f64());
            if let Some(caption) = &c.caption {
                p.captioned += 1;
                p.caption_words.add(caption.split_whitespace().count() as f64);
                for tok in tokenize(caption) {
                    let tag = *tag_cache.entry(tok.clone()).or_insert_with(|| tagger.tag(&tok));
                    if tag == Tag::Verb {
                        *p.verbs.entry(tok).or_insert(0) += 1;
                    }
                }
            }
            if let Some(s) = &c.scores {
                p.scored += 1;
                p.aesthetic.add(s.aesthetic);
                p.umt_sim.add(s.umt_sim);
            }
            if let Some(asr) = &c.asr_text {
                let n = tokenize(asr).count() as u64;
                if n > 0 {
                    let lang = languages.get(c.video_id.as_str()).copied().unwrap_or("und");
                    *p.asr_tokens.entry(lang.to_string()).or_insert(0) += n;
                }
            }
        }
        p
    }

    pub fn merge(mut self, other: &ReportPartial) -> ReportPartial {
        self.videos += other.videos;
        self.clips += other.clips;
        self.captioned += other.captioned;
        self.scored += other.scored;
        self.clip_seconds.merge(&other.clip_seconds);
        self.caption_words.merge(&other.caption_words);
        self.aesthetic.merge(&other.aesthetic);
        self.umt_sim.merge(&other.umt_sim);
        for (k, v) in &other.verbs {
            *self.verbs.entry(k.clone()).or_insert(0) += v;
        }
        for (k, v) in &other.asr_tokens {
            *self.asr_tokens.entry(k.clone()).or_insert(0) += v;
        }
        self
    }

    pub fn finish(self) -> Report {
        let mut ranked: Vec<(String, u64)> = self.verbs.iter().map(|(k, v)| (k.clone(), *v)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(TOP_VERBS);
        Report {
            report_version: REPORT_VERSION,
            videos: self.videos,
            clips: self.clips,
            captioned_clips: self.captioned,
            scored_clips: self.scored,
            unique_verbs: self.verbs.len() as u64,
            clip_seconds: self.clip_seconds,
            caption_words: self.caption_words,
            aesthetic: self.aesthetic,
            umt_sim: self.umt_sim,
            top_verbs: ranked,
            asr_tokens_by_language: self.asr_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub report_version: u32,
    pub videos: u64,
    pub clips: u64,
    pub captioned_clips: u64,
    pub scored_clips: u64,
    pub unique_verbs: u64,
    pub clip_seconds: Histogram,
    pub caption_words: Histogram,
    pub aesthetic: Histogram,
    pub umt_sim: Histogram,
    pub top_verbs: Vec<(String, u64)>,
    pub asr_tokens_by_language: BTreeMap<String, u64>,
}

pub fn corpus_report(manifest: &Manifest, tagger: &dyn PosTagger) -> Report {
    ReportPartial::from_records(&manifest.records, tagger).finish()
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "report_version {}", self.report_version);
        let _ = writeln!(out, "videos {}", self.videos);
        let _ = writeln!(out, "clips {}", self.clips);
        let _ = writeln!(out, "captioned_clips {}", self.captioned_clips);
        let _ = writeln!(out, "scored_clips {}", self.scored_clips);
        let _ = writeln!(out, "unique_verbs {}", self.unique_verbs);
        for (name, h) in [
            ("clip_seconds", &self.clip_seconds),
            ("caption_words", &self.caption_words),
            ("aesthetic", &self.aesthetic),
            ("umt_sim", &self.umt_sim),
        ] {
            let _ = writeln!(out, "\n{name} (out of range: {})", h.out_of_range);
            for (i, c) in h.counts.iter().enumerate() {
                let _ = writeln!(out, "  {:<16} {c}", h.bin_label(i));
            }
        }
        let _ = writeln!(out, "\ntop_verbs");
        for (w, c) in &self.top_verbs {
            let _ = writeln!(out, "  {w:<16} {c}");
        }
        let _ = writeln!(out, "\nasr_tokens_by_language");
        for (l, c) in &self.asr_tokens_by_language {
            let _ = writeln!(out, "  {l:<16} {c}");
        }
        out
    }
}
