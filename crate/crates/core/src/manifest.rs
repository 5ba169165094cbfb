//! Line-delimited manifest format.
//!
//! A manifest is UTF-8 text with LF line endings. The first line is a header
//! object `{"schema_version":1}`; every following line is one compact JSON
//! object describing a video or a clip. Field order is fixed (see
//! `docs/manifest.md`), optional fields are omitted rather than written as
//! `null`, seconds are written as decimals with millisecond precision and
//! other reals use the shortest representation that round-trips. Fields a
//! reader does not know are kept verbatim and written back after the known
//! fields, in their original order.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::value::RawValue;
use thiserror::Error;

use crate::corpus::{
    cross_record_violations, AsrSegment, ClipRecord, Extra, Millis, MultiscaleCaption, Record,
    Resolution, ScoreSet, ValidationPolicy, VideoRecord, Violation,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("invalid record {id}: {}", join_violations(.violations))]
    InvalidRecord { id: String, violations: Vec<Violation> },
    #[error("missing header line")]
    MissingHeader,
    #[error("unsupported schema version {0} (expected {SCHEMA_VERSION})")]
    UnsupportedVersion(u64),
    #[error("{} problem(s), first: {}", .0.len(), .0.first().map(|p| p.to_string()).unwrap_or_default())]
    Validation(Vec<Problem>),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.describe()).collect::<Vec<_>>().join(", ")
}

/// One offending line (1-based, header is line 1) or record.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub line: Option<usize>,
    pub id: Option<String>,
    pub message: String,
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.line, &self.id) {
            (Some(l), Some(id)) => write!(f, "line {l} ({id}): {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(id)) => write!(f, "{id}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

type Fields = IndexMap<String, Box<RawValue>>;

fn take<T: DeserializeOwned>(fields: &mut Fields, key: &str) -> Result<T, ManifestError> {
    let raw = fields
        .shift_remove(key)
        .ok_or_else(|| ManifestError::MalformedLine(format!("missing field `{key}`")))?;
    decode(key, &raw)
}

fn take_opt<T: DeserializeOwned>(fields: &mut Fields, key: &str) -> Result<Option<T>, ManifestError> {
    match fields.shift_remove(key) {
        None => Ok(None),
        Some(raw) => decode(key, &raw).map(Some),
    }
}

fn decode<T: DeserializeOwned>(key: &str, raw: &RawValue) -> Result<T, ManifestError> {
    serde_json::from_str(raw.get())
        .map_err(|e| ManifestError::MalformedLine(format!("field `{key}`: {e}")))
}

fn take_secs(fields: &mut Fields, key: &str) -> Result<Millis, ManifestError> {
    let v: f64 = take(fields, key)?;
    Ok(Millis::from_secs_f64(v))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MultiscaleWire {
    fine_frame_captions: Vec<(u64, String)>,
    fine_summary: String,
    coarse_caption: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoresWire {
    aesthetic: f64,
    umt_sim: f64,
}

fn split_fields(line: &str) -> Result<Fields, ManifestError> {
    if line.contains('\n') {
        return Err(ManifestError::MalformedLine("embedded newline".into()));
    }
    serde_json::from_str(line).map_err(|e| ManifestError::MalformedLine(e.to_string()))
}

/// Parses one record line without validating it.
pub fn decode_record_line(line: &str) -> Result<Record, ManifestError> {
    let mut f = split_fields(line)?;
    let kind: String = take(&mut f, "type")?;
    match kind.as_str() {
        "video" => {
            let video_id = take(&mut f, "video_id")?;
            let duration = take_secs(&mut f, "duration_s")?;
            let fps = take(&mut f, "fps")?;
            let (width, height): (u32, u32) = take(&mut f, "resolution")?;
            let category = take(&mut f, "category")?;
            let language = take(&mut f, "language")?;
            let title = take(&mut f, "title")?;
            let segs: Vec<(f64, f64, String)> = take(&mut f, "asr_segments")?;
            Ok(Record::Video(VideoRecord {
                video_id,
                duration,
                fps,
                resolution: Resolution { width, height },
                category,
                language,
                title,
                asr_segments: segs
                    .into_iter()
                    .map(|(s, e, text)| AsrSegment {
                        start: Millis::from_secs_f64(s),
                        end: Millis::from_secs_f64(e),
                        text,
                    })
                    .collect(),
                extra: Extra(f),
            }))
        }
        "clip" => {
            let clip_id = take(&mut f, "clip_id")?;
            let video_id = take(&mut f, "video_id")?;
            let start = take_secs(&mut f, "start_s")?;
            let end = take_secs(&mut f, "end_s")?;
            let asr_text = take_opt(&mut f, "asr_text")?;
            let caption = take_opt(&mut f, "caption")?;
            let multiscale = take_opt::<MultiscaleWire>(&mut f, "multiscale")?.map(|m| MultiscaleCaption {
                fine_frame_captions: m.fine_frame_captions,
                fine_summary: m.fine_summary,
                coarse_caption: m.coarse_caption,
            });
            let scores = take_opt::<ScoresWire>(&mut f, "scores")?
                .map(|s| ScoreSet { aesthetic: s.aesthetic, umt_sim: s.umt_sim });
            Ok(Record::Clip(ClipRecord {
                clip_id,
                video_id,
                start,
                end,
                asr_text,
                caption,
                multiscale,
                scores,
                extra: Extra(f),
            }))
        }
        other => Err(ManifestError::MalformedLine(format!("unknown record type `{other}`"))),
    }
}

/// Parses and validates one record line under the default policy.
pub fn parse_manifest_line(line: &str) -> Result<Record, ManifestError> {
    parse_manifest_line_with(line, &ValidationPolicy::default())
}

pub fn parse_manifest_line_with(line: &str, policy: &ValidationPolicy) -> Result<Record, ManifestError> {
    let record = decode_record_line(line)?;
    let violations = record.violations(policy);
    if violations.is_empty() {
        Ok(record)
    } else {
        Err(ManifestError::InvalidRecord { id: record.id().to_string(), violations })
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn json_f64(x: f64) -> String {
    serde_json::to_string(&x).expect("floats always serialize")
}

fn push_extra(out: &mut String, extra: &Extra) {
    for (k, v) in &extra.0 {
        let _ = write!(out, ",{}:{}", json_str(k), v.get());
    }
}

/// Serializes a record as one line (no trailing newline).
pub fn serialize_record(record: &Record) -> String {
    let mut out = String::with_capacity(256);
    match record {
        Record::Video(v) => {
            let _ = write!(
                out,
                "{{\"type\":\"video\",\"video_id\":{},\"duration_s\":{},\"fps\":{},\"resolution\":[{},{}],\"category\":{},\"language\":{},\"title\":{},\"asr_segments\":[",
                json_str(&v.video_id),
                v.duration.to_decimal(),
                json_f64(v.fps),
                v.resolution.width,
                v.resolution.height,
                json_str(&v.category),
                json_str(&v.language),
                json_str(&v.title),
            );
            for (i, s) in v.asr_segments.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "[{},{},{}]", s.start.to_decimal(), s.end.to_decimal(), json_str(&s.text));
            }
            out.push(']');
            push_extra(&mut out, &v.extra);
        }
        Record::Clip(c) => {
            let _ = write!(
                out,
                "{{\"type\":\"clip\",\"clip_id\":{},\"video_id\":{},\"start_s\":{},\"end_s\":{}",
                json_str(&c.clip_id),
                json_str(&c.video_id),
                c.start.to_decimal(),
                c.end.to_decimal(),
            );
            if let Some(a) = &c.asr_text {
                let _ = write!(out, ",\"asr_text\":{}", json_str(a));
            }
            if let Some(cap) = &c.caption {
                let _ = write!(out, ",\"caption\":{}", json_str(cap));
            }
            if let Some(m) = &c.multiscale {
                out.push_str(",\"multiscale\":{\"fine_frame_captions\":[");
                for (i, (idx, text)) in m.fine_frame_captions.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let _ = write!(out, "[{idx},{}]", json_str(text));
                }
                let _ = write!(
                    out,
                    "],\"fine_summary\":{},\"coarse_caption\":{}}}",
                    json_str(&m.fine_summary),
                    json_str(&m.coarse_caption)
                );
            }
            if let Some(s) = &c.scores {
                let _ = write!(
                    out,
                    ",\"scores\":{{\"aesthetic\":{},\"umt_sim\":{}}}",
                    json_f64(s.aesthetic),
                    json_f64(s.umt_sim)
                );
            }
            push_extra(&mut out, &c.extra);
        }
    }
    out.push('}');
    out
}

pub fn parse_header(line: &str) -> Result<(u32, Extra), ManifestError> {
    let mut f = split_fields(line).map_err(|_| ManifestError::MissingHeader)?;
    let version: u64 = match f.shift_remove("schema_version") {
        Some(raw) => decode("schema_version", &raw)?,
        None => return Err(ManifestError::MissingHeader),
    };
    if version != u64::from(SCHEMA_VERSION) {
        return Err(ManifestError::UnsupportedVersion(version));
    }
    Ok((SCHEMA_VERSION, Extra(f)))
}

pub fn serialize_header(version: u32, extra: &Extra) -> String {
    let mut out = format!("{{\"schema_version\":{version}");
    push_extra(&mut out, extra);
    out.push('}');
    out
}

/// An in-memory manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub schema_version: u32,
    pub header_extra: Extra,
    pub records: Vec<Record>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest { schema_version: SCHEMA_VERSION, header_extra: Extra::default(), records: Vec::new() }
    }
}

impl Manifest {
    pub fn new(records: Vec<Record>) -> Manifest {
        Manifest { records, ..Default::default() }
    }

    /// Reads and validates a whole manifest. Every malformed or invalid line
    /// and every cross-record violation is collected into
    /// [`ManifestError::Validation`].
    pub fn read_from<R: BufRead>(reader: R, policy: &ValidationPolicy) -> Result<Manifest, ManifestError> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l?,
            None => return Err(ManifestError::MissingHeader),
        };
        let (schema_version, header_extra) = parse_header(&header)?;
        let mut records = Vec::new();
        let mut problems = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            match parse_manifest_line_with(&line, policy) {
                Ok(r) => records.push(r),
                Err(ManifestError::InvalidRecord { id, violations }) => problems.push(Problem {
                    line: Some(lineno),
                    id: Some(id),
                    message: join_violations(&violations),
                }),
                Err(e) => problems.push(Problem { line: Some(lineno), id: None, message: e.to_string() }),
            }
        }
        if problems.is_empty() {
            problems.extend(cross_record_violations(&records).into_iter().map(|(id, v)| Problem {
                line: None,
                id: Some(id),
                message: v.describe().to_string(),
            }));
        }
        if !problems.is_empty() {
            return Err(ManifestError::Validation(problems));
        }
        Ok(Manifest { schema_version, header_extra, records })
    }

    pub fn load(path: &Path, policy: &ValidationPolicy) -> Result<Manifest, ManifestError> {
        let file = fs::File::open(path)?;
        Manifest::read_from(io::BufReader::new(file), policy)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", serialize_header(self.schema_version, &self.header_extra))?;
        for r in &self.records {
            writeln!(w, "{}", serialize_record(r))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("manifest text is UTF-8")
    }

    pub fn videos(&self) -> impl Iterator<Item = &VideoRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Video(v) => Some(v),
            _ => None,
        })
    }

    pub fn clips(&self) -> impl Iterator<Item = &ClipRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Clip(c) => Some(c),
            _ => None,
        })
    }
}
