//! Run journal: one JSON line per stage run.
//!
//! ```text
//! {"stage":"segment","config_hash":"…","input_hash":"…","output_hash":"…","status":"done"}
//! ```
//!
//! A stage whose config and input hashes match a `done` entry, and whose
//! output file still hashes to the recorded value, is skipped; the skip is
//! journaled with status `skipped`.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::io::{hash_files, sha256_hex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub stage: String,
    pub config_hash: String,
    pub input_hash: String,
    pub output_hash: String,
    pub status: String,
}

pub fn read_entries(path: &Path) -> Result<Vec<Entry>, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| CliError::validation(format!("journal {}", path.display()), vec![format!("line {}: {e}", i + 1)]))
        })
        .collect()
}

fn append(path: &Path, entry: &Entry) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(entry).expect("entry serializes"))?;
    Ok(())
}

/// What a stage run touched.
pub struct StageRun<'a> {
    pub stage: &'a str,
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub output: PathBuf,
}

pub enum Ran {
    Done(String),
    Skipped,
}

/// Runs `body` unless the journal proves the same run already completed.
pub fn journaled(
    journal: Option<&Path>,
    run: StageRun<'_>,
    body: impl FnOnce() -> Result<String, CliError>,
) -> Result<Ran, CliError> {
    let Some(journal) = journal else {
        return body().map(Ran::Done);
    };
    let config_hash = sha256_hex(serde_json::to_string(&run.config).expect("config serializes").as_bytes());
    let input_hash = hash_files(&run.inputs)?;
    let previous = read_entries(journal)?;
    let output = std::slice::from_ref(&run.output);
    let current_output = if run.output.exists() { Some(hash_files(output)?) } else { None };
    let done_before = previous.iter().rev().find(|e| {
        e.stage == run.stage && e.status == "done" && e.config_hash == config_hash && e.input_hash == input_hash
    });
    if let (Some(prev), Some(out)) = (done_before, &current_output) {
        if &prev.output_hash == out {
            append(
                journal,
                &Entry {
                    stage: run.stage.into(),
                    config_hash,
                    input_hash,
                    output_hash: out.clone(),
                    status: "skipped".into(),
                },
            )?;
            return Ok(Ran::Skipped);
        }
    }
    let summary = body()?;
    let output_hash = hash_files(output)?;
    append(
        journal,
        &Entry { stage: run.stage.into(), config_hash, input_hash, output_hash, status: "done".into() },
    )?;
    Ok(Ran::Done(summary))
}
