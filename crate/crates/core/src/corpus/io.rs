use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{CorpusRecord, Group, IngestOutput, IngestStats, RawMessage};
use crate::error::{Error, Result};

pub const STATS_FILE: &str = "stats.json";

/// Write one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for it in items {
        serde_json::to_writer(&mut w, it)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Read one JSON object per line; blank lines are skipped and errors carry
/// the line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn read_messages(path: &Path) -> Result<Vec<RawMessage>> {
    read_jsonl(path)
}

pub fn write_messages(path: &Path, messages: &[RawMessage]) -> Result<()> {
    write_jsonl(path, messages)
}

pub fn read_records(path: &Path) -> Result<Vec<CorpusRecord>> {
    read_jsonl(path)
}

pub fn write_records(path: &Path, records: &[CorpusRecord]) -> Result<()> {
    write_jsonl(path, records)
}

/// `<dir>/<group>.jsonl`.
pub fn group_file(dir: &Path, group: Group) -> PathBuf {
    dir.join(format!("{}.jsonl", group.as_str()))
}

/// Write the non-empty groups of an ingest and its statistics into `dir`.
/// Returns the files written.
pub fn write_ingest_output(dir: &Path, out: &IngestOutput) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    for (group, recs) in [
        (Group::Train, &out.splits.train),
        (Group::Validation, &out.splits.validation),
        (Group::Test, &out.splits.test),
        (Group::Evaluation, &out.evaluation),
    ] {
        if recs.is_empty() {
            continue;
        }
        let p = group_file(dir, group);
        write_records(&p, recs)?;
        written.push(p);
    }
    let p = dir.join(STATS_FILE);
    let f = File::create(&p).map_err(|e| Error::io(&p, e))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &out.stats)?;
    written.push(p);
    Ok(written)
}

pub fn read_ingest_stats(dir: &Path) -> Result<IngestStats> {
    let p = dir.join(STATS_FILE);
    let f = File::open(&p).map_err(|e| Error::io(&p, e))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

/// Records from a JSONL file, or from an ingest directory. For a directory
/// the first existing file among `groups` is read.
pub fn resolve_records(path: &Path, groups: &[Group]) -> Result<Vec<CorpusRecord>> {
    if !path.is_dir() {
        return read_records(path);
    }
    for g in groups {
        let p = group_file(path, *g);
        if p.exists() {
            return read_records(&p);
        }
    }
    let names: Vec<&str> = groups.iter().map(|g| g.as_str()).collect();
    Err(Error::invalid(format!(
        "{} holds none of the record files {names:?}",
        path.display()
    )))
}
