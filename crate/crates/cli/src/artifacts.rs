//! Artifact names and atomic file output.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::CliError;

pub const TWEETS: &str = "tweets.jsonl";
pub const ACCIDENT_LOG: &str = "accident_log.csv";
pub const DETECTORS: &str = "detectors.csv";
pub const STEMMED: &str = "stemmed.jsonl";
pub const MATRIX: &str = "matrix.csv";
pub const FEATURESET: &str = "featureset.json";
pub const MODEL: &str = "model.json";
pub const METRICS: &str = "metrics.json";
pub const LOG_VALIDATION: &str = "log_validation.json";
pub const CLUSTER_MODEL: &str = "cluster_model.json";
pub const TRAFFIC_VALIDATION: &str = "traffic_validation.json";
pub const VALIDATION: &str = "validation.json";
pub const REPORT: &str = "report.txt";

fn internal(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Internal(format!("writing {}: {e}", path.display()))
}

/// Writes through a temp file in the target directory, then renames it over
/// `path`, so readers never see a partial file.
pub fn write_atomic<F>(path: &Path, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
{
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| internal(path, e))?;
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| internal(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w)?;
        w.flush().map_err(|e| internal(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| internal(path, e))?;
    tmp.persist(path).map_err(|e| internal(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| internal(path, e))?;
        w.write_all(b"\n").map_err(|e| internal(path, e))
    })
}

pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<(), CliError> {
    write_atomic(path, |w| {
        for v in values {
            serde_json::to_writer(&mut *w, v).map_err(|e| internal(path, e))?;
            w.write_all(b"\n").map_err(|e| internal(path, e))?;
        }
        Ok(())
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    write_atomic(path, |w| w.write_all(text.as_bytes()).map_err(|e| internal(path, e)))
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(BufReader::new(open(path)?))
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(open(path)?).lines().enumerate() {
        let line = line.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| CliError::Input(format!("{}: line {}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(out)
}
