use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Source layouts accepted by [`ingest`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

impl std::str::FromStr for Format {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::JsonLines),
            other => Err(CorpusError::InvalidArgument(format!(
                "unknown format `{other}` (expected csv or jsonl)"
            ))),
        }
    }
}

/// An article/summary text pair, the canonical corpus record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawExample {
    pub article: String,
    pub summary: String,
}

pub fn ingest(path: &Path, format: Format, article_field: &str, summary_field: &str) -> Result<Vec<RawExample>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    ingest_reader(file, &path.display().to_string(), format, article_field, summary_field)
}

/// [`ingest`] over any reader; `source` names it in errors.
pub fn ingest_reader<R: Read>(
    reader: R,
    source: &str,
    format: Format,
    article_field: &str,
    summary_field: &str,
) -> Result<Vec<RawExample>, CorpusError> {
    match format {
        Format::Csv => ingest_csv(reader, source, article_field, summary_field),
        Format::JsonLines => ingest_jsonl(reader, source, article_field, summary_field),
    }
}

fn ingest_csv<R: Read>(reader: R, source: &str, article_field: &str, summary_field: &str) -> Result<Vec<RawExample>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let malformed = |e: csv::Error| CorpusError::Malformed {
        path: source.to_string(),
        line: e.position().map_or(0, |p| p.line()),
        detail: e.to_string(),
    };
    let headers = rdr.headers().map_err(malformed)?.clone();
    let column = |field: &str| {
        headers
            .iter()
            .position(|h| h.trim() == field)
            .ok_or_else(|| CorpusError::MissingField {
                path: source.to_string(),
                row: 0,
                field: field.to_string(),
            })
    };
    let (a, s) = (column(article_field)?, column(summary_field)?);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record.map_err(malformed)?;
        let row = i + 1;
        let get = |col: usize, field: &str| {
            record.get(col).map(str::to_string).ok_or_else(|| CorpusError::MissingField {
                path: source.to_string(),
                row,
                field: field.to_string(),
            })
        };
        out.push(RawExample {
            article: get(a, article_field)?,
            summary: get(s, summary_field)?,
        });
    }
    Ok(out)
}

fn ingest_jsonl<R: Read>(reader: R, source: &str, article_field: &str, summary_field: &str) -> Result<Vec<RawExample>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io {
            path: source.to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            path: source.to_string(),
            line: i as u64 + 1,
            detail: e.to_string(),
        })?;
        let get = |field: &str| {
            value
                .get(field)
                .and_then(|v| v.as_str())
                .map(str::to_string)
                .ok_or_else(|| CorpusError::MissingField {
                    path: source.to_string(),
                    row: i + 1,
                    field: field.to_string(),
                })
        };
        out.push(RawExample {
            article: get(article_field)?,
            summary: get(summary_field)?,
        });
    }
    Ok(out)
}

/// Canonical JSON-lines: one `{"article": ..., "summary": ...}` object per line.
pub fn write_jsonl<W: Write>(examples: &[RawExample], mut w: W) -> std::io::Result<()> {
    for e in examples {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_canonical(path: &Path) -> Result<Vec<RawExample>, CorpusError> {
    ingest(path, Format::JsonLines, "article", "summary")
}
