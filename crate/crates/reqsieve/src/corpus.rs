//! Corpus persistence.
//!
//! The canonical on-disk format is JSONL: one object per line with keys
//! `method`, `target`, `headers` (object, insertion-ordered), `body`
//! (escape-encoded string so arbitrary bytes round-trip) and `label`
//! (`"normal"`, `"attack"` or null). A CSV loader accepts the 2-column
//! `(raw_request, label)` shape in which `raw_request` is a full HTTP
//! request text blob.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use reqsieve_core::request::{ClassLabel, Corpus, RawRequest};

use crate::error::{Error, Result};
use crate::escape::{escape_bytes, unescape_bytes};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Picks the format from the file extension; `.csv` is CSV, anything
    /// else is treated as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestRecord {
    method: String,
    target: String,
    #[serde(default, with = "header_pairs")]
    headers: Vec<(String, String)>,
    #[serde(default)]
    body: String,
    #[serde(default)]
    label: Option<String>,
}

/// Headers serialize as a JSON object; document order is preserved on read
/// and duplicate names are merged later, at record conversion.
mod header_pairs {
    use serde::de::{MapAccess, Visitor};
    use serde::ser::SerializeMap;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        headers: &Vec<(String, String)>,
        serializer: S,
    ) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(headers.len()))?;
        for (name, value) in headers {
            map.serialize_entry(name, value)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        deserializer: D,
    ) -> Result<Vec<(String, String)>, D::Error> {
        struct PairVisitor;

        impl<'de> Visitor<'de> for PairVisitor {
            type Value = Vec<(String, String)>;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map of header names to values")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Self::Value, A::Error> {
                let mut out = Vec::with_capacity(access.size_hint().unwrap_or(0));
                while let Some((name, value)) = access.next_entry::<String, String>()? {
                    out.push((name, value));
                }
                Ok(out)
            }
        }

        deserializer.deserialize_map(PairVisitor)
    }
}

fn label_to_str(label: ClassLabel) -> Option<&'static str> {
    match label {
        ClassLabel::Normal => Some("normal"),
        ClassLabel::Attack => Some("attack"),
        ClassLabel::Unlabeled => None,
    }
}

fn label_from_str(label: Option<&str>) -> std::result::Result<ClassLabel, String> {
    match label {
        None | Some("") => Ok(ClassLabel::Unlabeled),
        Some(s) if s.eq_ignore_ascii_case("normal") => Ok(ClassLabel::Normal),
        Some(s) if s.eq_ignore_ascii_case("attack") => Ok(ClassLabel::Attack),
        Some(other) => Err(format!("unknown label {other:?}")),
    }
}

/// Merges duplicate header names case-insensitively with a comma join,
/// keeping the first occurrence's position and spelling.
fn merge_headers(headers: Vec<(String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::with_capacity(headers.len());
    for (name, value) in headers {
        match out
            .iter_mut()
            .find(|(seen, _)| seen.eq_ignore_ascii_case(&name))
        {
            Some((_, existing)) => {
                existing.push_str(", ");
                existing.push_str(&value);
            }
            None => out.push((name, value)),
        }
    }
    out
}

fn validate_method(method: &str) -> std::result::Result<(), String> {
    if method.is_empty() {
        return Err("method is empty".into());
    }
    if method.chars().any(char::is_whitespace) {
        return Err("method contains whitespace".into());
    }
    Ok(())
}

fn record_to_request(record: RequestRecord) -> std::result::Result<RawRequest, String> {
    validate_method(&record.method)?;
    let body = unescape_bytes(&record.body).map_err(|e| format!("body: {e}"))?;
    let label = label_from_str(record.label.as_deref())?;
    Ok(RawRequest {
        method: record.method,
        target: record.target,
        headers: merge_headers(record.headers),
        body,
        label,
    })
}

fn request_to_record(req: &RawRequest) -> RequestRecord {
    RequestRecord {
        method: req.method.clone(),
        target: req.target.clone(),
        headers: req.headers.clone(),
        body: escape_bytes(&req.body),
        label: label_to_str(req.label).map(str::to_string),
    }
}

/// Parses one JSONL line into a request; used by the loader and by stream
/// scoring.
pub fn parse_jsonl_request(line: &str) -> std::result::Result<RawRequest, String> {
    let record: RequestRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    record_to_request(record)
}

/// Serializes one request to its JSONL line (no trailing newline).
pub fn request_to_jsonl(req: &RawRequest) -> String {
    serde_json::to_string(&request_to_record(req)).expect("record serialization cannot fail")
}

fn load_jsonl(path: &Path) -> Result<Vec<RawRequest>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut requests = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let req = parse_jsonl_request(&line).map_err(|reason| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            reason,
        })?;
        requests.push(req);
    }
    Ok(requests)
}

/// Splits a raw HTTP request text blob by the first-line / headers / blank
/// line / body convention.
fn parse_http_blob(blob: &str) -> std::result::Result<RawRequest, String> {
    let mut lines = blob.split('\n');
    let request_line = lines.next().unwrap_or("").trim_end_matches('\r');
    let mut parts = request_line.split_whitespace();
    let method = parts.next().ok_or("missing method in request line")?;
    let target = parts.next().ok_or("missing target in request line")?;

    let mut headers = Vec::new();
    let mut body = String::new();
    let mut in_body = false;
    for line in lines {
        if in_body {
            if !body.is_empty() {
                body.push('\n');
            }
            body.push_str(line);
            continue;
        }
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            in_body = true;
            continue;
        }
        let (name, value) = line
            .split_once(':')
            .ok_or_else(|| format!("header line without colon: {line:?}"))?;
        headers.push((name.trim().to_string(), value.trim().to_string()));
    }

    validate_method(method)?;
    Ok(RawRequest {
        method: method.to_string(),
        target: target.to_string(),
        headers: merge_headers(headers),
        body: body.into_bytes(),
        label: ClassLabel::Unlabeled,
    })
}

fn load_csv(path: &Path) -> Result<Vec<RawRequest>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(BufReader::new(file));

    let malformed = |line: usize, reason: String| Error::MalformedRecord {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let headers = reader
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_lowercase()).collect();
    if names != ["raw_request", "label"] {
        return Err(malformed(
            1,
            format!("expected header row raw_request,label, found {names:?}"),
        ));
    }

    let mut requests = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or_default();
            malformed(line, e.to_string())
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or_default();
        let blob = record.get(0).unwrap_or("");
        let label = record.get(1).map(str::trim);
        let mut req = parse_http_blob(blob).map_err(|reason| malformed(line, reason))?;
        req.label = label_from_str(label).map_err(|reason| malformed(line, reason))?;
        requests.push(req);
    }
    Ok(requests)
}

/// Loads a corpus; `MalformedRecord` carries the 1-based line number, and an
/// empty file is an error.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let requests = match format {
        CorpusFormat::Jsonl => load_jsonl(path)?,
        CorpusFormat::Csv => load_csv(path)?,
    };
    if requests.is_empty() {
        return Err(Error::EmptyCorpus {
            path: path.to_path_buf(),
        });
    }
    Ok(Corpus::new(path.display().to_string(), requests))
}

/// Loads with the format inferred from the extension.
pub fn load_corpus_auto(path: impl AsRef<Path>) -> Result<Corpus> {
    let format = CorpusFormat::from_path(path.as_ref());
    load_corpus(path, format)
}

/// Writes the corpus as JSONL (the canonical format, whatever it was loaded
/// from). Refuses to persist an empty corpus.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus {
            path: path.to_path_buf(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    for req in &corpus.requests {
        writeln!(writer, "{}", request_to_jsonl(req)).map_err(|e| Error::io(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
