use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::{DetectionExample, Dialogue, PredictionRecord, Record, RecordKind, RewriteExample};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {path}: {message}")]
    Invalid {
        line: usize,
        path: String,
        message: String,
    },
    #[error("line {line}: duplicate id {id:?} (first seen on line {first})")]
    DuplicateId {
        line: usize,
        id: String,
        first: usize,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads newline-delimited records, validating each one.
///
/// Blank lines are skipped. Line numbers in errors are 1-based.
pub fn read_records<T: Record, R: BufRead>(reader: R) -> Result<Vec<T>, DataError> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_str(&line);
        let mut record: T = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            DataError::Invalid {
                line: line_no,
                path: if path == "." { "<record>".into() } else { path },
                message: e.into_inner().to_string(),
            }
        })?;
        record.reindex();
        if let Some(v) = record.violations().into_iter().next() {
            return Err(DataError::Invalid {
                line: line_no,
                path: v.path,
                message: v.message,
            });
        }
        if let Some(&first) = seen.get(record.id()) {
            return Err(DataError::DuplicateId {
                line: line_no,
                id: record.id().to_owned(),
                first,
            });
        }
        seen.insert(record.id().to_owned(), line_no);
        out.push(record);
    }
    Ok(out)
}

/// One line per record, each terminated by `\n`. Field order follows the
/// type definitions.
pub fn write_records<T: Record, W: Write>(mut writer: W, records: &[T]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut writer, r)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()
}

pub fn to_jsonl<T: Record>(records: &[T]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_records(&mut buf, records).expect("writing to a Vec cannot fail");
    buf
}

#[derive(Debug, Clone, PartialEq)]
pub enum AnyRecord {
    Dialogue(Dialogue),
    Detection(DetectionExample),
    Rewrite(RewriteExample),
    Prediction(PredictionRecord),
}

pub fn parse_records<R: BufRead>(reader: R, kind: RecordKind) -> Result<Vec<AnyRecord>, DataError> {
    Ok(match kind {
        RecordKind::Dialogue => read_records(reader)?
            .into_iter()
            .map(AnyRecord::Dialogue)
            .collect(),
        RecordKind::Detection => read_records(reader)?
            .into_iter()
            .map(AnyRecord::Detection)
            .collect(),
        RecordKind::Rewrite => read_records(reader)?
            .into_iter()
            .map(AnyRecord::Rewrite)
            .collect(),
        RecordKind::Prediction => read_records(reader)?
            .into_iter()
            .map(AnyRecord::Prediction)
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportedViolation {
    /// 0-based position in the corpus.
    pub index: usize,
    pub id: String,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<ReportedViolation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Collects every invariant violation, including duplicate ids.
pub fn validate_corpus<T: Record>(records: &[T]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (index, r) in records.iter().enumerate() {
        for v in r.violations() {
            report.violations.push(ReportedViolation {
                index,
                id: r.id().to_owned(),
                path: v.path,
                message: v.message,
            });
        }
        if let Some(first) = seen.insert(r.id(), index) {
            report.violations.push(ReportedViolation {
                index,
                id: r.id().to_owned(),
                path: "id".into(),
                message: format!("duplicate id (first at record {first})"),
            });
        }
    }
    report
}

/// A problem found on one line of a newline-delimited file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineViolation {
    pub line: usize,
    /// `None` when the line did not parse far enough to have an id.
    pub id: Option<String>,
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for LineViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}", self.line)?;
        if let Some(id) = &self.id {
            write!(f, " ({id})")?;
        }
        write!(f, ": {}: {}", self.path, self.message)
    }
}

fn validate_stream<T: Record, R: BufRead>(reader: R) -> io::Result<Vec<LineViolation>> {
    let mut out = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let de = &mut serde_json::Deserializer::from_str(&line);
        let mut record: T = match serde_path_to_error::deserialize(de) {
            Ok(r) => r,
            Err(e) => {
                let path = e.path().to_string();
                out.push(LineViolation {
                    line: line_no,
                    id: None,
                    path: if path == "." { "<record>".into() } else { path },
                    message: e.into_inner().to_string(),
                });
                continue;
            }
        };
        record.reindex();
        let id = record.id().to_owned();
        for v in record.violations() {
            out.push(LineViolation {
                line: line_no,
                id: Some(id.clone()),
                path: v.path,
                message: v.message,
            });
        }
        if let Some(&first) = seen.get(&id) {
            out.push(LineViolation {
                line: line_no,
                id: Some(id),
                path: "id".into(),
                message: format!("duplicate id (first seen on line {first})"),
            });
        } else {
            seen.insert(id, line_no);
        }
    }
    Ok(out)
}

/// Checks every line of a file of `kind` records; unlike [`read_records`]
/// this does not stop at the first problem.
pub fn validate_lines<R: BufRead>(reader: R, kind: RecordKind) -> io::Result<Vec<LineViolation>> {
    match kind {
        RecordKind::Dialogue => validate_stream::<Dialogue, _>(reader),
        RecordKind::Detection => validate_stream::<DetectionExample, _>(reader),
        RecordKind::Rewrite => validate_stream::<RewriteExample, _>(reader),
        RecordKind::Prediction => validate_stream::<PredictionRecord, _>(reader),
    }
}
