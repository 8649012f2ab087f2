//! Strict parsers for the four input files: event logs (CSV or JSONL),
//! questionnaire responses, grades, and the material manifest.
//!
//! Parsing fails fast on the first malformed row, reporting the line
//! number; silent partial ingestion would fabricate a dataset. Warnings
//! (last-wins duplicates and the like) are returned alongside the data.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use serde::Deserialize;
use thiserror::Error;

use crate::model::{EventKind, MaterialId, RawEvent, StudentId};

/// Wire format of an events file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventFormat {
    Csv,
    Jsonl,
}

impl std::str::FromStr for EventFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(EventFormat::Csv),
            "jsonl" => Ok(EventFormat::Jsonl),
            other => Err(format!("unknown event format {other:?} (expected csv or jsonl)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("{file}: missing required column {column:?}")]
    MissingColumn { file: &'static str, column: &'static str },
    #[error("line {line}: {message}")]
    Row { line: u64, message: String },
    #[error("{0}")]
    Other(String),
}

fn row_err(line: u64, message: impl Into<String>) -> IngestError {
    IngestError::Row { line, message: message.into() }
}

const EVENT_COLUMNS: [&str; 5] = ["student_id", "material_id", "page", "event_type", "timestamp_ms"];

#[derive(Debug, Deserialize)]
struct EventRecord {
    student_id: String,
    material_id: String,
    page: u32,
    event_type: String,
    timestamp_ms: i64,
}

fn event_from_record(rec: EventRecord, line: u64) -> Result<RawEvent, IngestError> {
    if rec.student_id.is_empty() {
        return Err(row_err(line, "empty student_id"));
    }
    if rec.material_id.is_empty() {
        return Err(row_err(line, "empty material_id"));
    }
    if rec.event_type.trim().is_empty() {
        return Err(row_err(line, "empty event_type"));
    }
    let event = RawEvent {
        student_id: StudentId::new(rec.student_id),
        material_id: MaterialId::new(rec.material_id),
        page: rec.page,
        kind: EventKind::from_label(&rec.event_type),
        timestamp_ms: rec.timestamp_ms,
    };
    event.validate().map_err(|m| row_err(line, m))?;
    Ok(event)
}

/// Parses an event log and groups it per student, each stream sorted by
/// timestamp. The sort is stable, so rows with equal timestamps keep their
/// input order. Unknown event-type strings become `Other` events.
pub fn parse_events<R: Read>(
    reader: R,
    format: EventFormat,
) -> Result<BTreeMap<StudentId, Vec<RawEvent>>, IngestError> {
    let events = match format {
        EventFormat::Csv => parse_events_csv(reader)?,
        EventFormat::Jsonl => parse_events_jsonl(reader)?,
    };
    let mut by_student: BTreeMap<StudentId, Vec<RawEvent>> = BTreeMap::new();
    for ev in events {
        by_student.entry(ev.student_id.clone()).or_default().push(ev);
    }
    for stream in by_student.values_mut() {
        stream.sort_by_key(|e| e.timestamp_ms);
    }
    Ok(by_student)
}

fn parse_events_csv<R: Read>(reader: R) -> Result<Vec<RawEvent>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in EVENT_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(IngestError::MissingColumn { file: "events", column: col });
        }
    }
    let mut out = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let rec: EventRecord = record
            .deserialize(Some(&headers))
            .map_err(|e| row_err(line, format!("malformed event row: {e}")))?;
        out.push(event_from_record(rec, line)?);
    }
    Ok(out)
}

fn parse_events_jsonl<R: Read>(reader: R) -> Result<Vec<RawEvent>, IngestError> {
    let buf = BufReader::new(reader);
    let mut out = Vec::new();
    for (idx, line) in buf.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(&line)
            .map_err(|e| row_err(line_no, format!("malformed event json: {e}")))?;
        out.push(event_from_record(rec, line_no)?);
    }
    Ok(out)
}

/// Writes events in the canonical CSV layout
/// (`student_id,material_id,page,event_type,timestamp_ms`), one student at
/// a time in id order. Floats never appear, so the round trip through
/// [`parse_events`] is exact.
pub fn write_events_csv<W: Write>(
    events: &BTreeMap<StudentId, Vec<RawEvent>>,
    writer: W,
) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(EVENT_COLUMNS)?;
    for stream in events.values() {
        for ev in stream {
            wtr.write_record([
                ev.student_id.as_str(),
                ev.material_id.as_str(),
                &ev.page.to_string(),
                ev.kind.label(),
                &ev.timestamp_ms.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// The four questionnaire scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum ScaleId {
    Deci,
    Dece,
    MwS,
    MwD,
}

impl ScaleId {
    pub const ALL: [ScaleId; 4] = [ScaleId::Deci, ScaleId::Dece, ScaleId::MwS, ScaleId::MwD];

    pub fn as_str(&self) -> &'static str {
        match self {
            ScaleId::Deci => "DECI",
            ScaleId::Dece => "DECE",
            ScaleId::MwS => "MW-S",
            ScaleId::MwD => "MW-D",
        }
    }

    pub fn parse(s: &str) -> Option<ScaleId> {
        match s.trim().to_ascii_uppercase().replace('_', "-").as_str() {
            "DECI" => Some(ScaleId::Deci),
            "DECE" => Some(ScaleId::Dece),
            "MW-S" | "MWS" => Some(ScaleId::MwS),
            "MW-D" | "MWD" => Some(ScaleId::MwD),
            _ => None,
        }
    }
}

/// Expected item counts per scale: eight for the two concentration scales,
/// four for the two mind-wandering scales.
#[derive(Debug, Clone)]
pub struct ScaleSpec {
    pub items: BTreeMap<ScaleId, usize>,
}

impl Default for ScaleSpec {
    fn default() -> Self {
        let mut items = BTreeMap::new();
        items.insert(ScaleId::Deci, 8);
        items.insert(ScaleId::Dece, 8);
        items.insert(ScaleId::MwS, 4);
        items.insert(ScaleId::MwD, 4);
        ScaleSpec { items }
    }
}

/// A validated questionnaire row: one student, one scale, all item scores
/// on the 1-7 Likert range.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct QuestionnaireResponse {
    pub student_id: StudentId,
    pub scale: ScaleId,
    pub items: Vec<u8>,
}

/// Parses `student_id,scale_id,item1..itemK` rows. A row with a wrong item
/// count for its scale or any score outside 1..=7 is an error.
pub fn parse_questionnaire<R: Read>(
    reader: R,
    spec: &ScaleSpec,
) -> Result<Vec<QuestionnaireResponse>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in ["student_id", "scale_id"] {
        if !headers.iter().any(|h| h == col) {
            return Err(IngestError::MissingColumn { file: "questionnaire", column: col });
        }
    }
    let mut out = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let student = record
            .get(0)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| row_err(line, "empty student_id"))?;
        let scale_raw = record.get(1).unwrap_or("");
        let scale = ScaleId::parse(scale_raw)
            .ok_or_else(|| row_err(line, format!("unknown scale_id {scale_raw:?}")))?;
        let expected = *spec
            .items
            .get(&scale)
            .ok_or_else(|| row_err(line, format!("scale {} not in spec", scale.as_str())))?;
        let given = record.len().saturating_sub(2);
        if given != expected {
            return Err(row_err(
                line,
                format!("scale {} expects {expected} items, row has {given}", scale.as_str()),
            ));
        }
        let mut items = Vec::with_capacity(expected);
        for raw in record.iter().skip(2) {
            let score: i64 = raw
                .trim()
                .parse()
                .map_err(|_| row_err(line, format!("non-integer item score {raw:?}")))?;
            if !(1..=7).contains(&score) {
                return Err(row_err(line, format!("item score {score} outside 1..=7")));
            }
            items.push(score as u8);
        }
        out.push(QuestionnaireResponse {
            student_id: StudentId::new(student),
            scale,
            items,
        });
    }
    Ok(out)
}

/// Writes questionnaire responses back out in the ingest layout.
pub fn write_questionnaire_csv<W: Write>(
    responses: &[QuestionnaireResponse],
    writer: W,
) -> Result<(), IngestError> {
    let max_items = responses.iter().map(|r| r.items.len()).max().unwrap_or(0);
    let mut wtr = csv::WriterBuilder::new().flexible(true).from_writer(writer);
    let mut header = vec!["student_id".to_string(), "scale_id".to_string()];
    for i in 1..=max_items {
        header.push(format!("item{i}"));
    }
    wtr.write_record(&header)?;
    for r in responses {
        let mut row = vec![r.student_id.as_str().to_string(), r.scale.as_str().to_string()];
        row.extend(r.items.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses `student_id,grade` rows with grades on the 0-4 scale. Duplicate
/// students resolve last-wins with a warning.
pub fn parse_grades<R: Read>(
    reader: R,
) -> Result<(BTreeMap<StudentId, f64>, Vec<String>), IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in ["student_id", "grade"] {
        if !headers.iter().any(|h| h == col) {
            return Err(IngestError::MissingColumn { file: "grades", column: col });
        }
    }
    let mut grades = BTreeMap::new();
    let mut warnings = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let student = record
            .get(0)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| row_err(line, "empty student_id"))?;
        let raw = record.get(1).unwrap_or("");
        let grade: f64 = raw
            .trim()
            .parse()
            .map_err(|_| row_err(line, format!("non-numeric grade {raw:?}")))?;
        if !(0.0..=4.0).contains(&grade) {
            return Err(row_err(line, format!("grade {grade} outside the 0-4 scale")));
        }
        let id = StudentId::new(student);
        if grades.insert(id.clone(), grade).is_some() {
            warnings.push(format!("line {line}: duplicate grade for {id}, keeping the last"));
        }
    }
    Ok((grades, warnings))
}

pub fn write_grades_csv<W: Write>(
    grades: &BTreeMap<StudentId, f64>,
    writer: W,
) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["student_id", "grade"])?;
    for (id, grade) in grades {
        wtr.write_record([id.as_str(), &grade.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Parses the material manifest (`material_id,n_pages`). Ids must be
/// unique and page counts positive.
pub fn parse_materials<R: Read>(reader: R) -> Result<BTreeMap<MaterialId, u32>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in ["material_id", "n_pages"] {
        if !headers.iter().any(|h| h == col) {
            return Err(IngestError::MissingColumn { file: "materials", column: col });
        }
    }
    let mut out = BTreeMap::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let material = record
            .get(0)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| row_err(line, "empty material_id"))?;
        let raw = record.get(1).unwrap_or("");
        let n_pages: u32 = raw
            .trim()
            .parse()
            .map_err(|_| row_err(line, format!("non-integer page count {raw:?}")))?;
        if n_pages < 1 {
            return Err(row_err(line, "n_pages must be >= 1"));
        }
        let id = MaterialId::new(material);
        if out.insert(id.clone(), n_pages).is_some() {
            return Err(row_err(line, format!("duplicate material_id {id}")));
        }
    }
    Ok(out)
}

pub fn write_materials_csv<W: Write>(
    materials: &BTreeMap<MaterialId, u32>,
    writer: W,
) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["material_id", "n_pages"])?;
    for (id, pages) in materials {
        wtr.write_record([id.as_str(), &pages.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}
