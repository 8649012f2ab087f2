//! Session-to-symbol encoding and the jump-recoding preprocessing step.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::ingest::IngestError;
use crate::model::{
    EncodedSequence, EventKind, IntervalClass, IntervalThresholds, MaterialId, Session,
    SessionTerminal, StudentId, Symbol,
};

/// Encoding knobs. `append_terminal_gap` defaults on so the class of a
/// timeout gap shows up as a trailing interval symbol and stop counts stay
/// computable from the encoded file alone.
#[derive(Debug, Clone)]
pub struct EncodeOptions {
    pub thresholds: IntervalThresholds,
    pub append_terminal_gap: bool,
}

impl Default for EncodeOptions {
    fn default() -> Self {
        EncodeOptions {
            thresholds: IntervalThresholds::default(),
            append_terminal_gap: true,
        }
    }
}

fn event_symbol(kind: &EventKind) -> Symbol {
    match kind {
        EventKind::Open => Symbol::Open,
        EventKind::Close => Symbol::Close,
        EventKind::Next => Symbol::Next,
        EventKind::Prev => Symbol::Prev,
        EventKind::Jump => Symbol::Jump,
        EventKind::Other(_) => Symbol::Responsive,
    }
}

fn interval_symbol(class: IntervalClass) -> Option<Symbol> {
    match class {
        IntervalClass::Suppressed => None,
        IntervalClass::Short => Some(Symbol::Short),
        IntervalClass::Medium => Some(Symbol::Medium),
        IntervalClass::Long => Some(Symbol::Long),
    }
}

/// Encodes a session: each event maps to its symbol, and each inter-event
/// gap contributes its interval-class symbol (nothing below the short
/// floor). With `append_terminal_gap`, a timeout-terminated session also
/// gets the terminal gap's class appended.
pub fn encode(session: &Session, options: &EncodeOptions) -> EncodedSequence {
    debug_assert!(session.validate(u64::MAX).is_ok() || session.events.is_empty());
    let mut tokens = Vec::with_capacity(session.events.len() * 2);
    for (i, event) in session.events.iter().enumerate() {
        if i > 0 {
            let gap = (event.timestamp_ms - session.events[i - 1].timestamp_ms) as u64;
            if let Some(sym) = interval_symbol(options.thresholds.classify(gap)) {
                tokens.push(sym);
            }
        }
        tokens.push(event_symbol(&event.kind));
    }
    if options.append_terminal_gap {
        if let SessionTerminal::Timeout { gap_ms } = session.terminal {
            if let Some(sym) = interval_symbol(options.thresholds.classify(gap_ms)) {
                tokens.push(sym);
            }
        }
    }
    let seq = EncodedSequence::new(tokens, session.terminal);
    debug_assert!(seq.validate().is_ok());
    seq
}

/// Recodes every run of two or more consecutive next/prev tokens with no
/// interval symbol in between as one complete jump: `X` when the net page
/// displacement is forward or zero, `Y` when backward. Single next/prev
/// tokens and logged `J` jumps are left alone.
pub fn collapse_jumps(seq: &EncodedSequence) -> EncodedSequence {
    let mut out = Vec::with_capacity(seq.tokens.len());
    let mut i = 0;
    while i < seq.tokens.len() {
        let tok = seq.tokens[i];
        if matches!(tok, Symbol::Next | Symbol::Prev) {
            let mut j = i;
            let mut net = 0i64;
            while j < seq.tokens.len() && matches!(seq.tokens[j], Symbol::Next | Symbol::Prev) {
                net += if seq.tokens[j] == Symbol::Next { 1 } else { -1 };
                j += 1;
            }
            if j - i >= 2 {
                out.push(if net >= 0 { Symbol::Forward } else { Symbol::Backward });
            } else {
                out.push(tok);
            }
            i = j;
        } else {
            out.push(tok);
            i += 1;
        }
    }
    EncodedSequence::new(out, seq.terminal)
}

/// Row of the encoded-sequences file.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceRow {
    pub student_id: StudentId,
    pub material_id: MaterialId,
    pub session_index: usize,
    pub sequence: EncodedSequence,
}

/// Encodes (and by default collapses) every session of every student.
pub fn encode_all(
    sessions: &BTreeMap<StudentId, Vec<Session>>,
    options: &EncodeOptions,
    collapse: bool,
) -> Vec<SequenceRow> {
    let mut rows = Vec::new();
    for (student, list) in sessions {
        for (idx, session) in list.iter().enumerate() {
            let encoded = encode(session, options);
            let sequence = if collapse { collapse_jumps(&encoded) } else { encoded };
            rows.push(SequenceRow {
                student_id: student.clone(),
                material_id: session.material_id.clone(),
                session_index: idx,
                sequence,
            });
        }
    }
    rows
}

/// Writes `student_id,material_id,session_index,sequence`.
pub fn write_sequences_csv<W: Write>(rows: &[SequenceRow], writer: W) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["student_id", "material_id", "session_index", "sequence"])?;
    for row in rows {
        wtr.write_record([
            row.student_id.as_str(),
            row.material_id.as_str(),
            &row.session_index.to_string(),
            &row.sequence.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads an encoded-sequences file back. Terminals are inferred from the
/// symbol string (trailing interval symbol means timeout).
pub fn read_sequences_csv<R: Read>(reader: R) -> Result<Vec<SequenceRow>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in ["student_id", "material_id", "session_index", "sequence"] {
        if !headers.iter().any(|h| h == col) {
            return Err(IngestError::MissingColumn { file: "sequences", column: col });
        }
    }
    let mut rows = Vec::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize| record.get(i).unwrap_or("");
        let sequence: EncodedSequence = get(3)
            .parse()
            .map_err(|e| IngestError::Row { line, message: e })?;
        let session_index: usize = get(2).parse().map_err(|_| IngestError::Row {
            line,
            message: format!("bad session_index {:?}", get(2)),
        })?;
        rows.push(SequenceRow {
            student_id: StudentId::new(get(0)),
            material_id: MaterialId::new(get(1)),
            session_index,
            sequence,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RawEvent;

    fn session(kinds_and_times: &[(EventKind, i64)], terminal: SessionTerminal) -> Session {
        let events: Vec<RawEvent> = kinds_and_times
            .iter()
            .map(|(kind, ts)| RawEvent {
                student_id: "s1".into(),
                material_id: "M1".into(),
                page: 1,
                kind: kind.clone(),
                timestamp_ms: *ts,
            })
            .collect();
        Session {
            student_id: "s1".into(),
            material_id: "M1".into(),
            events,
            terminal,
        }
    }

    fn seq(s: &str) -> EncodedSequence {
        s.parse().unwrap()
    }

    #[test]
    fn encodes_events_with_interval_symbols() {
        let s = session(
            &[
                (EventKind::Open, 0),
                (EventKind::Next, 5_000),
                (EventKind::Close, 65_000),
            ],
            SessionTerminal::Closed,
        );
        assert_eq!(encode(&s, &EncodeOptions::default()).to_string(), "OsNmC");
    }

    #[test]
    fn sub_3s_interval_emits_nothing() {
        let s = session(
            &[(EventKind::Next, 0), (EventKind::Next, 2_000)],
            SessionTerminal::EndOfStream,
        );
        assert_eq!(encode(&s, &EncodeOptions::default()).to_string(), "NN");
    }

    #[test]
    fn timeout_terminal_appends_long_symbol() {
        let s = session(
            &[(EventKind::Open, 0), (EventKind::Next, 4_000)],
            SessionTerminal::Timeout { gap_ms: 420_000 },
        );
        assert_eq!(encode(&s, &EncodeOptions::default()).to_string(), "OsNl");
        let no_append = EncodeOptions { append_terminal_gap: false, ..Default::default() };
        assert_eq!(encode(&s, &no_append).to_string(), "OsN");
    }

    #[test]
    fn other_events_encode_as_responsive() {
        let s = session(
            &[
                (EventKind::Open, 0),
                (EventKind::Other("ADD MARKER".into()), 4_000),
            ],
            SessionTerminal::EndOfStream,
        );
        assert_eq!(encode(&s, &EncodeOptions::default()).to_string(), "OsE");
    }

    #[test]
    fn collapse_recode_examples() {
        assert_eq!(collapse_jumps(&seq("NNNPNNP")).to_string(), "X");
        assert_eq!(collapse_jumps(&seq("NsN")).to_string(), "NsN");
        assert_eq!(collapse_jumps(&seq("PP")).to_string(), "Y");
        // net zero ties break forward
        assert_eq!(collapse_jumps(&seq("NP")).to_string(), "X");
        // logged jumps break runs and are never collapsed
        assert_eq!(collapse_jumps(&seq("NNJNN")).to_string(), "XJX");
        assert_eq!(collapse_jumps(&seq("ONNPEPPN")).to_string(), "OXEY");
    }

    #[test]
    fn collapse_is_idempotent_and_preserves_intervals() {
        for s in ["NNNPNNP", "OsNNmPPC", "NsNNsN", "ONNPEPPNl", "JJ", "OC"] {
            let once = collapse_jumps(&seq(s));
            let twice = collapse_jumps(&once);
            assert_eq!(once, twice, "not idempotent on {s}");
            let count = |e: &EncodedSequence| e.tokens.iter().filter(|t| t.is_interval()).count();
            assert_eq!(count(&seq(s)), count(&once), "interval count changed on {s}");
        }
    }

    #[test]
    fn encoding_recovers_event_kinds() {
        // injectivity up to suppressed intervals: event symbols in order
        let s = session(
            &[
                (EventKind::Open, 0),
                (EventKind::Jump, 1_000),
                (EventKind::Other("SEARCH".into()), 2_000),
                (EventKind::Prev, 50_000),
                (EventKind::Close, 60_000),
            ],
            SessionTerminal::Closed,
        );
        let encoded = encode(&s, &EncodeOptions::default());
        let events: Vec<Symbol> = encoded.tokens.iter().copied().filter(|t| t.is_event()).collect();
        assert_eq!(
            events,
            vec![Symbol::Open, Symbol::Jump, Symbol::Responsive, Symbol::Prev, Symbol::Close]
        );
    }

    #[test]
    fn sequence_csv_roundtrip() {
        let rows = vec![SequenceRow {
            student_id: "s1".into(),
            material_id: "M1".into(),
            session_index: 0,
            sequence: seq("OsNsXmJmNsXsC"),
        }];
        let mut buf = Vec::new();
        write_sequences_csv(&rows, &mut buf).unwrap();
        let back = read_sequences_csv(buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }
}
