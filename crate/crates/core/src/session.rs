//! Segments one student's event stream into reading sessions.
//!
//! A session breaks on any of three conditions, checked in this order for
//! each consecutive event pair:
//!
//! 1. the previous event was a close (terminal `Closed`; the close stays
//!    as the last event of its session),
//! 2. the gap to the next event reaches the drop-out threshold (terminal
//!    `Timeout` carrying the gap, and counted later as a reading stop),
//! 3. the material changes (terminal `EndOfStream`; switching material
//!    without a qualifying pause is not a stop).
//!
//! The final session is `Closed` if it ends in a close event, otherwise
//! `EndOfStream`.

use std::collections::BTreeMap;
use std::io::Write;

use crate::ingest::IngestError;
use crate::model::{RawEvent, Session, SessionTerminal, StudentId};

/// Default drop-out threshold: six minutes.
pub const DEFAULT_GAP_THRESHOLD_MS: u64 = 360_000;

/// Splits a single student's timestamp-sorted events into sessions.
/// Gaps strictly shorter than `gap_threshold_ms` stay within a session.
pub fn sessionize(events: &[RawEvent], gap_threshold_ms: u64) -> Vec<Session> {
    if events.is_empty() {
        return Vec::new();
    }
    debug_assert!(
        events.windows(2).all(|w| {
            w[0].timestamp_ms <= w[1].timestamp_ms && w[0].student_id == w[1].student_id
        }),
        "sessionize input must be one student's stream sorted by timestamp"
    );

    let mut sessions = Vec::new();
    let mut current: Vec<RawEvent> = vec![events[0].clone()];

    let flush = |buf: &mut Vec<RawEvent>, terminal: SessionTerminal, out: &mut Vec<Session>| {
        let events = std::mem::take(buf);
        out.push(Session {
            student_id: events[0].student_id.clone(),
            material_id: events[0].material_id.clone(),
            events,
            terminal,
        });
    };

    for next in &events[1..] {
        let prev = current.last().expect("current session is never empty");
        let gap = (next.timestamp_ms - prev.timestamp_ms) as u64;
        let terminal = if prev.kind.is_close() {
            Some(SessionTerminal::Closed)
        } else if gap >= gap_threshold_ms {
            Some(SessionTerminal::Timeout { gap_ms: gap })
        } else if next.material_id != prev.material_id {
            Some(SessionTerminal::EndOfStream)
        } else {
            None
        };
        match terminal {
            Some(t) => flush(&mut current, t, &mut sessions),
            None => {}
        }
        current.push(next.clone());
    }
    let last_terminal = if current.last().is_some_and(|e| e.kind.is_close()) {
        SessionTerminal::Closed
    } else {
        SessionTerminal::EndOfStream
    };
    flush(&mut current, last_terminal, &mut sessions);

    debug_assert!(sessions.iter().all(|s| s.validate(gap_threshold_ms).is_ok()));
    sessions
}

/// Sessionizes every student of a parsed event map.
pub fn sessionize_all(
    events: &BTreeMap<StudentId, Vec<RawEvent>>,
    gap_threshold_ms: u64,
) -> BTreeMap<StudentId, Vec<Session>> {
    events
        .iter()
        .map(|(id, stream)| (id.clone(), sessionize(stream, gap_threshold_ms)))
        .collect()
}

/// Writes the sessions file
/// (`student_id,material_id,session_index,start_ms,end_ms,n_events,terminal`)
/// and returns warnings for degenerate lone-close sessions.
pub fn write_sessions_csv<W: Write>(
    sessions: &BTreeMap<StudentId, Vec<Session>>,
    writer: W,
) -> Result<Vec<String>, IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "student_id",
        "material_id",
        "session_index",
        "start_ms",
        "end_ms",
        "n_events",
        "terminal",
    ])?;
    let mut warnings = Vec::new();
    for (student, list) in sessions {
        for (idx, session) in list.iter().enumerate() {
            if session.is_lone_close() {
                warnings.push(format!(
                    "{student} session {idx}: lone close event with no preceding activity"
                ));
            }
            wtr.write_record([
                student.as_str(),
                session.material_id.as_str(),
                &idx.to_string(),
                &session.start_ms().to_string(),
                &session.end_ms().to_string(),
                &session.events.len().to_string(),
                &session.terminal.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(warnings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::EventKind;

    fn ev(material: &str, kind: EventKind, ts: i64) -> RawEvent {
        RawEvent {
            student_id: "s1".into(),
            material_id: material.into(),
            page: 1,
            kind,
            timestamp_ms: ts,
        }
    }

    #[test]
    fn seven_minute_gap_splits_with_timeout() {
        let events = vec![ev("M1", EventKind::Open, 0), ev("M1", EventKind::Next, 420_000)];
        let sessions = sessionize(&events, DEFAULT_GAP_THRESHOLD_MS);
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[0].terminal, SessionTerminal::Timeout { gap_ms: 420_000 });
        assert_eq!(sessions[1].terminal, SessionTerminal::EndOfStream);
    }

    #[test]
    fn close_event_ends_its_session() {
        let events = vec![
            ev("M1", EventKind::Open, 0),
            ev("M1", EventKind::Next, 1_000),
            ev("M1", EventKind::Close, 2_000),
            ev("M1", EventKind::Open, 3_000),
            ev("M1", EventKind::Next, 4_000),
        ];
        let sessions = sessionize(&events, DEFAULT_GAP_THRESHOLD_MS);
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[0].terminal, SessionTerminal::Closed);
        assert_eq!(sessions[0].events.len(), 3);
        assert_eq!(sessions[1].events.len(), 2);
    }

    #[test]
    fn material_change_splits_without_stop() {
        let events = vec![
            ev("M1", EventKind::Next, 0),
            ev("M2", EventKind::Next, 1_000),
            ev("M1", EventKind::Next, 2_000),
        ];
        let sessions = sessionize(&events, DEFAULT_GAP_THRESHOLD_MS);
        assert_eq!(sessions.len(), 3);
        assert!(sessions
            .iter()
            .all(|s| !matches!(s.terminal, SessionTerminal::Timeout { .. })));
    }

    #[test]
    fn long_gap_wins_over_material_change() {
        let events = vec![ev("M1", EventKind::Next, 0), ev("M2", EventKind::Open, 500_000)];
        let sessions = sessionize(&events, DEFAULT_GAP_THRESHOLD_MS);
        assert_eq!(sessions[0].terminal, SessionTerminal::Timeout { gap_ms: 500_000 });
    }

    #[test]
    fn gap_just_under_threshold_stays_inside() {
        let events = vec![ev("M1", EventKind::Open, 0), ev("M1", EventKind::Next, 359_999)];
        assert_eq!(sessionize(&events, DEFAULT_GAP_THRESHOLD_MS).len(), 1);
        let events = vec![ev("M1", EventKind::Open, 0), ev("M1", EventKind::Next, 360_000)];
        assert_eq!(sessionize(&events, DEFAULT_GAP_THRESHOLD_MS).len(), 2);
    }

    #[test]
    fn lone_close_is_its_own_session() {
        let events = vec![
            ev("M1", EventKind::Close, 0),
            ev("M1", EventKind::Open, 1_000),
        ];
        let sessions = sessionize(&events, DEFAULT_GAP_THRESHOLD_MS);
        assert_eq!(sessions.len(), 2);
        assert!(sessions[0].is_lone_close());
        assert_eq!(sessions[0].terminal, SessionTerminal::Closed);
    }

    #[test]
    fn final_close_marks_last_session_closed() {
        let events = vec![ev("M1", EventKind::Open, 0), ev("M1", EventKind::Close, 1_000)];
        let sessions = sessionize(&events, DEFAULT_GAP_THRESHOLD_MS);
        assert_eq!(sessions.len(), 1);
        assert_eq!(sessions[0].terminal, SessionTerminal::Closed);
    }

    #[test]
    fn empty_input_gives_no_sessions() {
        assert!(sessionize(&[], DEFAULT_GAP_THRESHOLD_MS).is_empty());
    }

    #[test]
    fn concatenated_sessions_reproduce_input() {
        // deterministic pseudo-random stream
        let mut state = 12345u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state >> 33
        };
        let mut events = Vec::new();
        let mut ts = 0i64;
        for _ in 0..500 {
            ts += (next() % 800_000) as i64;
            let material = if next() % 3 == 0 { "M2" } else { "M1" };
            let kind = match next() % 5 {
                0 => EventKind::Open,
                1 => EventKind::Close,
                2 => EventKind::Prev,
                3 => EventKind::Jump,
                _ => EventKind::Next,
            };
            events.push(ev(material, kind, ts));
        }
        let sessions = sessionize(&events, DEFAULT_GAP_THRESHOLD_MS);
        let rebuilt: Vec<RawEvent> =
            sessions.iter().flat_map(|s| s.events.iter().cloned()).collect();
        assert_eq!(rebuilt, events);
        for s in &sessions {
            s.validate(DEFAULT_GAP_THRESHOLD_MS).unwrap();
        }
    }
}
