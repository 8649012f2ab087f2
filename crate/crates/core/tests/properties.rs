//! Property tests for the parsing/sessionizing/encoding invariants.

use std::collections::BTreeMap;

use proptest::prelude::*;

use readtrace_core::encode::{collapse_jumps, encode, EncodeOptions};
use readtrace_core::ingest::{parse_events, write_events_csv, EventFormat};
use readtrace_core::metrics::{n_stops, session_metrics, student_means};
use readtrace_core::model::{
    EncodedSequence, EventKind, RawEvent, SessionTerminal, StudentId, Symbol,
};
use readtrace_core::session::{sessionize, DEFAULT_GAP_THRESHOLD_MS};

fn arb_kind() -> impl Strategy<Value = EventKind> {
    prop_oneof![
        Just(EventKind::Next),
        Just(EventKind::Prev),
        Just(EventKind::Jump),
        Just(EventKind::Open),
        Just(EventKind::Close),
        prop_oneof![
            Just("ADD MARKER"),
            Just("ADD MEMO"),
            Just("SEARCH"),
            Just("ADD BOOKMARK"),
        ]
        .prop_map(|l| EventKind::Other(l.to_string())),
    ]
}

fn arb_stream(student: &'static str) -> impl Strategy<Value = Vec<RawEvent>> {
    (
        prop::collection::vec((arb_kind(), 0u64..900_000, 1u32..40, 0usize..2), 0..60),
        0i64..1_000_000_000,
    )
        .prop_map(move |(steps, start)| {
            let mut ts = start;
            steps
                .into_iter()
                .map(|(kind, gap, page, material)| {
                    ts += gap as i64;
                    RawEvent {
                        student_id: student.into(),
                        material_id: if material == 0 { "M1".into() } else { "M2".into() },
                        page,
                        kind,
                        timestamp_ms: ts,
                    }
                })
                .collect()
        })
}

proptest! {
    #[test]
    fn events_roundtrip_through_csv(stream in arb_stream("s1"), other in arb_stream("s2")) {
        let mut map = BTreeMap::new();
        if !stream.is_empty() {
            map.insert(StudentId::from("s1"), stream);
        }
        if !other.is_empty() {
            map.insert(StudentId::from("s2"), other);
        }
        let mut buf = Vec::new();
        write_events_csv(&map, &mut buf).unwrap();
        let parsed = parse_events(buf.as_slice(), EventFormat::Csv).unwrap();
        prop_assert_eq!(parsed, map);
    }

    #[test]
    fn parsing_is_idempotent(stream in arb_stream("s1")) {
        let mut map = BTreeMap::new();
        if !stream.is_empty() {
            map.insert(StudentId::from("s1"), stream);
        }
        let mut buf = Vec::new();
        write_events_csv(&map, &mut buf).unwrap();
        let once = parse_events(buf.as_slice(), EventFormat::Csv).unwrap();
        let twice = parse_events(buf.as_slice(), EventFormat::Csv).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn sessions_partition_the_stream(stream in arb_stream("s1")) {
        let sessions = sessionize(&stream, DEFAULT_GAP_THRESHOLD_MS);
        let rebuilt: Vec<RawEvent> =
            sessions.iter().flat_map(|s| s.events.iter().cloned()).collect();
        prop_assert_eq!(rebuilt, stream);
        for s in &sessions {
            prop_assert!(s.validate(DEFAULT_GAP_THRESHOLD_MS).is_ok());
        }
    }

    #[test]
    fn metrics_ignore_timestamp_translation(stream in arb_stream("s1"), shift in 0i64..50_000_000_000) {
        let run = |events: &[RawEvent]| {
            let sessions = sessionize(events, DEFAULT_GAP_THRESHOLD_MS);
            let seqs: Vec<EncodedSequence> = sessions
                .iter()
                .map(|s| collapse_jumps(&encode(s, &EncodeOptions::default())))
                .collect();
            let per_session: Vec<_> = seqs.iter().map(session_metrics).collect();
            let stops = n_stops(seqs.iter().map(|s| &s.terminal));
            student_means(&per_session, stops)
        };
        let shifted: Vec<RawEvent> = stream
            .iter()
            .cloned()
            .map(|mut e| { e.timestamp_ms += shift; e })
            .collect();
        prop_assert_eq!(run(&stream), run(&shifted));
    }
}

fn arb_sequence() -> impl Strategy<Value = EncodedSequence> {
    let event = prop_oneof![
        Just(Symbol::Open),
        Just(Symbol::Next),
        Just(Symbol::Prev),
        Just(Symbol::Jump),
        Just(Symbol::Forward),
        Just(Symbol::Backward),
        Just(Symbol::Responsive),
    ];
    let interval = prop_oneof![
        Just(None),
        Just(Some(Symbol::Short)),
        Just(Some(Symbol::Medium)),
        Just(Some(Symbol::Long)),
    ];
    prop::collection::vec((event, interval), 0..40).prop_map(|pairs| {
        // alternate event [interval] so the sequence invariants hold
        let mut tokens = Vec::new();
        let n = pairs.len();
        for (i, (event, gap)) in pairs.into_iter().enumerate() {
            tokens.push(event);
            if i + 1 < n {
                if let Some(g) = gap {
                    tokens.push(g);
                }
            }
        }
        EncodedSequence::new(tokens, SessionTerminal::EndOfStream)
    })
}

proptest! {
    #[test]
    fn collapse_is_idempotent(seq in arb_sequence()) {
        seq.validate().unwrap();
        let once = collapse_jumps(&seq);
        let twice = collapse_jumps(&once);
        prop_assert_eq!(&once, &twice);
    }

    #[test]
    fn collapse_preserves_interval_symbols(seq in arb_sequence()) {
        let count = |s: &EncodedSequence| s.tokens.iter().filter(|t| t.is_interval()).count();
        prop_assert_eq!(count(&seq), count(&collapse_jumps(&seq)));
    }
}
