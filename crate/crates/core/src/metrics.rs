//! The seven per-session sequence metrics and their per-student averages.
//!
//! Jump counting and the sequential ratio expect collapsed sequences
//! (see [`crate::encode::collapse_jumps`]); the interval census and the
//! predominance shares work on either form since collapsing never touches
//! interval symbols.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;
use crate::model::{EncodedSequence, MetricMeans, SequenceMetrics, SessionTerminal, StudentId, Symbol};

/// Counts of interval symbols in one sequence, including a trailing
/// terminal-gap symbol when present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalCensus {
    pub n_short: u32,
    pub n_medium: u32,
    pub n_long: u32,
}

impl IntervalCensus {
    pub fn total(&self) -> u32 {
        self.n_short + self.n_medium + self.n_long
    }
}

/// Number of jump tokens: recoded forward/backward jumps plus logged jumps.
pub fn n_jumps(seq: &EncodedSequence) -> u32 {
    seq.tokens.iter().filter(|t| t.is_jump()).count() as u32
}

/// Number of non-navigational (responsive) events.
pub fn n_responsive(seq: &EncodedSequence) -> u32 {
    seq.tokens.iter().filter(|&&t| t == Symbol::Responsive).count() as u32
}

/// Number of reading stops across one student's sessions: sessions that
/// ended in a drop-out timeout.
pub fn n_stops<'a, I>(terminals: I) -> u32
where
    I: IntoIterator<Item = &'a SessionTerminal>,
{
    terminals
        .into_iter()
        .filter(|t| matches!(t, SessionTerminal::Timeout { .. }))
        .count() as u32
}

/// Share of navigation that moves forward: `(#N + #X)` over all navigation
/// tokens `{N, P, J, X, Y}`. `None` when the session has no navigation.
pub fn sequential(seq: &EncodedSequence) -> Option<f64> {
    let nav = seq.tokens.iter().filter(|t| t.is_navigation()).count();
    if nav == 0 {
        return None;
    }
    let forward = seq
        .tokens
        .iter()
        .filter(|&&t| t == Symbol::Next || t == Symbol::Forward)
        .count();
    Some(forward as f64 / nav as f64)
}

pub fn interval_census(seq: &EncodedSequence) -> IntervalCensus {
    let mut census = IntervalCensus { n_short: 0, n_medium: 0, n_long: 0 };
    for t in &seq.tokens {
        match t {
            Symbol::Short => census.n_short += 1,
            Symbol::Medium => census.n_medium += 1,
            Symbol::Long => census.n_long += 1,
            _ => {}
        }
    }
    census
}

/// Squared-count shares of long, short and medium intervals
/// (stickiness, quickness, stableness). `None` when no intervals exist.
pub fn predominance(census: &IntervalCensus) -> Option<(f64, f64, f64)> {
    if census.total() == 0 {
        return None;
    }
    let s = (census.n_short as f64).powi(2);
    let m = (census.n_medium as f64).powi(2);
    let l = (census.n_long as f64).powi(2);
    let denom = s + m + l;
    Some((l / denom, s / denom, m / denom))
}

/// All per-session metrics of one collapsed sequence.
pub fn session_metrics(seq: &EncodedSequence) -> SequenceMetrics {
    let census = interval_census(seq);
    let predom = predominance(&census);
    SequenceMetrics {
        n_jumps: n_jumps(seq),
        n_responsive: n_responsive(seq),
        sequential: sequential(seq),
        stickiness: predom.map(|p| p.0),
        quickness: predom.map(|p| p.1),
        stableness: predom.map(|p| p.2),
    }
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Averages session metrics into the per-student profile fragment. Ratio
/// metrics average over the sessions where they are defined; sessions
/// without intervals (or without navigation) are skipped, not imputed as
/// zero. Returns `None` for a student with no sessions.
pub fn student_means(per_session: &[SequenceMetrics], n_stops: u32) -> Option<MetricMeans> {
    if per_session.is_empty() {
        return None;
    }
    let n = per_session.len() as f64;
    Some(MetricMeans {
        n_jumps: per_session.iter().map(|m| m.n_jumps as f64).sum::<f64>() / n,
        n_responsive: per_session.iter().map(|m| m.n_responsive as f64).sum::<f64>() / n,
        sequential: mean_defined(per_session.iter().map(|m| m.sequential)),
        stickiness: mean_defined(per_session.iter().map(|m| m.stickiness)),
        quickness: mean_defined(per_session.iter().map(|m| m.quickness)),
        stableness: mean_defined(per_session.iter().map(|m| m.stableness)),
        n_stops,
        n_sessions: per_session.len() as u32,
    })
}

/// Computes per-student means straight from collapsed sequences.
pub fn student_means_from_sequences(sequences: &[EncodedSequence]) -> Option<MetricMeans> {
    let per_session: Vec<SequenceMetrics> = sequences.iter().map(session_metrics).collect();
    let stops = n_stops(sequences.iter().map(|s| &s.terminal));
    student_means(&per_session, stops)
}

const METRICS_COLUMNS: [&str; 9] = [
    "student_id",
    "n_jumps",
    "n_responsive",
    "sequential",
    "stickiness",
    "quickness",
    "stableness",
    "n_stops",
    "n_sessions",
];

fn opt_to_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the per-student metrics file. Undefined ratios serialize as
/// empty fields.
pub fn write_metrics_csv<W: Write>(
    means: &BTreeMap<StudentId, MetricMeans>,
    writer: W,
) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(METRICS_COLUMNS)?;
    for (student, m) in means {
        wtr.write_record([
            student.as_str().to_string(),
            m.n_jumps.to_string(),
            m.n_responsive.to_string(),
            opt_to_field(m.sequential),
            opt_to_field(m.stickiness),
            opt_to_field(m.quickness),
            opt_to_field(m.stableness),
            m.n_stops.to_string(),
            m.n_sessions.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a per-student metrics file back.
pub fn read_metrics_csv<R: Read>(
    reader: R,
) -> Result<BTreeMap<StudentId, MetricMeans>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    for col in METRICS_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(IngestError::MissingColumn { file: "metrics", column: col });
        }
    }
    let parse_opt = |raw: &str, line: u64| -> Result<Option<f64>, IngestError> {
        if raw.is_empty() {
            Ok(None)
        } else {
            raw.parse::<f64>().map(Some).map_err(|_| IngestError::Row {
                line,
                message: format!("bad metric value {raw:?}"),
            })
        }
    };
    let mut out = BTreeMap::new();
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let get = |i: usize| record.get(i).unwrap_or("");
        let parse_num = |raw: &str| -> Result<f64, IngestError> {
            raw.parse::<f64>().map_err(|_| IngestError::Row {
                line,
                message: format!("bad metric value {raw:?}"),
            })
        };
        let parse_count = |raw: &str| -> Result<u32, IngestError> {
            raw.parse::<u32>().map_err(|_| IngestError::Row {
                line,
                message: format!("bad count {raw:?}"),
            })
        };
        out.insert(
            StudentId::new(get(0)),
            MetricMeans {
                n_jumps: parse_num(get(1))?,
                n_responsive: parse_num(get(2))?,
                sequential: parse_opt(get(3), line)?,
                stickiness: parse_opt(get(4), line)?,
                quickness: parse_opt(get(5), line)?,
                stableness: parse_opt(get(6), line)?,
                n_stops: parse_count(get(7))?,
                n_sessions: parse_count(get(8))?,
            },
        );
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> EncodedSequence {
        s.parse().unwrap()
    }

    #[test]
    fn n_jumps_counts_all_jump_tokens() {
        assert_eq!(n_jumps(&seq("OsNsXmJmNsXsC")), 3);
        assert_eq!(n_jumps(&seq("OC")), 0);
        assert_eq!(n_jumps(&seq("XYJ")), 3);
    }

    #[test]
    fn n_stops_counts_timeout_sessions() {
        let sessions = [seq("OsNsXmJsC"), seq("OsPsNl"), seq("NmNC")];
        assert_eq!(n_stops(sessions.iter().map(|s| &s.terminal)), 1);
        assert_eq!(n_stops([&SessionTerminal::Closed]), 0);
        let three = [SessionTerminal::Timeout { gap_ms: 400_000 }; 3];
        assert_eq!(n_stops(three.iter()), 3);
    }

    #[test]
    fn n_responsive_counts_e_tokens() {
        assert_eq!(n_responsive(&seq("OsXsEsNlNmEmC")), 2);
        assert_eq!(n_responsive(&seq("ONNC")), 0);
        assert_eq!(n_responsive(&seq("EEE")), 3);
    }

    #[test]
    fn sequential_ratio() {
        let v = sequential(&seq("OsNsXmNmEmNmXmYmXmNsN")).unwrap();
        assert!((v - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(sequential(&seq("OENsC")), Some(1.0));
        assert_eq!(sequential(&seq("OP")), Some(0.0));
        assert_eq!(sequential(&seq("OEC")), None);
        // logged jumps count in the denominator only
        assert!((sequential(&seq("NJ")).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn interval_census_counts() {
        let census = interval_census(&seq("OsNlXmEsNmXmYsXmNsNsXsN"));
        assert_eq!(census, IntervalCensus { n_short: 6, n_medium: 4, n_long: 1 });
        assert_eq!(interval_census(&seq("ONC")).total(), 0);
    }

    #[test]
    fn predominance_shares() {
        let (st, q, sb) =
            predominance(&IntervalCensus { n_short: 6, n_medium: 4, n_long: 1 }).unwrap();
        assert!((st - 1.0 / 53.0).abs() < 1e-12);
        assert!((q - 36.0 / 53.0).abs() < 1e-12);
        assert!((sb - 16.0 / 53.0).abs() < 1e-12);
        // rounds to the published 0.02 / 0.68 / 0.30
        assert_eq!(format!("{st:.2} {q:.2} {sb:.2}"), "0.02 0.68 0.30");

        assert_eq!(
            predominance(&IntervalCensus { n_short: 0, n_medium: 0, n_long: 5 }),
            Some((1.0, 0.0, 0.0))
        );
        let (a, b, c) =
            predominance(&IntervalCensus { n_short: 1, n_medium: 1, n_long: 1 }).unwrap();
        assert!((a - 1.0 / 3.0).abs() < 1e-12 && (b - c).abs() < 1e-12);
        assert_eq!(predominance(&IntervalCensus { n_short: 0, n_medium: 0, n_long: 0 }), None);
    }

    #[test]
    fn predominance_sums_to_one_when_defined() {
        for s in 0..6u32 {
            for m in 0..6u32 {
                for l in 0..6u32 {
                    let census = IntervalCensus { n_short: s, n_medium: m, n_long: l };
                    if let Some((a, b, c)) = predominance(&census) {
                        assert!((a + b + c - 1.0).abs() < 1e-9);
                        for v in [a, b, c] {
                            assert!((0.0..=1.0).contains(&v));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn student_means_average_defined_only() {
        let m1 = session_metrics(&seq("OsXsC")); // has intervals + nav
        let m2 = session_metrics(&seq("OXC")); // nav but no intervals
        let means = student_means(&[m1, m2], 4).unwrap();
        assert_eq!(means.n_sessions, 2);
        assert_eq!(means.n_stops, 4);
        // stickiness defined only in the first session: mean over one value
        assert_eq!(means.stickiness, m1.stickiness);
        assert!((means.n_jumps - 1.0).abs() < 1e-12);
        assert!(student_means(&[], 0).is_none());
    }

    #[test]
    fn jump_count_means_average_plainly() {
        let a = SequenceMetrics {
            n_jumps: 2,
            n_responsive: 0,
            sequential: None,
            stickiness: None,
            quickness: None,
            stableness: None,
        };
        let b = SequenceMetrics { n_jumps: 4, ..a };
        let means = student_means(&[a, b], 0).unwrap();
        assert!((means.n_jumps - 3.0).abs() < 1e-12);
        assert_eq!(means.sequential, None);
    }

    #[test]
    fn metrics_csv_roundtrip() {
        let mut map = BTreeMap::new();
        map.insert(
            StudentId::from("s1"),
            MetricMeans {
                n_jumps: 1.5,
                n_responsive: 0.25,
                sequential: Some(0.875),
                stickiness: None,
                quickness: Some(0.5),
                stableness: Some(0.5),
                n_stops: 2,
                n_sessions: 4,
            },
        );
        let mut buf = Vec::new();
        write_metrics_csv(&map, &mut buf).unwrap();
        let back = read_metrics_csv(buf.as_slice()).unwrap();
        assert_eq!(back, map);
    }
}
