//! Shared domain types: events, interval classes, sessions, encoded
//! sequences, per-session metrics and the joined per-student profile.
//!
//! All types are immutable value types and safe to share across threads.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Opaque student identifier. Matching across files is exact string match.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StudentId(pub String);

impl StudentId {
    pub fn new(id: impl Into<String>) -> Self {
        StudentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for StudentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for StudentId {
    fn from(s: &str) -> Self {
        StudentId(s.to_string())
    }
}

/// Opaque learning-material identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MaterialId(pub String);

impl MaterialId {
    pub fn new(id: impl Into<String>) -> Self {
        MaterialId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for MaterialId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for MaterialId {
    fn from(s: &str) -> Self {
        MaterialId(s.to_string())
    }
}

/// Kind of a logged interaction. Anything that is not one of the five
/// canonical navigation/lifecycle actions is kept as `Other` with its raw
/// label preserved for audit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Next,
    Prev,
    Jump,
    Open,
    Close,
    Other(String),
}

impl EventKind {
    /// Maps a raw event-type string onto a kind. The five canonical labels
    /// are matched case-insensitively; everything else becomes `Other`
    /// carrying the original string. Empty labels are rejected upstream.
    pub fn from_label(label: &str) -> EventKind {
        match label.trim().to_ascii_uppercase().as_str() {
            "NEXT" => EventKind::Next,
            "PREV" | "PREVIOUS" => EventKind::Prev,
            "JUMP" => EventKind::Jump,
            "OPEN" => EventKind::Open,
            "CLOSE" => EventKind::Close,
            _ => EventKind::Other(label.to_string()),
        }
    }

    /// Canonical label used when serializing back to a log file.
    pub fn label(&self) -> &str {
        match self {
            EventKind::Next => "NEXT",
            EventKind::Prev => "PREV",
            EventKind::Jump => "JUMP",
            EventKind::Open => "OPEN",
            EventKind::Close => "CLOSE",
            EventKind::Other(l) => l,
        }
    }

    pub fn is_close(&self) -> bool {
        matches!(self, EventKind::Close)
    }
}

/// One logged interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawEvent {
    pub student_id: StudentId,
    pub material_id: MaterialId,
    /// 1-based page number.
    pub page: u32,
    pub kind: EventKind,
    /// Milliseconds since the Unix epoch; never negative.
    pub timestamp_ms: i64,
}

impl RawEvent {
    pub fn validate(&self) -> Result<(), String> {
        if self.page < 1 {
            return Err(format!("page must be >= 1, got {}", self.page));
        }
        if self.timestamp_ms < 0 {
            return Err(format!("timestamp must be >= 0, got {}", self.timestamp_ms));
        }
        if let EventKind::Other(label) = &self.kind {
            if label.trim().is_empty() {
                return Err("event type label must be non-empty".to_string());
            }
        }
        Ok(())
    }
}

/// Classification of the pause between two consecutive events. Gaps under
/// the short floor emit no symbol at all.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum IntervalClass {
    Suppressed,
    Short,
    Medium,
    Long,
}

/// Half-open interval boundaries in milliseconds: suppressed below
/// `short_floor_ms`, short in `[short, medium)`, medium in `[medium, long)`,
/// long at or above `long_floor_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalThresholds {
    pub short_floor_ms: u64,
    pub medium_floor_ms: u64,
    pub long_floor_ms: u64,
}

impl Default for IntervalThresholds {
    fn default() -> Self {
        IntervalThresholds {
            short_floor_ms: 3_000,
            medium_floor_ms: 10_000,
            long_floor_ms: 120_000,
        }
    }
}

impl IntervalThresholds {
    pub fn classify(&self, delta_ms: u64) -> IntervalClass {
        if delta_ms < self.short_floor_ms {
            IntervalClass::Suppressed
        } else if delta_ms < self.medium_floor_ms {
            IntervalClass::Short
        } else if delta_ms < self.long_floor_ms {
            IntervalClass::Medium
        } else {
            IntervalClass::Long
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.short_floor_ms < self.medium_floor_ms && self.medium_floor_ms < self.long_floor_ms
        {
            Ok(())
        } else {
            Err(format!(
                "interval floors must be strictly increasing: {} / {} / {}",
                self.short_floor_ms, self.medium_floor_ms, self.long_floor_ms
            ))
        }
    }
}

/// Classifies a gap with the default thresholds (3 s / 10 s / 120 s).
pub fn classify_interval(delta_ms: u64) -> IntervalClass {
    IntervalThresholds::default().classify(delta_ms)
}

/// Why a session ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionTerminal {
    /// The session's final event is a close.
    Closed,
    /// The next event of the same student came only after `gap_ms` of
    /// inactivity (at or above the sessionization threshold).
    Timeout { gap_ms: u64 },
    /// The stream ended here, or the student switched material without a
    /// qualifying pause.
    EndOfStream,
}

impl fmt::Display for SessionTerminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionTerminal::Closed => f.write_str("closed"),
            SessionTerminal::Timeout { gap_ms } => write!(f, "timeout:{gap_ms}"),
            SessionTerminal::EndOfStream => f.write_str("end_of_stream"),
        }
    }
}

impl FromStr for SessionTerminal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "closed" => Ok(SessionTerminal::Closed),
            "end_of_stream" => Ok(SessionTerminal::EndOfStream),
            other => match other.strip_prefix("timeout:") {
                Some(gap) => gap
                    .parse::<u64>()
                    .map(|gap_ms| SessionTerminal::Timeout { gap_ms })
                    .map_err(|e| format!("bad timeout gap {gap:?}: {e}")),
                None => Err(format!("unknown session terminal {other:?}")),
            },
        }
    }
}

/// A contiguous block of e-book usage: one student, one material, all
/// inter-event gaps under the sessionization threshold, and a close event
/// only ever in final position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub student_id: StudentId,
    pub material_id: MaterialId,
    pub events: Vec<RawEvent>,
    pub terminal: SessionTerminal,
}

impl Session {
    pub fn start_ms(&self) -> i64 {
        self.events.first().map(|e| e.timestamp_ms).unwrap_or(0)
    }

    pub fn end_ms(&self) -> i64 {
        self.events.last().map(|e| e.timestamp_ms).unwrap_or(0)
    }

    /// A session consisting of nothing but a close event; accepted but
    /// worth flagging since it carries no reading activity.
    pub fn is_lone_close(&self) -> bool {
        self.events.len() == 1 && self.events[0].kind.is_close()
    }

    /// Checks every session invariant. Downstream stages run this in debug
    /// builds before consuming a session.
    pub fn validate(&self, gap_threshold_ms: u64) -> Result<(), String> {
        if self.events.is_empty() {
            return Err("session has no events".to_string());
        }
        for (i, ev) in self.events.iter().enumerate() {
            if ev.student_id != self.student_id {
                return Err(format!("event {i} has foreign student id {}", ev.student_id));
            }
            if ev.material_id != self.material_id {
                return Err(format!("event {i} has foreign material id {}", ev.material_id));
            }
            if ev.kind.is_close() && i + 1 != self.events.len() {
                return Err(format!("close event at interior position {i}"));
            }
        }
        for pair in self.events.windows(2) {
            if pair[1].timestamp_ms < pair[0].timestamp_ms {
                return Err("timestamps decrease within session".to_string());
            }
            let gap = (pair[1].timestamp_ms - pair[0].timestamp_ms) as u64;
            if gap >= gap_threshold_ms {
                return Err(format!("interior gap {gap} ms >= threshold {gap_threshold_ms}"));
            }
        }
        Ok(())
    }
}

/// One character of an encoded session sequence (event symbols plus the
/// three interval symbols).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// `O` - open the textbook.
    Open,
    /// `C` - close the textbook.
    Close,
    /// `N` - go to the next page.
    Next,
    /// `P` - go to the previous page.
    Prev,
    /// `J` - jump to a specific page (logged as such).
    Jump,
    /// `X` - recoded forward jump (run of uninterrupted next/prev events).
    Forward,
    /// `Y` - recoded backward jump.
    Backward,
    /// `E` - non-navigational event (highlight, note, bookmark, search...).
    Responsive,
    /// `s` - short interval.
    Short,
    /// `m` - medium interval.
    Medium,
    /// `l` - long interval.
    Long,
}

impl Symbol {
    pub fn to_char(self) -> char {
        match self {
            Symbol::Open => 'O',
            Symbol::Close => 'C',
            Symbol::Next => 'N',
            Symbol::Prev => 'P',
            Symbol::Jump => 'J',
            Symbol::Forward => 'X',
            Symbol::Backward => 'Y',
            Symbol::Responsive => 'E',
            Symbol::Short => 's',
            Symbol::Medium => 'm',
            Symbol::Long => 'l',
        }
    }

    pub fn from_char(c: char) -> Option<Symbol> {
        Some(match c {
            'O' => Symbol::Open,
            'C' => Symbol::Close,
            'N' => Symbol::Next,
            'P' => Symbol::Prev,
            'J' => Symbol::Jump,
            'X' => Symbol::Forward,
            'Y' => Symbol::Backward,
            'E' => Symbol::Responsive,
            's' => Symbol::Short,
            'm' => Symbol::Medium,
            'l' => Symbol::Long,
            _ => return None,
        })
    }

    pub fn is_interval(self) -> bool {
        matches!(self, Symbol::Short | Symbol::Medium | Symbol::Long)
    }

    pub fn is_event(self) -> bool {
        !self.is_interval()
    }

    /// Navigation tokens for the sequential-reading ratio.
    pub fn is_navigation(self) -> bool {
        matches!(
            self,
            Symbol::Next | Symbol::Prev | Symbol::Jump | Symbol::Forward | Symbol::Backward
        )
    }

    /// Tokens that count as a jump: logged jumps plus recoded runs.
    pub fn is_jump(self) -> bool {
        matches!(self, Symbol::Jump | Symbol::Forward | Symbol::Backward)
    }
}

/// A session rendered as a symbol string, e.g. `OsNmC`. Interval symbols
/// never open the sequence and never appear adjacent to each other; a
/// trailing interval symbol is the class of the timeout gap that ended the
/// session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedSequence {
    pub tokens: Vec<Symbol>,
    pub terminal: SessionTerminal,
}

impl EncodedSequence {
    pub fn new(tokens: Vec<Symbol>, terminal: SessionTerminal) -> Self {
        EncodedSequence { tokens, terminal }
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(first) = self.tokens.first() {
            if first.is_interval() {
                return Err("sequence starts with an interval symbol".to_string());
            }
        }
        for pair in self.tokens.windows(2) {
            if pair[0].is_interval() && pair[1].is_interval() {
                return Err("adjacent interval symbols".to_string());
            }
        }
        Ok(())
    }
}

impl fmt::Display for EncodedSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tokens {
            write!(f, "{}", t.to_char())?;
        }
        Ok(())
    }
}

impl FromStr for EncodedSequence {
    type Err = String;

    /// Parses a symbol string. The terminal is inferred: a trailing
    /// interval symbol marks a timeout-ended session (the gap itself is not
    /// recoverable from the string, so the threshold minimum is recorded),
    /// a trailing `C` marks a closed one, anything else end-of-stream.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut tokens = Vec::with_capacity(s.len());
        for (i, c) in s.chars().enumerate() {
            let sym = Symbol::from_char(c)
                .ok_or_else(|| format!("unknown sequence symbol {c:?} at position {i}"))?;
            tokens.push(sym);
        }
        let terminal = match tokens.last() {
            Some(t) if t.is_interval() => SessionTerminal::Timeout { gap_ms: 360_000 },
            Some(Symbol::Close) => SessionTerminal::Closed,
            _ => SessionTerminal::EndOfStream,
        };
        let seq = EncodedSequence { tokens, terminal };
        seq.validate()?;
        Ok(seq)
    }
}

/// The seven per-session sequence metrics. Ratio metrics are `None` when
/// their denominator is empty; they are never silently zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequenceMetrics {
    pub n_jumps: u32,
    pub n_responsive: u32,
    pub sequential: Option<f64>,
    pub stickiness: Option<f64>,
    pub quickness: Option<f64>,
    pub stableness: Option<f64>,
}

/// Per-student averages of the session metrics, plus the across-session
/// stop count and the number of sessions that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMeans {
    pub n_jumps: f64,
    pub n_responsive: f64,
    pub sequential: Option<f64>,
    pub stickiness: Option<f64>,
    pub quickness: Option<f64>,
    pub stableness: Option<f64>,
    /// Count of timeout-terminated sessions; a raw per-student count, not
    /// averaged over sessions.
    pub n_stops: u32,
    pub n_sessions: u32,
}

/// Joined per-student row used by the analysis pipelines. Optional fields
/// are flagged absent rather than defaulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentProfile {
    pub student_id: StudentId,
    pub metrics: Option<MetricMeans>,
    /// Cohort-normalized engagement indicator on the 0-1 scale.
    pub engagement: Option<f64>,
    pub deci: Option<f64>,
    pub dece: Option<f64>,
    pub mw_s: Option<f64>,
    pub mw_d: Option<f64>,
    /// Final grade on the 0-4 scale.
    pub grade: Option<f64>,
}

impl StudentProfile {
    pub fn empty(student_id: StudentId) -> Self {
        StudentProfile {
            student_id,
            metrics: None,
            engagement: None,
            deci: None,
            dece: None,
            mw_s: None,
            mw_d: None,
            grade: None,
        }
    }
}
