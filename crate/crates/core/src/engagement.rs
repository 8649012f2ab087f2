//! Cohort-normalized engagement indicator.
//!
//! Per student, thirteen activity sub-metrics are computed from their
//! reading sessions: event count, time spent, reading days, dwell events
//! (followed by a pause of at least three seconds), highlights and notes -
//! each at material level (totals) and at page level (per-page values
//! averaged over visited pages) - plus the completed share of material
//! pages. Every sub-metric is percentile-ranked across the cohort
//! (midrank ties, rank/n) and the engagement score is the unweighted mean
//! of the ranks, landing in (0, 1].

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;
use crate::model::{EventKind, MaterialId, Session, StudentId};

const MS_PER_DAY: i64 = 86_400_000;

/// Sub-metric computation knobs. Highlight and note events are `Other`
/// events whose label contains one of the configured fragments
/// (case-insensitive); the defaults match the MARKER/MEMO vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngagementConfig {
    pub tz_offset_minutes: i32,
    pub highlight_labels: Vec<String>,
    pub note_labels: Vec<String>,
    /// Dwell floor: an event counts as "read" when the pause after it is at
    /// least this long.
    pub dwell_floor_ms: u64,
}

impl Default for EngagementConfig {
    fn default() -> Self {
        EngagementConfig {
            tz_offset_minutes: 0,
            highlight_labels: vec!["MARKER".to_string()],
            note_labels: vec!["MEMO".to_string()],
            dwell_floor_ms: 3_000,
        }
    }
}

impl EngagementConfig {
    fn is_highlight(&self, kind: &EventKind) -> bool {
        self.label_matches(kind, &self.highlight_labels)
    }

    fn is_note(&self, kind: &EventKind) -> bool {
        self.label_matches(kind, &self.note_labels)
    }

    fn label_matches(&self, kind: &EventKind, fragments: &[String]) -> bool {
        match kind {
            EventKind::Other(label) => {
                let upper = label.to_ascii_uppercase();
                fragments.iter().any(|f| upper.contains(&f.to_ascii_uppercase()))
            }
            _ => false,
        }
    }

    fn day_of(&self, timestamp_ms: i64) -> i64 {
        (timestamp_ms + self.tz_offset_minutes as i64 * 60_000).div_euclid(MS_PER_DAY)
    }
}

/// The six activity dimensions measured at one level.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub total_events: f64,
    pub time_spent_ms: f64,
    pub reading_days: f64,
    pub dwell_events: f64,
    pub highlights: f64,
    pub notes: f64,
}

/// One student's engagement sub-metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubMetrics {
    pub material: LevelMetrics,
    pub page: LevelMetrics,
    /// Mean over manifest-known materials of (distinct pages visited /
    /// pages in material); `None` when no touched material is in the
    /// manifest.
    pub completion_pct: Option<f64>,
}

/// Canonical sub-metric order used for ranking and CSV output.
pub const SUBMETRIC_NAMES: [&str; 13] = [
    "material_total_events",
    "material_time_spent_ms",
    "material_reading_days",
    "material_dwell_events",
    "material_highlights",
    "material_notes",
    "page_total_events",
    "page_time_spent_ms",
    "page_reading_days",
    "page_dwell_events",
    "page_highlights",
    "page_notes",
    "completion_pct",
];

impl SubMetrics {
    /// Values in [`SUBMETRIC_NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 13] {
        let m = &self.material;
        let p = &self.page;
        [
            Some(m.total_events),
            Some(m.time_spent_ms),
            Some(m.reading_days),
            Some(m.dwell_events),
            Some(m.highlights),
            Some(m.notes),
            Some(p.total_events),
            Some(p.time_spent_ms),
            Some(p.reading_days),
            Some(p.dwell_events),
            Some(p.highlights),
            Some(p.notes),
            self.completion_pct,
        ]
    }
}

#[derive(Default)]
struct PageAccumulator {
    events: f64,
    time_ms: f64,
    days: BTreeSet<i64>,
    dwell: f64,
    highlights: f64,
    notes: f64,
}

/// Computes one student's sub-metrics from their sessions. Time spent is
/// the sum of within-session inter-event gaps, each gap attributed to the
/// page shown while it elapsed. Returns warnings for materials missing
/// from the manifest (their completion contribution is skipped).
pub fn compute_submetrics(
    sessions: &[Session],
    manifest: &BTreeMap<MaterialId, u32>,
    config: &EngagementConfig,
) -> (SubMetrics, Vec<String>) {
    let mut material = LevelMetrics::default();
    let mut days: BTreeSet<i64> = BTreeSet::new();
    let mut pages: BTreeMap<(MaterialId, u32), PageAccumulator> = BTreeMap::new();
    let mut pages_per_material: BTreeMap<MaterialId, BTreeSet<u32>> = BTreeMap::new();

    for session in sessions {
        for (i, event) in session.events.iter().enumerate() {
            let key = (session.material_id.clone(), event.page);
            let acc = pages.entry(key).or_default();
            let day = config.day_of(event.timestamp_ms);

            material.total_events += 1.0;
            days.insert(day);
            acc.events += 1.0;
            acc.days.insert(day);
            pages_per_material
                .entry(session.material_id.clone())
                .or_default()
                .insert(event.page);

            if config.is_highlight(&event.kind) {
                material.highlights += 1.0;
                acc.highlights += 1.0;
            }
            if config.is_note(&event.kind) {
                material.notes += 1.0;
                acc.notes += 1.0;
            }

            if let Some(next) = session.events.get(i + 1) {
                let gap = (next.timestamp_ms - event.timestamp_ms) as u64;
                material.time_spent_ms += gap as f64;
                acc.time_ms += gap as f64;
                if gap >= config.dwell_floor_ms {
                    material.dwell_events += 1.0;
                    acc.dwell += 1.0;
                }
            }
        }
    }
    material.reading_days = days.len() as f64;

    let mut page = LevelMetrics::default();
    if !pages.is_empty() {
        let n = pages.len() as f64;
        for acc in pages.values() {
            page.total_events += acc.events;
            page.time_spent_ms += acc.time_ms;
            page.reading_days += acc.days.len() as f64;
            page.dwell_events += acc.dwell;
            page.highlights += acc.highlights;
            page.notes += acc.notes;
        }
        page.total_events /= n;
        page.time_spent_ms /= n;
        page.reading_days /= n;
        page.dwell_events /= n;
        page.highlights /= n;
        page.notes /= n;
    }

    let mut warnings = Vec::new();
    let mut completions = Vec::new();
    for (material_id, visited) in &pages_per_material {
        match manifest.get(material_id) {
            Some(&n_pages) => {
                completions.push(visited.len() as f64 / n_pages as f64);
            }
            None => warnings.push(format!(
                "material {material_id} not in manifest; completion contribution skipped"
            )),
        }
    }
    let completion_pct = if completions.is_empty() {
        None
    } else {
        Some(completions.iter().sum::<f64>() / completions.len() as f64)
    };

    (
        SubMetrics { material, page, completion_pct },
        warnings,
    )
}

/// Percentile ranks with midrank tie handling: `(below + (ties + 1)/2) / n`,
/// always in `(0, 1]`.
pub fn percentile_rank(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    values
        .iter()
        .map(|&v| {
            let below = values.iter().filter(|&&w| w < v).count() as f64;
            let ties = values.iter().filter(|&&w| w == v).count() as f64;
            (below + (ties + 1.0) / 2.0) / n
        })
        .collect()
}

/// Final engagement score plus the per-sub-metric ranks it averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngagementScore {
    pub score: f64,
    pub ranks: Vec<Option<f64>>,
}

/// Percentile-ranks every sub-metric across the cohort and averages the
/// ranks into one score per student. Sub-metrics that are undefined for a
/// student (no manifest coverage) are left out of that student's average.
pub fn engagement_score(
    submetrics: &BTreeMap<StudentId, SubMetrics>,
) -> (BTreeMap<StudentId, EngagementScore>, Vec<String>) {
    let mut warnings = Vec::new();
    if submetrics.len() == 1 {
        warnings.push("single-student cohort: every percentile rank degenerates to 1.0".into());
    }
    let students: Vec<&StudentId> = submetrics.keys().collect();
    let value_rows: Vec<[Option<f64>; 13]> =
        submetrics.values().map(|s| s.values()).collect();

    // rank each sub-metric over the students where it is defined
    let mut ranks: Vec<Vec<Option<f64>>> = vec![vec![None; 13]; students.len()];
    for metric_idx in 0..13 {
        let defined: Vec<(usize, f64)> = value_rows
            .iter()
            .enumerate()
            .filter_map(|(i, row)| row[metric_idx].map(|v| (i, v)))
            .collect();
        if defined.is_empty() {
            continue;
        }
        let vals: Vec<f64> = defined.iter().map(|(_, v)| *v).collect();
        for ((student_idx, _), rank) in defined.iter().zip(percentile_rank(&vals)) {
            ranks[*student_idx][metric_idx] = Some(rank);
        }
    }

    let mut out = BTreeMap::new();
    for (i, student) in students.into_iter().enumerate() {
        let defined: Vec<f64> = ranks[i].iter().flatten().copied().collect();
        let score = defined.iter().sum::<f64>() / defined.len() as f64;
        out.insert(
            student.clone(),
            EngagementScore { score, ranks: ranks[i].clone() },
        );
    }
    (out, warnings)
}

/// Writes `student_id,score` followed by each sub-metric value and its
/// rank.
pub fn write_engagement_csv<W: Write>(
    scores: &BTreeMap<StudentId, EngagementScore>,
    submetrics: &BTreeMap<StudentId, SubMetrics>,
    writer: W,
) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["student_id".to_string(), "score".to_string()];
    for name in SUBMETRIC_NAMES {
        header.push(name.to_string());
        header.push(format!("{name}_rank"));
    }
    wtr.write_record(&header)?;
    for (student, score) in scores {
        let values = submetrics[student].values();
        let mut row = vec![student.as_str().to_string(), score.score.to_string()];
        for i in 0..13 {
            row.push(values[i].map(|v| v.to_string()).unwrap_or_default());
            row.push(score.ranks[i].map(|v| v.to_string()).unwrap_or_default());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}
