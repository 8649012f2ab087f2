//! Feature extraction per student and the inner join into profiles.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use readtrace_core::encode::{collapse_jumps, encode, EncodeOptions};
use readtrace_core::engagement::{compute_submetrics, engagement_score, SubMetrics};
use readtrace_core::ingest::QuestionnaireResponse;
use readtrace_core::metrics::{n_stops, session_metrics, student_means};
use readtrace_core::model::{MaterialId, MetricMeans, RawEvent, StudentId, StudentProfile};
use readtrace_core::scales::score_by_student;
use readtrace_core::session::sessionize;

use crate::config::AnalysisConfig;
use crate::error::PipelineError;

/// Which sources a join requires. The questionnaire splits into the
/// concentration scales (DECI/DECE) and the mind-wandering scales, since
/// the second workflow needs only the former.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sources {
    pub metrics: bool,
    pub engagement: bool,
    pub dec: bool,
    pub mind_wandering: bool,
    pub grades: bool,
}

impl Sources {
    pub fn all() -> Self {
        Sources {
            metrics: true,
            engagement: true,
            dec: true,
            mind_wandering: true,
            grades: true,
        }
    }
}

/// Per-source availability and per-requirement drop counts for one join.
#[derive(Debug, Clone, serde::Serialize)]
pub struct Attrition {
    pub available: BTreeMap<String, usize>,
    pub dropped: BTreeMap<String, usize>,
    pub joined: usize,
}

/// Everything the analyses need, computed once from the raw inputs.
#[derive(Debug, Clone)]
pub struct CohortData {
    pub profiles: Vec<StudentProfile>,
    pub submetrics: BTreeMap<StudentId, SubMetrics>,
    pub warnings: Vec<String>,
}

/// Runs the per-student feature pipeline (sessions -> collapsed sequences
/// -> metric means; engagement sub-metrics -> cohort ranks; scale scores)
/// and assembles one profile per student that appears in any source.
pub fn build_profiles(
    events: &BTreeMap<StudentId, Vec<RawEvent>>,
    materials: &BTreeMap<MaterialId, u32>,
    questionnaire: &[QuestionnaireResponse],
    grades: &BTreeMap<StudentId, f64>,
    config: &AnalysisConfig,
) -> Result<CohortData, PipelineError> {
    let encode_options = EncodeOptions {
        thresholds: config.thresholds,
        append_terminal_gap: config.append_terminal_gap,
    };

    let per_student: Vec<(StudentId, Option<MetricMeans>, SubMetrics, Vec<String>)> = events
        .par_iter()
        .map(|(student, stream)| {
            let sessions = sessionize(stream, config.gap_threshold_ms);
            let sequences: Vec<_> = sessions
                .iter()
                .map(|s| collapse_jumps(&encode(s, &encode_options)))
                .collect();
            let per_session: Vec<_> = sequences.iter().map(session_metrics).collect();
            let stops = n_stops(sequences.iter().map(|s| &s.terminal));
            let means = student_means(&per_session, stops);
            let (sub, warnings) = compute_submetrics(&sessions, materials, &config.engagement);
            (student.clone(), means, sub, warnings)
        })
        .collect();

    let mut warnings = Vec::new();
    let mut metrics_map: BTreeMap<StudentId, MetricMeans> = BTreeMap::new();
    let mut submetrics: BTreeMap<StudentId, SubMetrics> = BTreeMap::new();
    for (student, means, sub, mut student_warnings) in per_student {
        if let Some(m) = means {
            metrics_map.insert(student.clone(), m);
        }
        submetrics.insert(student.clone(), sub);
        warnings.append(&mut student_warnings);
    }

    let (engagement, mut engagement_warnings) = if submetrics.is_empty() {
        (BTreeMap::new(), Vec::new())
    } else {
        engagement_score(&submetrics)
    };
    warnings.append(&mut engagement_warnings);

    let (scale_scores, mut scale_warnings) = score_by_student(questionnaire);
    warnings.append(&mut scale_warnings);

    let mut ids: BTreeSet<StudentId> = BTreeSet::new();
    ids.extend(events.keys().cloned());
    ids.extend(scale_scores.keys().cloned());
    ids.extend(grades.keys().cloned());

    let profiles = ids
        .into_iter()
        .map(|student| {
            let scores = scale_scores.get(&student);
            StudentProfile {
                metrics: metrics_map.get(&student).cloned(),
                engagement: engagement.get(&student).map(|e| e.score),
                deci: scores.and_then(|s| s.deci),
                dece: scores.and_then(|s| s.dece),
                mw_s: scores.and_then(|s| s.mw_s),
                mw_d: scores.and_then(|s| s.mw_d),
                grade: grades.get(&student).copied(),
                student_id: student,
            }
        })
        .collect();

    Ok(CohortData { profiles, submetrics, warnings })
}

/// Inner join: keeps the profiles present in every required source and
/// counts what each requirement dropped. An empty result is an error.
pub fn join_profiles(
    profiles: &[StudentProfile],
    required: Sources,
) -> Result<(Vec<StudentProfile>, Attrition), PipelineError> {
    let mut available: BTreeMap<String, usize> = BTreeMap::new();
    let count = |pred: &dyn Fn(&StudentProfile) -> bool| profiles.iter().filter(|p| pred(p)).count();
    available.insert("metrics".into(), count(&|p| p.metrics.is_some()));
    available.insert("engagement".into(), count(&|p| p.engagement.is_some()));
    available.insert("dec".into(), count(&|p| p.deci.is_some() && p.dece.is_some()));
    available.insert(
        "mind_wandering".into(),
        count(&|p| p.mw_s.is_some() && p.mw_d.is_some()),
    );
    available.insert("grades".into(), count(&|p| p.grade.is_some()));

    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    let mut keep = Vec::new();
    for profile in profiles {
        let mut missing: Vec<&str> = Vec::new();
        if required.metrics && profile.metrics.is_none() {
            missing.push("metrics");
        }
        if required.engagement && profile.engagement.is_none() {
            missing.push("engagement");
        }
        if required.dec && (profile.deci.is_none() || profile.dece.is_none()) {
            missing.push("dec");
        }
        if required.mind_wandering && (profile.mw_s.is_none() || profile.mw_d.is_none()) {
            missing.push("mind_wandering");
        }
        if required.grades && profile.grade.is_none() {
            missing.push("grades");
        }
        if missing.is_empty() {
            keep.push(profile.clone());
        } else {
            for m in missing {
                *dropped.entry(m.to_string()).or_insert(0) += 1;
            }
        }
    }
    if keep.is_empty() {
        return Err(PipelineError::EmptyJoin);
    }
    let attrition = Attrition { available, dropped, joined: keep.len() };
    Ok((keep, attrition))
}
