//! Seeded synthetic cohorts for end-to-end verification.
//!
//! Students are drawn from reading-strategy archetypes (balanced, sticky,
//! jumpy, quick) that shape their interval mix, jump frequency and session
//! habits. Questionnaire traits come from truncated normals; grades come
//! from a planted linear model over the pipeline-computed engagement score
//! and the concentration scales, so the generator's coefficients are the
//! ground truth that recovery tests estimate. Per-student RNG substreams
//! derive from the master seed, making output byte-identical across runs.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

use readtrace_core::engagement::{compute_submetrics, engagement_score, EngagementConfig};
use readtrace_core::ingest::{
    write_events_csv, write_grades_csv, write_materials_csv, write_questionnaire_csv,
    QuestionnaireResponse, ScaleId,
};
use readtrace_core::model::{EventKind, MaterialId, RawEvent, StudentId};
use readtrace_core::session::{sessionize, DEFAULT_GAP_THRESHOLD_MS};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("archetype mix must sum to 1, got {0}")]
    BadMix(f64),
    #[error("cohort size must be >= 1")]
    EmptyCohort,
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("write error: {0}")]
    Write(#[from] readtrace_core::ingest::IngestError),
}

/// A reading-strategy archetype: target interval-class mix and activity
/// rates.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ArchetypeSpec {
    pub name: String,
    /// Target distribution over (short, medium, long) intervals.
    pub interval_mix: [f64; 3],
    /// Chance per navigation step of a non-adjacent move (half logged
    /// jumps, half rapid next/prev bursts that recode to complete jumps).
    pub jump_rate: f64,
    /// Chance per event slot of a non-navigational event.
    pub responsive_rate: f64,
    pub sessions_mean: f64,
    pub events_per_session_mean: f64,
    /// Chance a session ends by drop-out (no close, long gap follows).
    pub timeout_prob: f64,
}

impl ArchetypeSpec {
    pub fn balanced() -> Self {
        ArchetypeSpec {
            name: "balanced".into(),
            interval_mix: [0.40, 0.45, 0.15],
            jump_rate: 0.10,
            responsive_rate: 0.05,
            sessions_mean: 8.0,
            events_per_session_mean: 20.0,
            timeout_prob: 0.25,
        }
    }

    pub fn sticky() -> Self {
        ArchetypeSpec {
            name: "sticky".into(),
            interval_mix: [0.15, 0.35, 0.50],
            jump_rate: 0.05,
            responsive_rate: 0.04,
            sessions_mean: 7.0,
            events_per_session_mean: 14.0,
            timeout_prob: 0.45,
        }
    }

    pub fn jumpy() -> Self {
        ArchetypeSpec {
            name: "jumpy".into(),
            interval_mix: [0.45, 0.40, 0.15],
            jump_rate: 0.35,
            responsive_rate: 0.06,
            sessions_mean: 9.0,
            events_per_session_mean: 25.0,
            timeout_prob: 0.20,
        }
    }

    pub fn quick() -> Self {
        ArchetypeSpec {
            name: "quick".into(),
            interval_mix: [0.75, 0.20, 0.05],
            jump_rate: 0.12,
            responsive_rate: 0.02,
            sessions_mean: 8.0,
            events_per_session_mean: 22.0,
            timeout_prob: 0.10,
        }
    }

    pub fn default_mix() -> Vec<(ArchetypeSpec, f64)> {
        vec![
            (ArchetypeSpec::balanced(), 0.50),
            (ArchetypeSpec::sticky(), 0.22),
            (ArchetypeSpec::jumpy(), 0.17),
            (ArchetypeSpec::quick(), 0.11),
        ]
    }

    pub fn by_name(name: &str) -> Option<ArchetypeSpec> {
        match name {
            "balanced" => Some(ArchetypeSpec::balanced()),
            "sticky" => Some(ArchetypeSpec::sticky()),
            "jumpy" => Some(ArchetypeSpec::jumpy()),
            "quick" => Some(ArchetypeSpec::quick()),
            _ => None,
        }
    }
}

/// Grade-generating linear model over engagement and the two
/// concentration scales, with raw interaction terms.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PlantedModel {
    pub intercept: f64,
    pub engagement: f64,
    pub deci: f64,
    pub dece: f64,
    pub engagement_deci: f64,
    pub engagement_dece: f64,
    pub noise_sd: f64,
    /// Clamp generated grades to the 0-4 scale. Clamping censors the
    /// upper tail, so recovery tests that compare estimates against the
    /// planted coefficients disable it.
    pub clip_grades: bool,
}

impl Default for PlantedModel {
    fn default() -> Self {
        PlantedModel {
            intercept: -3.99,
            engagement: 10.24,
            deci: 1.4,
            dece: -0.39,
            engagement_deci: -2.06,
            engagement_dece: 0.82,
            noise_sd: 0.5,
            clip_grades: true,
        }
    }
}

impl PlantedModel {
    pub fn predict(&self, engagement: f64, deci: f64, dece: f64) -> f64 {
        self.intercept
            + self.engagement * engagement
            + self.deci * deci
            + self.dece * dece
            + self.engagement_deci * engagement * deci
            + self.engagement_dece * engagement * dece
    }
}

#[derive(Debug, Clone)]
pub struct CohortConfig {
    pub n: usize,
    pub mix: Vec<(ArchetypeSpec, f64)>,
    pub planted: PlantedModel,
    pub seed: u64,
    pub n_materials: usize,
    pub pages_per_material: u32,
    /// Epoch milliseconds of the cohort's first possible event.
    pub start_ms: i64,
}

impl CohortConfig {
    pub fn new(n: usize, seed: u64) -> Self {
        CohortConfig {
            n,
            mix: ArchetypeSpec::default_mix(),
            planted: PlantedModel::default(),
            seed,
            n_materials: 8,
            pages_per_material: 30,
            start_ms: 1_700_000_000_000,
        }
    }
}

/// Ground truth kept alongside the generated files.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StudentTruth {
    pub archetype: String,
    pub deci: f64,
    pub dece: f64,
    pub mw_s: f64,
    pub mw_d: f64,
    pub engagement: f64,
    pub grade_unclipped: f64,
}

#[derive(Debug, Clone)]
pub struct GeneratedCohort {
    pub events: BTreeMap<StudentId, Vec<RawEvent>>,
    pub questionnaire: Vec<QuestionnaireResponse>,
    pub grades: BTreeMap<StudentId, f64>,
    pub materials: BTreeMap<MaterialId, u32>,
    pub truth: BTreeMap<StudentId, StudentTruth>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn truncated_normal(rng: &mut ChaCha8Rng, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let dist = Normal::new(mean, sd).expect("positive sd");
    for _ in 0..1000 {
        let v = dist.sample(rng);
        if (lo..=hi).contains(&v) {
            return v;
        }
    }
    mean.clamp(lo, hi)
}

fn likert_items(rng: &mut ChaCha8Rng, latent: f64, count: usize) -> Vec<u8> {
    let noise = Normal::new(0.0, 0.8).expect("positive sd");
    (0..count)
        .map(|_| (latent + noise.sample(rng)).round().clamp(1.0, 7.0) as u8)
        .collect()
}

struct TraitDraw {
    deci: Vec<u8>,
    dece: Vec<u8>,
    mw_s: Vec<u8>,
    mw_d: Vec<u8>,
}

fn draw_traits(rng: &mut ChaCha8Rng) -> TraitDraw {
    // DECI/DECE correlated latents; means and spreads follow the reported
    // cohort descriptives
    let z1: f64 = rng.sample(rand_distr::StandardNormal);
    let z2: f64 = 0.6 * z1 + (1.0f64 - 0.36).sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);
    let deci_latent = (4.27 + 1.21 * z1).clamp(1.0, 7.0);
    let dece_latent = (4.20 + 1.26 * z2).clamp(1.0, 7.0);
    let mw_s_latent = truncated_normal(rng, 4.51, 1.21, 1.0, 7.0);
    let w: f64 = rng.sample(rand_distr::StandardNormal);
    let mw_d_latent = (4.36 + 1.48 * (0.45 * (mw_s_latent - 4.51) / 1.21 + 0.89 * w)).clamp(1.0, 7.0);
    TraitDraw {
        deci: likert_items(rng, deci_latent, 8),
        dece: likert_items(rng, dece_latent, 8),
        mw_s: likert_items(rng, mw_s_latent, 4),
        mw_d: likert_items(rng, mw_d_latent, 4),
    }
}

fn pick_archetype<'a>(
    mix: &'a [(ArchetypeSpec, f64)],
    rng: &mut ChaCha8Rng,
) -> &'a ArchetypeSpec {
    let roll: f64 = rng.gen();
    let mut acc = 0.0;
    for (spec, weight) in mix {
        acc += weight;
        if roll < acc {
            return spec;
        }
    }
    &mix.last().expect("non-empty mix").0
}

fn poisson_at_least(rng: &mut ChaCha8Rng, mean: f64, floor: u64) -> u64 {
    let draw = Poisson::new(mean).expect("positive mean").sample(rng) as u64;
    draw.max(floor)
}

fn sample_interval_ms(rng: &mut ChaCha8Rng, mix: &[f64; 3]) -> u64 {
    let roll: f64 = rng.gen();
    if roll < mix[0] {
        rng.gen_range(3_000..10_000)
    } else if roll < mix[0] + mix[1] {
        rng.gen_range(10_000..120_000)
    } else {
        // long, but safely inside the six-minute session threshold
        rng.gen_range(120_000..340_000)
    }
}

struct EventWriter {
    student: StudentId,
    material: MaterialId,
    n_pages: u32,
    page: u32,
    clock_ms: i64,
    events: Vec<RawEvent>,
}

impl EventWriter {
    fn push(&mut self, kind: EventKind) {
        self.events.push(RawEvent {
            student_id: self.student.clone(),
            material_id: self.material.clone(),
            page: self.page,
            kind,
            timestamp_ms: self.clock_ms,
        });
    }
}

fn generate_student_events(
    rng: &mut ChaCha8Rng,
    spec: &ArchetypeSpec,
    student: &StudentId,
    materials: &[MaterialId],
    n_pages: u32,
    start_ms: i64,
) -> Vec<RawEvent> {
    let n_sessions = poisson_at_least(rng, spec.sessions_mean, 2);
    let mut clock = start_ms + rng.gen_range(0..3_600_000) as i64;
    let mut all_events = Vec::new();

    for _ in 0..n_sessions {
        let material = materials[rng.gen_range(0..materials.len())].clone();
        let mut w = EventWriter {
            student: student.clone(),
            material,
            n_pages,
            page: rng.gen_range(1..=n_pages),
            clock_ms: clock,
            events: Vec::new(),
        };
        w.push(EventKind::Open);
        let n_events = poisson_at_least(rng, spec.events_per_session_mean, 3);
        for _ in 0..n_events {
            w.clock_ms += sample_interval_ms(rng, &spec.interval_mix) as i64;
            let roll: f64 = rng.gen();
            if roll < spec.responsive_rate {
                let label = ["ADD MARKER", "ADD MEMO", "SEARCH", "ADD BOOKMARK"]
                    [rng.gen_range(0..4)];
                w.push(EventKind::Other(label.to_string()));
            } else if roll < spec.responsive_rate + spec.jump_rate {
                if rng.gen_bool(0.5) {
                    // logged jump to a random page
                    w.page = rng.gen_range(1..=w.n_pages);
                    w.push(EventKind::Jump);
                } else {
                    // rapid next/prev burst: recodes to a complete jump
                    let len = rng.gen_range(2..=4u32);
                    let forward = rng.gen_bool(0.7);
                    for step in 0..len {
                        if step > 0 {
                            w.clock_ms += rng.gen_range(300..2_800) as i64;
                        }
                        if forward {
                            w.page = (w.page + 1).min(w.n_pages);
                            w.push(EventKind::Next);
                        } else {
                            w.page = w.page.saturating_sub(1).max(1);
                            w.push(EventKind::Prev);
                        }
                    }
                }
            } else if rng.gen_bool(0.85) {
                w.page = (w.page + 1).min(w.n_pages);
                w.push(EventKind::Next);
            } else {
                w.page = w.page.saturating_sub(1).max(1);
                w.push(EventKind::Prev);
            }
        }
        let timed_out = rng.gen_bool(spec.timeout_prob);
        if !timed_out {
            w.clock_ms += sample_interval_ms(rng, &spec.interval_mix) as i64;
            w.push(EventKind::Close);
        }
        clock = w.clock_ms;
        all_events.extend(w.events);

        // inter-session pause; always past the drop-out threshold after a
        // timeout, and spread over hours or days so reading days vary
        let pause_ms: i64 = if timed_out {
            rng.gen_range(DEFAULT_GAP_THRESHOLD_MS..4 * 3_600_000) as i64
        } else {
            rng.gen_range(600_000..90_000_000) as i64
        };
        clock += pause_ms;
    }
    all_events
}

/// Generates the full cohort: events, questionnaire, grades and manifest.
pub fn gen_cohort(config: &CohortConfig) -> Result<GeneratedCohort, SynthError> {
    if config.n == 0 {
        return Err(SynthError::EmptyCohort);
    }
    let weight_sum: f64 = config.mix.iter().map(|(_, w)| w).sum();
    if (weight_sum - 1.0).abs() > 1e-9 || config.mix.is_empty() {
        return Err(SynthError::BadMix(weight_sum));
    }

    let materials: Vec<MaterialId> = (0..config.n_materials)
        .map(|i| MaterialId::new(format!("M{:02}", i + 1)))
        .collect();
    let manifest: BTreeMap<MaterialId, u32> = materials
        .iter()
        .map(|m| (m.clone(), config.pages_per_material))
        .collect();

    let width = config.n.to_string().len().max(4);
    let mut events = BTreeMap::new();
    let mut questionnaire = Vec::new();
    let mut latents: BTreeMap<StudentId, (String, TraitDraw)> = BTreeMap::new();

    for i in 0..config.n {
        let student = StudentId::new(format!("s{:0width$}", i + 1, width = width));
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ (i as u64 + 1)));
        let spec = pick_archetype(&config.mix, &mut rng).clone();
        let traits = draw_traits(&mut rng);
        let stream = generate_student_events(
            &mut rng,
            &spec,
            &student,
            &materials,
            config.pages_per_material,
            config.start_ms,
        );
        events.insert(student.clone(), stream);
        latents.insert(student, (spec.name.clone(), traits));
    }

    for (student, (_, traits)) in &latents {
        for (scale, items) in [
            (ScaleId::Deci, &traits.deci),
            (ScaleId::Dece, &traits.dece),
            (ScaleId::MwS, &traits.mw_s),
            (ScaleId::MwD, &traits.mw_d),
        ] {
            questionnaire.push(QuestionnaireResponse {
                student_id: student.clone(),
                scale,
                items: items.clone(),
            });
        }
    }

    // engagement over the whole cohort, through the production feature path
    let mut submetrics = BTreeMap::new();
    for (student, stream) in &events {
        let sessions = sessionize(stream, DEFAULT_GAP_THRESHOLD_MS);
        let (sub, _) = compute_submetrics(&sessions, &manifest, &EngagementConfig::default());
        submetrics.insert(student.clone(), sub);
    }
    let (scores, _) = engagement_score(&submetrics);

    let item_mean =
        |items: &[u8]| items.iter().map(|&v| v as f64).sum::<f64>() / items.len() as f64;
    let mut grades = BTreeMap::new();
    let mut truth = BTreeMap::new();
    for (student, (archetype, traits)) in &latents {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
            config.seed ^ 0xABCD_EF01 ^ splitmix64(truth.len() as u64 + 17),
        ));
        let engagement = scores[student].score;
        let deci = item_mean(&traits.deci);
        let dece = item_mean(&traits.dece);
        let noise: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * config.planted.noise_sd;
        let raw_grade = config.planted.predict(engagement, deci, dece) + noise;
        let grade = if config.planted.clip_grades {
            raw_grade.clamp(0.0, 4.0)
        } else {
            raw_grade
        };
        grades.insert(student.clone(), grade);
        truth.insert(
            student.clone(),
            StudentTruth {
                archetype: archetype.clone(),
                deci,
                dece,
                mw_s: item_mean(&traits.mw_s),
                mw_d: item_mean(&traits.mw_d),
                engagement,
                grade_unclipped: raw_grade,
            },
        );
    }

    Ok(GeneratedCohort { events, questionnaire, grades, materials: manifest, truth })
}

/// File paths produced by [`write_cohort`].
#[derive(Debug, Clone)]
pub struct CohortPaths {
    pub events: PathBuf,
    pub questionnaire: PathBuf,
    pub grades: PathBuf,
    pub materials: PathBuf,
}

/// Writes the cohort in the exact ingest formats.
pub fn write_cohort(cohort: &GeneratedCohort, dir: &Path) -> Result<CohortPaths, SynthError> {
    std::fs::create_dir_all(dir)?;
    let paths = CohortPaths {
        events: dir.join("events.csv"),
        questionnaire: dir.join("questionnaire.csv"),
        grades: dir.join("grades.csv"),
        materials: dir.join("materials.csv"),
    };
    write_events_csv(&cohort.events, std::fs::File::create(&paths.events)?)?;
    write_questionnaire_csv(&cohort.questionnaire, std::fs::File::create(&paths.questionnaire)?)?;
    write_grades_csv(&cohort.grades, std::fs::File::create(&paths.grades)?)?;
    write_materials_csv(&cohort.materials, std::fs::File::create(&paths.materials)?)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_mix_is_rejected() {
        let mut config = CohortConfig::new(10, 1);
        config.mix = vec![(ArchetypeSpec::balanced(), 0.7)];
        assert!(matches!(gen_cohort(&config), Err(SynthError::BadMix(_))));
    }

    #[test]
    fn same_seed_same_bytes() {
        let config = CohortConfig::new(12, 777);
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let p1 = write_cohort(&gen_cohort(&config).unwrap(), dir1.path()).unwrap();
        let p2 = write_cohort(&gen_cohort(&config).unwrap(), dir2.path()).unwrap();
        for (a, b) in [
            (&p1.events, &p2.events),
            (&p1.questionnaire, &p2.questionnaire),
            (&p1.grades, &p2.grades),
            (&p1.materials, &p2.materials),
        ] {
            assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        }
        let dir3 = tempfile::tempdir().unwrap();
        let other =
            write_cohort(&gen_cohort(&CohortConfig::new(12, 778)).unwrap(), dir3.path()).unwrap();
        assert_ne!(
            std::fs::read(&p1.events).unwrap(),
            std::fs::read(&other.events).unwrap()
        );
    }

    #[test]
    fn generated_logs_sessionize_cleanly() {
        let cohort = gen_cohort(&CohortConfig::new(25, 9)).unwrap();
        for (_, stream) in &cohort.events {
            assert!(!stream.is_empty());
            for ev in stream {
                ev.validate().unwrap();
            }
            let sessions = sessionize(stream, DEFAULT_GAP_THRESHOLD_MS);
            for s in &sessions {
                s.validate(DEFAULT_GAP_THRESHOLD_MS).unwrap();
                assert!(!s.is_lone_close());
            }
        }
    }

    #[test]
    fn clipped_grades_stay_on_scale() {
        let cohort = gen_cohort(&CohortConfig::new(40, 5)).unwrap();
        for grade in cohort.grades.values() {
            assert!((0.0..=4.0).contains(grade));
        }
    }

    #[test]
    fn traits_stay_on_likert_support() {
        let cohort = gen_cohort(&CohortConfig::new(30, 3)).unwrap();
        for truth in cohort.truth.values() {
            for v in [truth.deci, truth.dece, truth.mw_s, truth.mw_d] {
                assert!((1.0..=7.0).contains(&v));
            }
        }
        // all four scales present per student
        assert_eq!(cohort.questionnaire.len(), 30 * 4);
    }

    #[test]
    fn higher_jump_rate_raises_mean_jump_count() {
        use readtrace_core::encode::{collapse_jumps, encode, EncodeOptions};
        use readtrace_core::metrics::n_jumps;

        let mean_jumps = |jump_rate: f64, seed: u64| -> f64 {
            let mut spec = ArchetypeSpec::balanced();
            spec.jump_rate = jump_rate;
            let mut config = CohortConfig::new(40, seed);
            config.mix = vec![(spec, 1.0)];
            let cohort = gen_cohort(&config).unwrap();
            let mut total = 0.0;
            let mut count = 0.0;
            for stream in cohort.events.values() {
                for session in sessionize(stream, DEFAULT_GAP_THRESHOLD_MS) {
                    let seq = collapse_jumps(&encode(&session, &EncodeOptions::default()));
                    total += n_jumps(&seq) as f64;
                    count += 1.0;
                }
            }
            total / count
        };
        assert!(mean_jumps(0.30, 42) > mean_jumps(0.05, 42));
    }

    #[test]
    fn quick_archetype_skews_quickness_over_stickiness() {
        use readtrace_core::encode::{collapse_jumps, encode, EncodeOptions};
        use readtrace_core::metrics::student_means_from_sequences;

        let mut config = CohortConfig::new(30, 11);
        config.mix = vec![(ArchetypeSpec::quick(), 1.0)];
        let cohort = gen_cohort(&config).unwrap();
        let mut quickness = 0.0;
        let mut stickiness = 0.0;
        let mut n = 0.0;
        for stream in cohort.events.values() {
            let seqs: Vec<_> = sessionize(stream, DEFAULT_GAP_THRESHOLD_MS)
                .iter()
                .map(|s| collapse_jumps(&encode(s, &EncodeOptions::default())))
                .collect();
            if let Some(means) = student_means_from_sequences(&seqs) {
                quickness += means.quickness.unwrap_or(0.0);
                stickiness += means.stickiness.unwrap_or(0.0);
                n += 1.0;
            }
        }
        assert!(quickness / n > stickiness / n);
    }
}
