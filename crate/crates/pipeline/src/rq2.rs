//! Second analysis workflow: reading sequence metrics, stepwise grade
//! models, strategy clustering and the cluster-by-trait moderation test.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use readtrace_core::model::StudentProfile;
use readtrace_stats::{
    ols_fit, omnibus_block_test, partial_f, pearson, predict_with_intervals, stepwise_select,
    ward_cluster, znorm, CoefEntry, Dataset, FeatureMatrix, Merge, SelectionTrace, StatError,
    StepwiseConfig, Term,
};

use crate::config::AnalysisConfig;
use crate::error::PipelineError;
use crate::profile::{join_profiles, Attrition, Sources};
use crate::report::{stars, ComparisonRow, CorrCell, CorrelationTable, ModelSummary, ModelTable};
use crate::rq1::summary_of;

pub const METRIC_NAMES: [&str; 7] = [
    "N_Jumps",
    "N_Stops",
    "N_Responsive",
    "Sequential",
    "Stickiness",
    "Quickness",
    "Stableness",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    /// Metrics significantly correlated with grades, used as starting
    /// points; empty when none qualified (a single unseeded run is used).
    pub seeds: Vec<String>,
    pub per_seed_r2: Vec<(String, f64)>,
    pub winner_terms: Vec<String>,
    pub trace: SelectionTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecAugmented {
    pub model: ModelSummary,
    pub comparison: ComparisonRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringBlock {
    pub k: usize,
    pub feature_names: Vec<String>,
    pub sizes: Vec<usize>,
    pub assignments: Vec<(String, usize)>,
    /// Centroids on the z-normalized feature scale, indexed by cluster id.
    pub centroids: Vec<Vec<f64>>,
    pub dendrogram: Vec<Merge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBlock {
    pub summary: ModelSummary,
    pub coefficients: Vec<CoefEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum Omnibus {
    Done { deci: ComparisonRow, dece: ComparisonRow },
    Refused { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub deci: f64,
    pub fit: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub pi_lo: f64,
    pub pi_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterGrid {
    pub cluster: usize,
    pub rows: Vec<GridRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq2Report {
    pub table7: CorrelationTable,
    pub table8: ModelTable,
    pub selection: SelectionSummary,
    /// Gain from adding the selected metric terms to the engagement-only
    /// grade model.
    pub engagement_gain: ComparisonRow,
    pub dec_augmented: DecAugmented,
    pub clustering: ClusteringBlock,
    pub eq1: ModelBlock,
    pub omnibus: Omnibus,
    pub prediction_grids: Vec<ClusterGrid>,
}

fn metric_value(profile: &StudentProfile, name: &str) -> f64 {
    let m = profile.metrics.as_ref().expect("metrics required by join");
    match name {
        "N_Jumps" => m.n_jumps,
        "N_Stops" => m.n_stops as f64,
        "N_Responsive" => m.n_responsive,
        "Sequential" => m.sequential.expect("complete-case filtered"),
        "Stickiness" => m.stickiness.expect("complete-case filtered"),
        "Quickness" => m.quickness.expect("complete-case filtered"),
        "Stableness" => m.stableness.expect("complete-case filtered"),
        other => panic!("unknown metric {other}"),
    }
}

fn has_complete_metrics(profile: &StudentProfile) -> bool {
    profile.metrics.as_ref().is_some_and(|m| {
        m.sequential.is_some()
            && m.stickiness.is_some()
            && m.quickness.is_some()
            && m.stableness.is_some()
    })
}

/// Correlation cell that tolerates degenerate (constant) columns by
/// leaving the cell blank.
fn corr_cell(x: &[f64], y: &[f64]) -> Result<Option<CorrCell>, PipelineError> {
    match pearson(x, y) {
        Ok(r) => Ok(Some(CorrCell { r: r.r, p: r.p, n: r.n, stars: stars(r.p) })),
        Err(StatError::ConstantInput(_)) => Ok(None),
        Err(other) => Err(other.into()),
    }
}

pub fn run_rq2(
    profiles: &[StudentProfile],
    config: &AnalysisConfig,
) -> Result<(Rq2Report, Attrition, Vec<String>), PipelineError> {
    let (joined, attrition) = join_profiles(
        profiles,
        Sources { metrics: true, engagement: true, dec: true, grades: true, ..Default::default() },
    )?;
    let mut diagnostics = Vec::new();

    // complete-case on the ratio metrics: a student whose sessions never
    // produced an interval or a navigation token has no defined share
    let complete: Vec<StudentProfile> =
        joined.iter().filter(|p| has_complete_metrics(p)).cloned().collect();
    let dropped_incomplete = joined.len() - complete.len();
    if dropped_incomplete > 0 {
        diagnostics.push(format!(
            "{dropped_incomplete} student(s) dropped: undefined ratio metrics (no intervals or no navigation)"
        ));
    }
    if complete.len() < 4 {
        return Err(PipelineError::Invalid(format!(
            "only {} students with complete sequence metrics; too few to analyze",
            complete.len()
        )));
    }

    let metric_columns: BTreeMap<&str, Vec<f64>> = METRIC_NAMES
        .iter()
        .map(|&name| (name, complete.iter().map(|p| metric_value(p, name)).collect()))
        .collect();
    let engagement: Vec<f64> = complete.iter().map(|p| p.engagement.unwrap()).collect();
    let grade: Vec<f64> = complete.iter().map(|p| p.grade.unwrap()).collect();
    let mut deci: Vec<f64> = complete.iter().map(|p| p.deci.unwrap()).collect();
    let mut dece: Vec<f64> = complete.iter().map(|p| p.dece.unwrap()).collect();

    // Table 7 layout: engagement and grade against every metric, then the
    // metric intercorrelations as an upper triangle
    let mut cells: Vec<Vec<Option<CorrCell>>> = Vec::new();
    let mut row_vars: Vec<String> = vec!["Engagement".into(), "Grade".into()];
    for outer in [&engagement, &grade] {
        let mut row = Vec::new();
        for &name in METRIC_NAMES.iter() {
            row.push(corr_cell(outer, &metric_columns[name])?);
        }
        cells.push(row);
    }
    for (mi, &row_name) in METRIC_NAMES.iter().enumerate().take(METRIC_NAMES.len() - 1) {
        row_vars.push(row_name.to_string());
        let mut row = Vec::new();
        for (mj, &col_name) in METRIC_NAMES.iter().enumerate() {
            if mj > mi {
                row.push(corr_cell(&metric_columns[row_name], &metric_columns[col_name])?);
            } else {
                row.push(None);
            }
        }
        cells.push(row);
    }
    let table7 = CorrelationTable {
        row_vars,
        col_vars: METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
        cells,
    };

    // seeds: metrics significantly correlated with grades
    let mut seeds = Vec::new();
    for &name in METRIC_NAMES.iter() {
        if let Some(cell) = corr_cell(&grade, &metric_columns[name])? {
            if cell.p < config.alpha {
                seeds.push(name.to_string());
            }
        }
    }

    if config.center_traits {
        for column in [&mut deci, &mut dece] {
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            for v in column.iter_mut() {
                *v -= mean;
            }
        }
    }

    let mut data = Dataset::new();
    for (&name, values) in &metric_columns {
        data.add_numeric(name, values.clone())?;
    }
    data.add_numeric("Engagement", engagement.clone())?;
    data.add_numeric("Grade", grade)?;
    data.add_numeric("DECI", deci.clone())?;
    data.add_numeric("DECE", dece)?;

    // candidate pool: every metric main effect plus every pairwise product
    let mut pool: Vec<Term> = METRIC_NAMES.iter().map(|&m| Term::var(m)).collect();
    for i in 0..METRIC_NAMES.len() {
        for j in i + 1..METRIC_NAMES.len() {
            pool.push(Term::interact(METRIC_NAMES[i], METRIC_NAMES[j]));
        }
    }

    let stepwise_cfg = StepwiseConfig { alpha: config.alpha, ..Default::default() };
    let mut runs: Vec<(String, readtrace_stats::StepwiseOutcome)> = Vec::new();
    if seeds.is_empty() {
        diagnostics.push(
            "no metric correlates with grades at alpha; stepwise runs unseeded".to_string(),
        );
        let outcome = stepwise_select(&[], &pool, "Grade", &data, stepwise_cfg)?;
        runs.push(("(none)".to_string(), outcome));
    }
    for seed in &seeds {
        let base = [Term::var(seed.clone())];
        let candidates: Vec<Term> =
            pool.iter().filter(|t| **t != base[0]).cloned().collect();
        let outcome = stepwise_select(&base, &candidates, "Grade", &data, stepwise_cfg)?;
        runs.push((seed.clone(), outcome));
    }

    // winner across starts: highest R2, then the smaller model, then seed
    // order for determinism
    let winner_idx = (0..runs.len())
        .min_by(|&a, &b| {
            let (ra, rb) = (&runs[a].1.report, &runs[b].1.report);
            rb.r2
                .partial_cmp(&ra.r2)
                .unwrap()
                .then(ra.terms.len().cmp(&rb.terms.len()))
                .then(a.cmp(&b))
        })
        .expect("at least one stepwise run");
    let per_seed_r2: Vec<(String, f64)> =
        runs.iter().map(|(seed, outcome)| (seed.clone(), outcome.report.r2)).collect();
    let (winner_seed, winner) = runs.swap_remove(winner_idx);

    // rebuild the nested chain Model 1..T for the table
    let mut chain_terms: Vec<Term> = Vec::new();
    if winner_seed != "(none)" {
        chain_terms.push(Term::var(winner_seed.clone()));
    }
    let mut chain_models = vec![ols_fit(&chain_terms, "Grade", &data)?];
    for step in &winner.trace.path {
        if let Some(term) = &step.added {
            chain_terms.push(term.clone());
            chain_models.push(ols_fit(&chain_terms, "Grade", &data)?);
        }
    }
    let mut models = Vec::new();
    let mut comparisons = Vec::new();
    for (i, model) in chain_models.iter().enumerate() {
        models.push(summary_of(&format!("Model {}", i + 1), model));
        if i > 0 {
            comparisons.push(ComparisonRow::from_test(
                &format!("Model {}-{}", i, i + 1),
                &partial_f(&chain_models[i - 1], model)?,
            ));
        }
    }
    let final_model = chain_models.last().expect("chain is non-empty").clone();
    let table8 = ModelTable {
        models,
        coefficients: final_model.coefficients.clone(),
        comparisons,
    };
    let selection = SelectionSummary {
        seeds,
        per_seed_r2,
        winner_terms: final_model.terms.iter().map(Term::label).collect(),
        trace: winner.trace,
    };

    // gain of the selected metric terms over the engagement-only model
    let selected_terms: Vec<Term> =
        final_model.terms.iter().filter(|t| **t != Term::Intercept).cloned().collect();
    let eng_only = ols_fit(&[Term::var("Engagement")], "Grade", &data)?;
    let mut eng_plus_terms = vec![Term::var("Engagement")];
    eng_plus_terms.extend(selected_terms.iter().cloned());
    let eng_plus = ols_fit(&eng_plus_terms, "Grade", &data)?;
    let engagement_gain = ComparisonRow::from_test(
        "Engagement -> Engagement + selected metrics",
        &partial_f(&eng_only, &eng_plus)?,
    );

    // DEC augmentation of the selected-metrics model
    let mut dec_terms = selected_terms.clone();
    dec_terms.push(Term::var("DECI"));
    dec_terms.push(Term::var("DECE"));
    let dec_model = ols_fit(&dec_terms, "Grade", &data)?;
    let dec_augmented = DecAugmented {
        model: summary_of("selected metrics + DECI + DECE", &dec_model),
        comparison: ComparisonRow::from_test(
            "selected metrics -> + DECI + DECE",
            &partial_f(&final_model, &dec_model)?,
        ),
    };

    // strategy clustering on the configured features
    for feature in &config.cluster_features {
        if !METRIC_NAMES.contains(&feature.as_str()) {
            return Err(PipelineError::Invalid(format!(
                "unknown cluster feature {feature:?}; known metrics: {}",
                METRIC_NAMES.join(", ")
            )));
        }
    }
    let feature_matrix = FeatureMatrix {
        feature_names: config.cluster_features.clone(),
        rows: complete
            .iter()
            .map(|p| {
                config.cluster_features.iter().map(|f| metric_value(p, f)).collect::<Vec<f64>>()
            })
            .collect(),
    };
    let normalized = znorm(&feature_matrix)?;
    let clustering = ward_cluster(&normalized, config.k)?;
    let mut sizes = vec![0usize; config.k];
    for &label in &clustering.labels {
        sizes[label] += 1;
    }
    diagnostics.push(format!(
        "cluster sizes at k={}: {}",
        config.k,
        sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
    ));
    let clustering_block = ClusteringBlock {
        k: config.k,
        feature_names: config.cluster_features.clone(),
        sizes: sizes.clone(),
        assignments: complete
            .iter()
            .zip(&clustering.labels)
            .map(|(p, &label)| (p.student_id.as_str().to_string(), label))
            .collect(),
        centroids: clustering.centroids.clone(),
        dendrogram: clustering.dendrogram.clone(),
    };

    // cluster moderation model:
    // Grade ~ C(cluster)*(DECI + DECE) + Engagement*(DECI + DECE)
    data.add_categorical(
        "cluster",
        clustering.labels.iter().map(|l| l.to_string()).collect(),
    )?;
    let eq1_terms = vec![
        Term::Factor("cluster".into()),
        Term::var("DECI"),
        Term::var("DECE"),
        Term::FactorInteract("cluster".into(), "DECI".into()),
        Term::FactorInteract("cluster".into(), "DECE".into()),
        Term::var("Engagement"),
        Term::interact("Engagement", "DECI"),
        Term::interact("Engagement", "DECE"),
    ];
    let eq1_model = ols_fit(&eq1_terms, "Grade", &data)?;
    let eq1 = ModelBlock {
        summary: summary_of("Grade ~ C(cluster)*(DECI+DECE) + Engagement*(DECI+DECE)", &eq1_model),
        coefficients: eq1_model.coefficients.clone(),
    };

    let omnibus = if sizes.iter().any(|&s| s < 3) {
        let reason = format!(
            "smallest cluster has {} member(s); needs at least 3 per cluster (sizes: {})",
            sizes.iter().min().unwrap(),
            sizes.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
        );
        diagnostics.push(format!("omnibus moderation test refused: {reason}"));
        Omnibus::Refused { reason }
    } else {
        let deci_block = [Term::FactorInteract("cluster".into(), "DECI".into())];
        let dece_block = [Term::FactorInteract("cluster".into(), "DECE".into())];
        let (deci_test, _, _) = omnibus_block_test(&eq1_terms, &deci_block, "Grade", &data)?;
        let (dece_test, _, _) = omnibus_block_test(&eq1_terms, &dece_block, "Grade", &data)?;
        Omnibus::Done {
            deci: ComparisonRow::from_test("C(cluster):DECI", &deci_test),
            dece: ComparisonRow::from_test("C(cluster):DECE", &dece_test),
        }
    };

    // per-cluster predicted grades over the observed DECI range
    let dece_mean = data.numeric("DECE")?.iter().sum::<f64>() / complete.len() as f64;
    let engagement_mean = engagement.iter().sum::<f64>() / engagement.len() as f64;
    let mut prediction_grids = Vec::new();
    const GRID_POINTS: usize = 25;
    for cluster_id in 0..config.k {
        let members: Vec<usize> = clustering
            .labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == cluster_id).then_some(i))
            .collect();
        if members.is_empty() {
            continue;
        }
        let deci_in_model = data.numeric("DECI")?;
        let lo = members.iter().map(|&i| deci_in_model[i]).fold(f64::INFINITY, f64::min);
        let hi = members.iter().map(|&i| deci_in_model[i]).fold(f64::NEG_INFINITY, f64::max);
        let deci_grid: Vec<f64> = (0..GRID_POINTS)
            .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        let mut grid = Dataset::new();
        grid.add_numeric("DECI", deci_grid.clone())?;
        grid.add_numeric("DECE", vec![dece_mean; GRID_POINTS])?;
        grid.add_numeric("Engagement", vec![engagement_mean; GRID_POINTS])?;
        grid.add_categorical("cluster", vec![cluster_id.to_string(); GRID_POINTS])?;
        let predictions = predict_with_intervals(&eq1_model, &grid)?;
        prediction_grids.push(ClusterGrid {
            cluster: cluster_id,
            rows: deci_grid
                .iter()
                .zip(&predictions)
                .map(|(&deci, pred)| GridRow {
                    deci,
                    fit: pred.fit,
                    ci_lo: pred.ci95.0,
                    ci_hi: pred.ci95.1,
                    pi_lo: pred.pi95.0,
                    pi_hi: pred.pi95.1,
                })
                .collect(),
        });
    }

    let report = Rq2Report {
        table7,
        table8,
        selection,
        engagement_gain,
        dec_augmented,
        clustering: clustering_block,
        eq1,
        omnibus,
        prediction_grids,
    };
    Ok((report, attrition, diagnostics))
}
