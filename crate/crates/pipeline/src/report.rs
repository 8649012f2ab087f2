//! Report building blocks and serialization to JSON, markdown tables or a
//! CSV bundle (one file per table block). All emission is deterministic.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use readtrace_stats::{CoefEntry, FTestResult};

use crate::error::PipelineError;
use crate::rq1::Rq1Report;
use crate::rq2::Rq2Report;

/// Significance stars under the usual two-level convention.
pub fn stars(p: f64) -> String {
    if p < 0.01 {
        "**".to_string()
    } else if p < 0.05 {
        "*".to_string()
    } else {
        String::new()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrCell {
    pub r: f64,
    pub p: f64,
    pub n: usize,
    pub stars: String,
}

/// Upper-triangular correlation layout: `cells[i][j]` pairs
/// `row_vars[i]` with `col_vars[j]`, `None` where the table leaves a blank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationTable {
    pub row_vars: Vec<String>,
    pub col_vars: Vec<String>,
    pub cells: Vec<Vec<Option<CorrCell>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub label: String,
    pub r2: f64,
    pub f: Option<f64>,
    pub df1: usize,
    pub df2: usize,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub delta_r2: f64,
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub p: f64,
    pub partial_eta_sq: Option<f64>,
}

impl ComparisonRow {
    pub fn from_test(label: impl Into<String>, test: &FTestResult) -> Self {
        ComparisonRow {
            label: label.into(),
            delta_r2: test.delta_r2,
            f: test.f,
            df1: test.df1,
            df2: test.df2,
            p: test.p,
            partial_eta_sq: test.partial_eta_sq,
        }
    }
}

/// A stepwise-style table: per-model summaries, the final model's
/// coefficient rows, and the nested comparisons between successive models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelTable {
    pub models: Vec<ModelSummary>,
    pub coefficients: Vec<CoefEntry>,
    pub comparisons: Vec<ComparisonRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Report {
    Rq1(Rq1Report),
    Rq2(Rq2Report),
}

impl Report {
    fn slug(&self) -> &'static str {
        match self {
            Report::Rq1(_) => "rq1",
            Report::Rq2(_) => "rq2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
    CsvBundle,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" | "csv-bundle" => Ok(ReportFormat::CsvBundle),
            other => Err(format!("unknown report format {other:?} (json|markdown|csv)")),
        }
    }
}

/// Writes the report under `out_dir` and returns the created paths.
pub fn emit_report(
    report: &Report,
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(out_dir)?;
    match format {
        ReportFormat::Json => {
            let path = out_dir.join(format!("report_{}.json", report.slug()));
            let mut body = serde_json::to_string_pretty(report)?;
            body.push('\n');
            std::fs::write(&path, body)?;
            Ok(vec![path])
        }
        ReportFormat::Markdown => {
            let path = out_dir.join(format!("report_{}.md", report.slug()));
            let body = match report {
                Report::Rq1(r) => markdown_rq1(r),
                Report::Rq2(r) => markdown_rq2(r),
            };
            std::fs::write(&path, body)?;
            Ok(vec![path])
        }
        ReportFormat::CsvBundle => match report {
            Report::Rq1(r) => csv_bundle_rq1(r, out_dir),
            Report::Rq2(r) => csv_bundle_rq2(r, out_dir),
        },
    }
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_string()
    } else {
        format!("{p:.3}")
    }
}

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

fn markdown_correlations(out: &mut String, title: &str, table: &CorrelationTable) {
    let _ = writeln!(out, "## {title}\n");
    let _ = writeln!(out, "| | {} |", table.col_vars.join(" | "));
    let _ = writeln!(out, "|---{}|", "|---".repeat(table.col_vars.len()));
    for (i, row_var) in table.row_vars.iter().enumerate() {
        let cells: Vec<String> = table.cells[i]
            .iter()
            .map(|cell| match cell {
                Some(c) => format!("{:.2}{}", c.r, c.stars),
                None => String::new(),
            })
            .collect();
        let _ = writeln!(out, "| {row_var} | {} |", cells.join(" | "));
    }
    let _ = writeln!(out, "\n*\\*p<0.05, \\*\\*p<0.01*\n");
}

fn markdown_model_summaries(out: &mut String, models: &[ModelSummary]) {
    let _ = writeln!(out, "| Model | R2 | F | p |");
    let _ = writeln!(out, "|---|---|---|---|");
    for m in models {
        let f = match m.f {
            Some(f) => format!("F({}, {}) = {:.2}", m.df1, m.df2, f),
            None => String::new(),
        };
        let _ = writeln!(
            out,
            "| {} | {:.3} | {} | {} |",
            m.label,
            m.r2,
            f,
            m.p.map(fmt_p).unwrap_or_default()
        );
    }
    let _ = writeln!(out);
}

fn markdown_coefficients(out: &mut String, coefficients: &[CoefEntry]) {
    let _ = writeln!(out, "| Predictor | beta | beta 95% | t | p |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    for c in coefficients {
        let _ = writeln!(
            out,
            "| {} | {:.2} | [{:.2}, {:.2}] | {:.3} | {} |",
            c.label, c.beta, c.ci95.0, c.ci95.1, c.t, fmt_p(c.p)
        );
    }
    let _ = writeln!(out);
}

fn markdown_comparisons(out: &mut String, comparisons: &[ComparisonRow]) {
    for c in comparisons {
        let eta = c
            .partial_eta_sq
            .map(|e| format!(", partial eta^2 = {e:.2}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "- {}: dR2 = {:.3}, F({}, {}) = {:.2}, p = {}{}",
            c.label, c.delta_r2, c.df1, c.df2, c.f, fmt_p(c.p), eta
        );
    }
    let _ = writeln!(out);
}

fn markdown_model_table(out: &mut String, title: &str, table: &ModelTable) {
    let _ = writeln!(out, "## {title}\n");
    markdown_model_summaries(out, &table.models);
    markdown_coefficients(out, &table.coefficients);
    markdown_comparisons(out, &table.comparisons);
}

fn markdown_rq1(report: &Rq1Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# RQ1: trait-level flow, engagement, and grades\n");
    markdown_correlations(&mut out, "Correlations", &report.table4);
    let _ = writeln!(out, "## Engagement on trait predictors\n");
    markdown_model_summaries(&mut out, &report.table5);
    markdown_model_table(&mut out, "Grade models", &report.table6);
    out
}

fn markdown_rq2(report: &Rq2Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# RQ2: reading sequence metrics and DEC moderation\n");
    markdown_correlations(&mut out, "Metric correlations", &report.table7);
    markdown_model_table(&mut out, "Grade on selected sequence metrics", &report.table8);

    let _ = writeln!(out, "## Gain over the engagement-only model\n");
    markdown_comparisons(&mut out, std::slice::from_ref(&report.engagement_gain));
    let _ = writeln!(out, "## DEC-augmented model\n");
    markdown_model_summaries(&mut out, std::slice::from_ref(&report.dec_augmented.model));
    markdown_comparisons(&mut out, std::slice::from_ref(&report.dec_augmented.comparison));

    let _ = writeln!(out, "## Strategy clusters (k = {})\n", report.clustering.k);
    let _ = writeln!(out, "| Cluster | Size | {} |", report.clustering.feature_names.join(" | "));
    let _ = writeln!(out, "|---|---{}|", "|---".repeat(report.clustering.feature_names.len()));
    for (id, (size, centroid)) in report
        .clustering
        .sizes
        .iter()
        .zip(&report.clustering.centroids)
        .enumerate()
    {
        let values: Vec<String> = centroid.iter().map(|v| format!("{v:.2}")).collect();
        let _ = writeln!(out, "| {id} | {size} | {} |", values.join(" | "));
    }
    let _ = writeln!(out);

    let _ = writeln!(out, "## Cluster moderation model\n");
    markdown_model_summaries(&mut out, std::slice::from_ref(&report.eq1.summary));
    markdown_coefficients(&mut out, &report.eq1.coefficients);
    let _ = writeln!(out, "## Omnibus moderation tests\n");
    match &report.omnibus {
        crate::rq2::Omnibus::Done { deci, dece } => {
            markdown_comparisons(&mut out, &[deci.clone(), dece.clone()]);
        }
        crate::rq2::Omnibus::Refused { reason } => {
            let _ = writeln!(out, "Refused: {reason}\n");
        }
    }

    let _ = writeln!(out, "## Predicted grades over DECI per cluster\n");
    let _ = writeln!(out, "| Cluster | DECI | fit | ci lo | ci hi | pi lo | pi hi |");
    let _ = writeln!(out, "|---|---|---|---|---|---|---|");
    for grid in &report.prediction_grids {
        for row in &grid.rows {
            let _ = writeln!(
                out,
                "| {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} |",
                grid.cluster, row.deci, row.fit, row.ci_lo, row.ci_hi, row.pi_lo, row.pi_hi
            );
        }
    }
    out
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), PipelineError> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let escaped: Vec<String> = row
            .iter()
            .map(|field| {
                if field.contains(',') || field.contains('"') || field.contains('\n') {
                    format!("\"{}\"", field.replace('"', "\"\""))
                } else {
                    field.clone()
                }
            })
            .collect();
        out.push_str(&escaped.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn correlation_rows(table: &CorrelationTable) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (i, row_var) in table.row_vars.iter().enumerate() {
        for (j, col_var) in table.col_vars.iter().enumerate() {
            if let Some(cell) = &table.cells[i][j] {
                rows.push(vec![
                    row_var.clone(),
                    col_var.clone(),
                    cell.r.to_string(),
                    cell.p.to_string(),
                    cell.n.to_string(),
                    cell.stars.clone(),
                ]);
            }
        }
    }
    rows
}

fn summary_rows(models: &[ModelSummary]) -> Vec<Vec<String>> {
    models
        .iter()
        .map(|m| {
            vec![
                m.label.clone(),
                m.r2.to_string(),
                fmt_opt(m.f, 12),
                m.df1.to_string(),
                m.df2.to_string(),
                fmt_opt(m.p, 12),
            ]
        })
        .collect()
}

fn coefficient_rows(coefficients: &[CoefEntry]) -> Vec<Vec<String>> {
    coefficients
        .iter()
        .map(|c| {
            vec![
                c.label.clone(),
                c.beta.to_string(),
                c.se.to_string(),
                c.t.to_string(),
                c.p.to_string(),
                c.ci95.0.to_string(),
                c.ci95.1.to_string(),
            ]
        })
        .collect()
}

fn comparison_rows(comparisons: &[ComparisonRow]) -> Vec<Vec<String>> {
    comparisons
        .iter()
        .map(|c| {
            vec![
                c.label.clone(),
                c.delta_r2.to_string(),
                c.f.to_string(),
                c.df1.to_string(),
                c.df2.to_string(),
                c.p.to_string(),
                c.partial_eta_sq.map(|e| e.to_string()).unwrap_or_default(),
            ]
        })
        .collect()
}

const SUMMARY_HEADER: [&str; 6] = ["model", "r2", "f", "df1", "df2", "p"];
const COEF_HEADER: [&str; 7] = ["term", "beta", "se", "t", "p", "ci95_lo", "ci95_hi"];
const COMPARISON_HEADER: [&str; 7] =
    ["comparison", "delta_r2", "f", "df1", "df2", "p", "partial_eta_sq"];
const CORR_HEADER: [&str; 6] = ["row", "col", "r", "p", "n", "stars"];

fn csv_bundle_rq1(report: &Rq1Report, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut paths = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| {
        let path = dir.join(name);
        write_csv(&path, header, &rows).map(|()| paths.push(path))
    };
    emit("rq1_table4_correlations.csv", &CORR_HEADER, correlation_rows(&report.table4))?;
    emit("rq1_table5_models.csv", &SUMMARY_HEADER, summary_rows(&report.table5))?;
    emit("rq1_table6_models.csv", &SUMMARY_HEADER, summary_rows(&report.table6.models))?;
    emit(
        "rq1_table6_coefficients.csv",
        &COEF_HEADER,
        coefficient_rows(&report.table6.coefficients),
    )?;
    emit(
        "rq1_table6_comparisons.csv",
        &COMPARISON_HEADER,
        comparison_rows(&report.table6.comparisons),
    )?;
    Ok(paths)
}

fn csv_bundle_rq2(report: &Rq2Report, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut paths = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| {
        let path = dir.join(name);
        write_csv(&path, header, &rows).map(|()| paths.push(path))
    };
    emit("rq2_table7_correlations.csv", &CORR_HEADER, correlation_rows(&report.table7))?;
    emit("rq2_table8_models.csv", &SUMMARY_HEADER, summary_rows(&report.table8.models))?;
    emit(
        "rq2_table8_coefficients.csv",
        &COEF_HEADER,
        coefficient_rows(&report.table8.coefficients),
    )?;
    emit(
        "rq2_table8_comparisons.csv",
        &COMPARISON_HEADER,
        comparison_rows(&report.table8.comparisons),
    )?;
    emit(
        "rq2_engagement_gain.csv",
        &COMPARISON_HEADER,
        comparison_rows(std::slice::from_ref(&report.engagement_gain)),
    )?;
    emit(
        "rq2_dec_augmented_model.csv",
        &SUMMARY_HEADER,
        summary_rows(std::slice::from_ref(&report.dec_augmented.model)),
    )?;
    emit(
        "rq2_dec_augmented_comparison.csv",
        &COMPARISON_HEADER,
        comparison_rows(std::slice::from_ref(&report.dec_augmented.comparison)),
    )?;

    let cluster_rows: Vec<Vec<String>> = report
        .clustering
        .assignments
        .iter()
        .map(|(student, cluster)| vec![student.clone(), cluster.to_string()])
        .collect();
    emit("rq2_cluster_assignments.csv", &["student_id", "cluster"], cluster_rows)?;

    let mut centroid_header: Vec<&str> = vec!["cluster", "size"];
    for name in &report.clustering.feature_names {
        centroid_header.push(name.as_str());
    }
    let centroid_rows: Vec<Vec<String>> = report
        .clustering
        .centroids
        .iter()
        .enumerate()
        .map(|(id, centroid)| {
            let mut row = vec![id.to_string(), report.clustering.sizes[id].to_string()];
            row.extend(centroid.iter().map(|v| v.to_string()));
            row
        })
        .collect();
    emit("rq2_cluster_centroids.csv", &centroid_header, centroid_rows)?;

    let merge_rows: Vec<Vec<String>> = report
        .clustering
        .dendrogram
        .iter()
        .map(|m| {
            vec![m.left.to_string(), m.right.to_string(), m.height.to_string(), m.size.to_string()]
        })
        .collect();
    emit("rq2_dendrogram.csv", &["left", "right", "height", "size"], merge_rows)?;

    emit(
        "rq2_eq1_model.csv",
        &SUMMARY_HEADER,
        summary_rows(std::slice::from_ref(&report.eq1.summary)),
    )?;
    emit("rq2_eq1_coefficients.csv", &COEF_HEADER, coefficient_rows(&report.eq1.coefficients))?;

    let omnibus_rows = match &report.omnibus {
        crate::rq2::Omnibus::Done { deci, dece } => {
            comparison_rows(&[deci.clone(), dece.clone()])
        }
        crate::rq2::Omnibus::Refused { reason } => {
            vec![vec![format!("refused: {reason}"), String::new(), String::new(), String::new(), String::new(), String::new(), String::new()]]
        }
    };
    emit("rq2_omnibus.csv", &COMPARISON_HEADER, omnibus_rows)?;

    let grid_rows: Vec<Vec<String>> = report
        .prediction_grids
        .iter()
        .flat_map(|grid| {
            grid.rows.iter().map(move |row| {
                vec![
                    grid.cluster.to_string(),
                    row.deci.to_string(),
                    row.fit.to_string(),
                    row.ci_lo.to_string(),
                    row.ci_hi.to_string(),
                    row.pi_lo.to_string(),
                    row.pi_hi.to_string(),
                ]
            })
        })
        .collect();
    emit(
        "rq2_prediction_grid.csv",
        &["cluster", "deci", "fit", "ci_lo", "ci_hi", "pi_lo", "pi_hi"],
        grid_rows,
    )?;
    Ok(paths)
}
