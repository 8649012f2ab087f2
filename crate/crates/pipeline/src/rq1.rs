//! First analysis workflow: trait-level flow, the engagement indicator,
//! and their joint contribution to grades.
//!
//! Produces three blocks: the trait/engagement/grade correlation matrix,
//! regressions of engagement on the trait scales, and the three-stage
//! moderated grade regression (engagement; plus the concentration scales;
//! plus their interactions with engagement) with partial F-tests between
//! successive stages.

use serde::{Deserialize, Serialize};

use readtrace_core::model::StudentProfile;
use readtrace_stats::{ols_fit, partial_f, pearson, Dataset, RegressionReport, Term};

use crate::config::AnalysisConfig;
use crate::error::PipelineError;
use crate::profile::{join_profiles, Attrition, Sources};
use crate::report::{
    stars, ComparisonRow, CorrCell, CorrelationTable, ModelSummary, ModelTable,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rq1Report {
    pub table4: CorrelationTable,
    pub table5: Vec<ModelSummary>,
    pub table6: ModelTable,
}

pub(crate) fn summary_of(label: &str, report: &RegressionReport) -> ModelSummary {
    ModelSummary {
        label: label.to_string(),
        r2: report.r2,
        f: report.f_model,
        df1: report.df_model,
        df2: report.df_resid,
        p: report.p_model,
    }
}

/// Upper-triangular correlation table over named columns: cell (i, j) is
/// filled for j > i.
pub(crate) fn correlation_triangle(
    names: &[&str],
    columns: &[Vec<f64>],
) -> Result<CorrelationTable, PipelineError> {
    let row_vars: Vec<String> = names[..names.len() - 1].iter().map(|s| s.to_string()).collect();
    let col_vars: Vec<String> = names[1..].iter().map(|s| s.to_string()).collect();
    let mut cells = Vec::new();
    for i in 0..names.len() - 1 {
        let mut row = Vec::new();
        for j in 1..names.len() {
            if j > i {
                let result = pearson(&columns[i], &columns[j])?;
                row.push(Some(CorrCell {
                    r: result.r,
                    p: result.p,
                    n: result.n,
                    stars: stars(result.p),
                }));
            } else {
                row.push(None);
            }
        }
        cells.push(row);
    }
    Ok(CorrelationTable { row_vars, col_vars, cells })
}

/// Centers a column in place when trait centering is enabled.
fn maybe_center(values: &mut [f64], enabled: bool) {
    if enabled && !values.is_empty() {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        for v in values.iter_mut() {
            *v -= mean;
        }
    }
}

pub fn run_rq1(
    profiles: &[StudentProfile],
    config: &AnalysisConfig,
) -> Result<(Rq1Report, Attrition), PipelineError> {
    let (joined, attrition) = join_profiles(
        profiles,
        Sources {
            engagement: true,
            dec: true,
            mind_wandering: true,
            grades: true,
            ..Default::default()
        },
    )?;

    let engagement: Vec<f64> = joined.iter().map(|p| p.engagement.unwrap()).collect();
    let grade: Vec<f64> = joined.iter().map(|p| p.grade.unwrap()).collect();
    let mut deci: Vec<f64> = joined.iter().map(|p| p.deci.unwrap()).collect();
    let mut dece: Vec<f64> = joined.iter().map(|p| p.dece.unwrap()).collect();
    let mw_s: Vec<f64> = joined.iter().map(|p| p.mw_s.unwrap()).collect();
    let mw_d: Vec<f64> = joined.iter().map(|p| p.mw_d.unwrap()).collect();

    let table4 = correlation_triangle(
        &["DECI", "DECE", "Engagement", "Grade", "MW-S", "MW-D"],
        &[
            deci.clone(),
            dece.clone(),
            engagement.clone(),
            grade.clone(),
            mw_s.clone(),
            mw_d.clone(),
        ],
    )?;

    maybe_center(&mut deci, config.center_traits);
    maybe_center(&mut dece, config.center_traits);

    let mut data = Dataset::new();
    data.add_numeric("Engagement", engagement)?;
    data.add_numeric("Grade", grade)?;
    data.add_numeric("DECI", deci)?;
    data.add_numeric("DECE", dece)?;
    data.add_numeric("MW-S", mw_s)?;
    data.add_numeric("MW-D", mw_d)?;

    // engagement on the trait scales
    let eng_dec = ols_fit(&[Term::var("DECI"), Term::var("DECE")], "Engagement", &data)?;
    let eng_all = ols_fit(
        &[Term::var("DECI"), Term::var("DECE"), Term::var("MW-S"), Term::var("MW-D")],
        "Engagement",
        &data,
    )?;
    let table5 = vec![
        summary_of("DECI + DECE", &eng_dec),
        summary_of("DECI + DECE + MW-S + MW-D", &eng_all),
    ];

    // three-stage grade regression
    let m1 = ols_fit(&[Term::var("Engagement")], "Grade", &data)?;
    let m2 = ols_fit(
        &[Term::var("Engagement"), Term::var("DECI"), Term::var("DECE")],
        "Grade",
        &data,
    )?;
    let m3 = ols_fit(
        &[
            Term::var("Engagement"),
            Term::var("DECI"),
            Term::var("DECE"),
            Term::interact("Engagement", "DECI"),
            Term::interact("Engagement", "DECE"),
        ],
        "Grade",
        &data,
    )?;
    let table6 = ModelTable {
        models: vec![
            summary_of("Model 1", &m1),
            summary_of("Model 2", &m2),
            summary_of("Model 3", &m3),
        ],
        coefficients: m3.coefficients.clone(),
        comparisons: vec![
            ComparisonRow::from_test("Model 1-2", &partial_f(&m1, &m2)?),
            ComparisonRow::from_test("Model 2-3", &partial_f(&m2, &m3)?),
        ],
    };

    Ok((Rq1Report { table4, table5, table6 }, attrition))
}
