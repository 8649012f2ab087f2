//! Point predictions with confidence and prediction intervals.

use serde::{Deserialize, Serialize};

use crate::design::{build_design, Dataset};
use crate::error::StatError;
use crate::ols::RegressionReport;
use crate::special::student_t_ppf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub fit: f64,
    pub se_fit: f64,
    /// 95% confidence interval for the mean response.
    pub ci95: (f64, f64),
    /// 95% prediction interval for a new observation.
    pub pi95: (f64, f64),
}

/// Predicts over `grid`, expanding it with the report's terms and factor
/// coding. Column mismatches (missing variables, unseen factor levels)
/// are errors. CI half-width is `t * sqrt(x' S x)` and PI half-width
/// `t * sqrt(x' S x + sigma^2)` with `S` the coefficient covariance.
pub fn predict_with_intervals(
    report: &RegressionReport,
    grid: &Dataset,
) -> Result<Vec<Prediction>, StatError> {
    let design = build_design(&report.terms, grid, Some(&report.coding))?;
    if design.labels != report.coefficients.iter().map(|c| c.label.clone()).collect::<Vec<_>>() {
        return Err(StatError::DesignMismatch(format!(
            "grid expands to columns [{}], model was fit on [{}]",
            design.labels.join(", "),
            report
                .coefficients
                .iter()
                .map(|c| c.label.clone())
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    let beta: Vec<f64> = report.coefficients.iter().map(|c| c.beta).collect();
    let t_crit = student_t_ppf(0.975, report.df_resid as f64);
    let sigma2 = report.residual_variance;
    let p = beta.len();

    let mut out = Vec::with_capacity(design.n());
    for i in 0..design.n() {
        let row = design.row(i);
        let fit: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
        // x' S x
        let mut quad = 0.0;
        for a in 0..p {
            for b in 0..p {
                quad += row[a] * report.beta_covariance[a][b] * row[b];
            }
        }
        let quad = quad.max(0.0);
        let se_fit = quad.sqrt();
        let se_pred = (quad + sigma2).sqrt();
        out.push(Prediction {
            fit,
            se_fit,
            ci95: (fit - t_crit * se_fit, fit + t_crit * se_fit),
            pi95: (fit - t_crit * se_pred, fit + t_crit * se_pred),
        });
    }
    Ok(out)
}
