//! Nested-model partial F-tests and omnibus block tests.

use serde::{Deserialize, Serialize};

use crate::design::{Dataset, Term};
use crate::error::StatError;
use crate::ols::{ols_fit, RegressionReport};
use crate::special::f_sf;

/// Result of comparing nested models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FTestResult {
    pub delta_r2: f64,
    pub f: f64,
    pub df1: usize,
    pub df2: usize,
    pub p: f64,
    /// Effect size `delta_SSR / (delta_SSR + SSE_full)`.
    pub partial_eta_sq: Option<f64>,
}

/// Partial F from the two R-squared values alone:
/// `F = ((R2_full - R2_red)/df1) / ((1 - R2_full)/df2)`.
pub fn partial_f_from_r2(r2_reduced: f64, r2_full: f64, df1: usize, df2: usize) -> FTestResult {
    let delta_r2 = r2_full - r2_reduced;
    let f = if delta_r2 <= 0.0 {
        0.0
    } else {
        (delta_r2 / df1 as f64) / ((1.0 - r2_full) / df2 as f64)
    };
    let p = f_sf(f, df1 as f64, df2 as f64);
    let partial_eta_sq = if delta_r2 <= 0.0 {
        Some(0.0)
    } else {
        Some(delta_r2 / (delta_r2 + (1.0 - r2_full)))
    };
    FTestResult { delta_r2, f, df1, df2, p, partial_eta_sq }
}

/// Partial F-test between two fitted models on the same data, the reduced
/// model's terms being a subset of the full model's.
pub fn partial_f(
    reduced: &RegressionReport,
    full: &RegressionReport,
) -> Result<FTestResult, StatError> {
    if !reduced.nested_in(full) {
        return Err(StatError::NotNested(format!(
            "terms of the reduced model ({}) must be a subset of the full model ({}) on the same data",
            reduced
                .terms
                .iter()
                .map(Term::label)
                .collect::<Vec<_>>()
                .join(" + "),
            full.terms.iter().map(Term::label).collect::<Vec<_>>().join(" + "),
        )));
    }
    let df1 = full.p() - reduced.p();
    if df1 == 0 {
        return Err(StatError::NotNested("models have identical terms".to_string()));
    }
    let df2 = full.df_resid;
    let mut result = partial_f_from_r2(reduced.r2, full.r2, df1, df2);
    // exact effect size from the sums of squares
    let delta_ssr = (reduced.sse - full.sse).max(0.0);
    result.partial_eta_sq = Some(if delta_ssr + full.sse > 0.0 {
        delta_ssr / (delta_ssr + full.sse)
    } else {
        0.0
    });
    Ok(result)
}

/// Omnibus test of a block of terms: fits the full model and the model
/// without the block, then runs the partial F-test. Returns the test plus
/// both fitted models.
pub fn omnibus_block_test(
    full_terms: &[Term],
    block: &[Term],
    response: &str,
    data: &Dataset,
) -> Result<(FTestResult, RegressionReport, RegressionReport), StatError> {
    for b in block {
        if !full_terms.contains(b) {
            return Err(StatError::NotNested(format!(
                "block term {b} is not part of the full model"
            )));
        }
    }
    if block.is_empty() {
        return Err(StatError::Invalid("empty term block".to_string()));
    }
    let reduced_terms: Vec<Term> =
        full_terms.iter().filter(|t| !block.contains(t)).cloned().collect();
    let full = ols_fit(full_terms, response, data)?;
    let reduced = ols_fit(&reduced_terms, response, data)?;
    let test = partial_f(&reduced, &full)?;
    Ok((test, full, reduced))
}
