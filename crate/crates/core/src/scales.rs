//! Questionnaire scale scoring and internal-consistency reliability.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{QuestionnaireResponse, ScaleId};
use crate::model::StudentId;

#[derive(Debug, Error, PartialEq)]
pub enum ScalesError {
    #[error("need at least 2 respondents, got {0}")]
    TooFewRespondents(usize),
    #[error("need at least 2 items, got {0}")]
    TooFewItems(usize),
    #[error("row {0} has {1} items, expected {2}")]
    RaggedMatrix(usize, usize, usize),
    #[error("total score variance is zero; alpha undefined")]
    ZeroVariance,
}

/// Final scale score: the mean of the item scores, on the 1-7 scale.
pub fn scale_score(response: &QuestionnaireResponse) -> f64 {
    let sum: u32 = response.items.iter().map(|&v| v as u32).sum();
    sum as f64 / response.items.len() as f64
}

/// Per-student scores for the four scales; absent when the student did not
/// answer that scale.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleScores {
    pub deci: Option<f64>,
    pub dece: Option<f64>,
    pub mw_s: Option<f64>,
    pub mw_d: Option<f64>,
}

impl ScaleScores {
    pub fn get(&self, scale: ScaleId) -> Option<f64> {
        match scale {
            ScaleId::Deci => self.deci,
            ScaleId::Dece => self.dece,
            ScaleId::MwS => self.mw_s,
            ScaleId::MwD => self.mw_d,
        }
    }

    fn set(&mut self, scale: ScaleId, value: f64) -> bool {
        let slot = match scale {
            ScaleId::Deci => &mut self.deci,
            ScaleId::Dece => &mut self.dece,
            ScaleId::MwS => &mut self.mw_s,
            ScaleId::MwD => &mut self.mw_d,
        };
        let seen = slot.is_some();
        *slot = Some(value);
        seen
    }
}

/// Scores every response and groups by student. A student answering a
/// scale twice keeps the last response, with a warning.
pub fn score_by_student(
    responses: &[QuestionnaireResponse],
) -> (BTreeMap<StudentId, ScaleScores>, Vec<String>) {
    let mut out: BTreeMap<StudentId, ScaleScores> = BTreeMap::new();
    let mut warnings = Vec::new();
    for response in responses {
        let entry = out.entry(response.student_id.clone()).or_default();
        if entry.set(response.scale, scale_score(response)) {
            warnings.push(format!(
                "duplicate {} response for {}, keeping the last",
                response.scale.as_str(),
                response.student_id
            ));
        }
    }
    (out, warnings)
}

/// Cronbach's alpha: `k/(k-1) * (1 - sum(var_item) / var(total))` with
/// sample (n-1) variances. Rows are respondents, columns are items.
pub fn cronbach_alpha(matrix: &[Vec<f64>]) -> Result<f64, ScalesError> {
    let n = matrix.len();
    if n < 2 {
        return Err(ScalesError::TooFewRespondents(n));
    }
    let k = matrix[0].len();
    if k < 2 {
        return Err(ScalesError::TooFewItems(k));
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != k {
            return Err(ScalesError::RaggedMatrix(i, row.len(), k));
        }
    }

    let sample_var = |values: &[f64]| -> f64 {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
    };

    let mut item_var_sum = 0.0;
    for j in 0..k {
        let col: Vec<f64> = matrix.iter().map(|row| row[j]).collect();
        item_var_sum += sample_var(&col);
    }
    let totals: Vec<f64> = matrix.iter().map(|row| row.iter().sum()).collect();
    let total_var = sample_var(&totals);
    if total_var == 0.0 {
        return Err(ScalesError::ZeroVariance);
    }
    let kf = k as f64;
    Ok(kf / (kf - 1.0) * (1.0 - item_var_sum / total_var))
}

/// Builds the item matrix for one scale from raw responses (one row per
/// respondent, input order preserved).
pub fn item_matrix(responses: &[QuestionnaireResponse], scale: ScaleId) -> Vec<Vec<f64>> {
    responses
        .iter()
        .filter(|r| r.scale == scale)
        .map(|r| r.items.iter().map(|&v| v as f64).collect())
        .collect()
}
