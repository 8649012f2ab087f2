//! Model terms, datasets and design-matrix construction.
//!
//! Interaction columns are raw element-wise products (no centering), and
//! categorical factors use treatment coding against the largest level as
//! reference. The coding chosen during fitting is recorded so prediction
//! grids expand to exactly the same columns.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::StatError;
use crate::linalg::Mat;

/// Column-oriented dataset: numeric variables plus string-labelled
/// categorical factors, all of one length.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    len: Option<usize>,
    numeric: BTreeMap<String, Vec<f64>>,
    categorical: BTreeMap<String, Vec<String>>,
}

impl Dataset {
    pub fn new() -> Self {
        Dataset::default()
    }

    pub fn n(&self) -> usize {
        self.len.unwrap_or(0)
    }

    fn check_len(&mut self, name: &str, len: usize) -> Result<(), StatError> {
        match self.len {
            None => {
                self.len = Some(len);
                Ok(())
            }
            Some(expected) if expected == len => Ok(()),
            Some(expected) => Err(StatError::LengthMismatch(expected, len))
                .map_err(|_| StatError::Invalid(format!(
                    "column {name:?} has {len} rows, dataset has {expected}"
                ))),
        }
    }

    pub fn add_numeric(
        &mut self,
        name: impl Into<String>,
        values: Vec<f64>,
    ) -> Result<(), StatError> {
        let name = name.into();
        self.check_len(&name, values.len())?;
        self.numeric.insert(name, values);
        Ok(())
    }

    pub fn add_categorical(
        &mut self,
        name: impl Into<String>,
        values: Vec<String>,
    ) -> Result<(), StatError> {
        let name = name.into();
        self.check_len(&name, values.len())?;
        self.categorical.insert(name, values);
        Ok(())
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64], StatError> {
        self.numeric
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| StatError::UnknownVariable(name.to_string()))
    }

    pub fn categorical(&self, name: &str) -> Result<&[String], StatError> {
        self.categorical
            .get(name)
            .map(|v| v.as_slice())
            .ok_or_else(|| StatError::UnknownVariable(name.to_string()))
    }

    pub fn has_numeric(&self, name: &str) -> bool {
        self.numeric.contains_key(name)
    }
}

/// One model term. A factor term expands to one dummy column per
/// non-reference level; everything else is a single column.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Term {
    Intercept,
    /// Numeric main effect.
    Var(String),
    /// Raw product of two numeric variables.
    Interact(String, String),
    /// Categorical main effect (treatment coded).
    Factor(String),
    /// Categorical-by-numeric interaction block.
    FactorInteract(String, String),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn interact(a: impl Into<String>, b: impl Into<String>) -> Term {
        Term::Interact(a.into(), b.into())
    }

    pub fn label(&self) -> String {
        match self {
            Term::Intercept => "(Intercept)".to_string(),
            Term::Var(v) => v.clone(),
            Term::Interact(a, b) => format!("{a}:{b}"),
            Term::Factor(f) => format!("C({f})"),
            Term::FactorInteract(f, v) => format!("C({f}):{v}"),
        }
    }

    /// Parent variables of a numeric interaction, if this is one.
    pub fn interaction_parents(&self) -> Option<(&str, &str)> {
        match self {
            Term::Interact(a, b) => Some((a, b)),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Treatment coding chosen while fitting: reference level plus the ordered
/// non-reference levels per factor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactorCoding {
    pub levels: BTreeMap<String, FactorLevels>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorLevels {
    pub reference: String,
    pub others: Vec<String>,
}

/// Expanded design matrix with per-column labels and the span of columns
/// each term produced.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub labels: Vec<String>,
    pub term_spans: Vec<(Term, Range<usize>)>,
    pub coding: FactorCoding,
    pub(crate) x: Mat,
}

impl DesignMatrix {
    pub fn n(&self) -> usize {
        self.x.rows
    }

    pub fn p(&self) -> usize {
        self.x.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.column(j)
    }

    pub(crate) fn mat(&self) -> &Mat {
        &self.x
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.p()).map(|j| self.x.at(i, j)).collect()
    }
}

fn factor_levels_from_data(values: &[String]) -> FactorLevels {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v.as_str()).or_insert(0) += 1;
    }
    // reference = most frequent level, ties to the lexicographically first
    let reference = counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(level, _)| level.to_string())
        .expect("factor has at least one level");
    let others = counts
        .keys()
        .filter(|&&level| level != reference)
        .map(|level| level.to_string())
        .collect();
    FactorLevels { reference, others }
}

/// Builds the design matrix for `terms` over `data`, prepending an
/// intercept when absent. Factor codings are derived from the data unless
/// supplied (prediction grids pass the fitted coding back in).
pub fn build_design(
    terms: &[Term],
    data: &Dataset,
    coding: Option<&FactorCoding>,
) -> Result<DesignMatrix, StatError> {
    let n = data.n();
    if n == 0 {
        return Err(StatError::TooFewObservations { needed: 1, got: 0 });
    }
    let mut full_terms: Vec<Term> = Vec::with_capacity(terms.len() + 1);
    if !terms.contains(&Term::Intercept) {
        full_terms.push(Term::Intercept);
    }
    for t in terms {
        if full_terms.contains(t) {
            return Err(StatError::Invalid(format!("duplicate term {t}")));
        }
        full_terms.push(t.clone());
    }

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut term_spans: Vec<(Term, Range<usize>)> = Vec::new();
    let mut used_coding = FactorCoding::default();

    let resolve_levels = |factor: &str, data: &Dataset| -> Result<FactorLevels, StatError> {
        if let Some(c) = coding {
            return c
                .levels
                .get(factor)
                .cloned()
                .ok_or_else(|| StatError::DesignMismatch(format!("no coding for factor {factor}")));
        }
        Ok(factor_levels_from_data(data.categorical(factor)?))
    };

    for term in &full_terms {
        let start = columns.len();
        match term {
            Term::Intercept => {
                columns.push(vec![1.0; n]);
                labels.push(term.label());
            }
            Term::Var(v) => {
                columns.push(data.numeric(v)?.to_vec());
                labels.push(term.label());
            }
            Term::Interact(a, b) => {
                let xa = data.numeric(a)?;
                let xb = data.numeric(b)?;
                columns.push(xa.iter().zip(xb).map(|(u, v)| u * v).collect());
                labels.push(term.label());
            }
            Term::Factor(f) => {
                let levels = resolve_levels(f, data)?;
                let values = data.categorical(f)?;
                check_levels_known(f, values, &levels)?;
                for level in &levels.others {
                    columns.push(
                        values.iter().map(|v| if v == level { 1.0 } else { 0.0 }).collect(),
                    );
                    labels.push(format!("{f}[{level}]"));
                }
                used_coding.levels.insert(f.clone(), levels);
            }
            Term::FactorInteract(f, v) => {
                let levels = resolve_levels(f, data)?;
                let values = data.categorical(f)?;
                check_levels_known(f, values, &levels)?;
                let x = data.numeric(v)?;
                for level in &levels.others {
                    columns.push(
                        values
                            .iter()
                            .zip(x)
                            .map(|(fac, num)| if fac == level { *num } else { 0.0 })
                            .collect(),
                    );
                    labels.push(format!("{f}[{level}]:{v}"));
                }
                used_coding.levels.insert(f.clone(), levels);
            }
        }
        term_spans.push((term.clone(), start..columns.len()));
    }

    Ok(DesignMatrix {
        labels,
        term_spans,
        coding: used_coding,
        x: Mat::from_columns(&columns),
    })
}

fn check_levels_known(
    factor: &str,
    values: &[String],
    levels: &FactorLevels,
) -> Result<(), StatError> {
    for v in values {
        if v != &levels.reference && !levels.others.contains(v) {
            return Err(StatError::DesignMismatch(format!(
                "factor {factor} has level {v:?} unseen at fit time"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_data() -> Dataset {
        let mut d = Dataset::new();
        d.add_numeric("x", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        d.add_numeric("z", vec![0.5, 0.5, 1.5, 1.5]).unwrap();
        d.add_categorical(
            "g",
            vec!["a".into(), "b".into(), "b".into(), "c".into()],
        )
        .unwrap();
        d
    }

    #[test]
    fn intercept_is_always_first() {
        let design = build_design(&[Term::var("x")], &toy_data(), None).unwrap();
        assert_eq!(design.labels, vec!["(Intercept)", "x"]);
        assert_eq!(design.column(0), vec![1.0; 4]);
    }

    #[test]
    fn interaction_is_raw_product() {
        let design =
            build_design(&[Term::var("x"), Term::var("z"), Term::interact("x", "z")], &toy_data(), None)
                .unwrap();
        assert_eq!(design.column(3), vec![0.5, 1.0, 4.5, 6.0]);
        assert_eq!(design.labels[3], "x:z");
    }

    #[test]
    fn factor_uses_largest_level_as_reference() {
        let design = build_design(&[Term::Factor("g".into())], &toy_data(), None).unwrap();
        // "b" occurs twice -> reference; dummies for a and c
        assert_eq!(design.labels, vec!["(Intercept)", "g[a]", "g[c]"]);
        assert_eq!(design.column(1), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(design.column(2), vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(design.coding.levels["g"].reference, "b");
    }

    #[test]
    fn factor_interaction_expands_per_level() {
        let design =
            build_design(&[Term::FactorInteract("g".into(), "x".into())], &toy_data(), None)
                .unwrap();
        assert_eq!(design.labels, vec!["(Intercept)", "g[a]:x", "g[c]:x"]);
        assert_eq!(design.column(1), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(design.column(2), vec![0.0, 0.0, 0.0, 4.0]);
    }

    #[test]
    fn supplied_coding_overrides_frequencies() {
        let mut coding = FactorCoding::default();
        coding.levels.insert(
            "g".into(),
            FactorLevels { reference: "a".into(), others: vec!["b".into(), "c".into()] },
        );
        let design = build_design(&[Term::Factor("g".into())], &toy_data(), Some(&coding)).unwrap();
        assert_eq!(design.labels, vec!["(Intercept)", "g[b]", "g[c]"]);
    }

    #[test]
    fn unseen_level_is_rejected() {
        let mut coding = FactorCoding::default();
        coding.levels.insert(
            "g".into(),
            FactorLevels { reference: "a".into(), others: vec!["b".into()] },
        );
        let err = build_design(&[Term::Factor("g".into())], &toy_data(), Some(&coding)).unwrap_err();
        assert!(matches!(err, StatError::DesignMismatch(_)));
    }

    #[test]
    fn unknown_variable_errors() {
        let err = build_design(&[Term::var("nope")], &toy_data(), None).unwrap_err();
        assert_eq!(err, StatError::UnknownVariable("nope".to_string()));
    }
}
