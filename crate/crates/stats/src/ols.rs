//! Ordinary least squares with the usual inferential trimmings.

use serde::{Deserialize, Serialize};

use crate::design::{build_design, Dataset, DesignMatrix, FactorCoding, Term};
use crate::error::StatError;
use crate::linalg::qr_least_squares;
use crate::special::{f_sf, student_t_ppf, student_t_two_tailed_p};

/// One fitted coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefEntry {
    pub label: String,
    pub beta: f64,
    pub se: f64,
    pub t: f64,
    /// Two-tailed p-value on the residual degrees of freedom.
    pub p: f64,
    pub ci95: (f64, f64),
}

/// A fitted model: coefficient table, fit statistics and the pieces
/// needed for nested comparisons and prediction intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub response: String,
    pub terms: Vec<Term>,
    pub coefficients: Vec<CoefEntry>,
    pub r2: f64,
    /// Overall F against the intercept-only model; `None` for an
    /// intercept-only fit.
    pub f_model: Option<f64>,
    pub p_model: Option<f64>,
    pub df_model: usize,
    pub df_resid: usize,
    /// Residual variance `SSE / df_resid`.
    pub residual_variance: f64,
    /// `sigma^2 (X'X)^{-1}`, indexed like `coefficients`.
    pub beta_covariance: Vec<Vec<f64>>,
    pub n: usize,
    pub sse: f64,
    pub sst: f64,
    pub coding: FactorCoding,
}

impl RegressionReport {
    pub fn coefficient(&self, label: &str) -> Option<&CoefEntry> {
        self.coefficients.iter().find(|c| c.label == label)
    }

    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    /// True when every term of `self` also appears in `other` and both
    /// fits used the same data size.
    pub fn nested_in(&self, other: &RegressionReport) -> bool {
        self.n == other.n
            && self.response == other.response
            && self.terms.iter().all(|t| other.terms.contains(t))
    }
}

/// Fits `response ~ terms` by QR least squares. The intercept is always
/// included; confidence intervals use t critical values at the residual
/// degrees of freedom.
pub fn ols_fit(terms: &[Term], response: &str, data: &Dataset) -> Result<RegressionReport, StatError> {
    let design = build_design(terms, data, None)?;
    ols_fit_design(&design, response, data)
}

pub(crate) fn ols_fit_design(
    design: &DesignMatrix,
    response: &str,
    data: &Dataset,
) -> Result<RegressionReport, StatError> {
    let y = data.numeric(response)?;
    let n = design.n();
    let p = design.p();
    if n <= p {
        return Err(StatError::TooFewObservations { needed: p + 1, got: n });
    }

    let sol = qr_least_squares(design.mat(), y, &design.labels)?;
    let fitted = design.mat().mul_vec(&sol.beta);
    let sse: f64 = y.iter().zip(&fitted).map(|(yi, fi)| (yi - fi) * (yi - fi)).sum();
    let ymean = y.iter().sum::<f64>() / n as f64;
    let sst: f64 = y.iter().map(|yi| (yi - ymean) * (yi - ymean)).sum();
    if sst == 0.0 {
        return Err(StatError::ConstantInput(response.to_string()));
    }

    let df_model = p - 1;
    let df_resid = n - p;
    let sigma2 = sse / df_resid as f64;
    let r2 = 1.0 - sse / sst;

    let beta_covariance: Vec<Vec<f64>> = sol
        .xtx_inv
        .iter()
        .map(|row| row.iter().map(|v| v * sigma2).collect())
        .collect();

    let t_crit = student_t_ppf(0.975, df_resid as f64);
    let coefficients = design
        .labels
        .iter()
        .enumerate()
        .map(|(j, label)| {
            let beta = sol.beta[j];
            let se = beta_covariance[j][j].max(0.0).sqrt();
            let t = if se > 0.0 { beta / se } else { f64::INFINITY * beta.signum() };
            let pval = if se > 0.0 { student_t_two_tailed_p(t, df_resid as f64) } else { 0.0 };
            CoefEntry {
                label: label.clone(),
                beta,
                se,
                t,
                p: pval,
                ci95: (beta - t_crit * se, beta + t_crit * se),
            }
        })
        .collect();

    let (f_model, p_model) = if df_model == 0 {
        (None, None)
    } else {
        let f = (r2 / df_model as f64) / ((1.0 - r2) / df_resid as f64);
        (Some(f), Some(f_sf(f, df_model as f64, df_resid as f64)))
    };

    Ok(RegressionReport {
        response: response.to_string(),
        terms: design.term_spans.iter().map(|(t, _)| t.clone()).collect(),
        coefficients,
        r2,
        f_model,
        p_model,
        df_model,
        df_resid,
        residual_variance: sigma2,
        beta_covariance,
        n,
        sse,
        sst,
        coding: design.coding.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(cols: &[(&str, Vec<f64>)]) -> Dataset {
        let mut d = Dataset::new();
        for (name, values) in cols {
            d.add_numeric(*name, values.clone()).unwrap();
        }
        d
    }

    #[test]
    fn perfect_line_recovers_exactly() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let data = dataset(&[("x", x), ("y", y)]);
        let report = ols_fit(&[Term::var("x")], "y", &data).unwrap();
        assert!((report.coefficient("(Intercept)").unwrap().beta - 1.0).abs() < 1e-10);
        assert!((report.coefficient("x").unwrap().beta - 2.0).abs() < 1e-10);
        assert!((report.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_normal_equations_oracle() {
        let mut rng = readtrace_testkit::TestRng::new(5150);
        for _ in 0..300 {
            let n = 12 + rng.below(40);
            let x1: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
            let x2: Vec<f64> = (0..n).map(|_| rng.normal() * 2.0 + 1.0).collect();
            let y: Vec<f64> = (0..n)
                .map(|i| 0.5 + 1.5 * x1[i] - 0.7 * x2[i] + rng.normal())
                .collect();
            let data = dataset(&[("x1", x1.clone()), ("x2", x2.clone()), ("y", y.clone())]);
            let report =
                ols_fit(&[Term::var("x1"), Term::var("x2")], "y", &data).unwrap();

            let rows: Vec<Vec<f64>> =
                (0..n).map(|i| vec![1.0, x1[i], x2[i]]).collect();
            let oracle = readtrace_testkit::ols_normal_equations(&rows, &y).unwrap();
            for (got, want) in report.coefficients.iter().zip(&oracle) {
                assert!((got.beta - want).abs() < 1e-9, "{} vs {}", got.beta, want);
            }

            // residuals orthogonal to every design column
            let fitted: Vec<f64> = rows
                .iter()
                .map(|r| r.iter().zip(report.coefficients.iter()).map(|(x, c)| x * c.beta).sum())
                .collect();
            for j in 0..3 {
                let dot: f64 =
                    (0..n).map(|i| (y[i] - fitted[i]) * rows[i][j]).sum();
                assert!(dot.abs() < 1e-8, "residual dot {dot}");
            }
        }
    }

    #[test]
    fn rescaling_a_predictor_keeps_inference() {
        let mut rng = readtrace_testkit::TestRng::new(88);
        let n = 60;
        let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let y: Vec<f64> = x.iter().map(|v| 0.3 * v + rng.normal()).collect();
        let d1 = dataset(&[("x", x.clone()), ("y", y.clone())]);
        let x_scaled: Vec<f64> = x.iter().map(|v| v * 250.0).collect();
        let d2 = dataset(&[("x", x_scaled), ("y", y)]);
        let r1 = ols_fit(&[Term::var("x")], "y", &d1).unwrap();
        let r2 = ols_fit(&[Term::var("x")], "y", &d2).unwrap();
        assert!((r1.r2 - r2.r2).abs() < 1e-12);
        assert!((r1.f_model.unwrap() - r2.f_model.unwrap()).abs() < 1e-7);
        let c1 = r1.coefficient("x").unwrap();
        let c2 = r2.coefficient("x").unwrap();
        assert!((c1.t - c2.t).abs() < 1e-8);
        assert!((c1.p - c2.p).abs() < 1e-10);
        assert!((c1.beta - c2.beta * 250.0).abs() < 1e-10);
    }

    #[test]
    fn intercept_only_model_has_no_f() {
        let data = dataset(&[("y", vec![1.0, 2.0, 3.0, 4.0])]);
        let report = ols_fit(&[], "y", &data).unwrap();
        assert_eq!(report.df_model, 0);
        assert_eq!(report.f_model, None);
        assert!(report.r2.abs() < 1e-12);
    }

    #[test]
    fn constant_response_errors() {
        let data = dataset(&[("x", vec![1.0, 2.0, 3.0]), ("y", vec![2.0, 2.0, 2.0])]);
        assert!(matches!(
            ols_fit(&[Term::var("x")], "y", &data),
            Err(StatError::ConstantInput(_))
        ));
    }

    #[test]
    fn collinear_design_names_columns() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let x2: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let data = dataset(&[("a", x), ("b", x2), ("y", (0..8).map(|i| i as f64 * 0.5).collect())]);
        let err = ols_fit(&[Term::var("a"), Term::var("b")], "y", &data).unwrap_err();
        assert!(matches!(err, StatError::RankDeficient(_)));
    }
}
