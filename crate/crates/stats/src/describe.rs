//! Descriptive statistics with sample-size-adjusted shape measures.

use serde::{Deserialize, Serialize};

/// Mean, sample standard deviation, adjusted Fisher-Pearson skewness and
/// sample excess kurtosis (normal -> 0). A statistic is `None` when the
/// sample is too small for it (sd needs n >= 2, skewness n >= 3, kurtosis
/// n >= 4) or when the sample is constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub n: usize,
    pub mean: Option<f64>,
    pub sd: Option<f64>,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

pub fn descriptives(values: &[f64]) -> Descriptives {
    let n = values.len();
    if n == 0 {
        return Descriptives { n, mean: None, sd: None, skewness: None, excess_kurtosis: None };
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let central = |k: i32| values.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / nf;
    let m2 = central(2);

    let sd = if n >= 2 {
        Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (nf - 1.0)).sqrt())
    } else {
        None
    };
    let skewness = if n >= 3 && m2 > 0.0 {
        let g1 = central(3) / m2.powf(1.5);
        Some(g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0))
    } else {
        None
    };
    let excess_kurtosis = if n >= 4 && m2 > 0.0 {
        let g2 = central(4) / (m2 * m2) - 3.0;
        Some((nf - 1.0) / ((nf - 2.0) * (nf - 3.0)) * ((nf + 1.0) * g2 + 6.0))
    } else {
        None
    };
    Descriptives { n, mean: Some(mean), sd, skewness, excess_kurtosis }
}
