use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::norm::attribute_standardize;
use crate::scalar::Scalar;
use crate::stats::{descriptive_stats, normality_statistic, pairwise_abs_correlation, StatSummary};

pub const MIN_DIAGNOSTIC_CLASSES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalitySummary {
    pub column: usize,
    pub k2: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub columns: Vec<usize>,
    /// Mean `|corr|` of each column with every other column.
    pub mean_abs: Vec<f64>,
    pub median_mean_abs: f64,
    /// Most correlated pair and its `|corr|`.
    pub max_pair: (usize, usize, f64),
    pub excluded: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeDiagnostics {
    /// Constant columns have no entry.
    pub normality: Vec<NormalitySummary>,
    pub median_p_value: f64,
    pub correlation: CorrelationSummary,
    /// Distribution of `‖a_c‖²` over classes.
    pub squared_norms: StatSummary,
    pub squared_norm_values: Vec<f64>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Centered column scaled to unit Euclidean norm.
fn unit_centered<T: Scalar>(col: &[T]) -> Vec<f64> {
    let mean = col.iter().map(|v| v.as_f64()).sum::<f64>() / col.len() as f64;
    let c: Vec<f64> = col.iter().map(|v| v.as_f64() - mean).collect();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    c.into_iter().map(|v| v / norm).collect()
}

/// Normality of every standardized column, pairwise correlation of the
/// columns and the spread of squared class norms.
pub fn attribute_diagnostics<T: Scalar>(a: &Matrix<T>) -> Result<AttributeDiagnostics> {
    if a.rows() < MIN_DIAGNOSTIC_CLASSES {
        return Err(Error::InsufficientData(format!(
            "attribute diagnostics need at least {MIN_DIAGNOSTIC_CLASSES} classes, got {}",
            a.rows()
        )));
    }
    let standardized = attribute_standardize(a)?;
    let mut normality = Vec::new();
    for j in 0..a.cols() {
        if standardized.degenerate.contains(&j) {
            continue;
        }
        let t = normality_statistic(&standardized.output.col(j))?;
        normality.push(NormalitySummary {
            column: j,
            k2: t.k2,
            p_value: t.p_value,
        });
    }
    if normality.is_empty() {
        return Err(Error::Degenerate("every attribute column is constant".into()));
    }
    let median_p_value = median(&mut normality.iter().map(|n| n.p_value).collect::<Vec<_>>());

    let corr = pairwise_abs_correlation(a)?;
    let unit: Vec<Vec<f64>> = corr.columns.iter().map(|&j| unit_centered(&a.col(j))).collect();
    let mut max_pair = (0, 0, -1.0);
    for (ia, &ca) in corr.columns.iter().enumerate() {
        for (ib, &cb) in corr.columns.iter().enumerate().skip(ia + 1) {
            let r = unit[ia].iter().zip(&unit[ib]).map(|(p, q)| p * q).sum::<f64>().abs().min(1.0);
            if r > max_pair.2 {
                max_pair = (ca, cb, r);
            }
        }
    }
    let correlation = CorrelationSummary {
        median_mean_abs: median(&mut corr.values.clone()),
        columns: corr.columns,
        mean_abs: corr.values,
        max_pair,
        excluded: corr.excluded,
    };

    let squared_norm_values: Vec<f64> = a.row_iter().map(|r| r.iter().map(|v| v.as_f64().powi(2)).sum()).collect();
    Ok(AttributeDiagnostics {
        normality,
        median_p_value,
        correlation,
        squared_norms: descriptive_stats(&squared_norm_values)?,
        squared_norm_values,
    })
}
