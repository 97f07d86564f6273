use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::encode::FeatureMatrix;
use crate::error::{Error, Result};
use crate::stats::{fit_logistic, sigmoid, LogisticOptions};

fn design(x: &FeatureMatrix, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.n_rows, keep.len() + 1, |i, j| if j == 0 { 1.0 } else { x.get(i, keep[j - 1]) })
}

/// Columns that vary in the training data; constant columns are absorbed by the intercept.
fn varying_columns(x: &FeatureMatrix) -> Vec<usize> {
    (0..x.n_cols)
        .filter(|&j| {
            let first = x.get(0, j);
            (1..x.n_rows).any(|i| x.get(i, j) != first)
        })
        .collect()
}

fn expand(p: usize, keep: &[usize], beta: &[f64]) -> (f64, Vec<f64>) {
    let mut coefficients = vec![0.0; p];
    for (k, &j) in keep.iter().enumerate() {
        coefficients[j] = beta[k + 1];
    }
    (beta[0], coefficients)
}

fn linear_score(intercept: f64, coefficients: &[f64], row: &[f64]) -> f64 {
    intercept + row.iter().zip(coefficients).map(|(x, b)| x * b).sum::<f64>()
}

/// Ordinary least squares with an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        check_width(x, self.coefficients.len())?;
        Ok(x.rows().map(|r| linear_score(self.intercept, &self.coefficients, r)).collect())
    }
}

fn check_width(x: &FeatureMatrix, p: usize) -> Result<()> {
    if x.n_cols != p {
        return Err(Error::LengthMismatch {
            left: x.n_cols,
            right: p,
        });
    }
    Ok(())
}

/// Minimum-norm least squares through the SVD, so collinear or all-zero
/// columns (common in small subsets of one-hot data) do not fail the fit.
pub fn fit_linear(x: &FeatureMatrix, y: &[f64]) -> Result<LinearModel> {
    if x.n_rows != y.len() {
        return Err(Error::LengthMismatch {
            left: x.n_rows,
            right: y.len(),
        });
    }
    if x.n_rows == 0 {
        return Err(Error::InvalidInput("linear fit needs at least one row".into()));
    }
    let keep = varying_columns(x);
    let a = design(x, &keep);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let beta = svd
        .solve(&b, smax * 1e-12)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let (intercept, coefficients) = expand(x.n_cols, &keep, beta.as_slice());
    Ok(LinearModel {
        intercept,
        coefficients,
    })
}

/// Logistic regression classifier on top of the IRLS fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticClassifier {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    /// False when the data were separable and the last iterate was kept.
    pub converged: bool,
}

impl LogisticClassifier {
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        check_width(x, self.coefficients.len())?;
        Ok(x.rows()
            .map(|r| sigmoid(linear_score(self.intercept, &self.coefficients, r)))
            .collect())
    }
}

/// Constant columns are dropped before fitting. Separable data keep the
/// coefficients reached when divergence was detected, which still rank rows.
pub fn fit_logistic_classifier(x: &FeatureMatrix, y: &[u8]) -> Result<LogisticClassifier> {
    if x.n_rows != y.len() {
        return Err(Error::LengthMismatch {
            left: x.n_rows,
            right: y.len(),
        });
    }
    if y.is_empty() || y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    let keep = varying_columns(x);
    let a = design(x, &keep);
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let (beta, converged) = match fit_logistic(&a, &yf, &LogisticOptions::default()) {
        Ok(fit) => (fit.coefficients, fit.converged),
        Err(Error::Separation { coefficients, .. }) => (coefficients, false),
        Err(e) => return Err(e),
    };
    let (intercept, coefficients) = expand(x.n_cols, &keep, &beta);
    Ok(LogisticClassifier {
        intercept,
        coefficients,
        converged,
    })
}
