//! Logistic regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticOptions {
    /// Convergence threshold on the Euclidean norm of the score vector.
    pub tol: f64,
    pub max_iter: usize,
    /// Any |coefficient| above this is reported as perfect separation.
    pub separation_threshold: f64,
}

impl Default for LogisticOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 100,
            separation_threshold: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLogistic {
    /// Intercept first when the design carries an intercept column.
    pub coefficients: Vec<f64>,
    /// Inverse observed information, row-major `p x p`.
    pub covariance: Vec<Vec<f64>>,
    pub n_iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
}

impl FittedLogistic {
    pub fn standard_error(&self, index: usize) -> f64 {
        self.covariance[index][index].max(0.0).sqrt()
    }

    pub fn linear_predictor(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum()
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        sigmoid(self.linear_predictor(row))
    }
}

#[inline]
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^eta) without overflow.
#[inline]
fn log1p_exp(eta: f64) -> f64 {
    if eta > 35.0 {
        eta
    } else if eta < -35.0 {
        eta.exp()
    } else {
        eta.exp().ln_1p()
    }
}

fn log_likelihood(eta: &DVector<f64>, y: &[f64]) -> f64 {
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| yi * e - log1p_exp(e))
        .sum()
}

struct Newton {
    gradient: DVector<f64>,
    information: DMatrix<f64>,
}

fn newton_terms(x: &DMatrix<f64>, y: &[f64], eta: &DVector<f64>) -> Newton {
    let (n, p) = x.shape();
    let mut gradient = DVector::zeros(p);
    let mut information = DMatrix::zeros(p, p);
    for i in 0..n {
        let mu = sigmoid(eta[i]);
        let w = mu * (1.0 - mu);
        let r = y[i] - mu;
        for j in 0..p {
            let xij = x[(i, j)];
            if xij == 0.0 {
                continue;
            }
            gradient[j] += xij * r;
            let wx = w * xij;
            for k in j..p {
                information[(j, k)] += wx * x[(i, k)];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            information[(j, k)] = information[(k, j)];
        }
    }
    Newton {
        gradient,
        information,
    }
}

fn validate(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    let (n, p) = x.shape();
    if n != y.len() {
        return Err(Error::LengthMismatch {
            left: n,
            right: y.len(),
        });
    }
    if n <= p {
        return Err(Error::InvalidInput(format!(
            "need more rows than columns (n = {n}, p = {p})"
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!("response must be 0/1, got {bad}")));
    }
    for j in 0..p {
        if x.column(j).iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidInput(format!("design column {j} is all zero")));
        }
        if x.column(j).iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("design column {j} is not finite")));
        }
    }
    Ok(())
}

/// Maximum-likelihood logistic regression via Newton/IRLS with step halving.
///
/// `x` must already contain the intercept column if one is wanted. The returned
/// covariance is the inverse observed information at the solution (Wald).
pub fn fit_logistic(
    x: &DMatrix<f64>,
    y: &[f64],
    options: &LogisticOptions,
) -> Result<FittedLogistic> {
    validate(x, y)?;
    let p = x.ncols();
    let mut beta = DVector::<f64>::zeros(p);
    let mut eta = x * &beta;
    let mut ll = log_likelihood(&eta, y);
    let mut iterations = 0;
    let mut converged = false;
    let mut terms = newton_terms(x, y, &eta);

    while iterations < options.max_iter {
        if terms.gradient.norm() < options.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let chol = terms.information.clone().cholesky().ok_or(Error::Singular)?;
        let delta = chol.solve(&terms.gradient);

        let mut step = 1.0;
        let mut candidate = &beta + &delta;
        let mut cand_eta = x * &candidate;
        let mut cand_ll = log_likelihood(&cand_eta, y);
        let mut halvings = 0;
        while cand_ll < ll - 1e-12 * ll.abs().max(1.0) && halvings < 30 {
            step *= 0.5;
            candidate = &beta + &delta * step;
            cand_eta = x * &candidate;
            cand_ll = log_likelihood(&cand_eta, y);
            halvings += 1;
        }
        beta = candidate;
        eta = cand_eta;
        ll = cand_ll;

        if let Some((index, &value)) = beta
            .iter()
            .enumerate()
            .find(|(_, b)| b.abs() > options.separation_threshold)
        {
            return Err(Error::Separation {
                index,
                value,
                coefficients: beta.iter().copied().collect(),
            });
        }
        terms = newton_terms(x, y, &eta);
    }
    if !converged && terms.gradient.norm() < options.tol {
        converged = true;
    }
    if let Some(err) = numerical_separation(x, &beta, &eta) {
        return Err(err);
    }

    let covariance = terms
        .information
        .clone()
        .cholesky()
        .ok_or(Error::Singular)?
        .inverse();
    let covariance = symmetrize(&covariance);

    Ok(FittedLogistic {
        coefficients: beta.iter().copied().collect(),
        covariance,
        n_iterations: iterations,
        converged,
        log_likelihood: ll,
        gradient_norm: terms.gradient.norm(),
    })
}

/// Fitted probability this close to 0 or 1 means the likelihood is still
/// increasing along some direction: the gradient vanishes only because the
/// predictions have saturated.
const SATURATION_ETA: f64 = 20.0;

fn numerical_separation(x: &DMatrix<f64>, beta: &DVector<f64>, eta: &DVector<f64>) -> Option<Error> {
    if eta.iter().all(|e| e.abs() <= SATURATION_ETA) {
        return None;
    }
    // blame the coefficient with the largest contribution to any predictor
    let (index, _) = (0..beta.len())
        .map(|j| {
            let reach = x.column(j).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            (j, (beta[j] * reach).abs())
        })
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    Some(Error::Separation {
        index,
        value: beta[index],
        coefficients: beta.iter().copied().collect(),
    })
}

fn symmetrize(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let p = m.nrows();
    (0..p)
        .map(|i| (0..p).map(|j| 0.5 * (m[(i, j)] + m[(j, i)])).collect())
        .collect()
}

/// Fits with the flagged columns centred and scaled to unit variance, then maps
/// coefficients and covariance back to the original column units.
///
/// Column 0 must be the intercept; it absorbs the centring shifts.
pub fn fit_logistic_standardized(
    x: &DMatrix<f64>,
    y: &[f64],
    standardize: &[bool],
    options: &LogisticOptions,
) -> Result<FittedLogistic> {
    let (n, p) = x.shape();
    if standardize.len() != p {
        return Err(Error::LengthMismatch {
            left: standardize.len(),
            right: p,
        });
    }
    if p == 0 || x.column(0).iter().any(|&v| v != 1.0) {
        return Err(Error::InvalidInput(
            "standardized fit requires an intercept in column 0".into(),
        ));
    }
    let mut means = vec![0.0; p];
    let mut sds = vec![1.0; p];
    let mut z = x.clone();
    for j in 1..p {
        if !standardize[j] {
            continue;
        }
        let col = x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        if var <= 0.0 {
            return Err(Error::InvalidInput(format!("design column {j} is constant")));
        }
        let sd = var.sqrt();
        means[j] = mean;
        sds[j] = sd;
        for i in 0..n {
            z[(i, j)] = (x[(i, j)] - mean) / sd;
        }
    }
    let fit = fit_logistic(&z, y, options)?;

    // beta = A beta'
    let mut a = DMatrix::<f64>::identity(p, p);
    for j in 1..p {
        if standardize[j] {
            a[(j, j)] = 1.0 / sds[j];
            a[(0, j)] = -means[j] / sds[j];
        }
    }
    let beta_std = DVector::from_vec(fit.coefficients.clone());
    let beta = &a * beta_std;
    let cov_std = DMatrix::from_fn(p, p, |i, j| fit.covariance[i][j]);
    let cov = &a * cov_std * a.transpose();
    Ok(FittedLogistic {
        coefficients: beta.iter().copied().collect(),
        covariance: symmetrize(&cov),
        ..fit
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intercept_only(y: &[f64]) -> DMatrix<f64> {
        DMatrix::from_element(y.len(), 1, 1.0)
    }

    #[test]
    fn intercept_only_matches_log_odds() {
        let y: Vec<f64> = (0..40).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let fit = fit_logistic(&intercept_only(&y), &y, &LogisticOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.coefficients[0] - (0.25f64 / 0.75).ln()).abs() < 1e-10);
        // var(beta0) = 1 / (n p (1-p))
        let expected_var = 1.0 / (40.0 * 0.25 * 0.75);
        assert!((fit.covariance[0][0] - expected_var).abs() < 1e-10);
    }

    #[test]
    fn separated_data_is_reported() {
        let xs = [-3.0, -2.0, -1.0, 1.0, 2.0, 3.0];
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let x = DMatrix::from_fn(6, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        match fit_logistic(&x, &y, &LogisticOptions::default()) {
            Err(Error::Separation { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected separation, got {other:?}"),
        }
    }

    #[test]
    fn zero_column_rejected() {
        let y = [0.0, 1.0, 0.0, 1.0];
        let x = DMatrix::from_fn(4, 2, |_, j| if j == 0 { 1.0 } else { 0.0 });
        assert!(matches!(
            fit_logistic(&x, &y, &LogisticOptions::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn collinear_columns_are_singular() {
        let y = [0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
        let v = [0.5, 1.0, 2.0, 1.5, 3.0, 0.1];
        let x = DMatrix::from_fn(6, 3, |i, j| match j {
            0 => 1.0,
            1 => v[i],
            _ => 2.0 * v[i],
        });
        assert!(matches!(
            fit_logistic(&x, &y, &LogisticOptions::default()),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn standardized_fit_matches_raw_fit() {
        let ages = [34.0, 45.0, 51.0, 58.0, 62.0, 66.0, 70.0, 73.0, 79.0, 85.0, 40.0, 55.0];
        let y = [1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let x = DMatrix::from_fn(12, 2, |i, j| if j == 0 { 1.0 } else { ages[i] });
        let opts = LogisticOptions::default();
        let raw = fit_logistic(&x, &y, &opts).unwrap();
        let std = fit_logistic_standardized(&x, &y, &[false, true], &opts).unwrap();
        for j in 0..2 {
            assert!((raw.coefficients[j] - std.coefficients[j]).abs() < 1e-7);
            for k in 0..2 {
                assert!((raw.covariance[j][k] - std.covariance[j][k]).abs() < 1e-7);
            }
        }
    }
}
