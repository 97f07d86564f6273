//! Odds ratios with Wald/Woolf intervals and Welch's unequal-variance t-test.

use serde::{Deserialize, Serialize};

use super::distributions::{normal_two_sided_p, t_quantile, t_two_sided_p};
use super::logistic::FittedLogistic;
use crate::error::{Error, Result};

/// Normal critical value used for every 95% Wald interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRow {
    pub name: String,
    pub odds_ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
}

impl InferenceRow {
    fn from_log_scale(name: impl Into<String>, estimate: f64, se: f64) -> Self {
        let z = estimate / se;
        Self {
            name: name.into(),
            odds_ratio: estimate.exp(),
            ci_low: (estimate - Z_95 * se).exp(),
            ci_high: (estimate + Z_95 * se).exp(),
            p_value: normal_two_sided_p(z),
        }
    }

    pub fn is_significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Event / non-event counts for one exposure level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub events: u64,
    pub non_events: u64,
}

impl Counts {
    pub fn new(events: u64, non_events: u64) -> Self {
        Self { events, non_events }
    }
}

/// Odds ratio of `exposed` against `reference` with a Woolf interval and
/// two-sided Wald p-value on the log odds ratio.
pub fn odds_ratio_2x2(name: impl Into<String>, exposed: Counts, reference: Counts) -> Result<InferenceRow> {
    let cells = [
        exposed.events,
        exposed.non_events,
        reference.events,
        reference.non_events,
    ];
    if cells.contains(&0) {
        return Err(Error::ZeroCell);
    }
    let [a, b, c, d] = cells.map(|v| v as f64);
    let log_or = (a / b).ln() - (c / d).ln();
    let se = (1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d).sqrt();
    Ok(InferenceRow::from_log_scale(name, log_or, se))
}

/// Wald odds-ratio row for coefficient `index` of a converged fit.
pub fn wald_inference(fit: &FittedLogistic, index: usize, name: impl Into<String>) -> Result<InferenceRow> {
    if !fit.converged {
        return Err(Error::NotConverged {
            iterations: fit.n_iterations,
            gradient_norm: fit.gradient_norm,
        });
    }
    if index >= fit.coefficients.len() {
        return Err(Error::InvalidInput(format!(
            "coefficient index {index} out of range ({} coefficients)",
            fit.coefficients.len()
        )));
    }
    Ok(wald_row(name, fit.coefficients[index], fit.standard_error(index)))
}

/// Wald row from a raw coefficient and standard error.
pub fn wald_row(name: impl Into<String>, coefficient: f64, se: f64) -> InferenceRow {
    InferenceRow::from_log_scale(name, coefficient, se)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    /// mean(a) - mean(b)
    pub mean_difference: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub t_statistic: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub dof: f64,
    pub p_value: f64,
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sample t-test without the equal-variance assumption.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Degenerate(format!(
            "each group needs at least two values (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Degenerate("non-finite value".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let sa = va / a.len() as f64;
    let sb = vb / b.len() as f64;
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(Error::Degenerate("both groups have zero variance".into()));
    }
    let se = se2.sqrt();
    let diff = ma - mb;
    let t = diff / se;
    let dof = se2 * se2
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let crit = t_quantile(0.975, dof);
    Ok(TTestResult {
        mean_difference: diff,
        ci_low: diff - crit * se,
        ci_high: diff + crit * se,
        t_statistic: t,
        dof,
        p_value: t_two_sided_p(t, dof),
    })
}
