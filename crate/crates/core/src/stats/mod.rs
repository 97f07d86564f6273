//! Logistic regression with Wald inference, 2x2 odds ratios and Welch t-tests.

pub mod distributions;
mod inference;
mod logistic;

pub use inference::{
    odds_ratio_2x2, wald_inference, wald_row, welch_t_test, Counts, InferenceRow, TTestResult, Z_95,
};
pub use logistic::{fit_logistic, fit_logistic_standardized, sigmoid, FittedLogistic, LogisticOptions};
