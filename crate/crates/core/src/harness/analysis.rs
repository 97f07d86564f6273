use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cohort::{CohortRecord, Marital, Race, Sex};
use crate::error::{Error, Result};
use crate::stats::{
    fit_logistic, fit_logistic_standardized, odds_ratio_2x2, wald_inference, welch_t_test, Counts, InferenceRow,
    LogisticOptions, TTestResult,
};

pub const SIGNIFICANCE: f64 = 0.05;

/// A candidate factor: an indicator for one categorical level, or a continuous covariate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "level", rename_all = "snake_case")]
pub enum Factor {
    Sex(Sex),
    Race(Race),
    Marital(Marital),
    AgePerDecade,
    EciCount,
    CciCount,
    HtnDuration,
    PriorVisits,
    IntervalDays,
}

impl Factor {
    pub fn name(self) -> String {
        match self {
            Factor::Sex(v) => format!("sex={v}"),
            Factor::Race(v) => format!("race={v}"),
            Factor::Marital(v) => format!("marital={v}"),
            Factor::AgePerDecade => "age_per_decade".into(),
            Factor::EciCount => "eci_count".into(),
            Factor::CciCount => "cci_count".into(),
            Factor::HtnDuration => "htn_duration_years".into(),
            Factor::PriorVisits => "prior_visits".into(),
            Factor::IntervalDays => "interval_days".into(),
        }
    }

    fn is_continuous(self) -> bool {
        !matches!(self, Factor::Sex(_) | Factor::Race(_) | Factor::Marital(_))
    }

    /// Column value of the factor for one record.
    fn value(self, r: &CohortRecord) -> f64 {
        let ind = |b: bool| f64::from(u8::from(b));
        match self {
            Factor::Sex(v) => ind(r.sex == v),
            Factor::Race(v) => ind(r.race == v),
            Factor::Marital(v) => ind(r.marital == v),
            Factor::AgePerDecade => r.age / 10.0,
            Factor::EciCount => f64::from(r.eci_count),
            Factor::CciCount => f64::from(r.cci_count),
            Factor::HtnDuration => r.htn_duration_years,
            Factor::PriorVisits => f64::from(r.primary_visits_prior_year),
            Factor::IntervalDays => f64::from(r.pair.interval_days),
        }
    }

    /// Records compared in the unadjusted analysis: for a level, that level
    /// and the reference level; for a continuous factor, everyone.
    fn in_comparison(self, r: &CohortRecord) -> bool {
        match self {
            Factor::Sex(_) => true,
            Factor::Race(v) => r.race == v || r.race == Race::Asian,
            Factor::Marital(v) => r.marital == v || r.marital == Marital::Divorced,
            _ => true,
        }
    }
}

/// Reporting order; categorical levels are compared with female, Asian and divorced.
pub fn candidate_factors() -> Vec<Factor> {
    let mut f = vec![Factor::Sex(Sex::Male), Factor::AgePerDecade];
    f.extend([Race::Black, Race::White, Race::Other].map(Factor::Race));
    f.extend([Marital::Married, Marital::Single, Marital::Widowed, Marital::Other].map(Factor::Marital));
    f.extend([
        Factor::EciCount,
        Factor::CciCount,
        Factor::HtnDuration,
        Factor::PriorVisits,
        Factor::IntervalDays,
    ]);
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRow {
    pub factor: Factor,
    pub n: usize,
    pub inference: InferenceRow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub n_records: usize,
    pub n_non_adherent: usize,
    pub bivariate: Vec<FactorRow>,
    /// Factors carried into the adjusted model (bivariate p < 0.05).
    pub included: Vec<Factor>,
    pub multivariate: Vec<FactorRow>,
}

fn label(r: &CohortRecord) -> Result<bool> {
    r.is_non_adherent().ok_or_else(|| Error::MissingLabel { pair_id: r.pair_id() })
}

/// Unadjusted odds ratios per factor, then one adjusted model over the
/// factors significant at 0.05. Categorical rows use 2x2 tables; continuous
/// rows a one-covariate logistic fit. Outcome = non-adherence.
pub fn run_factor_analysis(records: &[CohortRecord]) -> Result<FactorReport> {
    let y: Vec<bool> = records.iter().map(label).collect::<Result<_>>()?;
    let mut bivariate = Vec::new();
    for factor in candidate_factors() {
        let idx: Vec<usize> = (0..records.len()).filter(|&i| factor.in_comparison(&records[i])).collect();
        let inference = if factor.is_continuous() {
            let x = DMatrix::from_fn(idx.len(), 2, |i, j| if j == 0 { 1.0 } else { factor.value(&records[idx[i]]) });
            let yy: Vec<f64> = idx.iter().map(|&i| f64::from(u8::from(y[i]))).collect();
            let fit = fit_logistic(&x, &yy, &LogisticOptions::default())?;
            wald_inference(&fit, 1, factor.name())?
        } else {
            let mut exposed = Counts::new(0, 0);
            let mut reference = Counts::new(0, 0);
            for &i in &idx {
                let c = if factor.value(&records[i]) == 1.0 { &mut exposed } else { &mut reference };
                if y[i] {
                    c.events += 1;
                } else {
                    c.non_events += 1;
                }
            }
            odds_ratio_2x2(factor.name(), exposed, reference)?
        };
        bivariate.push(FactorRow {
            factor,
            n: idx.len(),
            inference,
        });
    }

    let included: Vec<Factor> = bivariate
        .iter()
        .filter(|r| r.inference.is_significant(SIGNIFICANCE))
        .map(|r| r.factor)
        .collect();
    let mut multivariate = Vec::new();
    if !included.is_empty() {
        let p = included.len() + 1;
        let x = DMatrix::from_fn(records.len(), p, |i, j| if j == 0 { 1.0 } else { included[j - 1].value(&records[i]) });
        let standardize: Vec<bool> = std::iter::once(false).chain(included.iter().map(|f| f.is_continuous())).collect();
        let yy: Vec<f64> = y.iter().map(|&b| f64::from(u8::from(b))).collect();
        let fit = fit_logistic_standardized(&x, &yy, &standardize, &LogisticOptions::default())?;
        for (k, f) in included.iter().enumerate() {
            multivariate.push(FactorRow {
                factor: *f,
                n: records.len(),
                inference: wald_inference(&fit, k + 1, f.name())?,
            });
        }
    }
    Ok(FactorReport {
        n_records: records.len(),
        n_non_adherent: y.iter().filter(|&&b| b).count(),
        bivariate,
        included,
        multivariate,
    })
}

fn fmt_row(r: &InferenceRow) -> String {
    format!("{:.2} ({:.2} to {:.2})\t{:.3}", r.odds_ratio, r.ci_low, r.ci_high, r.p_value)
}

impl FactorReport {
    /// Tab-separated "factor, OR (CI), p" sections for unadjusted and adjusted rows.
    pub fn to_table(&self) -> String {
        let mut out = String::from("unadjusted\n");
        for r in &self.bivariate {
            out.push_str(&format!("{}\t{}\n", r.factor.name(), fmt_row(&r.inference)));
        }
        out.push_str("adjusted\n");
        for r in &self.multivariate {
            out.push_str(&format!("{}\t{}\n", r.factor.name(), fmt_row(&r.inference)));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,factor,n,odds_ratio,ci_low,ci_high,p_value\n");
        for (model, rows) in [("unadjusted", &self.bivariate), ("adjusted", &self.multivariate)] {
            for r in rows {
                let i = &r.inference;
                out.push_str(&format!(
                    "{model},{},{},{},{},{},{}\n",
                    r.factor.name(),
                    r.n,
                    i.odds_ratio,
                    i.ci_low,
                    i.ci_high,
                    i.p_value
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRow {
    pub outcome: String,
    /// Non-adherent minus adherent.
    pub test: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub n_adherent: usize,
    pub n_non_adherent: usize,
    pub rows: Vec<OutcomeRow>,
}

/// Welch tests of systolic and diastolic reduction, non-adherent against adherent.
pub fn run_outcome_ttest(records: &[CohortRecord]) -> Result<OutcomeReport> {
    let mut rows = Vec::new();
    let mut counts = (0, 0);
    for (name, get) in [
        ("systolic_reduction", (|r: &CohortRecord| r.systolic_reduction) as fn(&CohortRecord) -> Option<f64>),
        ("diastolic_reduction", |r: &CohortRecord| r.diastolic_reduction),
    ] {
        let (mut na, mut adh) = (Vec::new(), Vec::new());
        for r in records {
            let v = get(r).ok_or_else(|| Error::MissingValue {
                pair_id: r.pair_id(),
                what: "pressure reduction",
            })?;
            if label(r)? {
                na.push(v);
            } else {
                adh.push(v);
            }
        }
        counts = (adh.len(), na.len());
        rows.push(OutcomeRow {
            outcome: name.into(),
            test: welch_t_test(&na, &adh)?,
        });
    }
    Ok(OutcomeReport {
        n_adherent: counts.0,
        n_non_adherent: counts.1,
        rows,
    })
}

/// "-1.96 (-3.47 to -0.46)\t0.011"
pub fn render_ttest(t: &TTestResult) -> String {
    format!("{:.2} ({:.2} to {:.2})\t{:.3}", t.mean_difference, t.ci_low, t.ci_high, t.p_value)
}

impl OutcomeReport {
    pub fn to_table(&self) -> String {
        let mut out = String::from("outcome\tmean difference (95% CI)\tp\n");
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\n", r.outcome, render_ttest(&r.test)));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("outcome,mean_difference,ci_low,ci_high,t_statistic,dof,p_value\n");
        for r in &self.rows {
            let t = &r.test;
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.outcome, t.mean_difference, t.ci_low, t.ci_high, t.t_statistic, t.dof, t.p_value
            ));
        }
        out
    }
}
