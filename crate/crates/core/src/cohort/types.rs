use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::AdherenceLabel;

categorical!(Sex { Female => "female", Male => "male" });

categorical!(Race {
    Asian => "asian",
    Black => "black",
    White => "white",
    Other => "other",
});

categorical!(Marital {
    Divorced => "divorced",
    Married => "married",
    Single => "single",
    Widowed => "widowed",
    Other => "other",
});

categorical!(
    /// The canonical hypertension medications a first visit must prescribe.
    Medication {
        Amlodipine => "amlodipine",
        Losartan => "losartan",
        Lisinopril => "lisinopril",
        Benazepril => "benazepril",
        Carvedilol => "carvedilol",
        Hydralazine => "hydralazine",
        Hydrochlorothiazide => "hydrochlorothiazide",
        Clonidine => "clonidine",
        Spironolactone => "spironolactone",
        Metoprolol => "metoprolol",
    }
);

impl Medication {
    /// The five most prescribed medications, used by the outcome cohort.
    pub const TOP_FIVE: [Medication; 5] = [
        Medication::Amlodipine,
        Medication::Lisinopril,
        Medication::Losartan,
        Medication::Hydrochlorothiazide,
        Medication::Metoprolol,
    ];

    /// Exact-token, case-insensitive match against the canonical list.
    pub fn match_token(token: &str) -> Option<Medication> {
        token.parse().ok()
    }

    pub fn is_top_five(self) -> bool {
        Self::TOP_FIVE.contains(&self)
    }
}

/// Lower bound (exclusive) of a plausible pressure reading in mmHg.
pub const PRESSURE_MIN: f64 = 30.0;
/// Upper bound (exclusive) of a plausible pressure reading in mmHg.
pub const PRESSURE_MAX: f64 = 350.0;

fn check_pressure(value: Option<f64>, what: &str) -> Result<()> {
    match value {
        Some(v) if !(v > PRESSURE_MIN && v < PRESSURE_MAX) => Err(Error::InvalidInput(format!(
            "{what} pressure {v} outside ({PRESSURE_MIN}, {PRESSURE_MAX}) mmHg"
        ))),
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encounter {
    pub patient_id: String,
    pub date: NaiveDate,
    pub prescriptions: Vec<String>,
    pub note_id: Option<String>,
    pub note_text: Option<String>,
    pub systolic: Option<f64>,
    pub diastolic: Option<f64>,
}

impl Encounter {
    pub fn new(patient_id: impl Into<String>, date: NaiveDate) -> Self {
        Self {
            patient_id: patient_id.into(),
            date,
            prescriptions: Vec::new(),
            note_id: None,
            note_text: None,
            systolic: None,
            diastolic: None,
        }
    }

    pub fn with_prescriptions<I, S>(mut self, meds: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.prescriptions = meds.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_note(mut self, text: impl Into<String>) -> Self {
        self.note_text = Some(text.into());
        self
    }

    pub fn with_pressures(mut self, systolic: f64, diastolic: f64) -> Self {
        self.systolic = Some(systolic);
        self.diastolic = Some(diastolic);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.patient_id.trim().is_empty() {
            return Err(Error::InvalidInput("empty patient id".into()));
        }
        check_pressure(self.systolic, "systolic")?;
        check_pressure(self.diastolic, "diastolic")
    }

    /// Canonical medications in prescription order.
    pub fn canonical_medications(&self) -> impl Iterator<Item = Medication> + '_ {
        self.prescriptions
            .iter()
            .filter_map(|p| Medication::match_token(p))
    }

    pub fn has_nonempty_note(&self) -> bool {
        self.note_text
            .as_deref()
            .is_some_and(|t| !t.trim().is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitPair {
    pub patient_id: String,
    pub first: Encounter,
    pub second: Encounter,
    pub interval_days: u32,
}

impl VisitPair {
    pub fn new(first: Encounter, second: Encounter) -> Result<Self> {
        if first.patient_id != second.patient_id {
            return Err(Error::InvalidInput(format!(
                "pair mixes patients {} and {}",
                first.patient_id, second.patient_id
            )));
        }
        let days = (second.date - first.date).num_days();
        if days <= 0 {
            return Err(Error::InvalidInput(format!(
                "second visit {} does not follow first visit {}",
                second.date, first.date
            )));
        }
        Ok(Self {
            patient_id: first.patient_id.clone(),
            first,
            second,
            interval_days: days as u32,
        })
    }

    /// Stable identifier `patient:first_date:second_date`.
    pub fn pair_id(&self) -> String {
        format!("{}:{}:{}", self.patient_id, self.first.date, self.second.date)
    }

    /// First canonical medication prescribed at the first visit.
    pub fn primary_medication(&self) -> Option<Medication> {
        self.first.canonical_medications().next()
    }
}

/// Per-patient attributes joined onto visit pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demographics {
    pub sex: Sex,
    pub age: f64,
    pub race: Race,
    pub marital: Marital,
    pub eci_count: u8,
    pub cci_count: u8,
    pub htn_duration_years: f64,
    pub primary_visits_prior_year: u32,
}

pub const ECI_MAX: u8 = 31;
pub const CCI_MAX: u8 = 17;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub pair: VisitPair,
    pub sex: Sex,
    pub age: f64,
    pub race: Race,
    pub marital: Marital,
    pub eci_count: u8,
    pub cci_count: u8,
    pub htn_duration_years: f64,
    pub primary_visits_prior_year: u32,
    pub adherence: Option<AdherenceLabel>,
    pub systolic_reduction: Option<f64>,
    pub diastolic_reduction: Option<f64>,
    pub outcome_normal_bp: Option<u8>,
}

impl CohortRecord {
    /// Joins a pair with patient attributes and derives reductions and the
    /// normal-pressure outcome from the stored readings.
    pub fn new(pair: VisitPair, demo: Demographics) -> Result<Self> {
        if demo.eci_count > ECI_MAX {
            return Err(Error::InvalidInput(format!("eci_count {} > {ECI_MAX}", demo.eci_count)));
        }
        if demo.cci_count > CCI_MAX {
            return Err(Error::InvalidInput(format!("cci_count {} > {CCI_MAX}", demo.cci_count)));
        }
        if !demo.age.is_finite() || demo.age < 0.0 {
            return Err(Error::InvalidInput(format!("invalid age {}", demo.age)));
        }
        pair.first.validate()?;
        pair.second.validate()?;
        let reduction = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| a - b);
        let systolic_reduction = reduction(pair.first.systolic, pair.second.systolic);
        let diastolic_reduction = reduction(pair.first.diastolic, pair.second.diastolic);
        let outcome_normal_bp = pair
            .second
            .systolic
            .zip(pair.second.diastolic)
            .map(|(s, d)| normal_bp(s, d));
        Ok(Self {
            pair,
            sex: demo.sex,
            age: demo.age,
            race: demo.race,
            marital: demo.marital,
            eci_count: demo.eci_count,
            cci_count: demo.cci_count,
            htn_duration_years: demo.htn_duration_years,
            primary_visits_prior_year: demo.primary_visits_prior_year,
            adherence: None,
            systolic_reduction,
            diastolic_reduction,
            outcome_normal_bp,
        })
    }

    pub fn with_adherence(mut self, label: AdherenceLabel) -> Self {
        self.adherence = Some(label);
        self
    }

    pub fn pair_id(&self) -> String {
        self.pair.pair_id()
    }

    pub fn patient_id(&self) -> &str {
        &self.pair.patient_id
    }

    pub fn primary_medication(&self) -> Option<Medication> {
        self.pair.primary_medication()
    }

    pub fn is_non_adherent(&self) -> Option<bool> {
        self.adherence.as_ref().map(|a| a.non_adherent)
    }

    pub fn demographics(&self) -> Demographics {
        Demographics {
            sex: self.sex,
            age: self.age,
            race: self.race,
            marital: self.marital,
            eci_count: self.eci_count,
            cci_count: self.cci_count,
            htn_duration_years: self.htn_duration_years,
            primary_visits_prior_year: self.primary_visits_prior_year,
        }
    }
}

/// Normal blood pressure: systolic < 120 and diastolic < 80 mmHg.
pub fn normal_bp(systolic: f64, diastolic: f64) -> u8 {
    u8::from(systolic < 120.0 && diastolic < 80.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medication_match_is_case_insensitive_exact_token() {
        assert_eq!(Medication::match_token("Lisinopril"), Some(Medication::Lisinopril));
        assert_eq!(Medication::match_token("AMLODIPINE"), Some(Medication::Amlodipine));
        assert_eq!(Medication::match_token("amlodipine 5mg"), None);
        assert_eq!(Medication::match_token("aspirin"), None);
        assert_eq!(Medication::ALL.len(), 10);
    }

    #[test]
    fn out_of_range_pressure_rejected() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        assert!(Encounter::new("p", d).with_pressures(400.0, 80.0).validate().is_err());
        assert!(Encounter::new("p", d).with_pressures(120.0, 30.0).validate().is_err());
        assert!(Encounter::new("p", d).with_pressures(120.0, 80.0).validate().is_ok());
    }

    #[test]
    fn normal_bp_is_strict_conjunction() {
        assert_eq!(normal_bp(118.0, 76.0), 1);
        assert_eq!(normal_bp(120.0, 79.0), 0);
        assert_eq!(normal_bp(110.0, 85.0), 0);
    }
}
