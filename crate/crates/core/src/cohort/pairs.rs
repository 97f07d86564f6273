use std::collections::{BTreeMap, HashSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::types::{normal_bp, CohortRecord, Demographics, Encounter, Marital, Race, Sex, VisitPair};
use crate::error::{Error, Result};

/// Groups encounters by patient, sorts each patient's visits by date and
/// pairs every visit with the next one.
///
/// A patient with `k` visits contributes `k - 1` overlapping pairs. Patients
/// are emitted in identifier order.
pub fn build_pairs(encounters: &[Encounter]) -> Result<Vec<VisitPair>> {
    let mut by_patient: BTreeMap<&str, Vec<&Encounter>> = BTreeMap::new();
    for enc in encounters {
        enc.validate()?;
        by_patient.entry(enc.patient_id.as_str()).or_default().push(enc);
    }
    let mut pairs = Vec::new();
    for (patient, mut visits) in by_patient {
        visits.sort_by_key(|e| e.date);
        for w in visits.windows(2) {
            if w[0].date == w[1].date {
                return Err(Error::DuplicateEncounter {
                    patient_id: patient.to_string(),
                    date: w[0].date.to_string(),
                });
            }
            pairs.push(VisitPair::new(w[0].clone(), w[1].clone())?);
        }
    }
    Ok(pairs)
}

/// Inclusion rules applied to visit pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFilter {
    pub min_days: u32,
    pub max_days: u32,
    /// Both visits must carry systolic and diastolic readings.
    pub require_pressures: bool,
    /// The first visit's primary medication must be one of the top five.
    pub top_five_only: bool,
}

impl Default for PairFilter {
    /// One month to one year, inclusive.
    fn default() -> Self {
        Self {
            min_days: 30,
            max_days: 365,
            require_pressures: false,
            top_five_only: false,
        }
    }
}

impl PairFilter {
    /// Blood-pressure outcome cohort: under six months, both readings, top-five medication.
    pub fn outcome() -> Self {
        Self {
            min_days: 30,
            max_days: 182,
            require_pressures: true,
            top_five_only: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_days >= self.max_days {
            return Err(Error::InvalidInput(format!(
                "min_days {} must be below max_days {}",
                self.min_days, self.max_days
            )));
        }
        Ok(())
    }

    pub fn accepts(&self, pair: &VisitPair) -> bool {
        let Some(med) = pair.primary_medication() else {
            return false;
        };
        if !pair.second.has_nonempty_note() {
            return false;
        }
        if pair.interval_days < self.min_days || pair.interval_days > self.max_days {
            return false;
        }
        if self.top_five_only && !med.is_top_five() {
            return false;
        }
        if self.require_pressures {
            let both = |e: &Encounter| e.systolic.is_some() && e.diastolic.is_some();
            if !both(&pair.first) || !both(&pair.second) {
                return false;
            }
        }
        true
    }
}

/// Keeps pairs that satisfy `filter`, preserving order.
pub fn filter_pairs(pairs: Vec<VisitPair>, filter: &PairFilter) -> Result<Vec<VisitPair>> {
    filter.validate()?;
    Ok(pairs.into_iter().filter(|p| filter.accepts(p)).collect())
}

/// Record-level form of [`PairFilter`], used on ingested or synthetic cohorts.
pub fn filter_records(records: Vec<CohortRecord>, filter: &PairFilter) -> Result<Vec<CohortRecord>> {
    filter.validate()?;
    Ok(records.into_iter().filter(|r| filter.accepts(&r.pair)).collect())
}

/// One record per patient: the most recent non-adherent pair if the patient
/// has any, otherwise the most recent pair. Output keeps input order.
pub fn dedup_for_independence(records: Vec<CohortRecord>) -> Result<Vec<CohortRecord>> {
    // (non_adherent, second date, first date) orders candidates; max wins
    let mut best: BTreeMap<&str, (bool, NaiveDate, NaiveDate, usize)> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let label = r.adherence.as_ref().ok_or_else(|| Error::MissingLabel {
            pair_id: r.pair_id(),
        })?;
        let key = (label.non_adherent, r.pair.second.date, r.pair.first.date, i);
        best.entry(r.patient_id())
            .and_modify(|cur| {
                if (key.0, key.1, key.2) > (cur.0, cur.1, cur.2) {
                    *cur = key;
                }
            })
            .or_insert(key);
    }
    let keep: HashSet<usize> = best.values().map(|v| v.3).collect();
    Ok(records
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, r)| r)
        .collect())
}

/// 1 iff the second visit has systolic < 120 and diastolic < 80.
pub fn label_outcome(record: &CohortRecord) -> Result<u8> {
    let second = &record.pair.second;
    match (second.systolic, second.diastolic) {
        (Some(s), Some(d)) => Ok(normal_bp(s, d)),
        _ => Err(Error::MissingValue {
            pair_id: record.pair_id(),
            what: "second-visit pressure",
        }),
    }
}

/// Static patient attributes as ingested; any missing demographic drops the
/// patient's pairs from the cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientInfo {
    pub patient_id: String,
    pub sex: Option<Sex>,
    pub birth_date: Option<NaiveDate>,
    pub race: Option<Race>,
    pub marital: Option<Marital>,
    pub htn_onset: Option<NaiveDate>,
    pub eci_count: Option<u8>,
    pub cci_count: Option<u8>,
}

const DAYS_PER_YEAR: f64 = 365.25;

/// Builds cohort records from raw encounters and patient attributes.
///
/// Age and hypertension duration are taken at the first visit of each pair;
/// prior-year visits count the patient's encounters in the 365 days before it.
pub fn build_cohort(
    encounters: &[Encounter],
    patients: &[PatientInfo],
    filter: &PairFilter,
) -> Result<Vec<CohortRecord>> {
    let pairs = filter_pairs(build_pairs(encounters)?, filter)?;
    let info: BTreeMap<&str, &PatientInfo> =
        patients.iter().map(|p| (p.patient_id.as_str(), p)).collect();
    let mut visit_dates: BTreeMap<&str, Vec<NaiveDate>> = BTreeMap::new();
    for e in encounters {
        visit_dates.entry(e.patient_id.as_str()).or_default().push(e.date);
    }

    let mut records = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let Some(p) = info.get(pair.patient_id.as_str()) else {
            continue;
        };
        let (Some(sex), Some(birth), Some(race), Some(marital), Some(onset), Some(eci), Some(cci)) = (
            p.sex,
            p.birth_date,
            p.race,
            p.marital,
            p.htn_onset,
            p.eci_count,
            p.cci_count,
        ) else {
            continue;
        };
        let at = pair.first.date;
        let prior = visit_dates
            .get(pair.patient_id.as_str())
            .map(|dates| {
                dates
                    .iter()
                    .filter(|&&d| d < at && (at - d).num_days() <= 365)
                    .count() as u32
            })
            .unwrap_or(0);
        let demo = Demographics {
            sex,
            age: (at - birth).num_days() as f64 / DAYS_PER_YEAR,
            race,
            marital,
            eci_count: eci,
            cci_count: cci,
            htn_duration_years: ((at - onset).num_days() as f64 / DAYS_PER_YEAR).max(0.0),
            primary_visits_prior_year: prior,
        };
        records.push(CohortRecord::new(pair, demo)?);
    }
    Ok(records)
}
