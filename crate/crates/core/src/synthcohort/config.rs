use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortRecord, Marital, Medication, Race, Sex};
use crate::error::{Error, Result};
use crate::extraction::NonAdherenceType;

pub const AGE_CENTER: f64 = 62.0;
pub const SYSTOLIC_CENTER: f64 = 140.0;
pub const DIASTOLIC_CENTER: f64 = 85.0;

/// One synthetic patient's covariates, including first-visit pressures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    pub sex: Sex,
    pub age: f64,
    pub race: Race,
    pub marital: Marital,
    pub eci_count: u8,
    pub cci_count: u8,
    pub htn_duration_years: f64,
    pub primary_visits_prior_year: u32,
    pub first_systolic: f64,
    pub first_diastolic: f64,
}

impl Covariates {
    pub fn from_record(r: &CohortRecord) -> Option<Self> {
        Some(Self {
            sex: r.sex,
            age: r.age,
            race: r.race,
            marital: r.marital,
            eci_count: r.eci_count,
            cci_count: r.cci_count,
            htn_duration_years: r.htn_duration_years,
            primary_visits_prior_year: r.primary_visits_prior_year,
            first_systolic: r.pair.first.systolic?,
            first_diastolic: r.pair.first.diastolic?,
        })
    }
}

/// A linear predictor over named covariates. Age and first-visit pressures
/// enter centred and per 10 units (years or mmHg); asian, divorced and female
/// are the reference levels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Coefficients {
    pub intercept: f64,
    pub male: f64,
    pub age_decade: f64,
    pub black: f64,
    pub white: f64,
    pub other_race: f64,
    pub married: f64,
    pub single: f64,
    pub widowed: f64,
    pub other_marital: f64,
    pub eci: f64,
    pub cci: f64,
    pub htn_duration: f64,
    pub prior_visits: f64,
    pub first_systolic: f64,
    pub first_diastolic: f64,
}

impl Coefficients {
    pub fn eval(&self, x: &Covariates) -> f64 {
        let ind = |b: bool| if b { 1.0 } else { 0.0 };
        self.intercept
            + self.male * ind(x.sex == Sex::Male)
            + self.age_decade * (x.age - AGE_CENTER) / 10.0
            + self.black * ind(x.race == Race::Black)
            + self.white * ind(x.race == Race::White)
            + self.other_race * ind(x.race == Race::Other)
            + self.married * ind(x.marital == Marital::Married)
            + self.single * ind(x.marital == Marital::Single)
            + self.widowed * ind(x.marital == Marital::Widowed)
            + self.other_marital * ind(x.marital == Marital::Other)
            + self.eci * f64::from(x.eci_count)
            + self.cci * f64::from(x.cci_count)
            + self.htn_duration * x.htn_duration_years
            + self.prior_visits * f64::from(x.primary_visits_prior_year)
            + self.first_systolic * (x.first_systolic - SYSTOLIC_CENTER) / 10.0
            + self.first_diastolic * (x.first_diastolic - DIASTOLIC_CENTER) / 10.0
    }

    fn values(&self) -> [f64; 16] {
        [
            self.intercept,
            self.male,
            self.age_decade,
            self.black,
            self.white,
            self.other_race,
            self.married,
            self.single,
            self.widowed,
            self.other_marital,
            self.eci,
            self.cci,
            self.htn_duration,
            self.prior_visits,
            self.first_systolic,
            self.first_diastolic,
        ]
    }

    fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    fn uses_first_visit(&self) -> bool {
        self.first_systolic != 0.0 || self.first_diastolic != 0.0
    }
}

/// Marginal distributions of the baseline covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CovariateSpec {
    pub p_male: f64,
    pub age_mean: f64,
    pub age_sd: f64,
    pub age_min: f64,
    pub age_max: f64,
    /// Weights for asian, black, white, other.
    pub race_weights: [f64; 4],
    /// Weights for divorced, married, single, widowed, other.
    pub marital_weights: [f64; 5],
    /// Negative binomial mean and SD of the Elixhauser count.
    pub eci_mean: f64,
    pub eci_sd: f64,
    /// Each Elixhauser category also counts toward Charlson with this probability.
    pub cci_per_eci: f64,
    pub htn_duration_mean: f64,
    pub htn_duration_sd: f64,
    pub prior_visits_mean: f64,
    pub prior_visits_sd: f64,
}

impl Default for CovariateSpec {
    fn default() -> Self {
        Self {
            p_male: 1480.0 / 3623.0,
            age_mean: 62.03,
            age_sd: 14.2,
            age_min: 18.0,
            age_max: 100.0,
            race_weights: [1125.0, 419.0, 1646.0, 433.0],
            marital_weights: [329.0, 1861.0, 878.0, 358.0, 197.0],
            eci_mean: 3.13,
            eci_sd: 2.4,
            cci_per_eci: 0.45,
            htn_duration_mean: 5.94,
            htn_duration_sd: 6.5,
            prior_visits_mean: 15.75,
            prior_visits_sd: 11.6,
        }
    }
}

/// First-visit pressures: linear mean in the baseline covariates plus noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FirstVisitSpec {
    pub systolic: Coefficients,
    pub diastolic: Coefficients,
    pub systolic_sd: f64,
    pub diastolic_sd: f64,
}

impl Default for FirstVisitSpec {
    fn default() -> Self {
        Self {
            systolic: Coefficients {
                intercept: 136.0,
                black: 14.0,
                age_decade: 2.0,
                ..Default::default()
            },
            diastolic: Coefficients {
                intercept: 85.0,
                black: 7.0,
                age_decade: -2.0,
                ..Default::default()
            },
            systolic_sd: 10.0,
            diastolic_sd: 6.0,
        }
    }
}

/// Which medication the first visit prescribes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreatmentSpec {
    /// Share of patients on amlodipine or lisinopril.
    pub comparator_share: f64,
    /// Logit of amlodipine (versus lisinopril) within that share.
    pub assignment: Coefficients,
    /// Relative weights of the remaining medications.
    pub other_medications: BTreeMap<Medication, f64>,
}

impl Default for TreatmentSpec {
    fn default() -> Self {
        Self {
            comparator_share: 0.6,
            assignment: Coefficients {
                black: 0.8,
                age_decade: 0.2,
                first_systolic: 0.2,
                ..Default::default()
            },
            other_medications: BTreeMap::from([
                (Medication::Losartan, 1.0),
                (Medication::Hydrochlorothiazide, 1.0),
                (Medication::Metoprolol, 1.0),
            ]),
        }
    }
}

/// Per-type values, used both for the type mix and the attenuation map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerType {
    pub missed: f64,
    pub different_dose: f64,
    pub different_medication: f64,
    pub different_timing: f64,
}

impl PerType {
    pub fn get(&self, t: NonAdherenceType) -> f64 {
        match t {
            NonAdherenceType::Missed => self.missed,
            NonAdherenceType::DifferentDose => self.different_dose,
            NonAdherenceType::DifferentMedication => self.different_medication,
            NonAdherenceType::DifferentTiming => self.different_timing,
        }
    }

    pub fn uniform(v: f64) -> Self {
        Self {
            missed: v,
            different_dose: v,
            different_medication: v,
            different_timing: v,
        }
    }

    fn values(&self) -> [f64; 4] {
        [
            self.missed,
            self.different_dose,
            self.different_medication,
            self.different_timing,
        ]
    }
}

/// Reduction attributable to each medication under full adherence. The
/// amlodipine response is the lisinopril response plus the treatment effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseSpec {
    pub lisinopril: f64,
    pub losartan: f64,
    pub hydrochlorothiazide: f64,
    pub metoprolol: f64,
    /// Shifts in response shared by every medication.
    pub modifiers: Coefficients,
}

impl Default for ResponseSpec {
    fn default() -> Self {
        Self {
            lisinopril: 0.0,
            losartan: 0.0,
            hydrochlorothiazide: 0.0,
            metoprolol: 0.0,
            modifiers: Coefficients::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressurePair {
    pub systolic: f64,
    pub diastolic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoteSpec {
    /// Adherent notes that mention a trigger phrase under negation.
    pub negated_mention_rate: f64,
    /// Adherent notes describing a restart after a hospital stay.
    pub hospital_pause_rate: f64,
}

impl Default for NoteSpec {
    fn default() -> Self {
        Self {
            negated_mention_rate: 0.05,
            hospital_pause_rate: 0.02,
        }
    }
}

/// Full generator configuration. Every field has a default, so partial
/// config files are accepted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n: usize,
    pub seed: u64,
    pub covariates: CovariateSpec,
    pub first_visit: FirstVisitSpec,
    /// Logit of non-adherence.
    pub adherence: Coefficients,
    /// Added to the non-adherence logit by prescribed medication.
    pub medication_adherence_shift: BTreeMap<Medication, f64>,
    pub type_mix: PerType,
    pub attenuation: PerType,
    pub treatment: TreatmentSpec,
    /// Amlodipine minus lisinopril reduction under full adherence, mmHg.
    pub effect_systolic: f64,
    pub effect_diastolic: f64,
    /// Linear effect modification (intercept must be zero).
    pub effect_heterogeneity_systolic: Coefficients,
    pub effect_heterogeneity_diastolic: Coefficients,
    /// Expected reduction without any drug effect.
    pub baseline_systolic: Coefficients,
    pub baseline_diastolic: Coefficients,
    pub response_systolic: ResponseSpec,
    pub response_diastolic: ResponseSpec,
    pub noise_sd: PressurePair,
    pub interval_min_days: u32,
    pub interval_max_days: u32,
    pub notes: NoteSpec,
}

/// Adherence intercept giving a 21.7% non-adherence rate under the default
/// covariates (see `calibrate_prevalence`).
pub const DEFAULT_ADHERENCE_INTERCEPT: f64 = -1.186913;

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 3623,
            seed: 0,
            covariates: CovariateSpec::default(),
            first_visit: FirstVisitSpec::default(),
            adherence: Coefficients {
                intercept: DEFAULT_ADHERENCE_INTERCEPT,
                male: (0.95f64).ln(),
                age_decade: (0.94f64).ln(),
                black: (1.35f64).ln(),
                white: (0.90f64).ln(),
                other_race: (1.10f64).ln(),
                married: (0.94f64).ln(),
                single: (1.26f64).ln(),
                widowed: (1.03f64).ln(),
                other_marital: (1.28f64).ln(),
                eci: (0.96f64).ln(),
                ..Default::default()
            },
            medication_adherence_shift: BTreeMap::new(),
            type_mix: PerType {
                missed: 0.644,
                different_dose: 0.302,
                different_medication: 0.067,
                different_timing: 0.079,
            },
            attenuation: PerType {
                missed: 0.0,
                different_dose: 0.5,
                different_medication: 0.3,
                different_timing: 0.8,
            },
            treatment: TreatmentSpec::default(),
            effect_systolic: 1.0,
            effect_diastolic: 2.0,
            effect_heterogeneity_systolic: Coefficients::default(),
            effect_heterogeneity_diastolic: Coefficients::default(),
            baseline_systolic: Coefficients {
                intercept: 28.0,
                first_systolic: 3.5,
                ..Default::default()
            },
            baseline_diastolic: Coefficients {
                intercept: 14.0,
                first_diastolic: 3.5,
                ..Default::default()
            },
            response_systolic: ResponseSpec {
                lisinopril: 12.0,
                losartan: 20.0,
                hydrochlorothiazide: 4.0,
                metoprolol: 2.0,
                modifiers: Coefficients {
                    black: 12.0,
                    age_decade: 6.0,
                    eci: -1.5,
                    ..Default::default()
                },
            },
            response_diastolic: ResponseSpec {
                lisinopril: 6.0,
                losartan: 10.0,
                hydrochlorothiazide: 2.0,
                metoprolol: 1.0,
                modifiers: Coefficients {
                    black: 6.0,
                    age_decade: 2.5,
                    ..Default::default()
                },
            },
            noise_sd: PressurePair {
                systolic: 12.0,
                diastolic: 8.0,
            },
            interval_min_days: 30,
            interval_max_days: 182,
            notes: NoteSpec::default(),
        }
    }
}

fn check(ok: bool, what: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Config(what()))
    }
}

fn is_prob(p: f64) -> bool {
    (0.0..=1.0).contains(&p)
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let c = &self.covariates;
        check(self.n > 0, || "n must be positive".into())?;
        check(is_prob(c.p_male), || format!("p_male {} not a probability", c.p_male))?;
        check(c.age_sd > 0.0 && c.age_min < c.age_max, || "invalid age distribution".into())?;
        for (name, w) in [("race", &c.race_weights[..]), ("marital", &c.marital_weights[..])] {
            check(
                w.iter().all(|v| *v >= 0.0 && v.is_finite()) && w.iter().sum::<f64>() > 0.0,
                || format!("{name} weights must be nonnegative with positive sum"),
            )?;
        }
        check(c.eci_mean > 0.0 && c.eci_sd * c.eci_sd > c.eci_mean, || {
            "eci needs variance above its mean (negative binomial)".into()
        })?;
        check(
            c.prior_visits_mean > 0.0 && c.prior_visits_sd * c.prior_visits_sd > c.prior_visits_mean,
            || "prior visits need variance above their mean (negative binomial)".into(),
        )?;
        check(c.htn_duration_mean > 0.0 && c.htn_duration_sd > 0.0, || {
            "hypertension duration needs positive mean and SD".into()
        })?;
        check(is_prob(c.cci_per_eci), || "cci_per_eci not a probability".into())?;
        check(
            self.first_visit.systolic_sd > 0.0 && self.first_visit.diastolic_sd > 0.0,
            || "first-visit SDs must be positive".into(),
        )?;
        check(
            !self.first_visit.systolic.uses_first_visit() && !self.first_visit.diastolic.uses_first_visit(),
            || "first-visit pressures cannot depend on themselves".into(),
        )?;
        check(!self.adherence.uses_first_visit(), || {
            "adherence model cannot use first-visit pressures".into()
        })?;
        let mix = self.type_mix.values();
        check(
            mix.iter().all(|v| *v >= 0.0 && v.is_finite()) && mix.iter().sum::<f64>() > 0.0,
            || "type mix must be nonnegative with positive sum".into(),
        )?;
        check(self.attenuation.values().iter().all(|v| is_prob(*v)), || {
            "attenuation multipliers must lie in [0, 1]".into()
        })?;
        let t = &self.treatment;
        check(is_prob(t.comparator_share), || "comparator_share not a probability".into())?;
        check(
            t.other_medications
                .keys()
                .all(|m| *m != Medication::Amlodipine && *m != Medication::Lisinopril),
            || "other_medications cannot include the comparators".into(),
        )?;
        check(t.other_medications.values().all(|w| *w >= 0.0), || {
            "medication weights must be nonnegative".into()
        })?;
        check(
            t.comparator_share == 1.0 || t.other_medications.values().sum::<f64>() > 0.0,
            || "no medication to prescribe outside the comparators".into(),
        )?;
        for m in t.other_medications.keys() {
            check(
                matches!(
                    m,
                    Medication::Losartan | Medication::Hydrochlorothiazide | Medication::Metoprolol
                ),
                || format!("no response defined for {m}"),
            )?;
        }
        check(
            self.noise_sd.systolic > 0.0 && self.noise_sd.diastolic > 0.0,
            || "noise_sd must be positive".into(),
        )?;
        check(
            self.effect_heterogeneity_systolic.intercept == 0.0
                && self.effect_heterogeneity_diastolic.intercept == 0.0,
            || "effect heterogeneity intercepts must be zero; use effect_* instead".into(),
        )?;
        check(
            self.interval_min_days >= 1 && self.interval_min_days <= self.interval_max_days,
            || "invalid interval range".into(),
        )?;
        check(
            is_prob(self.notes.negated_mention_rate)
                && is_prob(self.notes.hospital_pause_rate)
                && self.notes.negated_mention_rate + self.notes.hospital_pause_rate <= 1.0,
            || "note rates must be probabilities summing to at most 1".into(),
        )?;
        let all_coefs = [
            &self.adherence,
            &self.treatment.assignment,
            &self.first_visit.systolic,
            &self.first_visit.diastolic,
            &self.baseline_systolic,
            &self.baseline_diastolic,
            &self.response_systolic.modifiers,
            &self.response_diastolic.modifiers,
            &self.effect_heterogeneity_systolic,
            &self.effect_heterogeneity_diastolic,
        ];
        check(all_coefs.iter().all(|c| c.is_finite()), || "coefficients must be finite".into())?;
        check(
            self.effect_systolic.is_finite() && self.effect_diastolic.is_finite(),
            || "effects must be finite".into(),
        )
    }

    /// Reads a TOML or JSON config, chosen by file extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Drug response in mmHg under full adherence.
    pub fn response(&self, med: Medication, x: &Covariates) -> PressurePair {
        let pick = |spec: &ResponseSpec, effect: f64, het: &Coefficients| {
            let base = match med {
                Medication::Amlodipine => spec.lisinopril + effect + het.eval(x),
                Medication::Lisinopril => spec.lisinopril,
                Medication::Losartan => spec.losartan,
                Medication::Hydrochlorothiazide => spec.hydrochlorothiazide,
                Medication::Metoprolol => spec.metoprolol,
                _ => 0.0,
            };
            base + spec.modifiers.eval(x)
        };
        PressurePair {
            systolic: pick(
                &self.response_systolic,
                self.effect_systolic,
                &self.effect_heterogeneity_systolic,
            ),
            diastolic: pick(
                &self.response_diastolic,
                self.effect_diastolic,
                &self.effect_heterogeneity_diastolic,
            ),
        }
    }

    /// Amlodipine-minus-lisinopril effect for one patient.
    pub fn effect(&self, x: &Covariates) -> PressurePair {
        PressurePair {
            systolic: self.effect_systolic + self.effect_heterogeneity_systolic.eval(x),
            diastolic: self.effect_diastolic + self.effect_heterogeneity_diastolic.eval(x),
        }
    }
}
