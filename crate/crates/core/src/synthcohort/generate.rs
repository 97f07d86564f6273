use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::config::{Covariates, CovariateSpec, PressurePair, SynthConfig};
use super::notes::{compose, AdherentVariant};
use crate::cohort::{CohortRecord, Demographics, Encounter, Marital, Medication, Race, Sex, VisitPair, CCI_MAX, ECI_MAX};
use crate::error::{Error, Result};
use crate::extraction::{AdherenceLabel, LabelSource, NonAdherenceType};
use crate::stats::sigmoid;

const FIRST_SYSTOLIC_RANGE: (f64, f64) = (80.0, 250.0);
const FIRST_DIASTOLIC_RANGE: (f64, f64) = (40.0, 150.0);
const SECOND_SYSTOLIC_RANGE: (f64, f64) = (40.0, 300.0);
const SECOND_DIASTOLIC_RANGE: (f64, f64) = (31.0, 200.0);

/// Latent quantities behind one synthetic record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub pair_id: String,
    pub medication: Medication,
    /// 1 for amlodipine, 0 for lisinopril, absent for other medications.
    pub treated: Option<u8>,
    pub non_adherent: bool,
    pub kind: Option<NonAdherenceType>,
    /// Share of the drug response actually realised.
    pub multiplier: f64,
    pub effect_systolic: f64,
    pub effect_diastolic: f64,
    /// Reductions under full adherence to each comparator, with this record's noise.
    pub systolic_if_amlodipine: f64,
    pub systolic_if_lisinopril: f64,
    pub diastolic_if_amlodipine: f64,
    pub diastolic_if_lisinopril: f64,
    /// Structural reductions before pressures are clipped to plausible ranges.
    pub systolic_reduction: f64,
    pub diastolic_reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Mean amlodipine-minus-lisinopril effect over comparator records, full adherence.
    pub true_ate_diastolic: f64,
    pub true_ate_systolic: f64,
    pub records: Vec<RecordTruth>,
}

/// (diastolic, systolic) true effects.
pub fn true_ate(truth: &GroundTruth) -> (f64, f64) {
    (truth.true_ate_diastolic, truth.true_ate_systolic)
}

fn ate_over<'a, I: Iterator<Item = &'a RecordTruth>>(records: I) -> (f64, f64) {
    let (mut d, mut s, mut n) = (0.0, 0.0, 0usize);
    for r in records {
        d += r.effect_diastolic;
        s += r.effect_systolic;
        n += 1;
    }
    if n == 0 {
        (0.0, 0.0)
    } else {
        (d / n as f64, s / n as f64)
    }
}

/// Mean effect over comparator records satisfying `keep`, e.g. the adherent ones.
pub fn true_ate_where(truth: &GroundTruth, keep: impl Fn(&RecordTruth) -> bool) -> (f64, f64) {
    ate_over(truth.records.iter().filter(|r| r.treated.is_some() && keep(r)))
}

fn gauss(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("validated sd")
}

/// Negative binomial as a gamma-Poisson mixture with the given mean and SD.
fn neg_binomial<R: Rng>(rng: &mut R, mean: f64, sd: f64) -> u64 {
    let r = mean * mean / (sd * sd - mean);
    let lambda = Gamma::new(r, mean / r).expect("validated").sample(rng);
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

pub(crate) struct Draws {
    pub x: Covariates,
    pub medication: Medication,
    pub treated: Option<u8>,
}

pub(crate) struct Sampler {
    race: WeightedIndex<f64>,
    marital: WeightedIndex<f64>,
    others: Option<(Vec<Medication>, WeightedIndex<f64>)>,
    htn: Gamma<f64>,
}

impl Sampler {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let c: &CovariateSpec = &cfg.covariates;
        let others: Vec<(Medication, f64)> = cfg
            .treatment
            .other_medications
            .iter()
            .filter(|(_, w)| **w > 0.0)
            .map(|(m, w)| (*m, *w))
            .collect();
        let others = if others.is_empty() {
            None
        } else {
            let idx = WeightedIndex::new(others.iter().map(|(_, w)| *w))
                .map_err(|e| Error::Config(e.to_string()))?;
            Some((others.into_iter().map(|(m, _)| m).collect(), idx))
        };
        let shape = (c.htn_duration_mean / c.htn_duration_sd).powi(2);
        let scale = c.htn_duration_sd * c.htn_duration_sd / c.htn_duration_mean;
        Ok(Self {
            race: WeightedIndex::new(c.race_weights).map_err(|e| Error::Config(e.to_string()))?,
            marital: WeightedIndex::new(c.marital_weights).map_err(|e| Error::Config(e.to_string()))?,
            others,
            htn: Gamma::new(shape, scale).map_err(|e| Error::Config(e.to_string()))?,
        })
    }

    /// Covariates, first-visit pressures and prescribed medication.
    pub fn draw<R: Rng>(&self, cfg: &SynthConfig, rng: &mut R) -> Draws {
        let c = &cfg.covariates;
        let sex = if rng.random::<f64>() < c.p_male { Sex::Male } else { Sex::Female };
        let age = gauss(c.age_mean, c.age_sd).sample(rng).clamp(c.age_min, c.age_max);
        let race = Race::ALL[self.race.sample(rng)];
        let marital = Marital::ALL[self.marital.sample(rng)];
        let eci = neg_binomial(rng, c.eci_mean, c.eci_sd).min(u64::from(ECI_MAX));
        let cci = Binomial::new(eci, c.cci_per_eci)
            .expect("validated")
            .sample(rng)
            .min(u64::from(CCI_MAX));
        let htn = self.htn.sample(rng);
        let visits = neg_binomial(rng, c.prior_visits_mean, c.prior_visits_sd);
        let mut x = Covariates {
            sex,
            age,
            race,
            marital,
            eci_count: eci as u8,
            cci_count: cci as u8,
            htn_duration_years: htn,
            primary_visits_prior_year: visits.min(u64::from(u32::MAX)) as u32,
            first_systolic: 0.0,
            first_diastolic: 0.0,
        };
        let fv = &cfg.first_visit;
        let zs = gauss(0.0, fv.systolic_sd).sample(rng);
        let zd = gauss(0.0, fv.diastolic_sd).sample(rng);
        x.first_systolic = (fv.systolic.eval(&x) + zs).clamp(FIRST_SYSTOLIC_RANGE.0, FIRST_SYSTOLIC_RANGE.1);
        x.first_diastolic =
            (fv.diastolic.eval(&x) + zd).clamp(FIRST_DIASTOLIC_RANGE.0, FIRST_DIASTOLIC_RANGE.1);

        let u_comparator: f64 = rng.random();
        let u_treat: f64 = rng.random();
        let u_other: f64 = rng.random();
        let (medication, treated) = if u_comparator < cfg.treatment.comparator_share {
            if u_treat < sigmoid(cfg.treatment.assignment.eval(&x)) {
                (Medication::Amlodipine, Some(1))
            } else {
                (Medication::Lisinopril, Some(0))
            }
        } else {
            let (meds, _) = self.others.as_ref().expect("validated");
            let weights = &cfg.treatment.other_medications;
            let total: f64 = meds.iter().map(|m| weights[m]).sum();
            let mut acc = 0.0;
            let mut chosen = *meds.last().expect("nonempty");
            for m in meds {
                acc += weights[m] / total;
                if u_other < acc {
                    chosen = *m;
                    break;
                }
            }
            (chosen, None)
        };
        Draws {
            x,
            medication,
            treated,
        }
    }
}

pub(crate) fn non_adherence_logit(cfg: &SynthConfig, x: &Covariates, med: Medication) -> f64 {
    cfg.adherence.eval(x) + cfg.medication_adherence_shift.get(&med).copied().unwrap_or(0.0)
}

fn type_from_uniform(cfg: &SynthConfig, u: f64) -> NonAdherenceType {
    let w: Vec<f64> = NonAdherenceType::ALL.iter().map(|t| cfg.type_mix.get(*t)).collect();
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    for (t, wi) in NonAdherenceType::ALL.iter().zip(&w) {
        acc += wi / total;
        if u < acc {
            return *t;
        }
    }
    *NonAdherenceType::ALL
        .iter()
        .rev()
        .zip(w.iter().rev())
        .find(|(_, wi)| **wi > 0.0)
        .map(|(t, _)| t)
        .expect("positive mix")
}

/// Generates `config.n` records (one visit pair per patient) and the latent
/// truth behind them. Deterministic in `config.seed`.
pub fn generate_cohort(config: &SynthConfig) -> Result<(Vec<CohortRecord>, GroundTruth)> {
    let sampler = Sampler::new(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date");
    let mut records = Vec::with_capacity(config.n);
    let mut truths = Vec::with_capacity(config.n);

    for i in 0..config.n {
        let Draws {
            x,
            medication,
            treated,
        } = sampler.draw(config, &mut rng);

        let u_adh: f64 = rng.random();
        let u_type: f64 = rng.random();
        let u_note: f64 = rng.random();
        let eps_s = gauss(0.0, config.noise_sd.systolic).sample(&mut rng);
        let eps_d = gauss(0.0, config.noise_sd.diastolic).sample(&mut rng);
        let interval = rng.random_range(config.interval_min_days..=config.interval_max_days);
        let offset = rng.random_range(0..730u64);

        let non_adherent = u_adh < sigmoid(non_adherence_logit(config, &x, medication));
        let kind = non_adherent.then(|| type_from_uniform(config, u_type));
        let multiplier = kind.map_or(1.0, |k| config.attenuation.get(k));

        let baseline = PressurePair {
            systolic: config.baseline_systolic.eval(&x),
            diastolic: config.baseline_diastolic.eval(&x),
        };
        let reduction = |med: Medication, m: f64| {
            let r = config.response(med, &x);
            PressurePair {
                systolic: baseline.systolic + m * r.systolic + eps_s,
                diastolic: baseline.diastolic + m * r.diastolic + eps_d,
            }
        };
        let observed = reduction(medication, multiplier);
        let if_aml = reduction(Medication::Amlodipine, 1.0);
        let if_lis = reduction(Medication::Lisinopril, 1.0);
        let effect = config.effect(&x);

        let second_s = (x.first_systolic - observed.systolic)
            .clamp(SECOND_SYSTOLIC_RANGE.0, SECOND_SYSTOLIC_RANGE.1);
        let second_d = (x.first_diastolic - observed.diastolic)
            .clamp(SECOND_DIASTOLIC_RANGE.0, SECOND_DIASTOLIC_RANGE.1);

        let variant = if u_note < config.notes.negated_mention_rate {
            AdherentVariant::NegatedMention
        } else if u_note < config.notes.negated_mention_rate + config.notes.hospital_pause_rate {
            AdherentVariant::HospitalPause
        } else {
            AdherentVariant::Plain
        };
        let note = compose(&mut rng, medication, kind, variant);

        let patient_id = format!("P{i:06}");
        let first_date = start + Days::new(offset);
        let second_date = first_date + Days::new(u64::from(interval));
        let first = Encounter::new(patient_id.clone(), first_date)
            .with_prescriptions([medication.as_str()])
            .with_pressures(x.first_systolic, x.first_diastolic);
        let mut second = Encounter::new(patient_id, second_date)
            .with_note(note.text)
            .with_pressures(second_s, second_d);
        second.note_id = Some(format!("N{i:06}"));
        let pair = VisitPair::new(first, second)?;

        let label = match kind {
            Some(k) => AdherenceLabel::new(
                true,
                BTreeSet::from([k]),
                note.evidence.into_iter().collect(),
                LabelSource::Annotation,
            )?,
            None => AdherenceLabel::adherent(LabelSource::Annotation),
        };
        let demo = Demographics {
            sex: x.sex,
            age: x.age,
            race: x.race,
            marital: x.marital,
            eci_count: x.eci_count,
            cci_count: x.cci_count,
            htn_duration_years: x.htn_duration_years,
            primary_visits_prior_year: x.primary_visits_prior_year,
        };
        let record = CohortRecord::new(pair, demo)?.with_adherence(label);
        truths.push(RecordTruth {
            pair_id: record.pair_id(),
            medication,
            treated,
            non_adherent,
            kind,
            multiplier,
            effect_systolic: effect.systolic,
            effect_diastolic: effect.diastolic,
            systolic_if_amlodipine: if_aml.systolic,
            systolic_if_lisinopril: if_lis.systolic,
            diastolic_if_amlodipine: if_aml.diastolic,
            diastolic_if_lisinopril: if_lis.diastolic,
            systolic_reduction: observed.systolic,
            diastolic_reduction: observed.diastolic,
        });
        records.push(record);
    }

    let (d, s) = ate_over(truths.iter().filter(|t| t.treated.is_some()));
    Ok((
        records,
        GroundTruth {
            true_ate_diastolic: d,
            true_ate_systolic: s,
            records: truths,
        },
    ))
}

/// Non-adherence rate by medication, for reporting.
pub fn non_adherence_by_medication(truth: &GroundTruth) -> BTreeMap<Medication, f64> {
    let mut counts: BTreeMap<Medication, (usize, usize)> = BTreeMap::new();
    for r in &truth.records {
        let e = counts.entry(r.medication).or_default();
        e.0 += usize::from(r.non_adherent);
        e.1 += 1;
    }
    counts
        .into_iter()
        .map(|(m, (k, n))| (m, k as f64 / n as f64))
        .collect()
}
