//! Columnar (comma-separated, header row) encounter and cohort files, and the
//! note store keyed by note id.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::pairs::PatientInfo;
use super::types::{CohortRecord, Encounter, VisitPair};
use crate::error::{Error, Result};
use crate::extraction::{AdherenceLabel, LabelSource, NonAdherenceType};

/// Free-text notes keyed by note id.
pub type NoteStore = BTreeMap<String, String>;

const LIST_SEP: char = ';';

fn split_list(s: &str) -> Vec<String> {
    s.split(LIST_SEP)
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct EncounterRow {
    patient_id: String,
    date: NaiveDate,
    prescriptions: String,
    systolic: Option<f64>,
    diastolic: Option<f64>,
    note_id: Option<String>,
}

pub fn read_encounters_from<R: Read>(reader: R, notes: Option<&NoteStore>) -> Result<Vec<Encounter>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: EncounterRow = row?;
        let note_id = row.note_id.filter(|s| !s.is_empty());
        let note_text = match (&note_id, notes) {
            (Some(id), Some(store)) => store.get(id).cloned(),
            _ => None,
        };
        let enc = Encounter {
            patient_id: row.patient_id,
            date: row.date,
            prescriptions: split_list(&row.prescriptions),
            note_id,
            note_text,
            systolic: row.systolic,
            diastolic: row.diastolic,
        };
        enc.validate()?;
        out.push(enc);
    }
    Ok(out)
}

pub fn read_encounters(path: &Path, notes: Option<&NoteStore>) -> Result<Vec<Encounter>> {
    read_encounters_from(open(path)?, notes)
}

pub fn write_encounters(path: &Path, encounters: &[Encounter]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(create(path)?);
    for e in encounters {
        wtr.serialize(EncounterRow {
            patient_id: e.patient_id.clone(),
            date: e.date,
            prescriptions: e.prescriptions.join(";"),
            systolic: e.systolic,
            diastolic: e.diastolic,
            note_id: e.note_id.clone(),
        })?;
    }
    wtr.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct PatientRow {
    patient_id: String,
    sex: String,
    birth_date: Option<NaiveDate>,
    race: String,
    marital: String,
    htn_onset: Option<NaiveDate>,
    eci_count: Option<u8>,
    cci_count: Option<u8>,
}

fn known<T: std::str::FromStr>(s: &str) -> Option<T> {
    s.parse().ok()
}

/// Patient attribute file; blank or unrecognised values are read as unknown.
pub fn read_patients(path: &Path) -> Result<Vec<PatientInfo>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: PatientRow = row?;
        out.push(PatientInfo {
            patient_id: row.patient_id,
            sex: known(&row.sex),
            birth_date: row.birth_date,
            race: known(&row.race),
            marital: known(&row.marital),
            htn_onset: row.htn_onset,
            eci_count: row.eci_count,
            cci_count: row.cci_count,
        });
    }
    Ok(out)
}

pub fn read_notes(path: &Path) -> Result<NoteStore> {
    Ok(serde_json::from_reader(open(path)?)?)
}

pub fn write_notes(path: &Path, notes: &NoteStore) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, notes)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct CohortRow {
    pair_id: String,
    patient_id: String,
    first_date: NaiveDate,
    second_date: NaiveDate,
    interval_days: u32,
    prescriptions: String,
    first_systolic: Option<f64>,
    first_diastolic: Option<f64>,
    second_systolic: Option<f64>,
    second_diastolic: Option<f64>,
    note_id: Option<String>,
    sex: String,
    age: f64,
    race: String,
    marital: String,
    eci_count: u8,
    cci_count: u8,
    htn_duration_years: f64,
    primary_visits_prior_year: u32,
    non_adherent: Option<u8>,
    non_adherence_types: Option<String>,
    adherence_source: Option<String>,
    systolic_reduction: Option<f64>,
    diastolic_reduction: Option<f64>,
    outcome_normal_bp: Option<u8>,
}

impl From<&CohortRecord> for CohortRow {
    fn from(r: &CohortRecord) -> Self {
        let p = &r.pair;
        let (non_adherent, types, source) = match &r.adherence {
            Some(a) => (
                Some(u8::from(a.non_adherent)),
                Some(
                    a.types
                        .iter()
                        .map(|t| t.as_str())
                        .collect::<Vec<_>>()
                        .join(";"),
                ),
                Some(a.source.as_str().to_string()),
            ),
            None => (None, None, None),
        };
        CohortRow {
            pair_id: r.pair_id(),
            patient_id: p.patient_id.clone(),
            first_date: p.first.date,
            second_date: p.second.date,
            interval_days: p.interval_days,
            prescriptions: p.first.prescriptions.join(";"),
            first_systolic: p.first.systolic,
            first_diastolic: p.first.diastolic,
            second_systolic: p.second.systolic,
            second_diastolic: p.second.diastolic,
            note_id: p.second.note_id.clone(),
            sex: r.sex.to_string(),
            age: r.age,
            race: r.race.to_string(),
            marital: r.marital.to_string(),
            eci_count: r.eci_count,
            cci_count: r.cci_count,
            htn_duration_years: r.htn_duration_years,
            primary_visits_prior_year: r.primary_visits_prior_year,
            non_adherent,
            non_adherence_types: types,
            adherence_source: source,
            systolic_reduction: r.systolic_reduction,
            diastolic_reduction: r.diastolic_reduction,
            outcome_normal_bp: r.outcome_normal_bp,
        }
    }
}

impl CohortRow {
    fn into_record(self, notes: Option<&NoteStore>) -> Result<CohortRecord> {
        let note_id = self.note_id.filter(|s| !s.is_empty());
        let note_text = match (&note_id, notes) {
            (Some(id), Some(store)) => store.get(id).cloned(),
            _ => None,
        };
        let first = Encounter {
            patient_id: self.patient_id.clone(),
            date: self.first_date,
            prescriptions: split_list(&self.prescriptions),
            note_id: None,
            note_text: None,
            systolic: self.first_systolic,
            diastolic: self.first_diastolic,
        };
        let second = Encounter {
            patient_id: self.patient_id.clone(),
            date: self.second_date,
            prescriptions: Vec::new(),
            note_id,
            note_text,
            systolic: self.second_systolic,
            diastolic: self.second_diastolic,
        };
        let pair = VisitPair::new(first, second)?;
        if pair.interval_days != self.interval_days {
            return Err(Error::InvalidInput(format!(
                "{}: interval_days {} disagrees with dates",
                self.pair_id, self.interval_days
            )));
        }
        let demo = super::types::Demographics {
            sex: self.sex.parse()?,
            age: self.age,
            race: self.race.parse()?,
            marital: self.marital.parse()?,
            eci_count: self.eci_count,
            cci_count: self.cci_count,
            htn_duration_years: self.htn_duration_years,
            primary_visits_prior_year: self.primary_visits_prior_year,
        };
        let mut record = CohortRecord::new(pair, demo)?;
        if let Some(flag) = self.non_adherent {
            let types = self
                .non_adherence_types
                .as_deref()
                .map(split_list)
                .unwrap_or_default()
                .iter()
                .map(|t| t.parse::<NonAdherenceType>())
                .collect::<Result<_>>()?;
            let source: LabelSource = self
                .adherence_source
                .as_deref()
                .unwrap_or("annotation")
                .parse()?;
            record.adherence = Some(AdherenceLabel::new(flag == 1, types, Vec::new(), source)?);
        }
        Ok(record)
    }
}

pub fn write_cohort_to<W: Write>(writer: W, records: &[CohortRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for r in records {
        wtr.serialize(CohortRow::from(r))?;
    }
    wtr.flush().map_err(|e| Error::io("<writer>", e))
}

pub fn write_cohort(path: &Path, records: &[CohortRecord]) -> Result<()> {
    write_cohort_to(create(path)?, records)
}

pub fn read_cohort_from<R: Read>(reader: R, notes: Option<&NoteStore>) -> Result<Vec<CohortRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        let row: CohortRow = row?;
        out.push(row.into_record(notes)?);
    }
    Ok(out)
}

pub fn read_cohort(path: &Path, notes: Option<&NoteStore>) -> Result<Vec<CohortRecord>> {
    read_cohort_from(open(path)?, notes)
}
