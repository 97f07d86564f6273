use serde::{Deserialize, Serialize};

use crate::cohort::CohortRecord;
use crate::error::{Error, Result};

/// Categorical inputs; each becomes indicator columns for every observed
/// level except the first (the reference).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalField {
    Sex,
    Race,
    Marital,
    Medication,
}

impl CategoricalField {
    pub fn name(self) -> &'static str {
        match self {
            CategoricalField::Sex => "sex",
            CategoricalField::Race => "race",
            CategoricalField::Marital => "marital",
            CategoricalField::Medication => "medication",
        }
    }

    fn levels(self) -> Vec<&'static str> {
        use crate::cohort::{Marital, Medication, Race, Sex};
        match self {
            CategoricalField::Sex => Sex::ALL.iter().map(|v| v.as_str()).collect(),
            CategoricalField::Race => Race::ALL.iter().map(|v| v.as_str()).collect(),
            CategoricalField::Marital => Marital::ALL.iter().map(|v| v.as_str()).collect(),
            CategoricalField::Medication => Medication::ALL.iter().map(|v| v.as_str()).collect(),
        }
    }

    fn value(self, r: &CohortRecord) -> Result<&'static str> {
        Ok(match self {
            CategoricalField::Sex => r.sex.as_str(),
            CategoricalField::Race => r.race.as_str(),
            CategoricalField::Marital => r.marital.as_str(),
            CategoricalField::Medication => r
                .primary_medication()
                .ok_or_else(|| Error::MissingValue {
                    pair_id: r.pair_id(),
                    what: "canonical medication",
                })?
                .as_str(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousField {
    Age,
    EciCount,
    CciCount,
    HtnDuration,
    PriorVisits,
    FirstSystolic,
    FirstDiastolic,
}

impl ContinuousField {
    pub const ALL: [ContinuousField; 7] = [
        ContinuousField::Age,
        ContinuousField::EciCount,
        ContinuousField::CciCount,
        ContinuousField::HtnDuration,
        ContinuousField::PriorVisits,
        ContinuousField::FirstSystolic,
        ContinuousField::FirstDiastolic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ContinuousField::Age => "age",
            ContinuousField::EciCount => "eci_count",
            ContinuousField::CciCount => "cci_count",
            ContinuousField::HtnDuration => "htn_duration",
            ContinuousField::PriorVisits => "prior_visits",
            ContinuousField::FirstSystolic => "first_systolic",
            ContinuousField::FirstDiastolic => "first_diastolic",
        }
    }

    fn value(self, r: &CohortRecord) -> Result<f64> {
        let missing = |what| Error::MissingValue {
            pair_id: r.pair_id(),
            what,
        };
        Ok(match self {
            ContinuousField::Age => r.age,
            ContinuousField::EciCount => f64::from(r.eci_count),
            ContinuousField::CciCount => f64::from(r.cci_count),
            ContinuousField::HtnDuration => r.htn_duration_years,
            ContinuousField::PriorVisits => f64::from(r.primary_visits_prior_year),
            ContinuousField::FirstSystolic => r.pair.first.systolic.ok_or_else(|| missing("first-visit systolic"))?,
            ContinuousField::FirstDiastolic => {
                r.pair.first.diastolic.ok_or_else(|| missing("first-visit diastolic"))?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoding {
    pub field: CategoricalField,
    /// Observed levels in canonical order; the first is the reference.
    pub levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousEncoding {
    pub field: ContinuousField,
    pub mean: f64,
    pub sd: f64,
}

/// Everything needed to encode new records exactly as the training records.
/// The interval between visits is never encoded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingMetadata {
    pub categorical: Vec<CategoricalEncoding>,
    pub continuous: Vec<ContinuousEncoding>,
}

impl EncodingMetadata {
    /// Fits levels and standardization on `records`. Medication is the
    /// treatment in causal analyses and can be left out.
    pub fn fit(records: &[CohortRecord], include_medication: bool) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidInput("cannot fit encoding on zero records".into()));
        }
        let mut fields = vec![CategoricalField::Sex, CategoricalField::Race, CategoricalField::Marital];
        if include_medication {
            fields.push(CategoricalField::Medication);
        }
        let mut categorical = Vec::new();
        for field in fields {
            let mut seen = Vec::new();
            for r in records {
                let v = field.value(r)?;
                if !seen.contains(&v) {
                    seen.push(v);
                }
            }
            let levels = field
                .levels()
                .into_iter()
                .filter(|l| seen.contains(l))
                .map(String::from)
                .collect();
            categorical.push(CategoricalEncoding { field, levels });
        }
        let mut continuous = Vec::new();
        for field in ContinuousField::ALL {
            let vals = records.iter().map(|r| field.value(r)).collect::<Result<Vec<_>>>()?;
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 {
                vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
            continuous.push(ContinuousEncoding { field, mean, sd });
        }
        Ok(Self {
            categorical,
            continuous,
        })
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for c in &self.categorical {
            for level in c.levels.iter().skip(1) {
                names.push(format!("{}={level}", c.field.name()));
            }
        }
        names.extend(self.continuous.iter().map(|c| c.field.name().to_string()));
        names
    }

    fn encode_row(&self, r: &CohortRecord, out: &mut Vec<f64>) -> Result<()> {
        for c in &self.categorical {
            let v = c.field.value(r)?;
            let pos = c.levels.iter().position(|l| l == v).ok_or_else(|| Error::UnseenCategory {
                column: c.field.name().to_string(),
                level: v.to_string(),
            })?;
            out.extend((1..c.levels.len()).map(|k| if k == pos { 1.0 } else { 0.0 }));
        }
        for c in &self.continuous {
            out.push((c.field.value(r)? - c.mean) / c.sd);
        }
        Ok(())
    }
}

/// Dense row-major design matrix with column names and the metadata that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub names: Vec<String>,
    pub data: Vec<f64>,
    pub metadata: Option<EncodingMetadata>,
}

impl FeatureMatrix {
    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = names.len();
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values, expected {n_cols}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("row {i} has a non-finite value")));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            names,
            data,
            metadata: None,
        })
    }

    /// Unnamed columns `x0, x1, ...`.
    pub fn unnamed(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        Self::from_rows((0..p).map(|j| format!("x{j}")).collect(), rows)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            names: self.names.clone(),
            data,
            metadata: self.metadata.clone(),
        }
    }

    /// Appends a named column.
    pub fn with_column(&self, name: &str, values: &[f64]) -> Result<Self> {
        if values.len() != self.n_rows {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: self.n_rows,
            });
        }
        let p = self.n_cols + 1;
        let mut data = Vec::with_capacity(self.n_rows * p);
        for (i, v) in values.iter().enumerate() {
            data.extend_from_slice(self.row(i));
            data.push(*v);
        }
        let mut names = self.names.clone();
        names.push(name.to_string());
        Ok(Self {
            n_rows: self.n_rows,
            n_cols: p,
            names,
            data,
            metadata: None,
        })
    }
}

/// Encodes records. Without metadata, levels and standardization are fitted
/// on `records` (medication included); with metadata, a level not seen when
/// the metadata was fitted is an error.
pub fn encode(records: &[CohortRecord], metadata: Option<&EncodingMetadata>) -> Result<FeatureMatrix> {
    let fitted;
    let meta = match metadata {
        Some(m) => m,
        None => {
            fitted = EncodingMetadata::fit(records, true)?;
            &fitted
        }
    };
    let names = meta.column_names();
    let mut data = Vec::with_capacity(records.len() * names.len());
    for r in records {
        meta.encode_row(r, &mut data)?;
    }
    Ok(FeatureMatrix {
        n_rows: records.len(),
        n_cols: names.len(),
        names,
        data,
        metadata: Some(meta.clone()),
    })
}
