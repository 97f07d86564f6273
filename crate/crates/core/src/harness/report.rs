use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ExperimentKind};
use crate::cohort::Race;
use crate::error::{Error, Result};
use crate::learners::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub group: Race,
    pub demographic_parity: Option<f64>,
    pub tpr_diff: Option<f64>,
    pub fpr_diff: Option<f64>,
}

/// Metrics of one model trained under one condition for one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub condition: String,
    /// Position on the chart's x axis (ratio or training size).
    pub x: f64,
    /// Training variant, e.g. "full" or "adherent_only"; empty for a ratio sweep.
    pub variant: String,
    pub model: ModelKind,
    pub seed_index: usize,
    pub train_size: usize,
    pub train_non_adherent: usize,
    pub auroc: f64,
    pub fairness: Vec<GroupMetrics>,
}

impl ExperimentRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        if name == "auroc" {
            return Some(self.auroc);
        }
        let (group, metric) = name.split_once('_')?;
        let g = self.fairness.iter().find(|g| g.group.as_str() == group)?;
        match metric {
            "dp" => g.demographic_parity,
            "tpr" => g.tpr_diff,
            "fpr" => g.fpr_diff,
            _ => None,
        }
    }
}

/// Mean and standard error of the mean over the seeds where the metric is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub condition: String,
    pub x: f64,
    pub variant: String,
    pub model: ModelKind,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub sem: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: ExperimentKind,
    pub config: ExperimentConfig,
    /// Conditions in run order.
    pub conditions: Vec<String>,
    pub rows: Vec<ExperimentRow>,
    pub summary: Vec<MetricSummary>,
}

pub fn metric_names(groups: &[Race]) -> Vec<String> {
    let mut names = vec!["auroc".to_string()];
    for g in groups {
        for m in ["dp", "tpr", "fpr"] {
            names.push(format!("{g}_{m}"));
        }
    }
    names
}

/// Sample mean and SD / sqrt(n); the SEM of a single value is zero.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl ExperimentReport {
    pub(crate) fn new(
        experiment: ExperimentKind,
        config: ExperimentConfig,
        conditions: Vec<String>,
        rows: Vec<ExperimentRow>,
    ) -> Self {
        let mut summary = Vec::new();
        let metrics = metric_names(&config.fairness_groups);
        for cond in &conditions {
            for &model in &config.models {
                let sel: Vec<&ExperimentRow> = rows
                    .iter()
                    .filter(|r| &r.condition == cond && r.model == model)
                    .collect();
                let Some(first) = sel.first() else { continue };
                for metric in &metrics {
                    let vals: Vec<f64> = sel.iter().filter_map(|r| r.metric(metric)).collect();
                    if vals.is_empty() {
                        continue;
                    }
                    let (mean, sem) = mean_sem(&vals);
                    summary.push(MetricSummary {
                        condition: cond.clone(),
                        x: first.x,
                        variant: first.variant.clone(),
                        model,
                        metric: metric.clone(),
                        n: vals.len(),
                        mean,
                        sem,
                    });
                }
            }
        }
        Self {
            experiment,
            config,
            conditions,
            rows,
            summary,
        }
    }

    pub fn summary_for(&self, condition: &str, model: ModelKind, metric: &str) -> Option<&MetricSummary> {
        self.summary
            .iter()
            .find(|s| s.condition == condition && s.model == model && s.metric == metric)
    }

    /// Per-seed values of `metric` for one condition, in seed order.
    pub fn values(&self, condition: &str, model: ModelKind, metric: &str) -> Vec<Option<f64>> {
        let mut rows: Vec<&ExperimentRow> = self
            .rows
            .iter()
            .filter(|r| r.condition == condition && r.model == model)
            .collect();
        rows.sort_by_key(|r| r.seed_index);
        rows.iter().map(|r| r.metric(metric)).collect()
    }

    /// Per-seed rows as comma-separated text.
    pub fn rows_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let metrics = metric_names(&self.config.fairness_groups);
        let mut header = vec![
            "condition", "x", "variant", "model", "seed_index", "train_size", "train_non_adherent",
        ];
        header.extend(metrics.iter().map(String::as_str));
        wtr.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.condition.clone(),
                r.x.to_string(),
                r.variant.clone(),
                r.model.as_str().to_string(),
                r.seed_index.to_string(),
                r.train_size.to_string(),
                r.train_non_adherent.to_string(),
            ];
            rec.extend(metrics.iter().map(|m| r.metric(m).map_or(String::new(), |v| v.to_string())));
            wtr.write_record(&rec)?;
        }
        finish(wtr)
    }

    /// Per-condition mean and SEM as comma-separated text.
    pub fn summary_csv(&self) -> Result<String> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for s in &self.summary {
            wtr.serialize(s)?;
        }
        finish(wtr)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Mean +- SEM chart: one panel per metric, one series per model and
    /// training variant.
    pub fn to_svg(&self) -> String {
        let metrics = metric_names(&self.config.fairness_groups);
        let (pw, ph, margin) = (360.0, 240.0, 48.0);
        let cols = 2usize;
        let rows = metrics.len().div_ceil(cols);
        let (w, h) = (cols as f64 * pw, rows as f64 * ph);
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
        for (k, metric) in metrics.iter().enumerate() {
            let ox = (k % cols) as f64 * pw;
            let oy = (k / cols) as f64 * ph;
            let pts: Vec<&MetricSummary> = self.summary.iter().filter(|s| &s.metric == metric).collect();
            let _ = writeln!(svg, r#"<g class="panel" data-metric="{metric}" transform="translate({ox},{oy})">"#);
            let _ = writeln!(svg, r#"<text x="{}" y="16" text-anchor="middle">{metric}</text>"#, pw / 2.0);
            if pts.is_empty() {
                svg.push_str("</g>\n");
                continue;
            }
            let (xmin, xmax) = bounds(pts.iter().map(|s| s.x));
            let (ymin, ymax) = bounds(pts.iter().flat_map(|s| [s.mean - s.sem, s.mean + s.sem]));
            let sx = |x: f64| margin + (x - xmin) / (xmax - xmin) * (pw - 1.5 * margin);
            let sy = |y: f64| ph - margin + (ymin - y) / (ymax - ymin) * (ph - 1.7 * margin);
            let _ = writeln!(
                svg,
                "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#444\"/><line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"#444\"/>",
                m = margin,
                b = ph - margin,
                r = pw - margin / 2.0,
                t = 0.7 * margin
            );
            let _ = writeln!(svg, r#"<text x="4" y="{}">{ymax:.3}</text><text x="4" y="{}">{ymin:.3}</text>"#, sy(ymax) + 4.0, sy(ymin));
            let _ = writeln!(svg, r#"<text x="{}" y="{}">{xmin}</text><text x="{}" y="{}" text-anchor="end">{xmax}</text>"#, sx(xmin), ph - margin + 14.0, sx(xmax), ph - margin + 14.0);
            let mut series: Vec<(ModelKind, String)> = Vec::new();
            for s in &pts {
                if !series.contains(&(s.model, s.variant.clone())) {
                    series.push((s.model, s.variant.clone()));
                }
            }
            for (i, (model, variant)) in series.iter().enumerate() {
                let color = palette[i % palette.len()];
                let label = if variant.is_empty() { model.as_str().to_string() } else { format!("{model}/{variant}", model = model.as_str()) };
                let mut line: Vec<&&MetricSummary> = pts.iter().filter(|s| s.model == *model && &s.variant == variant).collect();
                line.sort_by(|a, b| a.x.total_cmp(&b.x));
                let _ = writeln!(svg, r#"<g class="series" data-model="{}" data-variant="{variant}" stroke="{color}" fill="{color}">"#, model.as_str());
                let path: Vec<String> = line.iter().map(|s| format!("{:.2},{:.2}", sx(s.x), sy(s.mean))).collect();
                let _ = writeln!(svg, r#"<polyline fill="none" points="{}"/>"#, path.join(" "));
                for s in &line {
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/><circle cx="{x:.2}" cy="{:.2}" r="2.5"/>"#,
                        sy(s.mean - s.sem),
                        sy(s.mean + s.sem),
                        sy(s.mean),
                        x = sx(s.x)
                    );
                }
                let _ = writeln!(svg, r#"<text x="{}" y="{}" stroke="none">{label}</text>"#, pw - 1.5 * margin, 30.0 + 12.0 * i as f64);
                svg.push_str("</g>\n");
            }
            svg.push_str("</g>\n");
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn finish(wtr: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = wtr.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// Comma-separated tables.
    Columnar,
    /// Pretty-printed JSON.
    Structured,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "columnar" | "csv" => Ok(ReportFormat::Columnar),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(Error::InvalidInput(format!("unknown format '{other}'"))),
        }
    }
}

pub(crate) fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes `<stem>_rows.csv` and `<stem>_summary.csv` (columnar) or
/// `<stem>.json` (structured), plus `<stem>.svg` when `chart` is set.
/// Returns the written paths.
pub fn emit_report(report: &ExperimentReport, dir: &Path, format: ReportFormat, chart: bool) -> Result<Vec<PathBuf>> {
    let stem = report.experiment.as_str();
    let mut written = Vec::new();
    match format {
        ReportFormat::Columnar => {
            for (suffix, text) in [("rows", report.rows_csv()?), ("summary", report.summary_csv()?)] {
                let path = dir.join(format!("{stem}_{suffix}.csv"));
                write_file(&path, &text)?;
                written.push(path);
            }
        }
        ReportFormat::Structured => {
            let path = dir.join(format!("{stem}.json"));
            write_file(&path, &report.to_json()?)?;
            written.push(path);
        }
    }
    if chart {
        let path = dir.join(format!("{stem}.svg"));
        write_file(&path, &report.to_svg())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sem_is_sd_over_root_n() {
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_sem(&[3.0]), (3.0, 0.0));
    }
}
