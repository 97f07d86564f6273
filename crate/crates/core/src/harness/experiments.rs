use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{derive_seed, ExperimentConfig, ExperimentKind, PreparedSource};
use super::report::{ExperimentReport, ExperimentRow, GroupMetrics};
use crate::cohort::CohortRecord;
use crate::error::{Error, Result};
use crate::fairness::{summarize, GroupOutcomes};
use crate::learners::{auroc, classify, encode, outcome_labels, Classifier, EncodingMetadata, FeatureMatrix};

/// One training recipe evaluated on every seed.
#[derive(Debug, Clone)]
struct Condition {
    name: String,
    /// Model streams are keyed on this, so variants of one size share them.
    seed_key: String,
    x: f64,
    variant: &'static str,
    non_adherent: usize,
    adherent: usize,
}

/// Per-seed shared state: encoded cohort, the adherent test set and shuffled
/// training pools. Every condition of the seed draws prefixes of the same pools.
struct SeedData {
    x: FeatureMatrix,
    y: Vec<u8>,
    cohort: Vec<CohortRecord>,
    test: Vec<usize>,
    adherent_pool: Vec<usize>,
    non_adherent_pool: Vec<usize>,
}

fn prepare_seed(records: &[CohortRecord], cfg: &ExperimentConfig, seed_index: usize, needed: (usize, usize)) -> Result<SeedData> {
    let y = outcome_labels(records)?;
    let mut adherent = Vec::new();
    let mut non_adherent = Vec::new();
    for (i, r) in records.iter().enumerate() {
        match r.is_non_adherent() {
            Some(true) => non_adherent.push(i),
            Some(false) => adherent.push(i),
            None => return Err(Error::MissingLabel { pair_id: r.pair_id() }),
        }
    }
    let (need_na, need_adh) = needed;
    if adherent.len() < cfg.test_size + need_adh {
        return Err(Error::Infeasible(format!(
            "seed {seed_index}: {} adherent records, need {} for testing plus {need_adh} for training",
            adherent.len(),
            cfg.test_size
        )));
    }
    if non_adherent.len() < need_na {
        return Err(Error::Infeasible(format!(
            "seed {seed_index}: {} non-adherent records, need {need_na}",
            non_adherent.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.base_seed, "split", seed_index as u64));
    adherent.shuffle(&mut rng);
    non_adherent.shuffle(&mut rng);
    let test = adherent[..cfg.test_size].to_vec();
    let adherent_pool = adherent[cfg.test_size..].to_vec();
    let meta = EncodingMetadata::fit(records, true)?;
    Ok(SeedData {
        x: encode(records, Some(&meta))?,
        y,
        cohort: records.to_vec(),
        test,
        adherent_pool,
        non_adherent_pool: non_adherent,
    })
}

fn evaluate(cfg: &ExperimentConfig, data: &SeedData, cond: &Condition, seed_index: usize) -> Result<Vec<ExperimentRow>> {
    let mut train: Vec<usize> = data.non_adherent_pool[..cond.non_adherent].to_vec();
    train.extend_from_slice(&data.adherent_pool[..cond.adherent]);
    let x_train = data.x.select_rows(&train);
    let y_train: Vec<u8> = train.iter().map(|&i| data.y[i]).collect();
    let x_test = data.x.select_rows(&data.test);
    let y_test: Vec<u8> = data.test.iter().map(|&i| data.y[i]).collect();
    let races: Vec<_> = data.test.iter().map(|&i| data.cohort[i].race).collect();

    let mut rows = Vec::new();
    for &model in &cfg.models {
        let seed = derive_seed(cfg.base_seed, &format!("{}/{}", cond.seed_key, model.as_str()), seed_index as u64);
        let clf = Classifier::fit(model, &x_train, &y_train, &cfg.forest, seed)?;
        let scores = clf.predict_proba(&x_test)?;
        let predicted = classify(&scores, cfg.threshold);
        let fairness = cfg
            .fairness_groups
            .iter()
            .map(|&group| {
                let o = GroupOutcomes::one_vs_rest(&races, group, y_test.clone(), predicted.clone())?;
                let s = summarize(&o);
                Ok(GroupMetrics {
                    group,
                    demographic_parity: s.demographic_parity,
                    tpr_diff: s.tpr_diff,
                    fpr_diff: s.fpr_diff,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(ExperimentRow {
            condition: cond.name.clone(),
            x: cond.x,
            variant: cond.variant.to_string(),
            model,
            seed_index,
            train_size: train.len(),
            train_non_adherent: cond.non_adherent,
            auroc: auroc(&scores, &y_test)?,
            fairness,
        });
    }
    Ok(rows)
}

fn run(kind: ExperimentKind, cfg: &ExperimentConfig, conditions: Vec<Condition>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let source = PreparedSource::new(&cfg.source)?;
    let needed = (
        conditions.iter().map(|c| c.non_adherent).max().unwrap_or(0),
        conditions.iter().map(|c| c.adherent).max().unwrap_or(0),
    );
    let per_seed = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|s| {
            let cohort = source.cohort(cfg.base_seed, s)?;
            let data = prepare_seed(&cohort, cfg, s, needed)?;
            let mut rows = Vec::new();
            for c in &conditions {
                rows.extend(evaluate(cfg, &data, c, s)?);
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    let names = conditions.iter().map(|c| c.name.clone()).collect();
    Ok(ExperimentReport::new(kind, cfg.clone(), names, per_seed.into_iter().flatten().collect()))
}

/// Condition label of a ratio-sweep condition.
pub fn ratio_condition(ratio: f64) -> String {
    format!("ratio={ratio}")
}

/// Condition label of an ablation condition; `variant` is "full" or "adherent_only".
pub fn ablation_condition(size: usize, variant: &str) -> String {
    format!("size={size}/{variant}")
}

/// Fixed-size training sets with a varying non-adherent share, evaluated on
/// a per-seed adherent test set shared by all ratios.
pub fn run_vary_ratio(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let conditions = cfg
        .na_ratios
        .iter()
        .map(|&r| {
            let k = (r * cfg.train_size as f64).round() as usize;
            Condition {
                name: ratio_condition(r),
                seed_key: ratio_condition(r),
                x: r,
                variant: "",
                non_adherent: k,
                adherent: cfg.train_size - k,
            }
        })
        .collect();
    run(ExperimentKind::VaryRatio, cfg, conditions)
}

/// For each size, trains on a set with `ablation_ratio` non-adherent records
/// and on its adherent part alone.
pub fn run_ablation(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut conditions = Vec::new();
    for &size in &cfg.full_sizes {
        let k = (cfg.ablation_ratio * size as f64).round() as usize;
        for (variant, na) in [("full", k), ("adherent_only", 0)] {
            conditions.push(Condition {
                name: ablation_condition(size, variant),
                seed_key: format!("size={size}"),
                x: size as f64,
                variant,
                non_adherent: na,
                adherent: size - k,
            });
        }
    }
    run(ExperimentKind::Ablation, cfg, conditions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::CohortSource;
    use crate::learners::{ForestConfig, ModelKind};
    use crate::synthcohort::SynthConfig;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            source: CohortSource::Synthetic {
                config: SynthConfig {
                    n: 900,
                    ..SynthConfig::default()
                },
            },
            train_size: 120,
            na_ratios: vec![0.0, 0.5],
            full_sizes: vec![160],
            n_seeds: 2,
            test_size: 200,
            forest: ForestConfig {
                n_trees: 10,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn rerun_is_identical() {
        let a = run_vary_ratio(&small()).unwrap();
        let b = run_vary_ratio(&small()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 2 * 2 * 2);
        for cond in &a.conditions {
            for m in [ModelKind::Logistic, ModelKind::Forest] {
                assert_eq!(a.summary_for(cond, m, "auroc").unwrap().n, 2);
            }
        }
    }

    #[test]
    fn training_composition_follows_condition() {
        let r = run_ablation(&small()).unwrap();
        for row in &r.rows {
            match row.variant.as_str() {
                "full" => assert_eq!((row.train_size, row.train_non_adherent), (160, 40)),
                _ => assert_eq!((row.train_size, row.train_non_adherent), (120, 0)),
            }
        }
    }

    #[test]
    fn no_non_adherence_makes_ablation_curves_identical() {
        let mut cfg = small();
        cfg.ablation_ratio = 0.0;
        let r = run_ablation(&cfg).unwrap();
        let full = r.values(&ablation_condition(160, "full"), ModelKind::Forest, "auroc");
        let adh = r.values(&ablation_condition(160, "adherent_only"), ModelKind::Forest, "auroc");
        assert_eq!(full, adh);
    }

    #[test]
    fn infeasible_sampling_names_shortfall() {
        let mut cfg = small();
        cfg.test_size = 5000;
        let err = run_vary_ratio(&cfg).unwrap_err();
        assert!(matches!(err, Error::Infeasible(ref m) if m.contains("adherent")));
    }

    #[test]
    fn train_and_test_are_disjoint() {
        let cfg = small();
        let source = PreparedSource::new(&cfg.source).unwrap();
        let cohort = source.cohort(cfg.base_seed, 0).unwrap();
        let d = prepare_seed(&cohort, &cfg, 0, (60, 120)).unwrap();
        let test: std::collections::HashSet<_> = d.test.iter().collect();
        assert!(d.adherent_pool.iter().chain(&d.non_adherent_pool).all(|i| !test.contains(i)));
        assert!(d.test.iter().all(|&i| d.cohort[i].is_non_adherent() == Some(false)));
    }
}
