use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Binary labels, Gini impurity, leaves store the positive-class frequency.
    Classification,
    /// Real targets, squared-error impurity, leaves store the mean.
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Candidate features per split; `None` means ceil(sqrt(p)).
    pub max_features: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_leaf: 2,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = (f64, usize)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, count } => Some((*value, *count)),
            Node::Split { .. } => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub task: Task,
    pub config: ForestConfig,
    pub seed: u64,
    pub n_features: usize,
    pub features_per_split: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean over trees of the leaf value reached by each row.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols != self.n_features {
            return Err(Error::LengthMismatch {
                left: x.n_cols,
                right: self.n_features,
            });
        }
        let k = self.trees.len() as f64;
        Ok(x.rows()
            .map(|row| self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / k)
            .collect())
    }

    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.predict(x)
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    task: Task,
    min_leaf: usize,
    max_depth: usize,
    mtry: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn leaf(&mut self, rows: &[usize]) -> usize {
        let value = rows.iter().map(|&i| self.y[i]).sum::<f64>() / rows.len() as f64;
        self.nodes.push(Node::Leaf {
            value,
            count: rows.len(),
        });
        self.nodes.len() - 1
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.y[rows[0]];
        rows.iter().all(|&i| self.y[i] == first)
    }

    /// Larger is better: sum over children of (sum of y)^2 / n for regression,
    /// and of (n1^2 + n0^2) / n for Gini; both rank splits as the impurities do.
    fn proxy(&self, n: f64, s: f64) -> f64 {
        match self.task {
            Task::Regression => s * s / n,
            Task::Classification => (s * s + (n - s) * (n - s)) / n,
        }
    }

    fn best_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let p = self.x[0].len();
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(rng);
        let m = rows.len();
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut visited = 0;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(m);
        for f in order {
            if visited == self.mtry {
                break;
            }
            pairs.clear();
            pairs.extend(rows.iter().map(|&i| (self.x[i][f], self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            if pairs[0].0 == pairs[m - 1].0 {
                continue;
            }
            visited += 1;
            let mut left_sum = 0.0;
            for k in 1..m {
                left_sum += pairs[k - 1].1;
                if pairs[k - 1].0 == pairs[k].0 || k < self.min_leaf || m - k < self.min_leaf {
                    continue;
                }
                let score = self.proxy(k as f64, left_sum) + self.proxy((m - k) as f64, total - left_sum);
                if best.is_none_or(|b| score > b.2) {
                    let (lo, hi) = (pairs[k - 1].0, pairs[k].0);
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((f, threshold, score));
                }
            }
        }
        best.map(|(f, t, _)| (f, t))
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        if rows.len() < 2 * self.min_leaf || depth >= self.max_depth || self.is_pure(&rows) {
            return self.leaf(&rows);
        }
        let Some((feature, threshold)) = self.best_split(&rows, rng) else {
            return self.leaf(&rows);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0, count: 0 });
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn fit(x: &FeatureMatrix, y: &[f64], task: Task, config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if x.n_rows != y.len() {
        return Err(Error::LengthMismatch {
            left: x.n_rows,
            right: y.len(),
        });
    }
    if x.n_rows == 0 || x.n_cols == 0 {
        return Err(Error::InvalidInput("forest needs at least one row and one feature".into()));
    }
    if config.n_trees == 0 || config.min_leaf == 0 {
        return Err(Error::Config("n_trees and min_leaf must be positive".into()));
    }
    let p = x.n_cols;
    let mtry = config
        .max_features
        .unwrap_or_else(|| (p as f64).sqrt().ceil() as usize)
        .clamp(1, p);

    // canonical order: rows sorted by (features, target) so input order is irrelevant
    let mut idx: Vec<usize> = (0..x.n_rows).collect();
    idx.sort_by(|&a, &b| lexicographic(x.row(a), x.row(b)).then(y[a].total_cmp(&y[b])));
    let xs: Vec<Vec<f64>> = idx.iter().map(|&i| x.row(i).to_vec()).collect();
    let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let n = xs.len();

    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut b = Builder {
                x: &xs,
                y: &ys,
                task,
                min_leaf: config.min_leaf,
                max_depth: config.max_depth.unwrap_or(usize::MAX),
                mtry,
                nodes: Vec::new(),
            };
            b.grow(rows, 0, &mut rng);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(ForestModel {
        task,
        config: *config,
        seed,
        n_features: p,
        features_per_split: mtry,
        trees,
    })
}

/// Bagged Gini trees on 0/1 labels. Each tree `t` uses its own stream seeded
/// with `seed + t`, so results do not depend on scheduling.
pub fn fit_forest(x: &FeatureMatrix, y: &[u8], config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if y.iter().any(|&v| v > 1) {
        return Err(Error::InvalidInput("forest labels must be 0/1".into()));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    fit(x, &yf, Task::Classification, config, seed)
}

/// Regression variant: squared-error splits, leaves hold the mean target.
pub fn fit_forest_regressor(x: &FeatureMatrix, y: &[f64], config: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("regression target must be finite".into()));
    }
    fit(x, y, Task::Regression, config, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::auroc;

    fn toy() -> (FeatureMatrix, Vec<u8>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let a = (i % 10) as f64;
            let b = (i / 10) as f64;
            rows.push(vec![a, b]);
            y.push(u8::from(a + b > 6.0));
        }
        (FeatureMatrix::unnamed(&rows).unwrap(), y)
    }

    #[test]
    fn separable_toy_set_is_memorized() {
        let (x, y) = toy();
        let f = fit_forest(&x, &y, &ForestConfig::default(), 1).unwrap();
        let s = f.predict_proba(&x).unwrap();
        assert_eq!(auroc(&s, &y).unwrap(), 1.0);
    }

    #[test]
    fn constant_features_give_one_score() {
        let rows = vec![vec![1.0, 2.0]; 50];
        let y: Vec<u8> = (0..50).map(|i| u8::from(i % 5 == 0)).collect();
        let x = FeatureMatrix::unnamed(&rows).unwrap();
        let f = fit_forest(&x, &y, &ForestConfig::default(), 3).unwrap();
        let s = f.predict_proba(&x).unwrap();
        assert!(s.iter().all(|v| *v == s[0]));
        assert!((s[0] - 0.2).abs() < 0.05);
        assert!(f.trees.iter().all(|t| t.nodes.len() == 1));
    }

    #[test]
    fn leaves_respect_min_leaf() {
        let (x, y) = toy();
        let f = fit_forest(&x, &y, &ForestConfig { min_leaf: 3, ..Default::default() }, 5).unwrap();
        for t in &f.trees {
            assert!(t.leaves().all(|(_, c)| c >= 3));
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = FeatureMatrix::unnamed(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(fit_forest(&x, &[1, 1], &ForestConfig::default(), 0), Err(Error::SingleClass)));
    }

    #[test]
    fn fixed_seed_is_reproducible_and_order_free() {
        let (x, y) = toy();
        let cfg = ForestConfig {
            n_trees: 20,
            ..Default::default()
        };
        let a = fit_forest(&x, &y, &cfg, 9).unwrap();
        let b = fit_forest(&x, &y, &cfg, 9).unwrap();
        assert_eq!(a, b);
        let perm: Vec<usize> = (0..x.n_rows).rev().collect();
        let yp: Vec<u8> = perm.iter().map(|&i| y[i]).collect();
        let c = fit_forest(&x.select_rows(&perm), &yp, &cfg, 9).unwrap();
        assert_eq!(a.trees, c.trees);
    }

    #[test]
    fn regression_forest_tracks_step_function() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..200).map(|i| if i < 100 { 1.0 } else { 5.0 }).collect();
        let x = FeatureMatrix::unnamed(&rows).unwrap();
        let f = fit_forest_regressor(&x, &y, &ForestConfig::default(), 2).unwrap();
        let p = f.predict(&x).unwrap();
        assert!((p[10] - 1.0).abs() < 1e-9 && (p[190] - 5.0).abs() < 1e-9);
    }

    #[test]
    fn persisted_model_reloads_exactly() {
        let (x, y) = toy();
        let f = fit_forest(&x, &y, &ForestConfig { n_trees: 5, ..Default::default() }, 4).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        let g: ForestModel = serde_json::from_str(&json).unwrap();
        assert_eq!(f, g);
        assert_eq!(f.predict(&x).unwrap(), g.predict(&x).unwrap());
    }
}
