//! Class-based TF-IDF keywords for clustered non-adherence excerpts. Cluster
//! ids come from an external embedding and clustering step; -1 marks noise.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NOISE_CLUSTER: i64 = -1;

const STOP_WORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by",
    "can", "could", "did", "does", "for", "from", "had", "has", "have", "he", "her", "him", "his", "how",
    "into", "is", "it", "its", "of", "on", "or", "our", "she", "should", "so", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "to", "was", "we", "were", "what",
    "when", "which", "who", "will", "with", "would", "you", "your",
];

/// Lowercase alphanumeric runs of length >= 3 that are not stop words.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 3 && !STOP_WORDS.contains(t))
        .map(String::from)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusteredCorpus {
    pub documents: Vec<String>,
    pub clusters: Vec<i64>,
}

impl ClusteredCorpus {
    pub fn new(documents: Vec<String>, clusters: Vec<i64>) -> Result<Self> {
        if documents.len() != clusters.len() {
            return Err(Error::LengthMismatch {
                left: documents.len(),
                right: clusters.len(),
            });
        }
        if clusters.iter().all(|&c| c == NOISE_CLUSTER) {
            return Err(Error::InvalidInput("corpus has no non-noise cluster".into()));
        }
        Ok(Self { documents, clusters })
    }

    /// Rows of `excerpt,cluster_id` with a header.
    pub fn read_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            excerpt: String,
            cluster_id: i64,
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let (mut docs, mut ids) = (Vec::new(), Vec::new());
        for row in rdr.deserialize() {
            let row: Row = row?;
            docs.push(row.excerpt);
            ids.push(row.cluster_id);
        }
        Self::new(docs, ids)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTerm {
    pub term: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTerms {
    pub cluster: i64,
    pub documents: usize,
    /// Percentage of non-noise documents in this cluster.
    pub share: f64,
    pub terms: Vec<ScoredTerm>,
}

/// Scores W(t, c) = tf(t, c) * ln(1 + A / f(t)) where tf counts t in the
/// concatenated documents of c, f(t) counts t over all clusters and A is the
/// mean number of terms per cluster. Returns the top `k` terms per cluster,
/// ties broken alphabetically, clusters in id order.
pub fn ctfidf_top_terms(corpus: &ClusteredCorpus, k: usize) -> Result<Vec<ClusterTerms>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut tf: BTreeMap<i64, BTreeMap<String, usize>> = BTreeMap::new();
    let mut sizes: BTreeMap<i64, usize> = BTreeMap::new();
    for (doc, &c) in corpus.documents.iter().zip(&corpus.clusters) {
        if c == NOISE_CLUSTER {
            continue;
        }
        *sizes.entry(c).or_default() += 1;
        let counts = tf.entry(c).or_default();
        for t in tokenize(doc) {
            *counts.entry(t).or_default() += 1;
        }
    }
    if let Some((c, _)) = tf.iter().find(|(_, counts)| counts.is_empty()) {
        return Err(Error::EmptyGroup(format!("cluster {c} has no terms")));
    }
    let mut total: BTreeMap<&str, usize> = BTreeMap::new();
    for counts in tf.values() {
        for (t, n) in counts {
            *total.entry(t.as_str()).or_default() += n;
        }
    }
    let all_terms: usize = total.values().sum();
    let avg = all_terms as f64 / tf.len() as f64;
    let n_docs: usize = sizes.values().sum();

    Ok(tf
        .iter()
        .map(|(&c, counts)| {
            let mut scored: Vec<ScoredTerm> = counts
                .iter()
                .map(|(t, &n)| ScoredTerm {
                    term: t.clone(),
                    score: n as f64 * (1.0 + avg / total[t.as_str()] as f64).ln(),
                })
                .collect();
            scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
            scored.truncate(k);
            ClusterTerms {
                cluster: c,
                documents: sizes[&c],
                share: 100.0 * sizes[&c] as f64 / n_docs as f64,
                terms: scored,
            }
        })
        .collect())
}

/// One line per cluster: `<id> <share>% <term>, <term>, ...`, with an optional
/// display name per cluster id.
pub fn render_topics(topics: &[ClusterTerms], names: &BTreeMap<i64, String>) -> String {
    let mut out = String::new();
    for t in topics {
        let name = names.get(&t.cluster).cloned().unwrap_or_else(|| format!("cluster {}", t.cluster));
        let terms: Vec<&str> = t.terms.iter().map(|s| s.term.as_str()).collect();
        out.push_str(&format!("{name}\t{:.1}%\t{}\n", t.share, terms.join(", ")));
    }
    out
}

/// Distinct vocabulary of a cluster.
pub fn vocabulary(corpus: &ClusteredCorpus, cluster: i64) -> BTreeSet<String> {
    corpus
        .documents
        .iter()
        .zip(&corpus.clusters)
        .filter(|(_, &c)| c == cluster)
        .flat_map(|(d, _)| tokenize(d))
        .collect()
}
