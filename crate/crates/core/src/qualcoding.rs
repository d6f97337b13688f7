//! Qualitative codes produced by the coding prompt: cleaning, and
//! clustering of code embeddings to surface candidate themes.
//!
//! Clustering reduces embeddings with PCA and groups them with DBSCAN. A
//! point is a core point when at least `min_pts` points, itself included,
//! lie within `eps`.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diversity::{euclidean, principal_components, DiversityError, EmbeddingProvider};

pub const EXPECTED_CODES: usize = 5;
pub const NOISE: i32 = -1;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Code {
    pub text: String,
    pub source_sentence_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CodeExtraction {
    pub codes: Vec<Code>,
    /// Set when the reply did not hold exactly five codes.
    pub arity_warning: Option<usize>,
}

/// Removes the word `language` and the phrase `use of`, collapsing the
/// leftover whitespace.
pub fn clean_code(raw: &str) -> String {
    let words: Vec<&str> = raw.split_whitespace().collect();
    let mut kept: Vec<&str> = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let w = words[i].trim_matches(|c: char| !c.is_alphanumeric());
        if w.eq_ignore_ascii_case("language") {
            i += 1;
            continue;
        }
        if w.eq_ignore_ascii_case("use")
            && words
                .get(i + 1)
                .is_some_and(|n| n.trim_matches(|c: char| !c.is_alphanumeric()).eq_ignore_ascii_case("of"))
        {
            i += 2;
            continue;
        }
        kept.push(words[i]);
        i += 1;
    }
    kept.join(" ").trim_matches(|c: char| c.is_whitespace() || c == '.' || c == ',').to_string()
}

/// Splits a reply on `;`, cleans each code, drops empties and repeats
/// (case-insensitive).
pub fn extract_codes(llm_reply: &str, sentence_id: &str) -> CodeExtraction {
    let mut seen: Vec<String> = Vec::new();
    let mut codes = Vec::new();
    for part in llm_reply.split(';') {
        let text = clean_code(part);
        if text.is_empty() {
            continue;
        }
        let key = text.to_lowercase();
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        codes.push(Code {
            text,
            source_sentence_id: sentence_id.to_string(),
        });
    }
    let n = codes.len();
    CodeExtraction {
        codes,
        arity_warning: (n != EXPECTED_CODES).then_some(n),
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("need at least {needed} distinct codes, got {found}")]
    TooFewCodes { needed: usize, found: usize },
    #[error(transparent)]
    Provider(#[from] DiversityError),
}

/// Median distance to the `k`-th nearest other point.
pub fn median_knn_distance(points: &[Vec<f64>], k: usize) -> f64 {
    let mut kth: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| euclidean(p, q))
                .collect();
            d.sort_by(f64::total_cmp);
            d.get(k.max(1) - 1).or(d.last()).copied().unwrap_or(0.0)
        })
        .collect();
    kth.sort_by(f64::total_cmp);
    if kth.is_empty() {
        return 0.0;
    }
    let m = kth.len() / 2;
    if kth.len() % 2 == 1 {
        kth[m]
    } else {
        (kth[m - 1] + kth[m]) / 2.0
    }
}

/// DBSCAN labels (`-1` = noise). Clusters are numbered in order of their
/// lowest-index core point.
pub fn dbscan(points: &[Vec<f64>], eps: f64, min_pts: usize) -> Vec<i32> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| euclidean(&points[i], &points[j]) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = next;
        let mut queue: VecDeque<usize> = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if labels[q] == NOISE {
                    labels[q] = next;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Distinct code texts, in first-seen order.
    pub codes: Vec<String>,
    /// How often each distinct code occurred in the input.
    pub counts: Vec<usize>,
    pub labels: Vec<i32>,
    pub eps: f64,
}

impl Clustering {
    pub fn cluster_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l >= 0).map(|&l| l as usize + 1).max().unwrap_or(0)
    }

    /// Up to `top` most frequent codes per cluster (ties by text).
    pub fn top_codes(&self, top: usize) -> BTreeMap<i32, Vec<(String, usize)>> {
        let mut out: BTreeMap<i32, Vec<(String, usize)>> = BTreeMap::new();
        for ((code, count), label) in self.codes.iter().zip(&self.counts).zip(&self.labels) {
            out.entry(*label).or_default().push((code.clone(), *count));
        }
        for v in out.values_mut() {
            v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            v.truncate(top);
        }
        out
    }

    /// `code,cluster` rows.
    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .codes
            .iter()
            .zip(&self.labels)
            .map(|(c, l)| vec![c.clone(), l.to_string()])
            .collect();
        crate::preprocess::render_csv(&["code".into(), "cluster".into()], &rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterOptions {
    pub reduce_dim: usize,
    /// Defaults to the median 4-NN distance of the reduced vectors.
    pub eps: Option<f64>,
    pub min_pts: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            reduce_dim: 5,
            eps: None,
            min_pts: 4,
        }
    }
}

/// Embeds the distinct codes (unit-normalized), projects them on the first
/// `reduce_dim` principal components and runs DBSCAN.
pub fn cluster_codes(
    codes: &[Code],
    provider: &dyn EmbeddingProvider,
    opts: &ClusterOptions,
) -> Result<Clustering, ClusterError> {
    let mut unique: Vec<String> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    for c in codes {
        match index.get(c.text.as_str()) {
            Some(&i) => counts[i] += 1,
            None => {
                index.insert(&c.text, unique.len());
                unique.push(c.text.clone());
                counts.push(1);
            }
        }
    }
    if unique.len() < opts.min_pts {
        return Err(ClusterError::TooFewCodes {
            needed: opts.min_pts,
            found: unique.len(),
        });
    }
    let vectors = provider.embed(&unique)?.normalized()?;
    let reduced = principal_components(vectors.vectors(), opts.reduce_dim.min(vectors.dim()));
    Ok(cluster_points(unique, counts, &reduced, opts))
}

/// Clustering step on already-reduced points.
pub fn cluster_points(codes: Vec<String>, counts: Vec<usize>, points: &[Vec<f64>], opts: &ClusterOptions) -> Clustering {
    let eps = opts.eps.unwrap_or_else(|| median_knn_distance(points, 4));
    Clustering {
        labels: dbscan(points, eps, opts.min_pts),
        codes,
        counts,
        eps,
    }
}
