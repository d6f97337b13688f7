//! Corpus-level bookkeeping: canonical forms, dedup fingerprints, pairwise
//! edit distance, summary statistics and complexity-stratified sampling.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fielddata::DataTable;
use crate::json::{write_json_string, SpecNode};
use crate::levenshtein::levenshtein_chars;
use crate::spec_model::{
    classify_chart_types, classify_complexity, detect_composition, detect_interactions,
    structural_profile, ChartType, ChartTypeSet, ComplexityLevel, InteractionProfile,
    SpecDocument, StructuralProfile, ViewComposition, Vocabulary, EMBEDDED_DATA_KEYS,
};

/// Default cap on canonical string length for edit distance.
pub const DEFAULT_SIZE_CAP: usize = 100_000;
/// Corpora up to this size get all-pairs edit distance.
pub const DEFAULT_PAIR_THRESHOLD: usize = 500;
pub const DEFAULT_SAMPLE_PAIRS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("canonical form of {id:?} has {len} characters, above the cap of {cap}")]
    SizeLimit { id: String, len: usize, cap: usize },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("requested {requested} records from a corpus of {available}")]
    SampleSize { requested: usize, available: usize },
}

/// All derived per-spec facts.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecRecord {
    pub doc: SpecDocument,
    pub profile: StructuralProfile,
    pub composition: ViewComposition,
    pub interactions: InteractionProfile,
    /// `None` when no view declares a mark.
    pub chart_types: Option<ChartTypeSet>,
    pub level: ComplexityLevel,
    pub fingerprint: [u8; 32],
}

impl SpecRecord {
    /// Computes every derived field. Key counts use `vocabulary` when given.
    pub fn analyze(doc: SpecDocument, vocabulary: Option<&Vocabulary>, data: Option<&DataTable>) -> SpecRecord {
        let profile = structural_profile(&doc, vocabulary);
        let level = classify_complexity(&profile);
        SpecRecord {
            composition: detect_composition(&doc, data),
            interactions: detect_interactions(&doc),
            chart_types: classify_chart_types(&doc).ok(),
            fingerprint: spec_fingerprint(&doc),
            profile,
            level,
            doc,
        }
    }
}

fn write_canonical(out: &mut String, node: &SpecNode, blank_values: bool) {
    match node {
        SpecNode::Scalar(_) if blank_values => out.push_str("\"\""),
        SpecNode::Scalar(_) => out.push_str(&node.to_compact()),
        SpecNode::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(out, item, blank_values);
            }
            out.push(']');
        }
        SpecNode::Object(entries) => {
            let mut kept: Vec<&(String, SpecNode)> = entries
                .iter()
                .filter(|(k, _)| !blank_values || !EMBEDDED_DATA_KEYS.contains(&k.as_str()))
                .collect();
            kept.sort_by(|a, b| a.0.cmp(&b.0));
            out.push('{');
            for (i, (k, v)) in kept.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json_string(out, k);
                out.push(':');
                write_canonical(out, v, blank_values);
            }
            out.push('}');
        }
    }
}

/// Distance form: keys sorted, embedded-data subtrees removed, then every
/// scalar replaced by `""`. Single line, no whitespace.
pub fn canonicalize_spec(doc: &SpecDocument) -> String {
    let mut out = String::new();
    write_canonical(&mut out, &doc.root, true);
    out
}

/// Dedup form: keys sorted, values kept, single line.
pub fn dedup_form(doc: &SpecDocument) -> String {
    let mut out = String::new();
    write_canonical(&mut out, &doc.root, false);
    out
}

/// SHA-256 of [`dedup_form`].
pub fn spec_fingerprint(doc: &SpecDocument) -> [u8; 32] {
    let digest = Sha256::digest(dedup_form(doc).as_bytes());
    let mut out = [0u8; 32];
    out.copy_from_slice(&digest);
    out
}

pub fn fingerprint_hex(fp: &[u8; 32]) -> String {
    const HEX: &[u8; 16] = b"0123456789abcdef";
    let mut s = String::with_capacity(64);
    for b in fp {
        s.push(HEX[(b >> 4) as usize] as char);
        s.push(HEX[(b & 15) as usize] as char);
    }
    s
}

/// Keeps the first record of every fingerprint; returns survivor indices.
pub fn dedup_indices(fingerprints: &[[u8; 32]]) -> Vec<usize> {
    let mut seen = BTreeSet::new();
    fingerprints
        .iter()
        .enumerate()
        .filter(|(_, fp)| seen.insert(**fp))
        .map(|(i, _)| i)
        .collect()
}

/// Levenshtein distance between the distance-form canonical strings.
pub fn pairwise_edit_distance(a: &SpecDocument, b: &SpecDocument, cap: usize) -> Result<usize, CorpusError> {
    let ca = canonical_chars(a, cap)?;
    let cb = canonical_chars(b, cap)?;
    Ok(levenshtein_chars(&ca, &cb))
}

fn canonical_chars(doc: &SpecDocument, cap: usize) -> Result<Vec<char>, CorpusError> {
    let chars: Vec<char> = canonicalize_spec(doc).chars().collect();
    if chars.len() > cap {
        return Err(CorpusError::SizeLimit {
            id: doc.id.clone(),
            len: chars.len(),
            cap,
        });
    }
    Ok(chars)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub pair_threshold: usize,
    pub sample_pairs: usize,
    pub seed: u64,
    pub size_cap: usize,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        SummaryOptions {
            pair_threshold: DEFAULT_PAIR_THRESHOLD,
            sample_pairs: DEFAULT_SAMPLE_PAIRS,
            seed: 0,
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditDistanceStat {
    /// `None` when no pair could be formed.
    pub mean: Option<f64>,
    pub pairs: usize,
    pub sampled: bool,
    /// Specs left out because their canonical form exceeds the size cap.
    pub oversized: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub spec_count: usize,
    pub total_keys: usize,
    pub avg_keys: f64,
    pub level_histogram: BTreeMap<ComplexityLevel, usize>,
    pub avg_depth: f64,
    pub avg_branching: f64,
    pub unique_key_total: usize,
    pub edit_distance: EditDistanceStat,
    pub composite_count: usize,
    pub interaction_count: usize,
    /// Number of distinct chart categories present in the corpus.
    pub chart_type_count: usize,
    pub chart_type_histogram: BTreeMap<ChartType, usize>,
}

impl CorpusSummary {
    /// `(metric, value)` pairs in a fixed order; histograms expand to one
    /// row per bucket.
    pub fn rows(&self) -> Vec<(String, String)> {
        let mut rows: Vec<(String, String)> = vec![
            ("spec_count".into(), self.spec_count.to_string()),
            ("total_keys".into(), self.total_keys.to_string()),
            ("avg_keys".into(), format!("{:.4}", self.avg_keys)),
            ("avg_depth".into(), format!("{:.4}", self.avg_depth)),
            ("avg_branching".into(), format!("{:.4}", self.avg_branching)),
            ("unique_key_total".into(), self.unique_key_total.to_string()),
        ];
        for (level, count) in &self.level_histogram {
            rows.push((format!("level.{}", level.name()), count.to_string()));
        }
        let ed = &self.edit_distance;
        rows.push((
            "edit_distance.mean".into(),
            ed.mean.map_or_else(|| "-".into(), |m| format!("{:.4}", m)),
        ));
        rows.push(("edit_distance.pairs".into(), ed.pairs.to_string()));
        rows.push(("edit_distance.sampled".into(), ed.sampled.to_string()));
        rows.push(("edit_distance.oversized".into(), ed.oversized.to_string()));
        rows.push(("composite_count".into(), self.composite_count.to_string()));
        rows.push(("interaction_count".into(), self.interaction_count.to_string()));
        rows.push(("chart_type_count".into(), self.chart_type_count.to_string()));
        for (t, count) in &self.chart_type_histogram {
            rows.push((format!("chart_type.{:?}", t), count.to_string()));
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<Vec<String>> = self.rows().into_iter().map(|(k, v)| vec![k, v]).collect();
        crate::preprocess::render_csv(&["metric".into(), "value".into()], &rows)
    }

    /// Two left-aligned columns.
    pub fn to_text(&self) -> String {
        let rows = self.rows();
        let w = rows.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
        rows.iter()
            .map(|(k, v)| format!("{:<w$}  {}", k, v, w = w))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

pub fn summarize_corpus(records: &[SpecRecord], opts: &SummaryOptions) -> Result<CorpusSummary, CorpusError> {
    if records.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let n = records.len();
    let mean = |f: &dyn Fn(&SpecRecord) -> f64| records.iter().map(f).sum::<f64>() / n as f64;

    let total_keys = records.iter().map(|r| r.profile.key_count).sum();
    let mut level_histogram: BTreeMap<ComplexityLevel, usize> =
        ComplexityLevel::ALL.iter().map(|l| (*l, 0)).collect();
    let mut unique = BTreeSet::new();
    let mut chart_type_histogram = BTreeMap::new();
    for r in records {
        *level_histogram.entry(r.level).or_default() += 1;
        unique.extend(r.profile.unique_keys.iter().map(String::as_str));
        if let Some(ct) = &r.chart_types {
            for t in &ct.types {
                *chart_type_histogram.entry(*t).or_insert(0) += 1;
            }
        }
    }

    Ok(CorpusSummary {
        spec_count: n,
        total_keys,
        avg_keys: total_keys as f64 / n as f64,
        level_histogram,
        avg_depth: mean(&|r| r.profile.max_depth as f64),
        avg_branching: mean(&|r| r.profile.branching_factor),
        unique_key_total: unique.len(),
        edit_distance: average_edit_distance(records, opts),
        composite_count: records.iter().filter(|r| r.composition.is_composite).count(),
        interaction_count: records.iter().filter(|r| r.interactions.has_interaction).count(),
        chart_type_count: chart_type_histogram.len(),
        chart_type_histogram,
    })
}

fn average_edit_distance(records: &[SpecRecord], opts: &SummaryOptions) -> EditDistanceStat {
    // Canonical id order makes the seeded pair draw independent of input order.
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].doc.id.cmp(&records[b].doc.id).then(a.cmp(&b)));
    let mut canon: Vec<Vec<char>> = Vec::new();
    let mut oversized = 0;
    for &i in &order {
        match canonical_chars(&records[i].doc, opts.size_cap) {
            Ok(c) => canon.push(c),
            Err(_) => oversized += 1,
        }
    }
    let m = canon.len();
    let mut total = 0u128;
    let mut pairs = 0usize;
    let sampled = m > opts.pair_threshold;
    if m >= 2 {
        if sampled {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            for _ in 0..opts.sample_pairs {
                let i = rng.gen_range(0..m);
                let mut j = rng.gen_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                total += levenshtein_chars(&canon[i], &canon[j]) as u128;
                pairs += 1;
            }
        } else {
            for i in 0..m {
                for j in i + 1..m {
                    total += levenshtein_chars(&canon[i], &canon[j]) as u128;
                    pairs += 1;
                }
            }
        }
    }
    EditDistanceStat {
        mean: (pairs > 0).then(|| total as f64 / pairs as f64),
        pairs,
        sampled,
        oversized,
    }
}

/// Which record attributes define a stratum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrataCriteria {
    pub level: bool,
    pub composite: bool,
    pub interaction: bool,
}

impl Default for StrataCriteria {
    fn default() -> Self {
        StrataCriteria {
            level: true,
            composite: true,
            interaction: true,
        }
    }
}

pub type StratumKey = (Option<ComplexityLevel>, Option<bool>, Option<bool>);

pub fn stratum_key(r: &SpecRecord, c: &StrataCriteria) -> StratumKey {
    (
        c.level.then_some(r.level),
        c.composite.then_some(r.composition.is_composite),
        c.interaction.then_some(r.interactions.has_interaction),
    )
}

/// Proportional allocation with largest-remainder rounding. Returns
/// `(stratum, quota)` in stratum order.
pub fn allocate<K: Ord + Clone>(sizes: &BTreeMap<K, usize>, n: usize) -> Vec<(K, usize)> {
    let total: usize = sizes.values().sum();
    if total == 0 {
        return Vec::new();
    }
    let mut quotas: Vec<(K, usize, usize)> = sizes
        .iter()
        .map(|(k, &s)| (k.clone(), n * s / total, n * s % total))
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.1).sum();
    let mut by_remainder: Vec<usize> = (0..quotas.len()).collect();
    // Stable sort keeps stratum order among equal remainders.
    by_remainder.sort_by(|&a, &b| quotas[b].2.cmp(&quotas[a].2));
    for &i in by_remainder.iter().take(n - assigned) {
        quotas[i].1 += 1;
    }
    quotas.into_iter().map(|(k, q, _)| (k, q)).collect()
}

/// Draws `n` indices stratified by `keys`, uniformly without replacement
/// within each stratum. Output is grouped by stratum in key order.
pub fn stratified_indices<K: Ord + Clone>(keys: &[K], n: usize, seed: u64) -> Result<Vec<usize>, CorpusError> {
    if n > keys.len() {
        return Err(CorpusError::SampleSize {
            requested: n,
            available: keys.len(),
        });
    }
    let mut members: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        members.entry(k.clone()).or_default().push(i);
    }
    let sizes: BTreeMap<K, usize> = members.iter().map(|(k, v)| (k.clone(), v.len())).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for (k, quota) in allocate(&sizes, n) {
        let pool = members.get_mut(&k).expect("stratum exists");
        for i in 0..quota {
            let j = rng.gen_range(i..pool.len());
            pool.swap(i, j);
        }
        out.extend_from_slice(&pool[..quota]);
    }
    Ok(out)
}

pub fn stratified_sample<'a>(
    records: &'a [SpecRecord],
    n: usize,
    criteria: &StrataCriteria,
    seed: u64,
) -> Result<Vec<&'a SpecRecord>, CorpusError> {
    let keys: Vec<StratumKey> = records.iter().map(|r| stratum_key(r, criteria)).collect();
    Ok(stratified_indices(&keys, n, seed)?
        .into_iter()
        .map(|i| &records[i])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_model::parse_spec;

    fn doc(src: &str) -> SpecDocument {
        parse_spec(src, "t").unwrap()
    }

    #[test]
    fn canonical_form_ignores_order_and_values() {
        assert_eq!(canonicalize_spec(&doc(r#"{"b":1,"a":2}"#)), canonicalize_spec(&doc(r#"{"a":9,"b":8}"#)));
        assert_eq!(canonicalize_spec(&doc(r#"{"mark":"bar"}"#)), r#"{"mark":""}"#);
        assert_eq!(
            canonicalize_spec(&doc(r#"{"data":{"values":[1,2]},"mark":"bar"}"#)),
            r#"{"data":{},"mark":""}"#
        );
        assert_eq!(canonicalize_spec(&doc(r#"{"x":[1,{"b":true,"a":null}]}"#)), r#"{"x":["",{"a":"","b":""}]}"#);
    }

    #[test]
    fn fingerprint_keeps_values() {
        let a = doc("{\n  \"mark\": \"bar\",\n  \"width\": 200\n}");
        let b = doc(r#"{"width":200,"mark":"bar"}"#);
        let c = doc(r#"{"width":201,"mark":"bar"}"#);
        assert_eq!(spec_fingerprint(&a), spec_fingerprint(&b));
        assert_ne!(spec_fingerprint(&a), spec_fingerprint(&c));
        assert_eq!(fingerprint_hex(&spec_fingerprint(&a)).len(), 64);
    }

    #[test]
    fn dedup_mini_corpus() {
        let specs = [
            r#"{"mark":"bar","width":1}"#,
            r#"{"width":1,"mark":"bar"}"#,
            r#"{"mark":"line"}"#,
            r#"{"mark":"bar","width":2}"#,
            r#"{"mark":"line"}"#,
        ];
        let fps: Vec<[u8; 32]> = specs.iter().map(|s| spec_fingerprint(&doc(s))).collect();
        assert_eq!(dedup_indices(&fps), [0, 2, 3]);
    }

    #[test]
    fn distances() {
        let cap = DEFAULT_SIZE_CAP;
        let a = doc(r#"{"mark":"bar","encoding":{"x":{"field":"a"}}}"#);
        let b = doc("{\"encoding\": {\"x\": {\"field\": \"zzz\"}},\n \"mark\": \"line\"}");
        assert_eq!(pairwise_edit_distance(&a, &b, cap).unwrap(), 0);
        assert_eq!(pairwise_edit_distance(&doc(r#"{"a":1}"#), &doc(r#"{"b":1}"#), cap).unwrap(), 1);
        assert!(matches!(
            pairwise_edit_distance(&a, &b, 5),
            Err(CorpusError::SizeLimit { .. })
        ));
    }

    #[test]
    fn largest_remainder_allocation() {
        let mut keys = Vec::new();
        keys.extend(core::iter::repeat_n(0u8, 50));
        keys.extend(core::iter::repeat_n(1u8, 30));
        keys.extend(core::iter::repeat_n(2u8, 20));
        let picked = stratified_indices(&keys, 10, 7).unwrap();
        let count = |s: u8| picked.iter().filter(|&&i| keys[i] == s).count();
        assert_eq!((count(0), count(1), count(2)), (5, 3, 2));
        let mut dedup = picked.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 10);
    }

    #[test]
    fn remainders_go_to_largest_fractions() {
        let sizes: BTreeMap<u8, usize> = [(0, 5), (1, 3), (2, 2)].into_iter().collect();
        // n=4: exact 2.0, 1.2, 0.8 → floors 2,1,0; one seat left goes to stratum 2.
        assert_eq!(allocate(&sizes, 4), [(0, 2), (1, 1), (2, 1)]);
    }

    #[test]
    fn single_stratum_and_determinism() {
        let keys = [0u8; 40];
        let a = stratified_indices(&keys, 12, 99).unwrap();
        let b = stratified_indices(&keys, 12, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        assert_ne!(a, stratified_indices(&keys, 12, 100).unwrap());
        assert!(matches!(
            stratified_indices(&keys, 41, 0),
            Err(CorpusError::SampleSize { .. })
        ));
    }

    #[test]
    fn summary_tables() {
        let records: Vec<SpecRecord> = [r#"{"mark":"bar"}"#, r#"{"mark":"line","selection":{}}"#]
            .iter()
            .enumerate()
            .map(|(i, s)| SpecRecord::analyze(parse_spec(s, &alloc::format!("s{}", i)).unwrap(), None, None))
            .collect();
        let s = summarize_corpus(&records, &SummaryOptions::default()).unwrap();
        let csv = s.to_csv();
        assert!(csv.starts_with("metric,value\nspec_count,2\n"));
        assert!(csv.contains("\nlevel.simple,2\n"));
        assert_eq!(csv.lines().count(), s.to_text().lines().count() + 1);
        assert!(s.to_text().lines().all(|l| l.len() >= "edit_distance.oversized".len()));
    }
}
