//! Token normalization and vocabulary statistics.
//!
//! Pipeline per text: Unicode word segmentation → lowercase → stopword
//! removal → lemmatization → stopword removal again (a lemma such as `do`
//! can itself be a stopword; the second pass keeps the pipeline
//! idempotent).
//!
//! Lemmatization is a small rule set applied to a fixpoint:
//! 1. irregular-form table lookup;
//! 2. `-ies` → `-y`; `-es` → `` after s/x/z/ch/sh; `-s` → `` unless the
//!    word ends in `ss`, `us` or `is`;
//! 3. `-ing` / `-ed` are stripped when the stem keeps a vowel, then a doubled
//!    final consonant is undone (`stopp` → `stop`), or `e` is restored after
//!    `at`/`bl`/`iz` and after a short consonant-vowel-consonant stem
//!    (`bas` → `base`).
//!
//! Suffix rules apply only to words made of ASCII letters, and stems
//! shorter than three letters are never produced.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

const STOPWORDS: &str = include_str!("../resources/stopwords.txt");
const IRREGULAR: &str = include_str!("../resources/irregular.txt");

fn resource_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))
}

/// Stopword set and irregular-form table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalizer {
    stopwords: BTreeSet<String>,
    irregular: BTreeMap<String, String>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Normalizer::embedded()
    }
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|c| is_vowel(c) || c == b'y')
}

/// Vowel groups, the rough syllable count.
fn vowel_groups(s: &str) -> usize {
    let b = s.as_bytes();
    (0..b.len()).filter(|&i| is_vowel(b[i]) && (i == 0 || !is_vowel(b[i - 1]))).count()
}

fn restore_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 2 && b[n - 1] == b[n - 2] && !is_vowel(b[n - 1]) && !matches!(b[n - 1], b'l' | b's' | b'z') {
        return stem[..n - 1].to_string();
    }
    if stem.ends_with("at") || stem.ends_with("bl") || stem.ends_with("iz") {
        return alloc::format!("{}e", stem);
    }
    let cvc = n >= 3
        && !is_vowel(b[n - 3])
        && is_vowel(b[n - 2])
        && !is_vowel(b[n - 1])
        && !matches!(b[n - 1], b'w' | b'x' | b'y');
    if cvc && vowel_groups(stem) == 1 {
        return alloc::format!("{}e", stem);
    }
    stem.to_string()
}

impl Normalizer {
    pub fn embedded() -> Self {
        Normalizer {
            stopwords: resource_lines(STOPWORDS).map(String::from).collect(),
            irregular: resource_lines(IRREGULAR)
                .filter_map(|l| l.split_once(char::is_whitespace))
                .map(|(a, b)| (a.to_string(), b.trim().to_string()))
                .collect(),
        }
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    fn lemma_step(&self, w: &str) -> Option<String> {
        if let Some(l) = self.irregular.get(w) {
            return (l != w).then(|| l.clone());
        }
        // Suffix rules only touch plain letter words, so a lemma always
        // re-segments to itself ("u.s" must not become "u.").
        if !w.bytes().all(|c| c.is_ascii_lowercase()) {
            return None;
        }
        if let Some(stem) = w.strip_suffix("ies") {
            if stem.len() >= 2 {
                return Some(alloc::format!("{}y", stem));
            }
        }
        if let Some(stem) = w.strip_suffix("es") {
            if stem.len() >= 3 && ["s", "x", "z", "ch", "sh"].iter().any(|e| stem.ends_with(e)) {
                return Some(stem.to_string());
            }
        }
        if let Some(stem) = w.strip_suffix('s') {
            if stem.len() >= 3 && !["s", "u", "i"].iter().any(|e| stem.ends_with(e)) {
                return Some(stem.to_string());
            }
        }
        for suffix in ["ing", "ed"] {
            if let Some(stem) = w.strip_suffix(suffix) {
                if stem.len() >= 3 && has_vowel(stem) {
                    let restored = restore_stem(stem);
                    if restored.len() >= 3 {
                        return Some(restored);
                    }
                }
            }
        }
        None
    }

    /// Applies the rules until the word stops changing.
    pub fn lemmatize(&self, word: &str) -> String {
        let mut w = word.to_string();
        // Every step shortens the word or maps through the finite table, but
        // cap the loop anyway in case the table contains a cycle.
        for _ in 0..16 {
            match self.lemma_step(&w) {
                Some(next) => w = next,
                None => break,
            }
        }
        w
    }

    pub fn normalize(&self, text: &str) -> Vec<String> {
        text.unicode_words()
            .map(str::to_lowercase)
            .filter(|t| !self.is_stopword(t))
            .map(|t| self.lemmatize(&t))
            .filter(|t| !self.is_stopword(t))
            .collect()
    }
}

/// Normalizes every text with the embedded resources.
pub fn normalize_tokens<S: AsRef<str>>(texts: &[S]) -> Vec<Vec<String>> {
    let n = Normalizer::embedded();
    texts.iter().map(|t| n.normalize(t.as_ref())).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LexiconStats {
    pub total_tokens: usize,
    pub unique_tokens: usize,
    pub frequency: BTreeMap<String, usize>,
}

impl LexiconStats {
    /// `token,count` rows sorted by descending count, then token.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(&String, &usize)> = self.frequency.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        let rows: Vec<Vec<String>> = rows.into_iter().map(|(t, c)| alloc::vec![t.clone(), c.to_string()]).collect();
        crate::preprocess::render_csv(&["token".into(), "count".into()], &rows)
    }
}

pub fn lexicon_stats<T: AsRef<[String]>>(token_lists: &[T]) -> LexiconStats {
    let mut frequency: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0;
    for list in token_lists {
        for t in list.as_ref() {
            *frequency.entry(t.clone()).or_default() += 1;
            total += 1;
        }
    }
    LexiconStats {
        total_tokens: total,
        unique_tokens: frequency.len(),
        frequency,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VocabDiff {
    pub only_in_a: BTreeSet<String>,
    pub only_in_b: BTreeSet<String>,
    pub shared: BTreeSet<String>,
}

pub fn vocab_diff(a: &LexiconStats, b: &LexiconStats) -> VocabDiff {
    let mut d = VocabDiff::default();
    for t in a.frequency.keys() {
        if b.frequency.contains_key(t) {
            d.shared.insert(t.clone());
        } else {
            d.only_in_a.insert(t.clone());
        }
    }
    d.only_in_b = b.frequency.keys().filter(|t| !a.frequency.contains_key(*t)).cloned().collect();
    d
}
