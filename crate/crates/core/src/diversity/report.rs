use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    frechet_distance, knn_precision_recall, within_metrics, DiversityError, EmbeddingProvider, VectorSet,
};

pub const METRIC_NAMES: [&str; 9] = [
    "fd",
    "precision",
    "recall",
    "remote_clique",
    "chamfer",
    "mst",
    "span",
    "sparseness",
    "entropy",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub k: usize,
    pub span_percentile: f64,
    pub grid: usize,
    pub normalize: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            k: 3,
            span_percentile: 90.0,
            grid: 10,
            normalize: true,
        }
    }
}

/// One row of the report: a named source with one or more sampled sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSource {
    pub name: String,
    pub sets: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single set.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> MeanStd {
        // Welford's update: exact for constant input.
        let (mut mean, mut m2) = (0.0, 0.0);
        for (i, &x) in xs.iter().enumerate() {
            let delta = x - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (x - mean);
        }
        let std = if xs.len() < 2 {
            0.0
        } else {
            libm::sqrt(m2 / (xs.len() - 1) as f64)
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub n_sets: usize,
    /// In [`METRIC_NAMES`] order.
    pub metrics: Vec<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,n_sets");
        for m in METRIC_NAMES {
            out.push_str(&format!(",{m}_mean,{m}_std"));
        }
        for r in &self.rows {
            out.push('\n');
            out.push_str(&crate::preprocess::render_csv(core::slice::from_ref(&r.name), &[]));
            out.push_str(&format!(",{}", r.n_sets));
            for m in &r.metrics {
                out.push_str(&format!(",{},{}", m.mean, m.std));
            }
        }
        out
    }

    /// Fixed-width table with `mean±std` cells.
    pub fn to_text(&self) -> String {
        let header: Vec<String> = ["source".into()]
            .into_iter()
            .chain(METRIC_NAMES.iter().map(|m| String::from(*m)))
            .collect();
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                core::iter::once(r.name.clone())
                    .chain(r.metrics.iter().map(|m| format!("{:.4}±{:.4}", m.mean, m.std)))
                    .collect()
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|c| {
                core::iter::once(&header)
                    .chain(&body)
                    .map(|row| row[c].chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        core::iter::once(&header)
            .chain(&body)
            .map(|row| {
                row.iter()
                    .zip(&widths)
                    .map(|(cell, w)| format!("{:<w$}", cell, w = *w))
                    .collect::<Vec<_>>()
                    .join("  ")
                    .trim_end()
                    .into()
            })
            .collect::<Vec<String>>()
            .join("\n")
    }
}

fn embed(provider: &dyn EmbeddingProvider, name: &str, texts: &[String], normalize: bool) -> Result<VectorSet, DiversityError> {
    if texts.is_empty() {
        return Err(DiversityError::EmptySet(name.into()));
    }
    let set = provider.embed(texts)?;
    if normalize {
        set.normalized()
    } else {
        Ok(set)
    }
}

/// Embeds every set, compares it with the reference (cross metrics) and
/// measures it alone (within metrics); one row per source with mean and
/// sample std over its sets.
pub fn evaluate(
    reference: &[String],
    sources: &[DatasetSource],
    provider: &dyn EmbeddingProvider,
    opts: &EvalOptions,
) -> Result<MetricReport, DiversityError> {
    let reference = embed(provider, "reference", reference, opts.normalize)?;
    let mut rows = Vec::new();
    for source in sources {
        if source.sets.is_empty() {
            return Err(DiversityError::EmptySet(source.name.clone()));
        }
        let mut per_metric: Vec<Vec<f64>> = METRIC_NAMES.iter().map(|_| Vec::new()).collect();
        for texts in &source.sets {
            let x = embed(provider, &source.name, texts, opts.normalize)?;
            let fd = frechet_distance(&x, &reference)?;
            let (precision, recall) = knn_precision_recall(&reference, &x, opts.k)?;
            let w = within_metrics(&x, opts.span_percentile, opts.grid)?;
            let values = [fd, precision, recall, w.remote_clique, w.chamfer, w.mst, w.span, w.sparseness, w.entropy];
            for (bucket, v) in per_metric.iter_mut().zip(values) {
                bucket.push(v);
            }
        }
        rows.push(ReportRow {
            name: source.name.clone(),
            n_sets: source.sets.len(),
            metrics: per_metric.iter().map(|xs| MeanStd::of(xs)).collect(),
        });
    }
    Ok(MetricReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diversity::HashEmbedder;
    use alloc::string::ToString;
    use alloc::vec;

    fn texts(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{} chart number {} shows {}", prefix, i, i * 7 % 5)).collect()
    }

    #[test]
    fn identical_sets_have_zero_std() {
        let set = texts("bar", 8);
        let sources = vec![
            DatasetSource { name: "a".into(), sets: vec![set.clone(); 5] },
            DatasetSource { name: "b".into(), sets: vec![texts("line", 8)] },
        ];
        let report = evaluate(&texts("ref", 10), &sources, &HashEmbedder::default(), &EvalOptions::default()).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].metrics.iter().all(|m| m.std == 0.0));
        assert_eq!(report.to_csv().lines().count(), 3);
        assert!(report.to_text().lines().next().unwrap().starts_with("source"));
    }

    #[test]
    fn empty_inputs() {
        let e = HashEmbedder::default();
        let r = evaluate(&[], &[], &e, &EvalOptions::default());
        assert_eq!(r, Err(DiversityError::EmptySet("reference".to_string())));
        let src = [DatasetSource { name: "x".into(), sets: vec![] }];
        assert_eq!(
            evaluate(&texts("r", 5), &src, &e, &EvalOptions::default()),
            Err(DiversityError::EmptySet("x".to_string()))
        );
    }

    #[test]
    fn mean_std() {
        let m = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
    }
}
