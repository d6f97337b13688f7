use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{distance_matrix, euclidean, principal_components, DiversityError, VectorSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WithinMetrics {
    pub remote_clique: f64,
    pub chamfer: f64,
    pub mst: f64,
    pub span: f64,
    pub sparseness: f64,
    pub entropy: f64,
}

/// Prim's algorithm on the dense distance matrix.
fn mst_weight(d: &[f64], n: usize) -> f64 {
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut total = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !in_tree[i])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .expect("a vertex remains");
        in_tree[u] = true;
        total += best[u];
        for v in 0..n {
            if !in_tree[v] && d[u * n + v] < best[v] {
                best[v] = d[u * n + v];
            }
        }
    }
    total
}

/// Nearest-rank percentile of an unsorted sample.
pub(crate) fn nearest_rank(mut xs: Vec<f64>, percentile: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let rank = libm::ceil(percentile / 100.0 * xs.len() as f64) as usize;
    xs[rank.clamp(1, xs.len()) - 1]
}

/// Shannon-Wiener index (natural log) of occupancy over a `grid`×`grid`
/// partition of the bounding box of the first two principal components.
fn grid_entropy(points: &[Vec<f64>], grid: usize) -> f64 {
    let pcs = principal_components(points, 2);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &pcs {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let cell = |v: f64, a: usize| -> usize {
        let width = hi[a] - lo[a];
        if width <= 0.0 {
            return 0;
        }
        ((libm::floor((v - lo[a]) / width * grid as f64)) as usize).min(grid - 1)
    };
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for p in &pcs {
        *counts.entry((cell(p[0], 0), cell(p[1], 1))).or_default() += 1;
    }
    let n = pcs.len() as f64;
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * libm::log(p)
        })
        .sum::<f64>()
}

pub fn within_metrics(x: &VectorSet, span_percentile: f64, grid: usize) -> Result<WithinMetrics, DiversityError> {
    x.require(2)?;
    let v = x.vectors();
    let n = v.len();
    let d = distance_matrix(v);
    let d = &d;
    let row = |i: usize| (0..n).filter(move |&j| j != i).map(move |j| d[i * n + j]);

    let remote_clique = (0..n).map(|i| row(i).sum::<f64>() / (n - 1) as f64).sum::<f64>() / n as f64;
    let chamfer = (0..n).map(|i| row(i).fold(f64::INFINITY, f64::min)).sum::<f64>() / n as f64;
    let mst = mst_weight(d, n);

    let mut centroid = vec![0.0; x.dim()];
    for p in v {
        centroid.iter_mut().zip(p).for_each(|(c, x)| *c += x / n as f64);
    }
    let span = nearest_rank(v.iter().map(|p| euclidean(p, &centroid)).collect(), span_percentile);

    let sums: Vec<f64> = (0..n).map(|i| row(i).sum()).collect();
    let medoid = (0..n).fold(0, |best, i| if sums[i] < sums[best] { i } else { best });
    let sparseness = sums[medoid] / n as f64;

    Ok(WithinMetrics {
        remote_clique,
        chamfer,
        mst,
        span,
        sparseness,
        entropy: grid_entropy(v, grid.max(1)),
    })
}
