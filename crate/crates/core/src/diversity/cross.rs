use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{euclidean, DiversityError, VectorSet};

/// Ridge added to both covariances before the matrix square root.
pub const FD_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossMetrics {
    pub fd: f64,
    pub precision: f64,
    pub recall: f64,
}

fn mean_and_cov(x: &VectorSet) -> (DVector<f64>, DMatrix<f64>) {
    let (n, d) = (x.len(), x.dim());
    let m = DMatrix::from_fn(n, d, |r, c| x.vectors()[r][c]);
    let mean = DVector::from_fn(d, |c, _| m.column(c).sum() / n as f64);
    let centered = DMatrix::from_fn(n, d, |r, c| m[(r, c)] - mean[c]);
    let mut cov = centered.transpose() * centered / (n as f64 - 1.0);
    for i in 0..d {
        cov[(i, i)] += FD_EPSILON;
    }
    (mean, cov)
}

fn sym_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| libm::sqrt(l.max(0.0)));
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Fréchet distance between Gaussian fits:
/// ‖μa−μb‖² + Tr(Σa + Σb − 2(ΣaΣb)^½), with Tr((ΣaΣb)^½) computed as
/// Tr((Σa^½ Σb Σa^½)^½) so only symmetric square roots are needed.
pub fn frechet_distance(a: &VectorSet, b: &VectorSet) -> Result<f64, DiversityError> {
    if a.dim() != b.dim() {
        return Err(DiversityError::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    a.require(2)?;
    b.require(2)?;
    let (mu_a, cov_a) = mean_and_cov(a);
    let (mu_b, cov_b) = mean_and_cov(b);
    let root_a = sym_sqrt(&cov_a);
    let inner = &root_a * &cov_b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let tr_sqrt: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|l| libm::sqrt(l.max(0.0)))
        .sum();
    let fd = (mu_a - mu_b).norm_squared() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
    Ok(fd.max(0.0))
}

/// Distance from each point to its k-th nearest other point in the set.
fn knn_radii(x: &[Vec<f64>], k: usize) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, p)| {
            let mut d: Vec<f64> = x
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, q)| euclidean(p, q))
                .collect();
            d.sort_by(f64::total_cmp);
            d[k - 1]
        })
        .collect()
}

fn coverage(manifold: &[Vec<f64>], radii: &[f64], points: &[Vec<f64>]) -> f64 {
    let inside = points
        .iter()
        .filter(|p| manifold.iter().zip(radii).any(|(r, rad)| euclidean(p, r) <= *rad))
        .count();
    inside as f64 / points.len() as f64
}

/// Precision: share of candidate points inside the reference k-NN
/// manifold. Recall: share of reference points inside the candidate one.
pub fn knn_precision_recall(
    reference: &VectorSet,
    candidate: &VectorSet,
    k: usize,
) -> Result<(f64, f64), DiversityError> {
    if reference.dim() != candidate.dim() {
        return Err(DiversityError::DimensionMismatch { expected: reference.dim(), found: candidate.dim() });
    }
    reference.require(k + 1)?;
    candidate.require(k + 1)?;
    let k = k.max(1);
    let r_radii = knn_radii(reference.vectors(), k);
    let c_radii = knn_radii(candidate.vectors(), k);
    Ok((
        coverage(reference.vectors(), &r_radii, candidate.vectors()),
        coverage(candidate.vectors(), &c_radii, reference.vectors()),
    ))
}
