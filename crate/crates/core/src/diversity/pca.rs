use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigenpairs of a symmetric matrix, largest eigenvalue first (ties keep
/// the solver's order).
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Scores of each point on the first `k` principal components. Components
/// with (numerically) zero variance score 0 for every point, and so do
/// components beyond the data's rank.
pub fn principal_components(points: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let d = points[0].len();
    let mut x = DMatrix::from_fn(n, d, |r, c| points[r][c]);
    for c in 0..d {
        let mean = x.column(c).sum() / n as f64;
        x.column_mut(c).add_scalar_mut(-mean);
    }
    let scale = x.amax().max(1.0);
    let tol = 1e-12 * scale * scale * n as f64;
    let mut scores = vec![vec![0.0; k]; n];
    if d <= n {
        // Covariance route: project centered points on the eigenvectors.
        let (values, vectors) = sorted_eigen(x.transpose() * &x);
        for j in 0..k.min(d) {
            if values[j] <= tol {
                break;
            }
            let proj = &x * vectors.column(j);
            for i in 0..n {
                scores[i][j] = proj[i];
            }
        }
    } else {
        // Gram route for wide data: scores are eigenvectors scaled by √λ.
        let (values, vectors) = sorted_eigen(&x * x.transpose());
        for j in 0..k.min(n) {
            if values[j] <= tol {
                break;
            }
            let s = libm::sqrt(values[j]);
            for i in 0..n {
                scores[i][j] = vectors[(i, j)] * s;
            }
        }
    }
    scores
}
