//! Singular-spectrum analysis.
//!
//! The trajectory matrix `X` (window `L`, `K = N - L + 1` columns) is
//! decomposed through the eigenvectors of the lag-covariance `X Xᵀ`. Each
//! elementary component is `u uᵀ X`, diagonal-averaged back to a series.

use nalgebra::{DMatrix, SymmetricEigen};

/// Eigen-decomposition of the trajectory matrix of one series.
pub struct Trajectory<'a> {
    x: &'a [f64],
    window: usize,
    /// Eigenvectors ordered by decreasing eigenvalue.
    vectors: Vec<Vec<f64>>,
    values: Vec<f64>,
}

impl<'a> Trajectory<'a> {
    pub fn new(x: &'a [f64], window: usize) -> Self {
        let n = x.len();
        let cols = n - window + 1;
        let mut cov = DMatrix::<f64>::zeros(window, window);
        for i in 0..window {
            for j in i..window {
                let s: f64 = (0..cols).map(|c| x[i + c] * x[j + c]).sum();
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..window).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let vectors = order
            .iter()
            .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
            .collect();
        let values = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
        Self {
            x,
            window,
            vectors,
            values,
        }
    }

    /// Eigenvalues of the lag-covariance, descending (squared singular values).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// Diagonal-averaged elementary component `r`.
    pub fn component(&self, r: usize) -> Vec<f64> {
        let n = self.x.len();
        let l = self.window;
        let cols = n - l + 1;
        let u = &self.vectors[r];
        // w = Xᵀ u
        let w: Vec<f64> = (0..cols)
            .map(|c| (0..l).map(|i| u[i] * self.x[i + c]).sum())
            .collect();
        hankelize_rank_one(u, &w)
    }
}

/// Diagonal averaging of the rank-one matrix `u wᵀ`.
fn hankelize_rank_one(u: &[f64], w: &[f64]) -> Vec<f64> {
    let n = u.len() + w.len() - 1;
    let mut sum = vec![0.0; n];
    let mut count = vec![0usize; n];
    for (i, &ui) in u.iter().enumerate() {
        for (j, &wj) in w.iter().enumerate() {
            sum[i + j] += ui * wj;
            count[i + j] += 1;
        }
    }
    sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect()
}

/// Splits `x` into `groups` series: the `groups - 1` leading elementary
/// components followed by everything else. The groups sum to `x`.
pub fn decompose(x: &[f64], window: usize, groups: usize) -> Vec<Vec<f64>> {
    let traj = Trajectory::new(x, window);
    let mut out = Vec::with_capacity(groups);
    let mut remainder = x.to_vec();
    for r in 0..groups - 1 {
        let g = traj.component(r);
        for (rem, v) in remainder.iter_mut().zip(&g) {
            *rem -= v;
        }
        out.push(g);
    }
    out.push(remainder);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_set_of_components_reconstructs() {
        let x: Vec<f64> = (0..40)
            .map(|t| 0.1 * t as f64 + (t as f64 * 0.5).sin())
            .collect();
        let traj = Trajectory::new(&x, 10);
        let mut acc = vec![0.0; x.len()];
        for r in 0..10 {
            for (a, v) in acc.iter_mut().zip(traj.component(r)) {
                *a += v;
            }
        }
        for (a, b) in acc.iter().zip(&x) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn eigenvalues_descend() {
        let x: Vec<f64> = (0..30).map(|t| (t as f64).sqrt()).collect();
        let traj = Trajectory::new(&x, 8);
        assert!(traj.eigenvalues().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn trend_dominates_first_component() {
        let x: Vec<f64> = (0..64)
            .map(|t| 2.0 * t as f64 / 64.0 + 5.0 + 0.2 * (t as f64 * 1.1).sin())
            .collect();
        let blocks = decompose(&x, 16, 3);
        let mass: Vec<f64> = blocks
            .iter()
            .map(|b| b.iter().map(|v| v.abs()).sum())
            .collect();
        assert!(mass[0] > mass[1] && mass[0] > mass[2]);
    }
}
