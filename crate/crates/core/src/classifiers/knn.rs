//! Brute-force k-nearest neighbours under Euclidean distance.

use serde::{Deserialize, Serialize};

use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestNeighbors {
    k: usize,
    n_classes: usize,
    x: Matrix,
    labels: Vec<usize>,
}

impl NearestNeighbors {
    pub fn fit(x: &Matrix, labels: &[usize], n_classes: usize, k: usize) -> Self {
        NearestNeighbors {
            k,
            n_classes,
            x: x.clone(),
            labels: labels.to_vec(),
        }
    }

    /// Training rows nearest to `row`; equal distances go to the lower row index.
    pub fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let mut cand: Vec<(f64, usize)> = self
            .x
            .iter_rows()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let take = self.k.min(cand.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if take < cand.len() && take > 0 {
            cand.select_nth_unstable_by(take - 1, cmp);
        }
        cand.truncate(take);
        cand.sort_by(cmp);
        cand.into_iter().map(|(_, i)| i).collect()
    }

    /// Vote fractions among the neighbours.
    pub fn score_row(&self, row: &[f64]) -> Vec<f64> {
        let nb = self.neighbors(row);
        let mut votes = vec![0.0; self.n_classes];
        for &i in &nb {
            votes[self.labels[i]] += 1.0;
        }
        let total = nb.len().max(1) as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}
