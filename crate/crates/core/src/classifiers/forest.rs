//! Bagged classification trees with per-split feature subsampling.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_classifier, GrowParams, Tree};
use super::ForestParams;
use crate::{argmax, seed, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    k: usize,
    trees: Vec<Tree<Vec<f64>>>,
}

impl Forest {
    /// Tree `t` draws its bootstrap and feature subsets from `derive(seed, [t])`.
    pub fn fit(x: &Matrix, labels: &[usize], k: usize, params: &ForestParams, seed: u64) -> Self {
        let n = x.rows();
        let p = x.cols();
        let max_features = params
            .max_features
            .unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1))
            .min(p.max(1));
        let grow = GrowParams {
            max_depth: params.max_depth,
            min_samples_leaf: params.min_samples_leaf,
            max_features: Some(max_features),
        };
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(seed, &[t as u64]));
                let rows: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow_classifier(x, labels, k, &rows, grow, Some(&mut rng))
            })
            .collect();
        Forest { k, trees }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Fraction of trees voting for each class.
    pub fn score_row(&self, row: &[f64]) -> Vec<f64> {
        let mut votes = vec![0.0; self.k];
        for tree in &self.trees {
            votes[argmax(tree.leaf(row))] += 1.0;
        }
        let total = self.trees.len().max(1) as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}
