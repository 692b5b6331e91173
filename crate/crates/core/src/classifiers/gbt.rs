//! Multiclass gradient boosting: one regression tree per class per round on
//! the softmax cross-entropy residuals, leaf value = mean residual.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_regressor, GrowParams, Tree};
use super::GbtParams;
use crate::{softmax_in_place, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boosted {
    k: usize,
    learning_rate: f64,
    init: Vec<f64>,
    /// `rounds[r][c]` is the round-`r` tree for class `c`.
    rounds: Vec<Vec<Tree<f64>>>,
    /// Mean training cross-entropy after initialisation and after each round.
    pub loss_history: Vec<f64>,
}

fn cross_entropy(raw: &Matrix, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = raw.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / labels.len().max(1) as f64
}

impl Boosted {
    /// With `check_descent`, panics if the training loss ever rises.
    pub fn fit(x: &Matrix, labels: &[usize], k: usize, params: &GbtParams, check_descent: bool) -> Self {
        let n = x.rows();
        let mut counts = vec![0.0; k];
        for &y in labels {
            counts[y] += 1.0;
        }
        let init: Vec<f64> = counts
            .iter()
            .map(|&c| (f64::max(c, 0.5) / n.max(1) as f64).ln())
            .collect();
        let mut raw = Matrix::zeros(n, k);
        for i in 0..n {
            raw.row_mut(i).copy_from_slice(&init);
        }
        let grow = GrowParams {
            max_depth: Some(params.max_depth),
            min_samples_leaf: params.min_samples_leaf,
            max_features: None,
        };
        let mut loss_history = vec![cross_entropy(&raw, labels)];
        let mut rounds = Vec::with_capacity(params.n_rounds);
        for _ in 0..params.n_rounds {
            let mut prob = raw.clone();
            for i in 0..n {
                softmax_in_place(prob.row_mut(i));
            }
            let trees: Vec<Tree<f64>> = (0..k)
                .into_par_iter()
                .map(|c| {
                    let residual: Vec<f64> = (0..n)
                        .map(|i| f64::from(u8::from(labels[i] == c)) - prob.get(i, c))
                        .collect();
                    grow_regressor(x, &residual, grow)
                })
                .collect();
            for i in 0..n {
                let row = x.row(i);
                for (c, tree) in trees.iter().enumerate() {
                    let v = raw.get(i, c) + params.learning_rate * tree.leaf(row);
                    raw.set(i, c, v);
                }
            }
            let loss = cross_entropy(&raw, labels);
            let prev = *loss_history.last().unwrap();
            if check_descent {
                assert!(
                    loss <= prev + 1e-12 * prev.abs().max(1.0),
                    "boosting loss rose from {prev} to {loss}"
                );
            }
            loss_history.push(loss);
            rounds.push(trees);
        }
        Boosted {
            k,
            learning_rate: params.learning_rate,
            init,
            rounds,
            loss_history,
        }
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Additive per-class scores before the softmax.
    pub fn raw_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = self.init.clone();
        for trees in &self.rounds {
            for (c, tree) in trees.iter().enumerate() {
                out[c] += self.learning_rate * tree.leaf(row);
            }
        }
        out
    }

    pub fn score_row(&self, row: &[f64]) -> Vec<f64> {
        let mut out = self.raw_row(row);
        softmax_in_place(&mut out);
        debug_assert_eq!(out.len(), self.k);
        out
    }
}
