//! Linear one-vs-rest SVM trained by Pegasos-style stochastic subgradient
//! descent on the regularized hinge loss. The bias is the weight of an
//! appended constant feature.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SvmParams;
use crate::{seed, softmax_in_place, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    /// One weight vector per class, length p + 1 (bias last).
    weights: Vec<Vec<f64>>,
}

fn margin(w: &[f64], row: &[f64]) -> f64 {
    let p = row.len();
    w[..p].iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + w[p]
}

impl LinearSvm {
    /// Class `c`'s binary problem shuffles with `derive(seed, [c])`.
    pub fn fit(x: &Matrix, labels: &[usize], k: usize, params: &SvmParams, seed: u64) -> Self {
        let n = x.rows();
        let p = x.cols();
        let lambda = params.regularization;
        let weights = (0..k)
            .into_par_iter()
            .map(|c| {
                let mut rng = seed::rng(seed::derive(seed, &[c as u64]));
                let mut w = vec![0.0; p + 1];
                let mut order: Vec<usize> = (0..n).collect();
                let mut t = 0u64;
                for _ in 0..params.epochs {
                    order.shuffle(&mut rng);
                    for &i in &order {
                        t += 1;
                        let eta = 1.0 / (lambda * t as f64);
                        let y = if labels[i] == c { 1.0 } else { -1.0 };
                        let row = x.row(i);
                        let m = y * margin(&w, row);
                        let decay = 1.0 - eta * lambda;
                        w.iter_mut().for_each(|v| *v *= decay);
                        if m < 1.0 {
                            for (wj, xj) in w.iter_mut().zip(row) {
                                *wj += eta * y * xj;
                            }
                            w[p] += eta * y;
                        }
                    }
                }
                w
            })
            .collect();
        LinearSvm { weights }
    }

    pub fn margins(&self, row: &[f64]) -> Vec<f64> {
        self.weights.iter().map(|w| margin(w, row)).collect()
    }

    pub fn score_row(&self, row: &[f64]) -> Vec<f64> {
        let mut m = self.margins(row);
        softmax_in_place(&mut m);
        m
    }
}
