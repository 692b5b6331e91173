//! One-hidden-layer perceptron: tanh hidden units, softmax output,
//! mean cross-entropy loss, mini-batch SGD.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MlpParams;
use crate::{seed, softmax_in_place, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    n_inputs: usize,
    n_hidden: usize,
    n_outputs: usize,
    /// Row-major `n_hidden x n_inputs`.
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// Row-major `n_outputs x n_hidden`.
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl Network {
    /// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn init(n_inputs: usize, n_hidden: usize, n_outputs: usize, seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let mut draw = |len: usize, fan_in: usize| -> Vec<f64> {
            let r = 1.0 / (fan_in.max(1) as f64).sqrt();
            (0..len).map(|_| rng.random_range(-r..=r)).collect()
        };
        let w1 = draw(n_hidden * n_inputs, n_inputs);
        let b1 = draw(n_hidden, n_inputs);
        let w2 = draw(n_outputs * n_hidden, n_hidden);
        let b2 = draw(n_outputs, n_hidden);
        Network {
            n_inputs,
            n_hidden,
            n_outputs,
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn n_parameters(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Flattened parameters in the order w1, b1, w2, b2.
    pub fn parameters(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.n_parameters());
        let (a, rest) = params.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }

    fn hidden(&self, row: &[f64]) -> Vec<f64> {
        (0..self.n_hidden)
            .map(|h| {
                let w = &self.w1[h * self.n_inputs..(h + 1) * self.n_inputs];
                (w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + self.b1[h]).tanh()
            })
            .collect()
    }

    fn logits(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.n_outputs)
            .map(|o| {
                let w = &self.w2[o * self.n_hidden..(o + 1) * self.n_hidden];
                w.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>() + self.b2[o]
            })
            .collect()
    }

    pub fn forward(&self, row: &[f64]) -> Vec<f64> {
        let mut out = self.logits(&self.hidden(row));
        softmax_in_place(&mut out);
        out
    }

    /// Mean cross-entropy over `rows` of `x` and its gradient, flattened like
    /// [`Network::parameters`].
    pub fn loss_and_gradient(&self, x: &Matrix, labels: &[usize], rows: &[usize]) -> (f64, Vec<f64>) {
        let (ni, nh, no) = (self.n_inputs, self.n_hidden, self.n_outputs);
        let mut gw1 = vec![0.0; self.w1.len()];
        let mut gb1 = vec![0.0; nh];
        let mut gw2 = vec![0.0; self.w2.len()];
        let mut gb2 = vec![0.0; no];
        let scale = 1.0 / rows.len().max(1) as f64;
        let mut loss = 0.0;
        for &i in rows {
            let row = x.row(i);
            let hidden = self.hidden(row);
            let mut prob = self.logits(&hidden);
            softmax_in_place(&mut prob);
            let y = labels[i];
            loss -= prob[y].max(f64::MIN_POSITIVE).ln();
            let mut dz = prob;
            dz[y] -= 1.0;
            let mut dh = vec![0.0; nh];
            for o in 0..no {
                let g = dz[o] * scale;
                gb2[o] += g;
                for h in 0..nh {
                    gw2[o * nh + h] += g * hidden[h];
                    dh[h] += g * self.w2[o * nh + h];
                }
            }
            for h in 0..nh {
                let g = dh[h] * (1.0 - hidden[h] * hidden[h]);
                gb1[h] += g;
                for j in 0..ni {
                    gw1[h * ni + j] += g * row[j];
                }
            }
        }
        (loss * scale, [gw1, gb1, gw2, gb2].concat())
    }

    pub fn fit(x: &Matrix, labels: &[usize], k: usize, params: &MlpParams, seed: u64) -> Self {
        let mut net = Network::init(x.cols(), params.hidden_units, k, seed::derive(seed, &[0]));
        let mut rng = seed::rng(seed::derive(seed, &[1]));
        let mut order: Vec<usize> = (0..x.rows()).collect();
        let mut theta = net.parameters();
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(params.batch_size) {
                let (_, grad) = net.loss_and_gradient(x, labels, batch);
                for (t, g) in theta.iter_mut().zip(&grad) {
                    *t -= params.learning_rate * g;
                }
                net.set_parameters(&theta);
            }
        }
        net
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_central_differences() {
        let x = Matrix::from_rows(&[
            vec![0.3, -1.2, 0.5],
            vec![1.1, 0.4, -0.7],
            vec![-0.9, 0.8, 0.2],
            vec![0.0, -0.3, 1.5],
            vec![0.6, 1.7, -1.1],
        ])
        .unwrap();
        let labels = [0, 1, 2, 1, 0];
        let rows: Vec<usize> = (0..5).collect();
        let mut net = Network::init(3, 4, 3, 11);
        let (_, grad) = net.loss_and_gradient(&x, &labels, &rows);
        let theta = net.parameters();
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] = theta[i] + h;
            net.set_parameters(&t);
            let plus = net.loss_and_gradient(&x, &labels, &rows).0;
            t[i] = theta[i] - h;
            net.set_parameters(&t);
            let minus = net.loss_and_gradient(&x, &labels, &rows).0;
            let numeric = (plus - minus) / (2.0 * h);
            let denom = numeric.abs().max(grad[i].abs()).max(1e-8);
            assert!(
                (numeric - grad[i]).abs() / denom < 1e-4,
                "param {i}: analytic {} numeric {numeric}",
                grad[i]
            );
        }
        net.set_parameters(&theta);
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let net = Network::init(4, 8, 5, 3);
        let out = net.forward(&[10.0, -3.0, 0.5, 2.0]);
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}
