//! CART growth shared by the decision tree, the random forest and the
//! boosted regression trees.
//!
//! Each feature is sorted once per fit; nodes carry per-feature sorted
//! sample lists and split them stably, so split search is linear in the node
//! size. Candidate thresholds are midpoints between consecutive distinct
//! values. Among equal-gain splits the lowest feature index wins, then the
//! lowest threshold.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<L> {
    Leaf(L),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    pub fn leaf(&self, row: &[f64]) -> &L {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Leaf(l) => return l,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk<L>(nodes: &[Node<L>], id: usize) -> usize {
            match &nodes[id] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Features used by at least one split.
    pub fn split_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf(_) => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

/// Impurity bookkeeping over sample positions.
pub(crate) trait Criterion {
    type Acc: Clone;
    fn empty(&self) -> Self::Acc;
    fn add(&self, acc: &mut Self::Acc, sample: usize);
    fn remove(&self, acc: &mut Self::Acc, sample: usize);
    /// Node size times node impurity.
    fn cost(&self, acc: &Self::Acc, n: usize) -> f64;
    fn is_pure(&self, acc: &Self::Acc, n: usize) -> bool;
}

pub(crate) struct Gini<'a> {
    pub labels: &'a [usize],
    pub k: usize,
}

impl Criterion for Gini<'_> {
    type Acc = Vec<f64>;

    fn empty(&self) -> Vec<f64> {
        vec![0.0; self.k]
    }

    fn add(&self, acc: &mut Vec<f64>, s: usize) {
        acc[self.labels[s]] += 1.0;
    }

    fn remove(&self, acc: &mut Vec<f64>, s: usize) {
        acc[self.labels[s]] -= 1.0;
    }

    fn cost(&self, acc: &Vec<f64>, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        n - acc.iter().map(|c| c * c).sum::<f64>() / n
    }

    fn is_pure(&self, acc: &Vec<f64>, n: usize) -> bool {
        acc.contains(&(n as f64))
    }
}

pub(crate) struct SquaredError<'a> {
    pub targets: &'a [f64],
}

impl Criterion for SquaredError<'_> {
    type Acc = (f64, f64);

    fn empty(&self) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn add(&self, acc: &mut (f64, f64), s: usize) {
        let t = self.targets[s];
        acc.0 += t;
        acc.1 += t * t;
    }

    fn remove(&self, acc: &mut (f64, f64), s: usize) {
        let t = self.targets[s];
        acc.0 -= t;
        acc.1 -= t * t;
    }

    fn cost(&self, acc: &(f64, f64), n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        (acc.1 - acc.0 * acc.0 / n as f64).max(0.0)
    }

    fn is_pure(&self, acc: &(f64, f64), n: usize) -> bool {
        self.cost(acc, n) <= 1e-12 * acc.1.max(1e-300)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features examined per node; `None` means all of them.
    pub max_features: Option<usize>,
}

struct Grower<'a, C: Criterion, L, F: Fn(&[usize]) -> L> {
    x: &'a Matrix,
    rows: &'a [usize],
    criterion: &'a C,
    params: GrowParams,
    rng: Option<&'a mut ChaCha8Rng>,
    make_leaf: F,
    nodes: Vec<Node<L>>,
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<C: Criterion, L, F: Fn(&[usize]) -> L> Grower<'_, C, L, F> {
    #[inline]
    fn value(&self, sample: usize, feature: usize) -> f64 {
        self.x.get(self.rows[sample], feature)
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.x.cols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut all: Vec<usize> = (0..p).collect();
                for i in 0..m {
                    let j = rng.random_range(i..p);
                    all.swap(i, j);
                }
                let mut chosen = all[..m].to_vec();
                chosen.sort_unstable();
                chosen
            }
            _ => (0..p).collect(),
        }
    }

    fn best_split(&mut self, sorted: &[Vec<usize>], parent: &C::Acc) -> Option<Best> {
        let n = sorted[0].len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let parent_cost = self.criterion.cost(parent, n);
        let eps = 1e-12 * parent_cost.abs().max(1.0);
        let mut best: Option<Best> = None;
        for feature in self.candidate_features() {
            let order = &sorted[feature];
            let mut left = self.criterion.empty();
            let mut right = parent.clone();
            for i in 0..n - 1 {
                let s = order[i];
                self.criterion.add(&mut left, s);
                self.criterion.remove(&mut right, s);
                let n_left = i + 1;
                if n_left < min_leaf {
                    continue;
                }
                if n - n_left < min_leaf {
                    break;
                }
                let (v, next) = (self.value(s, feature), self.value(order[i + 1], feature));
                if v >= next {
                    continue;
                }
                let gain = parent_cost - self.criterion.cost(&left, n_left) - self.criterion.cost(&right, n - n_left);
                if best.as_ref().is_none_or(|b| gain > b.gain + eps) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some(Best {
                        feature,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }

    fn grow(&mut self, sorted: Vec<Vec<usize>>, depth: usize) -> usize {
        let id = self.nodes.len();
        let members = &sorted[0];
        let n = members.len();
        let mut acc = self.criterion.empty();
        for &s in members {
            self.criterion.add(&mut acc, s);
        }
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let size_ok = n >= 2 * self.params.min_samples_leaf.max(1);
        let split = if depth_ok && size_ok && !self.criterion.is_pure(&acc, n) {
            self.best_split(&sorted, &acc)
        } else {
            None
        };
        let Some(split) = split else {
            let leaf = (self.make_leaf)(members);
            self.nodes.push(Node::Leaf(leaf));
            return id;
        };

        // placeholder, patched once both children exist
        self.nodes.push(Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        });
        let mut goes_left = vec![false; self.rows.len()];
        for &s in members {
            goes_left[s] = self.value(s, split.feature) <= split.threshold;
        }
        let (mut left_sorted, mut right_sorted) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
        for list in sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&s| goes_left[s]);
            left_sorted.push(l);
            right_sorted.push(r);
        }
        let left = self.grow(left_sorted, depth + 1);
        let right = self.grow(right_sorted, depth + 1);
        if let Node::Split { left: l, right: r, .. } = &mut self.nodes[id] {
            *l = left;
            *r = right;
        }
        id
    }
}

/// Grows a tree over `rows` (indices into `x`; repeats allowed). The
/// criterion and `make_leaf` address samples by position in `rows`.
pub(crate) fn grow<C: Criterion, L>(
    x: &Matrix,
    rows: &[usize],
    criterion: &C,
    params: GrowParams,
    rng: Option<&mut ChaCha8Rng>,
    make_leaf: impl Fn(&[usize]) -> L,
) -> Tree<L> {
    let sorted: Vec<Vec<usize>> = (0..x.cols().max(1))
        .map(|j| {
            let mut order: Vec<usize> = (0..rows.len()).collect();
            if j < x.cols() {
                order.sort_by(|&a, &b| x.get(rows[a], j).total_cmp(&x.get(rows[b], j)));
            }
            order
        })
        .collect();
    let mut grower = Grower {
        x,
        rows,
        criterion,
        params,
        rng,
        make_leaf,
        nodes: Vec::new(),
    };
    if x.cols() == 0 || rows.is_empty() {
        let leaf = (grower.make_leaf)(&sorted[0]);
        return Tree {
            nodes: vec![Node::Leaf(leaf)],
        };
    }
    grower.grow(sorted, 0);
    Tree { nodes: grower.nodes }
}

/// Classification tree whose leaves hold class frequencies.
pub(crate) fn grow_classifier(
    x: &Matrix,
    labels: &[usize],
    k: usize,
    rows: &[usize],
    params: GrowParams,
    rng: Option<&mut ChaCha8Rng>,
) -> Tree<Vec<f64>> {
    let sample_labels: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
    let criterion = Gini {
        labels: &sample_labels,
        k,
    };
    grow(x, rows, &criterion, params, rng, |members| {
        let mut dist = vec![0.0; k];
        for &s in members {
            dist[sample_labels[s]] += 1.0;
        }
        let total = members.len().max(1) as f64;
        dist.iter_mut().for_each(|v| *v /= total);
        dist
    })
}

/// Regression tree whose leaves hold the mean target.
pub(crate) fn grow_regressor(x: &Matrix, targets: &[f64], params: GrowParams) -> Tree<f64> {
    let rows: Vec<usize> = (0..x.rows()).collect();
    let criterion = SquaredError { targets };
    grow(x, &rows, &criterion, params, None, |members| {
        if members.is_empty() {
            0.0
        } else {
            members.iter().map(|&s| targets[s]).sum::<f64>() / members.len() as f64
        }
    })
}
