//! Bagged CART trees with Gini impurity.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Group;
use crate::seed::derive_seed;

use super::FeatureTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per split; `None` means `floor(sqrt(F))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl ForestParams {
    pub fn new(seed: u64) -> Self {
        Self {
            n_trees: 100,
            max_features: None,
            min_samples_split: 2,
            max_depth: None,
            seed,
        }
    }

    fn features_per_split(&self, n_features: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
            .clamp(1, n_features.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        class: u8,
    },
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_one(&self, x: &[f64]) -> u8 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Builder<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [u8],
    mtry: usize,
    min_split: usize,
    max_depth: usize,
    rng: ChaCha8Rng,
    features: Vec<usize>,
    buf: Vec<(f64, u8)>,
    nodes: Vec<Node>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn weighted_gini(c0: usize, c1: usize) -> f64 {
    let n = (c0 + c1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    n - ((c0 * c0 + c1 * c1) as f64) / n
}

impl Builder<'_> {
    fn counts(&self, idx: &[usize]) -> [usize; 2] {
        let mut c = [0usize; 2];
        for &i in idx {
            c[self.labels[i] as usize] += 1;
        }
        c
    }

    fn best_split(&mut self, idx: &[usize], counts: [usize; 2]) -> Option<Split> {
        let n_features = self.columns.len();
        self.features.clear();
        self.features.extend(0..n_features);
        let mut best: Option<Split> = None;
        let mut visited = 0usize;
        let mut drawn = 0usize;
        while visited < self.mtry && drawn < n_features {
            let pick = self.rng.gen_range(drawn..n_features);
            self.features.swap(drawn, pick);
            let f = self.features[drawn];
            drawn += 1;

            let col = &self.columns[f];
            self.buf.clear();
            self.buf.extend(idx.iter().map(|&i| (col[i], self.labels[i])));
            self.buf
                .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            if self.buf[0].0 == self.buf[self.buf.len() - 1].0 {
                // Constant in this node; does not count toward mtry.
                continue;
            }
            visited += 1;
            let mut left = [0usize; 2];
            for k in 0..self.buf.len() - 1 {
                left[self.buf[k].1 as usize] += 1;
                let (v, next) = (self.buf[k].0, self.buf[k + 1].0);
                if v == next {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let imp = weighted_gini(left[0], left[1]) + weighted_gini(right[0], right[1]);
                if best.as_ref().is_none_or(|b| imp < b.impurity) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some(Split {
                        feature: f,
                        threshold,
                        impurity: imp,
                    });
                }
            }
        }
        best
    }

    fn build(mut self, mut root: Vec<usize>) -> DecisionTree {
        // Explicit stack: (node slot, sample indices, depth).
        self.nodes.push(Node::Leaf { class: 0 });
        let mut stack = vec![(0usize, std::mem::take(&mut root), 0usize)];
        while let Some((slot, mut idx, depth)) = stack.pop() {
            let counts = self.counts(&idx);
            let majority = if counts[1] > counts[0] { 1 } else { 0 };
            let pure = counts[0] == 0 || counts[1] == 0;
            if pure || idx.len() < self.min_split || depth >= self.max_depth {
                self.nodes[slot] = Node::Leaf { class: majority };
                continue;
            }
            let Some(split) = self.best_split(&idx, counts) else {
                self.nodes[slot] = Node::Leaf { class: majority };
                continue;
            };
            let col = &self.columns[split.feature];
            let mut cut = 0;
            for k in 0..idx.len() {
                if col[idx[k]] <= split.threshold {
                    idx.swap(cut, k);
                    cut += 1;
                }
            }
            let right_idx = idx.split_off(cut);
            let left_slot = self.nodes.len();
            self.nodes.push(Node::Leaf { class: 0 });
            self.nodes.push(Node::Leaf { class: 0 });
            self.nodes[slot] = Node::Split {
                feature: split.feature as u32,
                threshold: split.threshold,
                left: left_slot as u32,
                right: left_slot as u32 + 1,
            };
            stack.push((left_slot + 1, right_idx, depth + 1));
            stack.push((left_slot, idx, depth + 1));
        }
        DecisionTree { nodes: self.nodes }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    pub params: ForestParams,
}

impl RandomForest {
    /// Trains on row-major `x`. Tree `t` draws from a stream keyed by
    /// `(seed, t)`, so the model is identical under any thread schedule.
    pub fn fit(x: &[&[f64]], y: &[Group], params: &ForestParams) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::EmptyInput("empty training set".into()));
        }
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(x.len(), y.len()));
        }
        if params.n_trees == 0 || params.min_samples_split < 2 {
            return Err(Error::InvalidParameter(
                "forest needs n_trees >= 1 and min_samples_split >= 2".into(),
            ));
        }
        if !(y.contains(&Group::GroupA) && y.contains(&Group::GroupB)) {
            return Err(Error::SingleClass);
        }
        let n_features = x[0].len();
        if let Some(r) = x.iter().find(|r| r.len() != n_features) {
            return Err(Error::LengthMismatch(r.len(), n_features));
        }
        let columns: Vec<Vec<f64>> = (0..n_features)
            .map(|f| x.iter().map(|r| r[f]).collect())
            .collect();
        let labels: Vec<u8> = y.iter().map(|g| g.index() as u8).collect();
        let n = x.len();
        let mtry = params.features_per_split(n_features);

        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, &[t as u64]));
                let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                Builder {
                    columns: &columns,
                    labels: &labels,
                    mtry,
                    min_split: params.min_samples_split,
                    max_depth: params.max_depth.unwrap_or(usize::MAX),
                    rng,
                    features: Vec::with_capacity(n_features),
                    buf: Vec::with_capacity(n),
                    nodes: Vec::new(),
                }
                .build(sample)
            })
            .collect();
        Ok(Self {
            trees,
            n_features,
            params: params.clone(),
        })
    }

    /// Majority vote over trees; an even split goes to `GroupA`.
    pub fn predict(&self, rows: &[&[f64]]) -> Vec<Group> {
        rows.par_iter()
            .map(|r| {
                let b = self.trees.iter().filter(|t| t.predict_one(r) == 1).count();
                if 2 * b > self.trees.len() {
                    Group::GroupB
                } else {
                    Group::GroupA
                }
            })
            .collect()
    }
}

pub fn rf_train(train: &FeatureTable, params: &ForestParams) -> Result<RandomForest> {
    RandomForest::fit(&train.matrix(), &train.labels(), params)
}

pub fn rf_predict(model: &RandomForest, rows: &[&[f64]]) -> Vec<Group> {
    model.predict(rows)
}
