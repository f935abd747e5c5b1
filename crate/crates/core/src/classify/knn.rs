use crate::error::{Error, Result};
use crate::ingest::Group;

use super::FeatureTable;

/// Euclidean k-nearest-neighbour vote.
///
/// Distance ties keep training-row order. A tied vote goes to the label of
/// the nearest neighbour among the tied labels.
pub fn knn_predict(train_x: &[&[f64]], train_y: &[Group], test: &[&[f64]], k: usize) -> Result<Vec<Group>> {
    let n = train_x.len();
    if n == 0 {
        return Err(Error::EmptyInput("empty training set".into()));
    }
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    Ok(test
        .iter()
        .map(|q| {
            order.clear();
            order.extend(train_x.iter().enumerate().map(|(i, x)| {
                let d2: f64 = x.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            }));
            order.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
            let nearest = &mut order[..k];
            nearest.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let mut votes = [0usize; 2];
            for &(_, i) in nearest.iter() {
                votes[train_y[i].index()] += 1;
            }
            let top = votes[0].max(votes[1]);
            nearest
                .iter()
                .map(|&(_, i)| train_y[i])
                .find(|g| votes[g.index()] == top)
                .expect("k >= 1")
        })
        .collect())
}

/// Predicts labels for `test` rows from the rows of `train`.
pub fn knn_classify(train: &FeatureTable, test: &[&[f64]], k: usize) -> Result<Vec<Group>> {
    knn_predict(&train.matrix(), &train.labels(), test, k)
}
