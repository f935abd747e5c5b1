//! Repeated stratified k-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Group;
use crate::seed::derive_seed;

use super::forest::{ForestParams, RandomForest};
use super::knn::knn_predict;
use super::FeatureTable;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Knn { k: usize },
    RandomForest { n_trees: usize, max_features: Option<usize> },
}

impl ClassifierSpec {
    pub fn knn_default() -> Self {
        ClassifierSpec::Knn { k: 5 }
    }

    pub fn rf_default() -> Self {
        ClassifierSpec::RandomForest {
            n_trees: 100,
            max_features: None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Knn { .. } => "kNN",
            ClassifierSpec::RandomForest { .. } => "RF",
        }
    }

    fn fit_predict(&self, train_x: &[&[f64]], train_y: &[Group], test_x: &[&[f64]], seed: u64) -> Result<Vec<Group>> {
        match self {
            ClassifierSpec::Knn { k } => knn_predict(train_x, train_y, test_x, *k),
            ClassifierSpec::RandomForest {
                n_trees,
                max_features,
            } => {
                let params = ForestParams {
                    n_trees: *n_trees,
                    max_features: *max_features,
                    ..ForestParams::new(seed)
                };
                Ok(RandomForest::fit(train_x, train_y, &params)?.predict(test_x))
            }
        }
    }
}

/// Unit that is kept together within a fold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CvGranularity {
    /// Epochs are split independently (subjects may straddle folds).
    Epoch,
    /// All epochs of one subject land in the same fold.
    Subject,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvParams {
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub granularity: CvGranularity,
}

impl CvParams {
    pub fn new(seed: u64) -> Self {
        Self {
            folds: 10,
            repeats: 10,
            seed,
            granularity: CvGranularity::Epoch,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn tally(truth: &[Group], pred: &[Group], positive: Group) -> Self {
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(pred) {
            match (*t == positive, *p == positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
            }
        }
        c
    }

    fn ratio(num: usize, den: usize) -> f64 {
        if den == 0 {
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    pub fn accuracy(&self) -> f64 {
        Self::ratio(self.tp + self.tn, self.tp + self.tn + self.fp + self.fn_)
    }

    pub fn sensitivity(&self) -> f64 {
        Self::ratio(self.tp, self.tp + self.fn_)
    }

    pub fn specificity(&self) -> f64 {
        Self::ratio(self.tn, self.tn + self.fp)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub repeat: usize,
    pub fold: usize,
    pub confusion: Confusion,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Population standard deviation over all folds of all repeats.
    pub std: f64,
}

impl MetricSummary {
    fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count() as f64;
        let mean = values.clone().sum::<f64>() / n;
        let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub classifier: String,
    pub spec: ClassifierSpec,
    pub band: Option<String>,
    pub threshold: f64,
    pub n_features: usize,
    pub n_rows: usize,
    pub positive_class: Group,
    pub params: CvParams,
    pub accuracy: MetricSummary,
    pub sensitivity: MetricSummary,
    pub specificity: MetricSummary,
    pub folds: Vec<FoldResult>,
}

/// Assigns each unit to a fold. Units of each class are shuffled and dealt
/// round-robin, continuing from where the previous class stopped, so every
/// fold's class count is within one of its proportional share.
pub fn stratified_folds(labels: &[Group], folds: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut assignment = vec![0usize; labels.len()];
    let mut offset = 0usize;
    for g in Group::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == g).collect();
        idx.shuffle(rng);
        for (pos, &i) in idx.iter().enumerate() {
            assignment[i] = (offset + pos) % folds;
        }
        offset = (offset + idx.len()) % folds;
    }
    assignment
}

/// Positive class: the smaller group by row count, `GroupB` on a tie.
fn positive_class(table: &FeatureTable) -> Group {
    if table.count(Group::GroupA) < table.count(Group::GroupB) {
        Group::GroupA
    } else {
        Group::GroupB
    }
}

/// Unit label and per-row unit index for the requested granularity.
fn units(table: &FeatureTable, granularity: CvGranularity) -> (Vec<Group>, Vec<usize>) {
    match granularity {
        CvGranularity::Epoch => (table.labels(), (0..table.rows.len()).collect()),
        CvGranularity::Subject => {
            let mut ids: Vec<(&str, Group)> = Vec::new();
            let mut row_unit = Vec::with_capacity(table.rows.len());
            for r in &table.rows {
                let u = match ids.iter().position(|(s, _)| *s == r.subject_id) {
                    Some(u) => u,
                    None => {
                        ids.push((&r.subject_id, r.group));
                        ids.len() - 1
                    }
                };
                row_unit.push(u);
            }
            (ids.into_iter().map(|(_, g)| g).collect(), row_unit)
        }
    }
}

pub fn cross_validate(table: &FeatureTable, spec: &ClassifierSpec, params: &CvParams) -> Result<CvReport> {
    if params.folds < 2 || params.repeats == 0 {
        return Err(Error::InvalidParameter(format!(
            "need folds >= 2 and repeats >= 1, got {} and {}",
            params.folds, params.repeats
        )));
    }
    let (unit_labels, row_unit) = units(table, params.granularity);
    for g in Group::ALL {
        let count = unit_labels.iter().filter(|&&l| l == g).count();
        if count < params.folds {
            return Err(Error::ClassSmallerThanFolds {
                group: g.to_string(),
                count,
                folds: params.folds,
            });
        }
    }
    let positive = positive_class(table);
    let x = table.matrix();
    let y = table.labels();

    let jobs: Vec<(usize, usize)> = (0..params.repeats)
        .flat_map(|r| (0..params.folds).map(move |f| (r, f)))
        .collect();
    let assignments: Vec<Vec<usize>> = (0..params.repeats)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(params.seed, &[r as u64]));
            stratified_folds(&unit_labels, params.folds, &mut rng)
        })
        .collect();

    let folds = jobs
        .par_iter()
        .map(|&(r, f)| {
            let fold_of = |row: usize| assignments[r][row_unit[row]];
            let (test, train): (Vec<usize>, Vec<usize>) = (0..x.len()).partition(|&i| fold_of(i) == f);
            let tx: Vec<&[f64]> = train.iter().map(|&i| x[i]).collect();
            let ty: Vec<Group> = train.iter().map(|&i| y[i]).collect();
            let qx: Vec<&[f64]> = test.iter().map(|&i| x[i]).collect();
            let truth: Vec<Group> = test.iter().map(|&i| y[i]).collect();
            let seed = derive_seed(params.seed, &[r as u64, f as u64, 1]);
            let pred = spec.fit_predict(&tx, &ty, &qx, seed)?;
            let confusion = Confusion::tally(&truth, &pred, positive);
            Ok(FoldResult {
                repeat: r,
                fold: f,
                confusion,
                accuracy: confusion.accuracy(),
                sensitivity: confusion.sensitivity(),
                specificity: confusion.specificity(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let band = table.rows.first().map(|r| r.band.clone());
    let band = band.filter(|b| table.rows.iter().all(|r| &r.band == b));
    Ok(CvReport {
        classifier: spec.name().to_string(),
        spec: spec.clone(),
        band,
        threshold: table.threshold,
        n_features: table.n_features(),
        n_rows: table.rows.len(),
        positive_class: positive,
        params: params.clone(),
        accuracy: MetricSummary::of(folds.iter().map(|f| f.accuracy)),
        sensitivity: MetricSummary::of(folds.iter().map(|f| f.sensitivity)),
        specificity: MetricSummary::of(folds.iter().map(|f| f.specificity)),
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{FeatureRow, Measure};

    pub(crate) fn table(n_a: usize, n_b: usize, separable: bool) -> FeatureTable {
        let rows = (0..n_a + n_b)
            .map(|i| {
                let group = if i < n_a { Group::GroupA } else { Group::GroupB };
                let base = if separable && group == Group::GroupB { 100.0 } else { 0.0 };
                FeatureRow {
                    subject_id: format!("s{}", i / 5),
                    group,
                    band: "all".into(),
                    epoch_index: i % 5,
                    values: vec![base + (i % 7) as f64, base + (i % 3) as f64],
                }
            })
            .collect();
        FeatureTable {
            measures: vec![Measure::CC],
            n_nodes: 2,
            columns: vec!["CC:a".into(), "CC:b".into()],
            threshold: 0.5,
            rows,
        }
    }

    #[test]
    fn fold_balance() {
        let labels: Vec<Group> = (0..97)
            .map(|i| if i < 60 { Group::GroupA } else { Group::GroupB })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = stratified_folds(&labels, 10, &mut rng);
        for g in Group::ALL {
            let total = labels.iter().filter(|&&l| l == g).count() as f64;
            for f in 0..10 {
                let c = (0..labels.len()).filter(|&i| labels[i] == g && a[i] == f).count() as f64;
                assert!((c - total / 10.0).abs() <= 1.0, "{g} fold {f}: {c}");
            }
        }
        let sizes: Vec<usize> = (0..10).map(|f| a.iter().filter(|&&x| x == f).count()).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn separable_table_is_perfect() {
        let t = table(40, 30, true);
        for spec in [ClassifierSpec::knn_default(), ClassifierSpec::RandomForest { n_trees: 10, max_features: None }] {
            let r = cross_validate(&t, &spec, &CvParams { repeats: 2, ..CvParams::new(3) }).unwrap();
            assert_eq!(r.accuracy.mean, 1.0);
            assert_eq!(r.sensitivity.mean, 1.0);
            assert_eq!(r.specificity.mean, 1.0);
            assert_eq!(r.folds.len(), 20);
            assert_eq!(r.positive_class, Group::GroupB);
            for f in &r.folds {
                let c = f.confusion;
                assert_eq!(f.accuracy, (c.tp + c.tn) as f64 / (c.tp + c.tn + c.fp + c.fn_) as f64);
            }
            let pos: usize = r.folds.iter().map(|f| f.confusion.tp + f.confusion.fn_).sum();
            assert_eq!(pos, 2 * 30);
        }
    }

    #[test]
    fn class_smaller_than_folds() {
        let t = table(20, 1, true);
        assert!(matches!(
            cross_validate(&t, &ClassifierSpec::knn_default(), &CvParams::new(0)),
            Err(Error::ClassSmallerThanFolds { count: 1, .. })
        ));
    }

    #[test]
    fn subject_granularity_keeps_subjects_together() {
        let t = table(100, 60, true);
        let (labels, row_unit) = units(&t, CvGranularity::Subject);
        assert_eq!(labels.len(), 32);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = stratified_folds(&labels, 10, &mut rng);
        for (i, r) in t.rows.iter().enumerate() {
            for (j, s) in t.rows.iter().enumerate() {
                if r.subject_id == s.subject_id {
                    assert_eq!(a[row_unit[i]], a[row_unit[j]]);
                }
            }
        }
        let p = CvParams { granularity: CvGranularity::Subject, repeats: 1, ..CvParams::new(4) };
        let r = cross_validate(&t, &ClassifierSpec::knn_default(), &p).unwrap();
        assert_eq!(r.accuracy.mean, 1.0);
    }

    #[test]
    fn report_is_deterministic() {
        let t = table(50, 35, false);
        let spec = ClassifierSpec::RandomForest { n_trees: 15, max_features: None };
        let p = CvParams { repeats: 2, ..CvParams::new(77) };
        let a = serde_json::to_string(&cross_validate(&t, &spec, &p).unwrap()).unwrap();
        let b = serde_json::to_string(&cross_validate(&t, &spec, &p).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
