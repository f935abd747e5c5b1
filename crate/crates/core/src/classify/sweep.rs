use serde::{Deserialize, Serialize};

use crate::cpte::SyncMatrix;
use crate::error::{Error, Result};
use crate::Real;

use super::{build_feature_table, cross_validate, ClassifierSpec, CvParams, Measure};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub classifier: String,
    pub measures: Vec<Measure>,
    pub points: Vec<SweepPoint>,
    /// Threshold with the highest mean accuracy; ties go to the smaller threshold.
    pub best_threshold: f64,
}

/// `0.0, 0.1, ..., 1.0`.
pub fn default_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

pub fn threshold_sweep<T: Real>(
    matrices: &[SyncMatrix<T>],
    measures: &[Measure],
    spec: &ClassifierSpec,
    grid: &[f64],
    params: &CvParams,
) -> Result<SweepResult> {
    if matrices.is_empty() {
        return Err(Error::EmptyInput("no synchronization matrices".into()));
    }
    if grid.is_empty() {
        return Err(Error::EmptyInput("empty threshold grid".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    for &th in grid {
        let table = build_feature_table(matrices, th, measures)?;
        let report = cross_validate(&table, spec, params)?;
        points.push(SweepPoint {
            threshold: th,
            accuracy_mean: report.accuracy.mean,
            accuracy_std: report.accuracy.std,
        });
    }
    let mut best = &points[0];
    for p in &points[1..] {
        if p.accuracy_mean > best.accuracy_mean
            || (p.accuracy_mean == best.accuracy_mean && p.threshold < best.threshold)
        {
            best = p;
        }
    }
    let mut measures = measures.to_vec();
    measures.sort();
    measures.dedup();
    Ok(SweepResult {
        classifier: spec.name().to_string(),
        measures,
        best_threshold: best.threshold,
        points,
    })
}
