//! Two-group comparison of per-epoch features.

use serde::{Deserialize, Serialize};

use crate::classify::FeatureTable;
use crate::error::{Error, Result};
use crate::ingest::Group;
use crate::special::student_t_two_sided;
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult<T> {
    pub t_statistic: T,
    pub degrees_of_freedom: T,
    pub p_value: T,
    pub median_a: T,
    pub median_b: T,
    pub n_a: usize,
    pub n_b: usize,
}

pub fn mean<T: Real>(x: &[T]) -> T {
    x.iter().copied().sum::<T>() / T::lit(x.len() as f64)
}

/// Unbiased sample variance (two-pass).
pub fn variance<T: Real>(x: &[T]) -> T {
    let m = mean(x);
    x.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::lit((x.len() - 1) as f64)
}

pub fn median<T: Real>(x: &[T]) -> T {
    if x.is_empty() {
        return T::nan();
    }
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / T::lit(2.0)
    }
}

/// Welch's unequal-variance two-sided t-test.
///
/// When both groups have zero variance the statistic is undefined; the
/// p-value is pinned to 1 for equal means and 0 otherwise.
pub fn welch_ttest<T: Real>(a: &[T], b: &[T]) -> Result<TTestResult<T>> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientSamples(a.len(), b.len()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let (na, nb) = (T::lit(a.len() as f64), T::lit(b.len() as f64));
    let (ma, mb) = (mean(a), mean(b));
    let (sa, sb) = (variance(a) / na, variance(b) / nb);
    let se2 = sa + sb;
    let (t, df, p) = if se2 == T::zero() {
        let one = T::one();
        let df = na + nb - T::lit(2.0);
        if ma == mb {
            (T::zero(), df, one)
        } else {
            let t = if ma > mb { T::infinity() } else { T::neg_infinity() };
            (t, df, T::zero())
        }
    } else {
        let t = (ma - mb) / se2.sqrt();
        let df = se2 * se2 / (sa * sa / (na - T::one()) + sb * sb / (nb - T::one()));
        (t, df, student_t_two_sided(t, df))
    };
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        median_a: median(a),
        median_b: median(b),
        n_a: a.len(),
        n_b: b.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Aggregation {
    /// Every epoch is one observation.
    Epoch,
    /// Epoch values are averaged per subject first.
    SubjectMean,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub feature: String,
    pub aggregation: Aggregation,
    pub test: TTestResult<f64>,
}

/// Medians and Welch p-value of one feature between the two groups.
///
/// `feature` is a column name (`"CC:Fp1"`) or a measure name (`"CC"`, `"SC"`,
/// `"EC"`), which averages that measure over all nodes of each row.
pub fn group_summary(table: &FeatureTable, feature: &str, aggregation: Aggregation) -> Result<GroupSummary> {
    let values = table.feature_values(feature)?;
    let mut per_group: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    match aggregation {
        Aggregation::Epoch => {
            for (row, v) in table.rows.iter().zip(&values) {
                per_group[row.group.index()].push(*v);
            }
        }
        Aggregation::SubjectMean => {
            let mut subjects: Vec<(&str, Group)> = Vec::new();
            let mut sums: Vec<(f64, usize)> = Vec::new();
            for (row, v) in table.rows.iter().zip(&values) {
                let idx = match subjects.iter().position(|(s, _)| *s == row.subject_id) {
                    Some(i) => i,
                    None => {
                        subjects.push((&row.subject_id, row.group));
                        sums.push((0.0, 0));
                        subjects.len() - 1
                    }
                };
                sums[idx].0 += v;
                sums[idx].1 += 1;
            }
            for ((_, g), (s, n)) in subjects.iter().zip(&sums) {
                per_group[g.index()].push(s / *n as f64);
            }
        }
    }
    if per_group.iter().any(Vec::is_empty) {
        return Err(Error::SingleGroup);
    }
    Ok(GroupSummary {
        feature: feature.to_string(),
        aggregation,
        test: welch_ttest(&per_group[0], &per_group[1])?,
    })
}
