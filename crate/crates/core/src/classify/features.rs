use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpte::SyncMatrix;
use crate::error::{Error, Result};
use crate::ingest::Group;
use crate::netmetrics::{binarize, clustering_coefficients, eigenvector_centrality, subgraph_centrality};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Measure {
    CC,
    SC,
    EC,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::CC, Measure::SC, Measure::EC];

    /// Parses `"cc"`, `"sc,ec"`, `"all"` ... into a canonical, deduplicated list.
    pub fn parse_list(s: &str) -> Result<Vec<Measure>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part.eq_ignore_ascii_case("all") {
                out.extend(Measure::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        Ok(canonical(&out))
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Measure::CC => "CC",
            Measure::SC => "SC",
            Measure::EC => "EC",
        })
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CC" => Ok(Measure::CC),
            "SC" => Ok(Measure::SC),
            "EC" => Ok(Measure::EC),
            _ => Err(Error::UnknownFeature(s.to_string())),
        }
    }
}

fn canonical(measures: &[Measure]) -> Vec<Measure> {
    let mut m = measures.to_vec();
    m.sort();
    m.dedup();
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub subject_id: String,
    pub group: Group,
    pub band: String,
    pub epoch_index: usize,
    pub values: Vec<f64>,
}

/// One row per epoch. Columns are measure-major (CC block, SC block, EC block),
/// nodes in channel order within each block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub measures: Vec<Measure>,
    pub n_nodes: usize,
    pub columns: Vec<String>,
    pub threshold: f64,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn labels(&self) -> Vec<Group> {
        self.rows.iter().map(|r| r.group).collect()
    }

    pub fn matrix(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.values.as_slice()).collect()
    }

    pub fn count(&self, group: Group) -> usize {
        self.rows.iter().filter(|r| r.group == group).count()
    }

    pub fn select(&self, idx: &[usize]) -> FeatureTable {
        FeatureTable {
            measures: self.measures.clone(),
            n_nodes: self.n_nodes,
            columns: self.columns.clone(),
            threshold: self.threshold,
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    pub fn filter_band(&self, band: &str) -> FeatureTable {
        let idx: Vec<usize> = (0..self.rows.len())
            .filter(|&i| self.rows[i].band == band)
            .collect();
        self.select(&idx)
    }

    /// Per-row values of a column, or of a measure averaged over nodes.
    pub fn feature_values(&self, name: &str) -> Result<Vec<f64>> {
        if let Some(col) = self.columns.iter().position(|c| c == name) {
            return Ok(self.rows.iter().map(|r| r.values[col]).collect());
        }
        if let Ok(m) = name.parse::<Measure>() {
            if let Some(block) = self.measures.iter().position(|&x| x == m) {
                let range = block * self.n_nodes..(block + 1) * self.n_nodes;
                return Ok(self
                    .rows
                    .iter()
                    .map(|r| r.values[range.clone()].iter().sum::<f64>() / self.n_nodes as f64)
                    .collect());
            }
        }
        Err(Error::UnknownFeature(name.to_string()))
    }
}

fn node_name(names: &[String], i: usize) -> String {
    names.get(i).cloned().unwrap_or_else(|| format!("n{i}"))
}

/// Binarizes every matrix at `th` and extracts the requested node measures.
pub fn build_feature_table<T: Real>(
    matrices: &[SyncMatrix<T>],
    th: f64,
    measures: &[Measure],
) -> Result<FeatureTable> {
    if matrices.is_empty() {
        return Err(Error::EmptyInput("no synchronization matrices".into()));
    }
    if measures.is_empty() {
        return Err(Error::EmptyInput("no measures selected".into()));
    }
    if !(0.0..=1.0).contains(&th) {
        return Err(Error::ThresholdOutOfRange(th));
    }
    let n = matrices[0].n;
    if let Some(m) = matrices.iter().find(|m| m.n != n) {
        return Err(Error::InconsistentChannels(n, m.n));
    }
    let measures = canonical(measures);
    let names = &matrices[0].channel_names;
    let columns = measures
        .iter()
        .flat_map(|m| (0..n).map(move |i| format!("{m}:{}", node_name(names, i))))
        .collect();

    let rows = matrices
        .par_iter()
        .map(|m| {
            let g = binarize(m, th)?;
            let mut values = Vec::with_capacity(n * measures.len());
            for meas in &measures {
                let v: Vec<T> = match meas {
                    Measure::CC => clustering_coefficients(&g),
                    Measure::SC => subgraph_centrality(&g)?,
                    Measure::EC => eigenvector_centrality(&g)?.values,
                };
                values.extend(v.into_iter().map(Real::as_f64));
            }
            Ok(FeatureRow {
                subject_id: m.subject_id.clone(),
                group: m.group,
                band: m.band.clone(),
                epoch_index: m.epoch_index,
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(FeatureTable {
        measures,
        n_nodes: n,
        columns,
        threshold: th,
        rows,
    })
}
