use std::path::PathBuf;

use clap::{Args, ValueEnum};
use cpte::classify::{ClassifierSpec, CvGranularity, CvParams, Measure};
use cpte::cpte::{PartitionConfig, RadialMode};
use cpte::pipeline::PipelineConfig;
use cpte::signal::SegmentParams;
use cpte::synth::GroupSpec;
use cpte::BandSpec;
use serde::Serialize;

/// Everything that determines a command's output. Embedded in every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub out: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub bands: Vec<BandSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PipelineConfig>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub threshold_grid: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub measures: Vec<Measure>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub classifiers: Vec<ClassifierSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvParams>,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub shuffle_labels: bool,
}

impl RunConfig {
    pub fn new(command: &str, common: &CommonArgs) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            seed: common.seed,
            out: common.out.clone(),
            manifest: None,
            bands: Vec::new(),
            pipeline: None,
            threshold_grid: Vec::new(),
            threshold: None,
            measures: Vec::new(),
            classifiers: Vec::new(),
            cv: None,
            shuffle_labels: false,
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct CommonArgs {
    /// Output directory; every artifact is written below it.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed. Required: no command draws from an implicit entropy source.
    #[arg(long)]
    pub seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RadialArg {
    Normalized,
    Absolute,
}

#[derive(Args, Clone, Debug)]
pub struct PipelineArgs {
    /// Cohort manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Angular ruler in degrees.
    #[arg(long, default_value_t = 10.0)]
    pub angular_ruler: f64,
    #[arg(long, value_enum, default_value_t = RadialArg::Normalized)]
    pub radial_mode: RadialArg,
    /// Ring count in normalized radial mode.
    #[arg(long, default_value_t = 5)]
    pub rings: usize,
    /// Ring width in absolute radial mode, in input units.
    #[arg(long, default_value_t = 10.0)]
    pub dr: f64,
    #[arg(long, default_value_t = 4000)]
    pub seg_len: usize,
    #[arg(long, default_value_t = 2000)]
    pub win_len: usize,
    #[arg(long, default_value_t = 500)]
    pub step: usize,
    /// Butterworth prototype order.
    #[arg(long, default_value_t = cpte::signal::DEFAULT_FILTER_ORDER)]
    pub filter_order: usize,
    /// Matrix cache directory (default: <out>/cache).
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

impl PipelineArgs {
    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            partition: PartitionConfig {
                angular_ruler_deg: self.angular_ruler,
                radial_mode: match self.radial_mode {
                    RadialArg::Normalized => RadialMode::Normalized,
                    RadialArg::Absolute => RadialMode::Absolute,
                },
                radial_rings: self.rings,
                radial_ruler: self.dr,
            },
            segment: SegmentParams {
                seg_len: self.seg_len,
                win_len: self.win_len,
                step: self.step,
            },
            filter_order: self.filter_order,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ClassifierArg {
    Rf,
    Knn,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GranularityArg {
    Epoch,
    Subject,
}

#[derive(Args, Clone, Debug)]
pub struct ClassifierArgs {
    /// Classifiers to evaluate, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "rf,knn")]
    pub classifier: Vec<ClassifierArg>,
    /// Node measures: "all" or a comma list of cc, sc, ec.
    #[arg(long, default_value = "all")]
    pub measures: String,
    /// Neighbours for kNN.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Trees in the random forest.
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Features tried per split (default: floor(sqrt(features))).
    #[arg(long)]
    pub max_features: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = GranularityArg::Epoch)]
    pub granularity: GranularityArg,
}

impl ClassifierArgs {
    pub fn specs(&self) -> Vec<ClassifierSpec> {
        self.classifier
            .iter()
            .map(|c| match c {
                ClassifierArg::Knn => ClassifierSpec::Knn { k: self.k },
                ClassifierArg::Rf => ClassifierSpec::RandomForest {
                    n_trees: self.trees,
                    max_features: self.max_features,
                },
            })
            .collect()
    }

    pub fn cv(&self, seed: u64) -> CvParams {
        CvParams {
            folds: self.folds,
            repeats: self.repeats,
            seed,
            granularity: match self.granularity {
                GranularityArg::Epoch => CvGranularity::Epoch,
                GranularityArg::Subject => CvGranularity::Subject,
            },
        }
    }
}

/// Parses `N:C`, e.g. `36:0.2`.
pub fn parse_group(s: &str) -> Result<GroupSpec, String> {
    let (n, c) = s
        .split_once(':')
        .ok_or_else(|| format!("expected SUBJECTS:COUPLING, got {s:?}"))?;
    let n_subjects: usize = n.trim().parse().map_err(|e| format!("subject count {n:?}: {e}"))?;
    let coupling: f64 = c.trim().parse().map_err(|e| format!("coupling {c:?}: {e}"))?;
    if n_subjects == 0 {
        return Err("a group needs at least one subject".into());
    }
    if !(0.0..=1.0).contains(&coupling) {
        return Err(format!("coupling {coupling} outside [0, 1]"));
    }
    Ok(GroupSpec { n_subjects, coupling })
}

/// Parses `LOW:HIGH` in Hz.
pub fn parse_band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LOW:HIGH, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
    Ok((lo, hi))
}

/// Parses a threshold grid: either `default` (0, 0.1, ..., 1) or a comma list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    if s == "default" {
        return Ok(cpte::classify::default_grid());
    }
    s.split(',')
        .map(|t| {
            let v: f64 = t.trim().parse().map_err(|e| format!("threshold {t:?}: {e}"))?;
            if (0.0..=1.0).contains(&v) {
                Ok(v)
            } else {
                Err(format!("threshold {v} outside [0, 1]"))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn group_specs() {
        assert_eq!(parse_group("36:0.2").unwrap(), GroupSpec { n_subjects: 36, coupling: 0.2 });
        assert!(parse_group("0:0.2").is_err());
        assert!(parse_group("3:1.5").is_err());
        assert!(parse_group("3").is_err());
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("default").unwrap().len(), 11);
        assert_eq!(parse_grid("0.2, 0.6").unwrap(), vec![0.2, 0.6]);
        assert!(parse_grid("1.2").is_err());
    }
}
