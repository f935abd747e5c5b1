//! Recording to per-epoch synchronization matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpte::{pairwise_cpte, PartitionConfig, SyncMatrix};
use crate::error::{Error, Result};
use crate::ingest::{load_recording, BandSpec, CohortManifest, Recording};
use crate::signal::{filter_recording, segment_filtered, SegmentParams, DEFAULT_FILTER_ORDER};
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub partition: PartitionConfig,
    pub segment: SegmentParams,
    pub filter_order: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            partition: PartitionConfig::default(),
            segment: SegmentParams::default(),
            filter_order: DEFAULT_FILTER_ORDER,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.partition.validate()?;
        self.segment.validate()
    }
}

/// Filters `rec` into `band`, segments it and returns the raw upper-triangle
/// CPTE values of every epoch.
pub fn subject_band_raw<T: Real>(rec: &Recording, band: &BandSpec, cfg: &PipelineConfig) -> Result<Vec<Vec<T>>> {
    cfg.validate()?;
    if rec.n_samples() < cfg.segment.seg_len {
        return Err(Error::RecordingTooShort {
            n_samp: rec.n_samples(),
            seg_len: cfg.segment.seg_len,
        });
    }
    let filtered = filter_recording::<T>(rec, band, cfg.filter_order)?;
    let epochs = segment_filtered(&filtered, &cfg.segment)?;
    epochs
        .par_iter()
        .map(|e| pairwise_cpte(&e.samples, &cfg.partition))
        .collect()
}

/// Filters `rec` into `band`, segments it and computes one matrix per epoch.
pub fn subject_band_matrices<T: Real>(
    rec: &Recording,
    band: &BandSpec,
    cfg: &PipelineConfig,
) -> Result<Vec<SyncMatrix<T>>> {
    subject_band_raw(rec, band, cfg)?
        .iter()
        .enumerate()
        .map(|(e, raw)| {
            SyncMatrix::from_upper_triangle(
                rec.n_channels(),
                raw,
                rec.subject_id.clone(),
                rec.group,
                band.name.clone(),
                e,
                rec.channel_names.clone(),
            )
        })
        .collect()
}

/// Matrices for every subject of `manifest` in `band`, in manifest order.
/// Errors carry the subject id.
pub fn cohort_band_matrices<T: Real>(
    manifest: &CohortManifest,
    band: &BandSpec,
    cfg: &PipelineConfig,
) -> Result<Vec<SyncMatrix<T>>> {
    let per_subject = manifest
        .entries
        .iter()
        .map(|e| {
            let rec = load_recording(&e.path).map_err(|err| err.for_subject(&e.subject_id))?;
            subject_band_matrices(&rec, band, cfg).map_err(|err| err.for_subject(&e.subject_id))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_subject.into_iter().flatten().collect())
}
