//! Content-addressed store of per-epoch raw CPTE values.
//!
//! One file per (subject, band, pipeline config, recording content). The
//! file holds a one-line JSON header followed by the raw upper-triangle
//! values of every epoch as little-endian `f64`. Normalized matrices are
//! rebuilt from the raw values, so a cache hit is bit-identical to a fresh
//! computation.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cpte::ingest::{load_recording, sidecar_path, ManifestEntry};
use cpte::pipeline::{subject_band_raw, PipelineConfig};
use cpte::{BandSpec, SyncMatrix64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Serialize, Deserialize)]
struct Header {
    subject_id: String,
    band: String,
    n: usize,
    n_epochs: usize,
    channel_names: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct MatrixCache {
    dir: PathBuf,
}

impl MatrixCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn key(entry: &ManifestEntry, band: &BandSpec, cfg: &PipelineConfig) -> Result<String> {
        let mut h = Sha256::new();
        let meta = serde_json::json!({
            "subject_id": entry.subject_id,
            "group": entry.group,
            "band": band,
            "pipeline": cfg,
        });
        h.update(serde_json::to_vec(&meta)?);
        for path in [entry.path.clone(), sidecar_path(&entry.path)] {
            let bytes = fs::read(&path).with_context(|| format!("reading {}", path.display()))?;
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(&bytes);
        }
        Ok(hex::encode(h.finalize()))
    }

    /// Matrices of one subject in one band, computed on a miss.
    pub fn subject_band(&self, entry: &ManifestEntry, band: &BandSpec, cfg: &PipelineConfig) -> Result<Vec<SyncMatrix64>> {
        let key = Self::key(entry, band, cfg)?;
        let path = self.dir.join(format!("{key}.bin"));
        if let Ok(bytes) = fs::read(&path) {
            if let Ok(m) = decode(&bytes, entry) {
                return Ok(m);
            }
        }
        let rec = load_recording(&entry.path)?;
        if rec.group != entry.group {
            bail!(
                "manifest lists group {} but the recording sidecar says {}",
                entry.group,
                rec.group
            );
        }
        let raw = subject_band_raw::<f64>(&rec, band, cfg)?;
        let header = Header {
            subject_id: rec.subject_id.clone(),
            band: band.name.clone(),
            n: rec.n_channels(),
            n_epochs: raw.len(),
            channel_names: rec.channel_names.clone(),
        };
        let bytes = encode(&header, &raw)?;
        self.store(&path, &bytes)?;
        decode(&bytes, entry)
    }

    fn store(&self, path: &Path, bytes: &[u8]) -> Result<()> {
        fs::create_dir_all(&self.dir).with_context(|| format!("creating {}", self.dir.display()))?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        drop(f);
        fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

fn encode(header: &Header, raw: &[Vec<f64>]) -> Result<Vec<u8>> {
    let mut buf = serde_json::to_vec(header)?;
    buf.push(b'\n');
    for v in raw.iter().flatten() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

fn decode(bytes: &[u8], entry: &ManifestEntry) -> Result<Vec<SyncMatrix64>> {
    let nl = bytes.iter().position(|&b| b == b'\n').context("missing header")?;
    let header: Header = serde_json::from_slice(&bytes[..nl])?;
    let pairs = header.n * (header.n - 1) / 2;
    let body = &bytes[nl + 1..];
    if body.len() != header.n_epochs * pairs * 8 {
        bail!("cache entry has the wrong size");
    }
    body.chunks_exact(pairs * 8)
        .enumerate()
        .map(|(e, chunk)| {
            let raw: Vec<f64> = chunk
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect();
            Ok(SyncMatrix64::from_upper_triangle(
                header.n,
                &raw,
                header.subject_id.clone(),
                entry.group,
                header.band.clone(),
                e,
                header.channel_names.clone(),
            )?)
        })
        .collect()
}
