//! Seeded synthetic recordings with known coupling.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{default_bands, save_manifest, save_recording, CohortManifest, Group, ManifestEntry, Recording};
use crate::seed::derive_seed;
use crate::signal::{design_bandpass, filtfilt, DEFAULT_FILTER_ORDER};

pub const TEN_TWENTY: [&str; 19] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T3", "C3", "Cz", "C4", "T4", "T5", "P3", "Pz", "P4", "T6", "O1", "O2",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub coupling: f64,
    pub n_channels: usize,
    pub n_samples: usize,
    pub sampling_rate_hz: f64,
    pub source_band: (f64, f64),
    /// Output scale; each mixed channel has standard deviation of about this much.
    pub noise_amplitude: f64,
    pub seed: u64,
}

impl Default for CouplingSpec {
    /// 19 channels of 120000 samples at 500 Hz: exactly 150 default epochs.
    fn default() -> Self {
        Self {
            coupling: 0.0,
            n_channels: 19,
            n_samples: 120_000,
            sampling_rate_hz: 500.0,
            source_band: (0.5, 44.0),
            noise_amplitude: 20.0,
            seed: 0,
        }
    }
}

impl CouplingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(Error::InvalidCoupling(format!("coupling {} outside [0, 1]", self.coupling)));
        }
        if self.n_channels < 2 {
            return Err(Error::InvalidCoupling(format!("need at least 2 channels, got {}", self.n_channels)));
        }
        if !(self.noise_amplitude.is_finite() && self.noise_amplitude > 0.0) {
            return Err(Error::InvalidCoupling(format!("noise amplitude {} must be positive", self.noise_amplitude)));
        }
        let (lo, hi) = self.source_band;
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(Error::InvalidCoupling(format!("sampling rate {} must be positive", self.sampling_rate_hz)));
        }
        if !(lo > 0.0 && lo < hi && hi < self.sampling_rate_hz / 2.0) {
            return Err(Error::MalformedBand(format!(
                "source band ({lo}, {hi}) must satisfy 0 < low < high < {}",
                self.sampling_rate_hz / 2.0
            )));
        }
        Ok(())
    }
}

/// White Gaussian noise through the source band filter, rescaled to zero mean and unit variance.
///
/// Extra samples are generated on both sides and dropped so the start-up
/// transient of the slowest filter pole does not leak into the output.
fn band_noise(spec: &CouplingSpec, seed: u64) -> Result<Vec<f64>> {
    let filter = design_bandpass::<f64>(spec.source_band.0, spec.source_band.1, DEFAULT_FILTER_ORDER, spec.sampling_rate_hz)?;
    let radius = filter
        .sections
        .iter()
        .flat_map(|s| s.poles())
        .map(|p| p.norm())
        .fold(0.0, f64::max);
    let margin = ((1e-9f64).ln() / radius.ln()).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let white: Vec<f64> = (0..spec.n_samples + 2 * margin).map(|_| rng.sample(StandardNormal)).collect();
    let mut x = filtfilt(&white, &filter)?;
    x.truncate(margin + spec.n_samples);
    x.drain(..margin);
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    for v in &mut x {
        *v = (*v - mean) / sd;
    }
    Ok(x)
}

/// `n_channels` series `x_i = A((1 - c) xi_i + c s)` sharing one source `s`.
pub fn gen_coupled_channels(spec: &CouplingSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let c = spec.coupling;
    let s = band_noise(spec, derive_seed(spec.seed, &[0]))?;
    (0..spec.n_channels)
        .map(|i| {
            let xi = if c == 1.0 {
                vec![0.0; spec.n_samples]
            } else {
                band_noise(spec, derive_seed(spec.seed, &[1, i as u64]))?
            };
            Ok(xi
                .iter()
                .zip(&s)
                .map(|(&a, &b)| spec.noise_amplitude * ((1.0 - c) * a + c * b))
                .collect())
        })
        .collect()
}

/// Two channels of [`gen_coupled_channels`]; `n_channels` is ignored.
pub fn gen_coupled_pair(spec: &CouplingSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut ch = gen_coupled_channels(&CouplingSpec { n_channels: 2, ..spec.clone() })?;
    let y = ch.pop().expect("two channels");
    let x = ch.pop().expect("two channels");
    Ok((x, y))
}

/// Unidirectionally coupled Hénon maps, `x` driving `y`:
///
/// ```text
/// x[n+1] = 1.4 - x[n]^2 + 0.3 x[n-1]
/// y[n+1] = 1.4 - (c x[n] + (1 - c) y[n]) y[n] + 0.3 y[n-1]
/// ```
///
/// The first 1000 iterates are discarded. Orbits that escape are restarted
/// from fresh initial conditions.
pub fn gen_henon_pair(coupling: f64, n_samples: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&coupling) {
        return Err(Error::InvalidCoupling(format!("coupling {coupling} outside [0, 1]")));
    }
    const TRANSIENT: usize = 1000;
    for attempt in 0..64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[attempt]));
        let mut x = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
        let mut y = [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)];
        let mut xs = Vec::with_capacity(n_samples);
        let mut ys = Vec::with_capacity(n_samples);
        let mut escaped = false;
        for step in 0..TRANSIENT + n_samples {
            let xn = 1.4 - x[1] * x[1] + 0.3 * x[0];
            let yn = 1.4 - (coupling * x[1] + (1.0 - coupling) * y[1]) * y[1] + 0.3 * y[0];
            if !(xn.abs() < 1e3 && yn.abs() < 1e3) {
                escaped = true;
                break;
            }
            x = [x[1], xn];
            y = [y[1], yn];
            if step >= TRANSIENT {
                xs.push(xn);
                ys.push(yn);
            }
        }
        if !escaped {
            return Ok((xs, ys));
        }
    }
    Err(Error::InvalidCoupling(format!("Hénon orbit escapes at coupling {coupling}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub n_subjects: usize,
    pub coupling: f64,
}

pub fn channel_names(n: usize) -> Vec<String> {
    if n == TEN_TWENTY.len() {
        TEN_TWENTY.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=n).map(|i| format!("ch{i:02}")).collect()
    }
}

pub fn subject_id(group: Group, index: usize) -> String {
    let tag = match group {
        Group::GroupA => 'A',
        Group::GroupB => 'B',
    };
    format!("{tag}{:03}", index + 1)
}

/// Writes one recording per subject plus `manifest.json` into `dir`.
/// Returns the manifest (entries with absolute-or-joined paths) and its path.
pub fn gen_cohort(
    dir: &Path,
    group_a: GroupSpec,
    group_b: GroupSpec,
    base: &CouplingSpec,
    seed: u64,
) -> Result<(CohortManifest, PathBuf)> {
    for (g, spec) in [(Group::GroupA, group_a), (Group::GroupB, group_b)] {
        if spec.n_subjects == 0 {
            return Err(Error::InvalidParameter(format!("{g} needs at least one subject")));
        }
        CouplingSpec { coupling: spec.coupling, ..base.clone() }.validate()?;
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let jobs: Vec<(Group, usize, f64)> = [(Group::GroupA, group_a), (Group::GroupB, group_b)]
        .iter()
        .flat_map(|&(g, s)| (0..s.n_subjects).map(move |i| (g, i, s.coupling)))
        .collect();
    let names = channel_names(base.n_channels);

    let entries = jobs
        .par_iter()
        .map(|&(group, i, coupling)| {
            let id = subject_id(group, i);
            let spec = CouplingSpec {
                coupling,
                seed: derive_seed(seed, &[group.index() as u64, i as u64]),
                ..base.clone()
            };
            let channels = gen_coupled_channels(&spec)?;
            let samples: Vec<f32> = channels.iter().flatten().map(|&v| v as f32).collect();
            let rec = Recording::new(id.clone(), group, base.sampling_rate_hz, names.clone(), samples)?;
            let path = dir.join(format!("{id}.bin"));
            save_recording(&rec, &path)?;
            Ok(ManifestEntry { subject_id: id, group, path })
        })
        .collect::<Result<Vec<_>>>()?;

    let bands = default_bands()
        .into_iter()
        .filter(|b| b.validate(Some(base.sampling_rate_hz)).is_ok())
        .collect();
    let manifest = CohortManifest {
        entries,
        bands,
        sampling_rate_hz: Some(base.sampling_rate_hz),
    };
    manifest.validate()?;
    let path = dir.join("manifest.json");
    save_manifest(&manifest, &path)?;
    Ok((manifest, path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(c: f64, seed: u64) -> CouplingSpec {
        CouplingSpec {
            coupling: c,
            n_samples: 2000,
            seed,
            ..CouplingSpec::default()
        }
    }

    fn corr(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn full_coupling_is_identical() {
        let (x, y) = gen_coupled_pair(&spec(1.0, 3)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn zero_coupling_is_uncorrelated() {
        for seed in 0..5 {
            let (x, y) = gen_coupled_pair(&spec(0.0, seed)).unwrap();
            assert!(corr(&x, &y).abs() < 0.1, "seed {seed}: {}", corr(&x, &y));
        }
    }

    #[test]
    fn correlation_grows_with_coupling() {
        let r: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&c| {
                let (x, y) = gen_coupled_pair(&spec(c, 11)).unwrap();
                corr(&x, &y)
            })
            .collect();
        assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
    }

    #[test]
    fn deterministic() {
        assert_eq!(gen_coupled_pair(&spec(0.4, 9)).unwrap(), gen_coupled_pair(&spec(0.4, 9)).unwrap());
        assert_ne!(gen_coupled_pair(&spec(0.4, 9)).unwrap(), gen_coupled_pair(&spec(0.4, 10)).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(matches!(gen_coupled_pair(&spec(1.5, 0)), Err(Error::InvalidCoupling(_))));
        let s = CouplingSpec { source_band: (10.0, 300.0), ..spec(0.5, 0) };
        assert!(matches!(gen_coupled_pair(&s), Err(Error::MalformedBand(_))));
    }

    #[test]
    fn henon_bounded_and_synchronizes() {
        let (x, y) = gen_henon_pair(0.0, 3000, 1).unwrap();
        assert!(x.iter().chain(&y).all(|v| v.abs() < 2.0));
        assert!(corr(&x, &y).abs() < 0.2);
        let (x, y) = gen_henon_pair(0.9, 3000, 1).unwrap();
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn small_cohort_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let base = CouplingSpec { n_channels: 3, n_samples: 4000, ..CouplingSpec::default() };
        let (m, path) = gen_cohort(
            dir.path(),
            GroupSpec { n_subjects: 1, coupling: 0.2 },
            GroupSpec { n_subjects: 1, coupling: 0.6 },
            &base,
            5,
        )
        .unwrap();
        assert_eq!(m.entries.len(), 2);
        let loaded = crate::ingest::load_manifest(&path).unwrap();
        assert_eq!(loaded.entries.len(), 2);
        let rec = crate::ingest::load_recording(&loaded.entries[1].path).unwrap();
        assert_eq!(rec.subject_id, "B001");
        assert_eq!(rec.n_channels(), 3);
        assert_eq!(rec.n_samples(), 4000);
        assert!(gen_cohort(
            dir.path(),
            GroupSpec { n_subjects: 0, coupling: 0.2 },
            GroupSpec { n_subjects: 1, coupling: 0.6 },
            &base,
            5
        )
        .is_err());
    }

    #[test]
    fn ten_twenty_names() {
        assert_eq!(channel_names(19)[0], "Fp1");
        assert_eq!(channel_names(3), vec!["ch01", "ch02", "ch03"]);
    }
}
