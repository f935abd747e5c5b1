//! On-disk recording format and cohort manifests.
//!
//! A recording is a payload file plus a JSON sidecar sharing its basename
//! (`sub-01.bin` + `sub-01.json`). The binary payload holds little-endian
//! `f32` samples, channel-major: all samples of channel 0, then channel 1,
//! and so on. A payload with a `.csv` extension is read as text instead,
//! one comma-separated row per channel.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    GroupA,
    GroupB,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::GroupA, Group::GroupB];

    pub fn index(self) -> usize {
        match self {
            Group::GroupA => 0,
            Group::GroupB => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Group> {
        match i {
            0 => Some(Group::GroupA),
            1 => Some(Group::GroupB),
            _ => None,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::GroupA => f.write_str("GroupA"),
            Group::GroupB => f.write_str("GroupB"),
        }
    }
}

/// A multichannel recording, samples kept at payload precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub group: Group,
    pub sampling_rate_hz: f64,
    pub channel_names: Vec<String>,
    n_samp: usize,
    samples: Vec<f32>,
}

impl Recording {
    /// Builds a recording from channel-major `samples`, checking every invariant.
    pub fn new(
        subject_id: impl Into<String>,
        group: Group,
        sampling_rate_hz: f64,
        channel_names: Vec<String>,
        samples: Vec<f32>,
    ) -> Result<Self> {
        let n_ch = channel_names.len();
        if n_ch < 2 {
            return Err(Error::ChannelCountMismatch(format!(
                "recording needs at least 2 channels, got {n_ch}"
            )));
        }
        if !samples.len().is_multiple_of(n_ch) {
            return Err(Error::ChannelCountMismatch(format!(
                "{} samples cannot be split across {n_ch} channels",
                samples.len()
            )));
        }
        let n_samp = samples.len() / n_ch;
        if n_samp == 0 {
            return Err(Error::InvalidRecording("recording has no samples".into()));
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::InvalidRecording(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        let mut seen = HashSet::new();
        for name in &channel_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidRecording(format!(
                    "duplicate channel name {name:?}"
                )));
            }
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteSample {
                channel: pos / n_samp,
                index: pos % n_samp,
            });
        }
        Ok(Self {
            subject_id: subject_id.into(),
            group,
            sampling_rate_hz,
            channel_names,
            n_samp,
            samples,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samp
    }

    pub fn channel(&self, i: usize) -> &[f32] {
        &self.samples[i * self.n_samp..(i + 1) * self.n_samp]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f32]> {
        self.samples.chunks_exact(self.n_samp)
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    subject_id: String,
    group: Group,
    sampling_rate_hz: f64,
    channel_names: Vec<String>,
    n_samp: usize,
}

pub fn sidecar_path(payload: &Path) -> PathBuf {
    payload.with_extension("json")
}

fn is_text_payload(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Writes the payload (binary, or text when `path` ends in `.csv`) and its sidecar.
pub fn save_recording(rec: &Recording, path: &Path) -> Result<()> {
    if is_text_payload(path) {
        let mut text = String::new();
        for ch in rec.channels() {
            let row: Vec<String> = ch.iter().map(|v| v.to_string()).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    } else {
        let mut buf = Vec::with_capacity(rec.samples.len() * 4);
        for v in &rec.samples {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))?;
    }
    let sidecar = Sidecar {
        subject_id: rec.subject_id.clone(),
        group: rec.group,
        sampling_rate_hz: rec.sampling_rate_hz,
        channel_names: rec.channel_names.clone(),
        n_samp: rec.n_samp,
    };
    let sc_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&sc_path, json).map_err(|e| Error::io(&sc_path, e))
}

pub fn load_recording(path: &Path) -> Result<Recording> {
    let sc_path = sidecar_path(path);
    if !sc_path.is_file() {
        return Err(Error::MissingSidecar(sc_path));
    }
    let sc_text = fs::read_to_string(&sc_path).map_err(|e| Error::io(&sc_path, e))?;
    let sc: Sidecar = serde_json::from_str(&sc_text).map_err(|e| Error::MalformedSidecar {
        path: sc_path.clone(),
        msg: e.to_string(),
    })?;
    let n_ch = sc.channel_names.len();
    if n_ch == 0 {
        return Err(Error::ChannelCountMismatch(
            "sidecar declares 0 channels".into(),
        ));
    }
    if sc.n_samp == 0 {
        return Err(Error::InvalidRecording("sidecar declares 0 samples".into()));
    }
    let samples = if is_text_payload(path) {
        read_text_payload(path, n_ch, sc.n_samp)?
    } else {
        read_binary_payload(path, n_ch, sc.n_samp)?
    };
    Recording::new(
        sc.subject_id,
        sc.group,
        sc.sampling_rate_hz,
        sc.channel_names,
        samples,
    )
}

fn read_binary_payload(path: &Path, n_ch: usize, n_samp: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = n_ch * n_samp * 4;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload(format!(
            "{}: expected {expected} bytes, found {}",
            path.display(),
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(Error::ChannelCountMismatch(format!(
            "{}: payload holds {} bytes, header declares {n_ch} channels x {n_samp} samples",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn read_text_payload(path: &Path, n_ch: usize, n_samp: usize) -> Result<Vec<f32>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.len() != n_ch {
        return Err(Error::ChannelCountMismatch(format!(
            "{}: {} rows, header declares {n_ch} channels",
            path.display(),
            rows.len()
        )));
    }
    let mut out = Vec::with_capacity(n_ch * n_samp);
    for (ch, row) in rows.iter().enumerate() {
        let before = out.len();
        for field in row.split(',') {
            let v: f32 = field.trim().parse().map_err(|_| {
                Error::InvalidRecording(format!(
                    "{}: unparseable value {field:?} in channel {ch}",
                    path.display()
                ))
            })?;
            out.push(v);
        }
        let got = out.len() - before;
        if got < n_samp {
            return Err(Error::TruncatedPayload(format!(
                "{}: channel {ch} has {got} samples, header declares {n_samp}",
                path.display()
            )));
        }
        if got > n_samp {
            return Err(Error::InvalidRecording(format!(
                "{}: channel {ch} has {got} samples, header declares {n_samp}",
                path.display()
            )));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub low_hz: f64,
    pub high_hz: f64,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, low_hz: f64, high_hz: f64) -> Self {
        Self {
            name: name.into(),
            low_hz,
            high_hz,
        }
    }

    /// Checks `0 < low < high`, and `high < fs/2` when a rate is given.
    pub fn validate(&self, sampling_rate_hz: Option<f64>) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::MalformedBand("band name is empty".into()));
        }
        if !(self.low_hz.is_finite() && self.high_hz.is_finite()) || self.low_hz <= 0.0 {
            return Err(Error::MalformedBand(format!(
                "{}: edges must be finite and positive",
                self.name
            )));
        }
        if self.low_hz >= self.high_hz {
            return Err(Error::MalformedBand(format!(
                "{}: low {} >= high {}",
                self.name, self.low_hz, self.high_hz
            )));
        }
        if let Some(fs) = sampling_rate_hz {
            if self.high_hz >= fs / 2.0 {
                return Err(Error::MalformedBand(format!(
                    "{}: high edge {} Hz not below Nyquist {} Hz",
                    self.name,
                    self.high_hz,
                    fs / 2.0
                )));
            }
        }
        Ok(())
    }
}

/// The broadband condition followed by the five clinical bands.
pub fn default_bands() -> Vec<BandSpec> {
    vec![
        BandSpec::new("all", 0.5, 44.0),
        BandSpec::new("delta", 0.5, 4.0),
        BandSpec::new("theta", 4.0, 8.0),
        BandSpec::new("alpha", 8.0, 13.0),
        BandSpec::new("beta", 13.0, 30.0),
        BandSpec::new("gamma", 31.0, 44.0),
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub group: Group,
    pub path: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(default = "default_bands")]
    pub bands: Vec<BandSpec>,
    /// Shared sampling rate, when known; enables the Nyquist check at load time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_rate_hz: Option<f64>,
}

impl CohortManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.subject_id.as_str()) {
                return Err(Error::DuplicateSubject(e.subject_id.clone()));
            }
        }
        if self.bands.is_empty() {
            return Err(Error::MalformedBand("manifest lists no bands".into()));
        }
        let mut names = HashSet::new();
        for b in &self.bands {
            b.validate(self.sampling_rate_hz)?;
            if !names.insert(b.name.as_str()) {
                return Err(Error::MalformedBand(format!("duplicate band {:?}", b.name)));
            }
        }
        Ok(())
    }

    pub fn band(&self, name: &str) -> Option<&BandSpec> {
        self.bands.iter().find(|b| b.name == name)
    }

    pub fn count(&self, group: Group) -> usize {
        self.entries.iter().filter(|e| e.group == group).count()
    }
}

/// Loads and validates a manifest. Relative entry paths resolve against the
/// manifest's directory; the returned entries carry resolved paths.
pub fn load_manifest(path: &Path) -> Result<CohortManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: CohortManifest =
        serde_json::from_str(&text).map_err(|e| classify_manifest_error(&text, &e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    for e in &mut manifest.entries {
        if e.path.is_relative() {
            e.path = base.join(&e.path);
        }
    }
    manifest.validate()?;
    for e in &manifest.entries {
        if !e.path.is_file() {
            return Err(Error::MissingFile {
                subject: e.subject_id.clone(),
                path: e.path.clone(),
            });
        }
    }
    Ok(manifest)
}

/// A manifest that fails to parse because of its band list reports a band error.
fn classify_manifest_error(text: &str, e: &serde_json::Error) -> Error {
    let bands = serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| v.get("bands").cloned());
    match bands.map(serde_json::from_value::<Vec<BandSpec>>) {
        Some(Err(be)) => Error::MalformedBand(be.to_string()),
        _ => Error::MalformedManifest(e.to_string()),
    }
}

/// Writes `manifest` as JSON; entry paths inside the manifest's directory
/// are stored relative to it.
pub fn save_manifest(manifest: &CohortManifest, path: &Path) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = manifest.clone();
    for e in &mut out.entries {
        if let Ok(rel) = e.path.strip_prefix(base) {
            e.path = rel.to_path_buf();
        }
    }
    let json = serde_json::to_string_pretty(&out).expect("manifest serializes");
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("ch{i}")).collect()
    }

    fn small_recording() -> Recording {
        let samples: Vec<f32> = (0..12).map(|i| i as f32 * 0.5 - 1.25).collect();
        Recording::new("s1", Group::GroupA, 500.0, names(3), samples).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.bin");
        let rec = small_recording();
        save_recording(&rec, &path).unwrap();
        let back = load_recording(&path).unwrap();
        assert_eq!(rec, back);
        assert_eq!(back.channel(1), &[0.75, 1.25, 1.75, 2.25]);
    }

    #[test]
    fn text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.csv");
        let rec = small_recording();
        save_recording(&rec, &path).unwrap();
        assert_eq!(load_recording(&path).unwrap(), rec);
    }

    #[test]
    fn missing_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        fs::write(&path, [0u8; 16]).unwrap();
        assert!(matches!(load_recording(&path), Err(Error::MissingSidecar(_))));
    }

    #[test]
    fn truncated_and_oversized_payloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.bin");
        save_recording(&small_recording(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();

        fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        let err = load_recording(&path).unwrap_err();
        assert!(matches!(err, Error::TruncatedPayload(_)), "{err}");
        assert!(err.to_string().contains("truncated payload"));

        let mut longer = bytes.clone();
        longer.extend_from_slice(&[0u8; 16]);
        fs::write(&path, longer).unwrap();
        assert!(matches!(
            load_recording(&path),
            Err(Error::ChannelCountMismatch(_))
        ));
    }

    #[test]
    fn zero_channels_is_channel_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.bin");
        fs::write(&path, []).unwrap();
        fs::write(
            sidecar_path(&path),
            r#"{"subject_id":"z","group":"GroupA","sampling_rate_hz":500.0,"channel_names":[],"n_samp":10}"#,
        )
        .unwrap();
        let err = load_recording(&path).unwrap_err();
        assert!(err.to_string().contains("channel count mismatch"), "{err}");
    }

    #[test]
    fn nan_sample_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s1.bin");
        save_recording(&small_recording(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_recording(&path),
            Err(Error::NonFiniteSample { channel: 1, index: 1 })
        ));
    }

    #[test]
    fn recording_invariants() {
        assert!(Recording::new("a", Group::GroupA, 500.0, names(1), vec![1.0]).is_err());
        assert!(Recording::new("a", Group::GroupA, 0.0, names(2), vec![1.0, 2.0]).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(Recording::new("a", Group::GroupA, 500.0, dup, vec![1.0, 2.0]).is_err());
        assert!(Recording::new("a", Group::GroupA, 500.0, names(2), vec![1.0, 2.0, 3.0]).is_err());
    }

    fn write_manifest(dir: &Path, entries: &[(&str, Group)], bands: &str) -> PathBuf {
        let mut items = Vec::new();
        for (id, g) in entries {
            let p = dir.join(format!("{id}.bin"));
            if !p.exists() {
                fs::write(&p, []).unwrap();
            }
            items.push(format!(r#"{{"subject_id":"{id}","group":"{g}","path":"{id}.bin"}}"#));
        }
        let text = format!(r#"{{"entries":[{}],"bands":{bands}}}"#, items.join(","));
        let path = dir.join("manifest.json");
        fs::write(&path, text).unwrap();
        path
    }

    #[test]
    fn manifest_with_59_entries() {
        let dir = tempfile::tempdir().unwrap();
        let mut entries = Vec::new();
        let ids: Vec<String> = (0..59).map(|i| format!("sub{i:02}")).collect();
        for (i, id) in ids.iter().enumerate() {
            entries.push((id.as_str(), if i < 36 { Group::GroupA } else { Group::GroupB }));
        }
        let path = write_manifest(dir.path(), &entries, r#"[{"name":"all","low_hz":0.5,"high_hz":44}]"#);
        let m = load_manifest(&path).unwrap();
        assert_eq!(m.entries.len(), 59);
        assert_eq!(m.count(Group::GroupA), 36);
        assert_eq!(m.count(Group::GroupB), 23);
        assert!(m.entries[0].path.is_absolute() || m.entries[0].path.starts_with(dir.path()));
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bands = r#"[{"name":"all","low_hz":0.5,"high_hz":44}]"#;
        let path = write_manifest(dir.path(), &[("a", Group::GroupA), ("a", Group::GroupB)], bands);
        assert!(matches!(load_manifest(&path), Err(Error::DuplicateSubject(_))));

        let path = write_manifest(
            dir.path(),
            &[("a", Group::GroupA)],
            r#"[{"name":"bad","low_hz":8,"high_hz":4}]"#,
        );
        assert!(matches!(load_manifest(&path), Err(Error::MalformedBand(_))));

        let path = write_manifest(dir.path(), &[("a", Group::GroupA)], r#"[{"name":"x","low_hz":"z"}]"#);
        assert!(matches!(load_manifest(&path), Err(Error::MalformedBand(_))));

        let path = write_manifest(dir.path(), &[("b", Group::GroupA)], bands);
        fs::remove_file(dir.path().join("b.bin")).unwrap();
        assert!(matches!(load_manifest(&path), Err(Error::MissingFile { .. })));
    }

    #[test]
    fn default_bands_are_valid_at_500_hz() {
        for b in default_bands() {
            b.validate(Some(500.0)).unwrap();
        }
        assert!(BandSpec::new("x", 10.0, 260.0).validate(Some(500.0)).is_err());
    }
}
