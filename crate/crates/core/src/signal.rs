//! Band-pass filtering and sliding-window segmentation.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{BandSpec, Group, Recording};
use crate::Real;

/// One biquad, `a[0]` normalized to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sos<T> {
    pub b: [T; 3],
    pub a: [T; 3],
}

impl<T: Real> Sos<T> {
    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let a1 = self.a[1].as_f64();
        let a2 = self.a[2].as_f64();
        let disc = Complex64::new(a1 * a1 - 4.0 * a2, 0.0).sqrt();
        [(-a1 + disc) / 2.0, (-a1 - disc) / 2.0]
    }

    fn response(&self, z: Complex64) -> Complex64 {
        let zi = z.inv();
        let zi2 = zi * zi;
        let num = self.b[0].as_f64() + self.b[1].as_f64() * zi + self.b[2].as_f64() * zi2;
        let den = 1.0 + self.a[1].as_f64() * zi + self.a[2].as_f64() * zi2;
        num / den
    }
}

/// Butterworth band-pass as a cascade of second-order sections.
///
/// `order` is the order of the low-pass prototype; the band-pass has twice
/// that order and `order` sections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandFilter<T> {
    pub low_hz: f64,
    pub high_hz: f64,
    pub order: usize,
    pub sampling_rate_hz: f64,
    pub sections: Vec<Sos<T>>,
}

pub const DEFAULT_FILTER_ORDER: usize = 4;

pub fn design_bandpass<T: Real>(
    low_hz: f64,
    high_hz: f64,
    order: usize,
    sampling_rate_hz: f64,
) -> Result<BandFilter<T>> {
    if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
        return Err(Error::FilterDesign(format!(
            "sampling rate must be positive, got {sampling_rate_hz}"
        )));
    }
    let nyquist = sampling_rate_hz / 2.0;
    if !(low_hz.is_finite() && high_hz.is_finite()) || low_hz <= 0.0 || high_hz >= nyquist {
        return Err(Error::FilterDesign(format!(
            "band ({low_hz}, {high_hz}) Hz outside (0, {nyquist}) Hz"
        )));
    }
    if low_hz >= high_hz {
        return Err(Error::FilterDesign(format!(
            "low edge {low_hz} Hz must be below high edge {high_hz} Hz"
        )));
    }
    if order == 0 || !order.is_multiple_of(2) {
        return Err(Error::FilterDesign(format!(
            "order must be positive and even, got {order}"
        )));
    }

    // Prewarped analog band edges for the bilinear transform.
    let fs2 = 2.0 * sampling_rate_hz;
    let wl = fs2 * (PI * low_hz / sampling_rate_hz).tan();
    let wh = fs2 * (PI * high_hz / sampling_rate_hz).tan();
    let bw = wh - wl;
    let w0 = (wl * wh).sqrt();

    let n = order as f64;
    let mut sections = Vec::with_capacity(order);
    for k in 0..order / 2 {
        // Upper-half-plane prototype pole; its conjugate yields the paired sections.
        let theta = PI * (2.0 * k as f64 + n + 1.0) / (2.0 * n);
        let proto = Complex64::from_polar(1.0, theta);
        let half = proto * (bw / 2.0);
        let root = (half * half - w0 * w0).sqrt();
        for s in [half + root, half - root] {
            let z = (fs2 + s) / (fs2 - s);
            if !(z.norm() < 1.0) {
                return Err(Error::FilterDesign(format!(
                    "unstable pole |z| = {} for band ({low_hz}, {high_hz}) Hz",
                    z.norm()
                )));
            }
            sections.push(Sos {
                b: [1.0, 0.0, -1.0],
                a: [1.0, -2.0 * z.re, z.norm_sqr()],
            });
        }
    }

    // Unit gain at the digital image of the geometric band centre.
    let wc = 2.0 * (w0 / fs2).atan();
    let zc = Complex64::from_polar(1.0, wc);
    let gain: f64 = sections
        .iter()
        .map(|s| {
            let zi2 = (zc * zc).inv();
            ((1.0 - zi2) / (1.0 + s.a[1] * zc.inv() + s.a[2] * zi2)).norm()
        })
        .product();
    if !(gain.is_finite() && gain > 0.0) {
        return Err(Error::FilterDesign("degenerate passband gain".into()));
    }
    let per_section = gain.powf(-1.0 / sections.len() as f64);

    let sections = sections
        .into_iter()
        .map(|s| Sos {
            b: s.b.map(|v| T::lit(v * per_section)),
            a: s.a.map(T::lit),
        })
        .collect();
    Ok(BandFilter {
        low_hz,
        high_hz,
        order,
        sampling_rate_hz,
        sections,
    })
}

impl<T: Real> BandFilter<T> {
    pub fn for_band(band: &BandSpec, order: usize, sampling_rate_hz: f64) -> Result<Self> {
        design_bandpass(band.low_hz, band.high_hz, order, sampling_rate_hz)
    }

    /// Magnitude response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / self.sampling_rate_hz;
        let z = Complex64::from_polar(1.0, w);
        self.sections
            .iter()
            .map(|s| s.response(z))
            .product::<Complex64>()
            .norm()
    }

    pub fn is_stable(&self) -> bool {
        self.sections
            .iter()
            .all(|s| s.poles().iter().all(|p| p.norm() < 1.0))
    }

    /// Edge padding used by [`filtfilt`]: three times the transfer-function length.
    pub fn padlen(&self) -> usize {
        3 * (2 * self.sections.len() + 1)
    }

    /// Steady-state section states for a unit step input.
    fn step_states(&self) -> Vec<[T; 2]> {
        let mut scale = T::one();
        self.sections
            .iter()
            .map(|s| {
                let dc = (s.b[0] + s.b[1] + s.b[2]) / (s.a[0] + s.a[1] + s.a[2]);
                let y = dc * scale;
                let z1 = s.b[2] * scale - s.a[2] * y;
                let z0 = s.b[1] * scale - s.a[1] * y + z1;
                scale = y;
                [z0, z1]
            })
            .collect()
    }

    /// Single causal pass (direct form II transposed), starting from `states`.
    fn run(&self, x: &mut [T], mut states: Vec<[T; 2]>) {
        for v in x.iter_mut() {
            let mut u = *v;
            for (s, z) in self.sections.iter().zip(states.iter_mut()) {
                let y = s.b[0] * u + z[0];
                z[0] = s.b[1] * u - s.a[1] * y + z[1];
                z[1] = s.b[2] * u - s.a[2] * y;
                u = y;
            }
            *v = u;
        }
    }

    /// Causal filtering from rest.
    pub fn lfilter(&self, x: &[T]) -> Vec<T> {
        let mut y = x.to_vec();
        self.run(&mut y, vec![[T::zero(); 2]; self.sections.len()]);
        y
    }
}

/// Zero-phase forward-backward filtering with odd reflection padding and
/// steady-state initial conditions.
pub fn filtfilt<T: Real>(samples: &[T], filter: &BandFilter<T>) -> Result<Vec<T>> {
    let n = samples.len();
    let padlen = filter.padlen();
    if n <= padlen {
        return Err(Error::SequenceTooShort { len: n, padlen });
    }
    let two = T::lit(2.0);
    let first = samples[0];
    let last = samples[n - 1];
    let mut ext = Vec::with_capacity(n + 2 * padlen);
    ext.extend((1..=padlen).rev().map(|i| two * first - samples[i]));
    ext.extend_from_slice(samples);
    ext.extend((1..=padlen).map(|i| two * last - samples[n - 1 - i]));

    let zi = filter.step_states();
    let scaled = |x0: T| zi.iter().map(|z| [z[0] * x0, z[1] * x0]).collect::<Vec<_>>();

    let x0 = ext[0];
    filter.run(&mut ext, scaled(x0));
    ext.reverse();
    let y0 = ext[0];
    filter.run(&mut ext, scaled(y0));
    ext.reverse();
    Ok(ext[padlen..padlen + n].to_vec())
}

/// Recording channels after band filtering, at working precision.
#[derive(Clone, Debug)]
pub struct FilteredRecording<T> {
    pub subject_id: String,
    pub group: Group,
    pub band: String,
    pub channel_names: Vec<String>,
    pub channels: Vec<Vec<T>>,
}

impl<T: Real> FilteredRecording<T> {
    /// Wraps the raw samples without filtering.
    pub fn unfiltered(rec: &Recording) -> Self {
        Self {
            subject_id: rec.subject_id.clone(),
            group: rec.group,
            band: "raw".into(),
            channel_names: rec.channel_names.clone(),
            channels: rec
                .channels()
                .map(|c| c.iter().map(|&v| T::from_f32(v).unwrap()).collect())
                .collect(),
        }
    }

    pub fn n_samples(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }
}

/// Filters every channel of `rec` into `band`; channels run in parallel.
pub fn filter_recording<T: Real>(
    rec: &Recording,
    band: &BandSpec,
    order: usize,
) -> Result<FilteredRecording<T>> {
    band.validate(Some(rec.sampling_rate_hz))?;
    let filter = BandFilter::<T>::for_band(band, order, rec.sampling_rate_hz)?;
    let channels = rec
        .channels()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|c| {
            let x: Vec<T> = c.iter().map(|&v| T::from_f32(v).unwrap()).collect();
            filtfilt(&x, &filter)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FilteredRecording {
        subject_id: rec.subject_id.clone(),
        group: rec.group,
        band: band.name.clone(),
        channel_names: rec.channel_names.clone(),
        channels,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentParams {
    pub seg_len: usize,
    pub win_len: usize,
    pub step: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            seg_len: 4000,
            win_len: 2000,
            step: 500,
        }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || self.win_len == 0 || self.win_len > self.seg_len {
            return Err(Error::InvalidSegmentation(format!(
                "need 0 < win_len <= seg_len and step > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn windows_per_segment(&self) -> usize {
        (self.seg_len - self.win_len) / self.step + 1
    }

    pub fn epoch_count(&self, n_samp: usize) -> usize {
        (n_samp / self.seg_len) * self.windows_per_segment()
    }
}

/// Location of one epoch inside a recording.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpochSpan {
    pub index: usize,
    pub start: usize,
    pub len: usize,
}

/// Windows per whole segment, in time order. Trailing samples past the last
/// whole segment are dropped.
pub fn epoch_spans(n_samp: usize, params: &SegmentParams) -> Result<Vec<EpochSpan>> {
    params.validate()?;
    if n_samp < params.seg_len {
        return Err(Error::RecordingTooShort {
            n_samp,
            seg_len: params.seg_len,
        });
    }
    let per_seg = params.windows_per_segment();
    let mut spans = Vec::with_capacity(params.epoch_count(n_samp));
    for seg in 0..n_samp / params.seg_len {
        for w in 0..per_seg {
            spans.push(EpochSpan {
                index: spans.len(),
                start: seg * params.seg_len + w * params.step,
                len: params.win_len,
            });
        }
    }
    Ok(spans)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Epoch<T> {
    pub subject_id: String,
    pub group: Group,
    pub band: String,
    pub epoch_index: usize,
    pub channel_names: Vec<String>,
    /// Channel-major, `n_ch` rows of `win_len` samples.
    pub samples: Vec<Vec<T>>,
}

impl<T: Real> Epoch<T> {
    pub fn n_channels(&self) -> usize {
        self.samples.len()
    }
}

/// Cuts already-filtered channels into epochs.
pub fn segment_filtered<T: Real>(
    rec: &FilteredRecording<T>,
    params: &SegmentParams,
) -> Result<Vec<Epoch<T>>> {
    let spans = epoch_spans(rec.n_samples(), params)?;
    Ok(spans
        .iter()
        .map(|sp| Epoch {
            subject_id: rec.subject_id.clone(),
            group: rec.group,
            band: rec.band.clone(),
            epoch_index: sp.index,
            channel_names: rec.channel_names.clone(),
            samples: rec
                .channels
                .iter()
                .map(|c| c[sp.start..sp.start + sp.len].to_vec())
                .collect(),
        })
        .collect())
}

/// Cuts the raw recording into epochs (band label `"raw"`).
pub fn segment<T: Real>(rec: &Recording, params: &SegmentParams) -> Result<Vec<Epoch<T>>> {
    params.validate()?;
    if rec.n_samples() < params.seg_len {
        return Err(Error::RecordingTooShort {
            n_samp: rec.n_samples(),
            seg_len: params.seg_len,
        });
    }
    segment_filtered(&FilteredRecording::unfiltered(rec), params)
}
