//! Cross-plot transition entropy.
//!
//! Two series are shifted so their minima sit at zero and plotted against
//! each other in the first quadrant. The quadrant is cut into rings and
//! angular sectors; each sample pair falls into one cell (a state). The
//! entropy of the distribution of consecutive state transitions is the
//! CPTE of the pair: low values mean the pair moves through few, regular
//! transitions, i.e. strong coupling.
//!
//! The sector partition is mirror-symmetric about the diagonal `x = y`:
//! angles below 45° are binned from the x axis, angles above 45° from the
//! y axis, and swapping the two series maps sector `s` to `n_θ - 1 - s`.
//! When `n_θ` is odd the diagonal lies inside the middle sector and
//! `cpte(x, y) == cpte(y, x)` holds bit for bit. The origin (both series
//! at their minimum) has no angle and is placed on the diagonal.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Group;
use crate::signal::Epoch;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RadialMode {
    /// `radial_rings` equal-width rings scaled to the pair's largest radius.
    Normalized,
    /// Rings of fixed width `radial_ruler`, in input units.
    Absolute,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    pub angular_ruler_deg: f64,
    pub radial_mode: RadialMode,
    pub radial_rings: usize,
    pub radial_ruler: f64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        Self {
            angular_ruler_deg: 10.0,
            radial_mode: RadialMode::Normalized,
            radial_rings: 5,
            radial_ruler: 10.0,
        }
    }
}

impl PartitionConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.angular_ruler_deg;
        if !(d.is_finite() && d > 0.0 && d <= 90.0) {
            return Err(Error::InvalidPartition(format!(
                "angular ruler must lie in (0, 90] degrees, got {d}"
            )));
        }
        match self.radial_mode {
            RadialMode::Normalized if self.radial_rings == 0 => Err(Error::InvalidPartition(
                "radial_rings must be at least 1".into(),
            )),
            RadialMode::Absolute if !(self.radial_ruler.is_finite() && self.radial_ruler > 0.0) => {
                Err(Error::InvalidPartition(format!(
                    "radial ruler must be positive, got {}",
                    self.radial_ruler
                )))
            }
            _ => Ok(()),
        }
    }

    /// `ceil(90 / dθ)`.
    pub fn n_sectors(&self) -> usize {
        (90.0 / self.angular_ruler_deg).ceil() as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CrossPlotState {
    pub ring: u32,
    pub sector: u32,
}

/// Precomputed sector boundaries for one partition config.
#[derive(Clone, Debug)]
struct Partition<T> {
    cfg: PartitionConfig,
    n_sectors: u32,
    /// `tan` of every sector boundary strictly below 45°, ascending.
    tangents: Vec<T>,
}

impl<T: Real> Partition<T> {
    fn new(cfg: &PartitionConfig) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.angular_ruler_deg;
        let tangents = (1..)
            .map(|k| k as f64 * d)
            .take_while(|&deg| deg < 45.0)
            .map(|deg| T::lit(deg.to_radians().tan()))
            .collect();
        Ok(Self {
            cfg: *cfg,
            n_sectors: cfg.n_sectors() as u32,
            tangents,
        })
    }

    /// Sector of a point with nonnegative coordinates.
    #[inline]
    fn sector(&self, x: T, y: T) -> u32 {
        let (lo, hi, upper) = if y > x { (x, y, true) } else { (y, x, false) };
        let k = self.tangents.iter().take_while(|&&t| lo >= hi * t).count() as u32;
        if upper {
            self.n_sectors - 1 - k
        } else {
            k
        }
    }

    /// Encodes into `out`; inputs must be finite and of equal length.
    fn encode_into(&self, x: &[T], y: &[T], out: &mut Vec<CrossPlotState>) {
        let xmin = x.iter().copied().fold(T::infinity(), T::min);
        let ymin = y.iter().copied().fold(T::infinity(), T::min);
        let mut radii = Vec::with_capacity(x.len());
        let mut rmax = T::zero();
        for (&a, &b) in x.iter().zip(y) {
            let (u, v) = (a - xmin, b - ymin);
            let r = (u * u + v * v).sqrt();
            rmax = rmax.max(r);
            radii.push(r);
        }
        let (ring_scale, ring_cap) = match self.cfg.radial_mode {
            RadialMode::Normalized => {
                let rings = self.cfg.radial_rings;
                let scale = if rmax > T::zero() {
                    T::lit(rings as f64) / rmax
                } else {
                    T::zero()
                };
                (scale, rings as u32 - 1)
            }
            RadialMode::Absolute => {
                let dr = T::lit(self.cfg.radial_ruler);
                let count = (rmax / dr).ceil().to_u32().unwrap_or(u32::MAX).max(1);
                (T::one() / dr, count - 1)
            }
        };
        out.clear();
        out.extend(x.iter().zip(y).zip(&radii).map(|((&a, &b), &r)| {
            let ring = (r * ring_scale).floor().to_u32().unwrap_or(u32::MAX).min(ring_cap);
            CrossPlotState {
                ring,
                sector: self.sector(a - xmin, b - ymin),
            }
        }));
    }
}

fn check_inputs<T: Real>(x: &[T], y: &[T]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    Ok(())
}

/// Maps each sample pair to its cross-plot cell.
pub fn encode_states<T: Real>(x: &[T], y: &[T], cfg: &PartitionConfig) -> Result<Vec<CrossPlotState>> {
    check_inputs(x, y)?;
    let part = Partition::<T>::new(cfg)?;
    let mut out = Vec::with_capacity(x.len());
    part.encode_into(x, y, &mut out);
    Ok(out)
}

/// Joint distribution of consecutive state pairs, sorted by pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionDistribution<T> {
    pub entries: Vec<((CrossPlotState, CrossPlotState), T)>,
    pub transitions: usize,
}

impl<T: Real> TransitionDistribution<T> {
    pub fn probability(&self, from: CrossPlotState, to: CrossPlotState) -> T {
        self.entries
            .binary_search_by(|(k, _)| k.cmp(&(from, to)))
            .map_or(T::zero(), |i| self.entries[i].1)
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> T {
        let mut ps: Vec<T> = self.entries.iter().map(|e| e.1).collect();
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        -ps.into_iter().map(|p| p * p.log2()).sum::<T>()
    }
}

pub fn transition_distribution<T: Real>(states: &[CrossPlotState]) -> Result<TransitionDistribution<T>> {
    if states.len() < 2 {
        return Err(Error::TooFewSamples { need: 2, got: states.len() });
    }
    let mut pairs: Vec<(CrossPlotState, CrossPlotState)> =
        states.windows(2).map(|w| (w[0], w[1])).collect();
    pairs.sort_unstable();
    let m = T::lit(pairs.len() as f64);
    let mut entries = Vec::new();
    for chunk in pairs.chunk_by(|a, b| a == b) {
        entries.push((chunk[0], T::lit(chunk.len() as f64) / m));
    }
    Ok(TransitionDistribution {
        entries,
        transitions: pairs.len(),
    })
}

/// Entropy (bits) from transition counts over `total` transitions, summed in
/// ascending count order so that relabelled states give identical results.
fn entropy_from_counts<T: Real>(counts: &mut [u32], total: usize) -> T {
    counts.sort_unstable();
    let m = T::lit(total as f64);
    let h = -counts
        .iter()
        .map(|&c| {
            let p = T::lit(c as f64) / m;
            p * p.log2()
        })
        .sum::<T>();
    h.max(T::zero()).min(m.log2())
}

/// Reusable CPTE evaluator holding the partition and scratch buffers.
pub struct CpteEngine<T> {
    partition: Partition<T>,
    states: Vec<CrossPlotState>,
    keys: Vec<u64>,
    dense: Vec<u32>,
    counts: Vec<u32>,
}

impl<T: Real> CpteEngine<T> {
    pub fn new(cfg: &PartitionConfig) -> Result<Self> {
        Ok(Self {
            partition: Partition::new(cfg)?,
            states: Vec::new(),
            keys: Vec::new(),
            dense: Vec::new(),
            counts: Vec::new(),
        })
    }

    pub fn cpte(&mut self, x: &[T], y: &[T]) -> Result<T> {
        check_inputs(x, y)?;
        self.partition.encode_into(x, y, &mut self.states);
        let ns = self.partition.n_sectors;
        let max_ring = self.states.iter().map(|s| s.ring).max().unwrap_or(0);
        let n_states = (max_ring as usize + 1) * ns as usize;
        let id = |s: &CrossPlotState| (s.ring * ns + s.sector) as usize;
        self.counts.clear();
        if n_states <= 64 {
            let cells = n_states * n_states;
            self.dense.clear();
            self.dense.resize(cells, 0);
            for w in self.states.windows(2) {
                self.dense[id(&w[0]) * n_states + id(&w[1])] += 1;
            }
            self.counts.extend(self.dense.iter().copied().filter(|&c| c > 0));
        } else {
            self.keys.clear();
            self.keys.extend(
                self.states
                    .windows(2)
                    .map(|w| ((id(&w[0]) as u64) << 32) | id(&w[1]) as u64),
            );
            self.keys.sort_unstable();
            self.counts
                .extend(self.keys.chunk_by(|a, b| a == b).map(|c| c.len() as u32));
        }
        Ok(entropy_from_counts(&mut self.counts, x.len() - 1))
    }
}

/// CPTE of one pair of equal-length series, in bits.
pub fn cpte<T: Real>(x: &[T], y: &[T], cfg: &PartitionConfig) -> Result<T> {
    CpteEngine::new(cfg)?.cpte(x, y)
}

/// Per-epoch min-max normalized synchronization matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyncMatrix<T> {
    pub subject_id: String,
    pub group: Group,
    pub band: String,
    pub epoch_index: usize,
    pub channel_names: Vec<String>,
    pub n: usize,
    /// Row-major `n x n`.
    pub values: Vec<T>,
    /// Raw CPTE range before normalization.
    pub raw_min: T,
    pub raw_max: T,
    /// Set when every off-diagonal raw value was equal; all entries are then 0.
    pub degenerate: bool,
}

impl<T: Real> SyncMatrix<T> {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i * self.n + j]
    }

    /// Builds a normalized matrix from the upper-triangle raw values, in
    /// row-major pair order `(0,1), (0,2), ..., (n-2,n-1)`.
    pub fn from_upper_triangle(
        n: usize,
        raw: &[T],
        subject_id: impl Into<String>,
        group: Group,
        band: impl Into<String>,
        epoch_index: usize,
        channel_names: Vec<String>,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewSamples { need: 2, got: n });
        }
        if raw.len() != n * (n - 1) / 2 {
            return Err(Error::LengthMismatch(raw.len(), n * (n - 1) / 2));
        }
        let lo = raw.iter().copied().fold(T::infinity(), T::min);
        let hi = raw.iter().copied().fold(T::neg_infinity(), T::max);
        let degenerate = !(hi > lo);
        let mut values = vec![T::zero(); n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let v = if degenerate {
                    T::zero()
                } else {
                    ((raw[k] - lo) / (hi - lo)).min(T::one())
                };
                values[i * n + j] = v;
                values[j * n + i] = v;
                k += 1;
            }
        }
        Ok(Self {
            subject_id: subject_id.into(),
            group,
            band: band.into(),
            epoch_index,
            channel_names,
            n,
            values,
            raw_min: lo,
            raw_max: hi,
            degenerate,
        })
    }

    pub fn upper_triangle(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n * (self.n - 1) / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.get(i, j));
            }
        }
        out
    }
}

/// Raw CPTE for every channel pair of `channels`, upper-triangle order.
/// Pairs run in parallel; the result does not depend on scheduling.
pub fn pairwise_cpte<T: Real>(channels: &[Vec<T>], cfg: &PartitionConfig) -> Result<Vec<T>> {
    let n = channels.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    pairs
        .par_iter()
        .map_init(
            || CpteEngine::new(cfg),
            |engine, &(i, j)| match engine {
                Ok(e) => e.cpte(&channels[i], &channels[j]),
                Err(e) => Err(Error::InvalidPartition(e.to_string())),
            },
        )
        .collect()
}

pub fn epoch_matrix<T: Real>(epoch: &Epoch<T>, cfg: &PartitionConfig) -> Result<SyncMatrix<T>> {
    let n = epoch.n_channels();
    if n < 2 {
        return Err(Error::TooFewSamples { need: 2, got: n });
    }
    let raw = pairwise_cpte(&epoch.samples, cfg)?;
    SyncMatrix::from_upper_triangle(
        n,
        &raw,
        epoch.subject_id.clone(),
        epoch.group,
        epoch.band.clone(),
        epoch.epoch_index,
        epoch.channel_names.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn st(ring: u32, sector: u32) -> CrossPlotState {
        CrossPlotState { ring, sector }
    }

    #[test]
    fn sector_count() {
        assert_eq!(PartitionConfig::default().n_sectors(), 9);
        let c = PartitionConfig {
            angular_ruler_deg: 18.0,
            ..Default::default()
        };
        assert_eq!(c.n_sectors(), 5);
        let c = PartitionConfig {
            angular_ruler_deg: 7.0,
            ..Default::default()
        };
        assert_eq!(c.n_sectors(), 13);
    }

    #[test]
    fn invalid_partition() {
        for d in [0.0, -1.0, 91.0, f64::NAN] {
            let c = PartitionConfig {
                angular_ruler_deg: d,
                ..Default::default()
            };
            assert!(c.validate().is_err());
        }
        let c = PartitionConfig {
            radial_rings: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn sectors_follow_angle() {
        let p = Partition::<f64>::new(&PartitionConfig::default()).unwrap();
        let at = |deg: f64| {
            let r = deg.to_radians();
            p.sector(r.cos(), r.sin())
        };
        assert_eq!(at(0.0), 0);
        assert_eq!(at(5.0), 0);
        assert_eq!(at(15.0), 1);
        assert_eq!(at(44.0), 4);
        assert_eq!(at(45.0), 4);
        assert_eq!(at(46.0), 4);
        assert_eq!(at(55.0), 5);
        assert_eq!(at(89.0), 8);
        assert_eq!(p.sector(0.0, 1.0), 8);
        assert_eq!(p.sector(1.0, 0.0), 0);
    }

    #[test]
    fn constant_inputs_single_state() {
        let x = vec![3.0; 10];
        let s = encode_states(&x, &x, &PartitionConfig::default()).unwrap();
        assert!(s.iter().all(|&v| v == s[0] && v.ring == 0));
        assert_eq!(cpte(&x, &[-2.0; 10], &PartitionConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn alternating_example() {
        let x = [0.0, 1.0, 0.0, 1.0];
        let s = encode_states(&x, &x, &PartitionConfig::default()).unwrap();
        // Origin sits on the diagonal sector; (1, 1) at r_max lands in the top ring.
        assert_eq!(s, vec![st(0, 4), st(4, 4), st(0, 4), st(4, 4)]);
        let d = transition_distribution::<f64>(&s).unwrap();
        assert_eq!(d.entries.len(), 2);
        assert!((d.probability(st(0, 4), st(4, 4)) - 2.0 / 3.0).abs() < 1e-15);
        assert!((d.probability(st(4, 4), st(0, 4)) - 1.0 / 3.0).abs() < 1e-15);
        let expected = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
        let h = cpte(&x, &x, &PartitionConfig::default()).unwrap();
        assert!((h - expected).abs() < 1e-12);
        assert!((h - 0.9183).abs() < 1e-4);
        assert!((d.entropy() - expected).abs() < 1e-12);
    }

    #[test]
    fn transition_distribution_cases() {
        let a = st(0, 0);
        let b = st(1, 2);
        let d = transition_distribution::<f64>(&[a; 6]).unwrap();
        assert_eq!(d.entries, vec![((a, a), 1.0)]);
        let d = transition_distribution::<f64>(&[a, b]).unwrap();
        assert_eq!(d.entries, vec![((a, b), 1.0)]);
        assert!(transition_distribution::<f64>(&[a]).is_err());
    }

    #[test]
    fn input_errors() {
        let cfg = PartitionConfig::default();
        assert!(matches!(cpte(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0], &cfg), Err(Error::LengthMismatch(3, 4))));
        assert!(matches!(cpte(&[1.0], &[1.0], &cfg), Err(Error::TooFewSamples { .. })));
        assert!(matches!(cpte(&[1.0, f64::NAN], &[1.0, 2.0], &cfg), Err(Error::NonFiniteInput)));
    }

    #[test]
    fn absolute_mode_rings() {
        let cfg = PartitionConfig {
            radial_mode: RadialMode::Absolute,
            radial_ruler: 10.0,
            ..Default::default()
        };
        let x = [0.0, 5.0, 15.0, 25.0, 30.0];
        let y = [0.0; 5];
        let s = encode_states(&x, &y, &cfg).unwrap();
        let rings: Vec<u32> = s.iter().map(|v| v.ring).collect();
        // r_max = 30 gives three rings; r = 30 sits on the outer edge.
        assert_eq!(rings, vec![0, 0, 1, 2, 2]);
    }

    #[test]
    fn matrix_degenerate_cases() {
        let mk = |rows: Vec<Vec<f64>>| Epoch {
            subject_id: "s".into(),
            group: Group::GroupA,
            band: "all".into(),
            epoch_index: 0,
            channel_names: (0..rows.len()).map(|i| i.to_string()).collect(),
            samples: rows,
        };
        let cfg = PartitionConfig::default();
        let two = mk(vec![vec![0.0, 1.0, 3.0, 2.0], vec![1.0, 0.5, 0.0, 2.0]]);
        let m = epoch_matrix(&two, &cfg).unwrap();
        assert!(m.degenerate);
        assert!(m.values.iter().all(|&v| v == 0.0));

        let same = vec![0.0, 2.0, 1.0, 3.0, 0.5];
        let m = epoch_matrix(&mk(vec![same.clone(); 4]), &cfg).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.upper_triangle().len(), 6);
        assert!(m.values.iter().all(|&v| v == 0.0));

        let one = mk(vec![same]);
        assert!(epoch_matrix(&one, &cfg).is_err());
    }

    #[test]
    fn matrix_normalization() {
        let raw = [0.5, 2.0, 1.25];
        let m = SyncMatrix::from_upper_triangle(3, &raw, "s", Group::GroupA, "all", 0, vec![]).unwrap();
        assert_eq!(m.upper_triangle(), vec![0.0, 1.0, 0.5]);
        assert_eq!(m.get(2, 0), 1.0);
        assert_eq!(m.get(1, 1), 0.0);
        assert!(!m.degenerate);
    }

    fn series() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                prop::collection::vec(-1e3f64..1e3, n),
                prop::collection::vec(-1e3f64..1e3, n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded((x, y) in series()) {
            let cfg = PartitionConfig::default();
            let a = cpte(&x, &y, &cfg).unwrap();
            let b = cpte(&y, &x, &cfg).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
            prop_assert!(a >= 0.0);
            prop_assert!(a <= ((x.len() - 1) as f64).log2());
        }

        #[test]
        fn symmetric_on_coarse_integer_grids(
            x in prop::collection::vec(0i32..4, 2..40),
            y_seed in prop::collection::vec(0i32..4, 40),
        ) {
            let y: Vec<f64> = y_seed[..x.len()].iter().map(|&v| v as f64).collect();
            let x: Vec<f64> = x.iter().map(|&v| v as f64).collect();
            let cfg = PartitionConfig::default();
            prop_assert_eq!(cpte(&x, &y, &cfg).unwrap(), cpte(&y, &x, &cfg).unwrap());
        }

        #[test]
        fn engine_matches_distribution_entropy((x, y) in series()) {
            let cfg = PartitionConfig::default();
            let s = encode_states(&x, &y, &cfg).unwrap();
            let d = transition_distribution::<f64>(&s).unwrap();
            let total: f64 = d.entries.iter().map(|e| e.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(d.entries.len() < x.len());
            prop_assert!((d.entropy() - cpte(&x, &y, &cfg).unwrap()).abs() < 1e-12);
        }
    }
}
