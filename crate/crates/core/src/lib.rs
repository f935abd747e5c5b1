//! Cross-plot transition entropy (CPTE) synchronization networks.
//!
//! The crate turns multichannel recordings into per-epoch synchronization
//! matrices, thresholds them into binary networks, extracts node-level
//! network measures and runs group statistics and cross-validated
//! classification on the result. A seeded generator of coupled signals
//! is included so every stage can be checked without clinical data.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root pin the common `f64` instantiations.

pub mod classify;
pub mod cpte;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod netmetrics;
pub mod pipeline;
pub mod seed;
pub mod signal;
pub mod special;
pub mod stats;
pub mod synth;

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

pub use error::{Error, Result};
pub use ingest::{BandSpec, CohortManifest, Group, Recording};

/// Floating-point scalar used by the numerical modules.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumCast + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type BandFilter64 = signal::BandFilter<f64>;
pub type Epoch64 = signal::Epoch<f64>;
pub type SyncMatrix64 = cpte::SyncMatrix<f64>;
pub type TransitionDistribution64 = cpte::TransitionDistribution<f64>;
pub type NodeMeasures64 = netmetrics::NodeMeasures<f64>;
pub type TTestResult64 = stats::TTestResult<f64>;

pub type BandFilter32 = signal::BandFilter<f32>;
pub type SyncMatrix32 = cpte::SyncMatrix<f32>;
