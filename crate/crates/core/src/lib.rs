//! Estimators of Pickands-type constants for nonnegative mean-one random fields.

pub mod error;
pub mod estimators;
pub mod gaussian;
pub mod grid;
pub mod kernel;
pub mod maxstable;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use estimators::{DirectConfig, DyConfig, DyMethod, EstimateResult, SweepEstimator, SweepResult};
pub use gaussian::{Correlation, PathSample, StationaryCovariance, VarianceFunction};
pub use grid::{enumerate_points, window_points, GridSpec, PointSet};
pub use kernel::{Kernel, SamplingDensity};
pub use maxstable::{MaxStableSample, Stopping};
pub use rng::Replicator;
pub use spectral::{FamilySpec, SpectralFieldSpec};
pub use stats::Summary;
