//! Estimators of `H^δ` and related constants.

mod direct;
mod dy;
mod family;
mod kernel_constant;
mod result;
mod subadditivity;
mod sweep;

pub use direct::{estimate_h_direct, DirectConfig};
pub use dy::{estimate_h_dy, DyConfig, DyMethod};
pub use family::{estimate_family_h, family_sweep, FamilyConfig, FamilyEstimate, FamilyNode, FamilySweep};
pub use kernel_constant::{fubini_identity, kernel_constant, DyadicRow, KernelConstant, KernelQuadConfig};
pub use result::{fingerprint, EstimateResult};
pub use subadditivity::{subadditivity_check, SubadditivityCheck};
pub use sweep::{continuity_sweep, Diagnosis, SweepEstimator, SweepResult, SweepRow};
