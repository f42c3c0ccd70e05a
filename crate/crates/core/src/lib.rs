//! Photon-number encoded entanglement-swapping QKD.

pub mod classical;
pub mod entropy;
pub mod error;
pub mod fixtures;
pub mod fock;
pub mod measurements;
pub mod noisy;
pub mod optics;
pub mod optimize;
pub mod protocol;
pub mod states;
pub mod sweep;
pub mod tomography;

pub use error::{Error, Result};
pub use fock::{CMatrix, DensityOperator, FockVector, ModeDims, C64};
pub use noisy::{EveAttribution, HeraldingRule};
pub use optics::{ChannelParams, DetectorParams};
pub use optimize::{ObjectiveKind, OptimizationResult, OptimizerConfig};
pub use protocol::{KeyRateBreakdown, Outcome, SwapSetup};
pub use states::CoefficientVector;
pub use sweep::{CoefficientSource, SweepConfig, SweepRow};
