//! Simplex-coded multiclass classification.
//!
//! Classes are coded as the vertices of a regular simplex ([`codec`]), a
//! vector-valued model is trained against a convex surrogate ([`losses`],
//! [`trainer`]) on random Fourier features ([`features`]), and predictions are
//! decoded back to classes. The remaining modules provide the conditional
//! risk analysis ([`inner_risk`]), margin-controlled synthetic data
//! ([`synthetic`]), Monte-Carlo estimators ([`metrics`]) and learning-curve
//! fits ([`rate_fit`]).

pub mod codec;
pub mod error;
pub mod features;
pub mod inner_risk;
pub mod losses;
pub mod metrics;
pub mod rate_fit;
pub mod rng;
pub mod synthetic;
pub mod trainer;

pub use codec::{ClassIndex, Codebook};
pub use error::{Error, Result};
pub use features::{FeatureKind, FeatureMap, LinearRffModel};
pub use losses::{MarginKind, SurrogateLoss};
pub use synthetic::{Dataset, DistributionSpec, MarginSpec};
pub use trainer::{GdConfig, TrainTrace};
