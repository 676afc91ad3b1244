//! Collapsed Bayesian stochastic block models.
//!
//! Block parameters are integrated out under conjugate priors, so the
//! posterior over partitions depends only on per-block sufficient statistics.
//! The crate provides the collapsed marginals, an incrementally maintained
//! block ledger, a single-site collapsed Gibbs sampler and the reporting
//! helpers needed to turn a run into tables.

pub mod error;
pub mod families;
pub mod netdata;
pub mod parallel;
pub mod partition;
pub mod priors;
pub mod report;
pub mod sampler;
pub mod specfun;
pub mod stats;
pub mod synthgen;

pub use error::{Error, Result};
pub use families::{Family, FamilySpec};
pub use netdata::{DyadData, Kind, Modality};
pub use parallel::Execution;
pub use partition::{BlockLedger, Mode, Partition};
pub use priors::PartitionPrior;
pub use sampler::{run, select_k, Init, RunResult, SamplerConfig, SamplerState};
