//! Layer-by-layer quantum state learning with sequential scattering layers.
//!
//! The crate is organized bottom-up:
//!
//! * [`qstate`]: pure states, density matrices, reduced-state overlaps and costs.
//! * [`circuit`]: gates, the hardware-efficient layer ansatz, Haar sampling.
//! * [`scattering`]: the sequential training loop and its gradients.
//! * [`baseline`]: the global-circuit baseline and gradient-variance experiments.
//! * [`haar`]: Haar-measure moment identities.
//! * [`targets`]: target-state families and file ingestion.
//! * [`noisy`]: density-matrix simulation with noise, shot-based costs and
//!   gradient-free training.

pub mod baseline;
pub mod circuit;
pub mod error;
pub mod haar;
pub mod noisy;
pub mod qstate;
pub mod rng;
pub mod scattering;
pub mod targets;

pub use error::{Error, Result};
pub use qstate::{DensityMatrix, RankSequence, StateVector, C64};
pub use scattering::{run_qssm, ScatteringModel, TrainConfig};
