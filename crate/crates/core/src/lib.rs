//! Rule-based colon labeling for CT colonography volumes.
//!
//! The crate turns raw CT volumes into air/fluid colon label maps
//! (threshold, automatic seed, 26-connected region growing, volume gating,
//! fluid post-processing), prepares datasets for external training and
//! annotation tools, and scores predicted segmentations with boundary
//! distance metrics.
//!
//! Runnable walkthroughs of each capability live under `examples/`:
//!
//! ```bash
//! cargo run --release --example segment_phantom
//! ```

pub mod air;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fluid;
pub mod manifest;
pub mod metrics;
pub mod morphology;
pub mod nifti;
pub mod phantom;
pub mod pipeline;
pub mod record;
pub mod render;
pub mod server;
pub mod volume;

pub use config::{Connectivity, PipelineConfig};
pub use error::{Error, Result};
pub use volume::{BinaryMask, Grid, Label, LabelMap, Volume};
