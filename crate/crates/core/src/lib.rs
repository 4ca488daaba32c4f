//! Detection, localization and speaking-state assessment of multiple
//! speakers by audio-visual fusion.
//!
//! 3D visual features and a deterministic acoustic propagation model map
//! everything onto the 1D axis of interaural time differences, where a
//! Gaussian-plus-uniform mixture groups both modalities into AV objects; a
//! vision-guided EM estimates the mixture, BIC picks the number of
//! speakers, and auditory responsibility mass decides who is talking.
//!
//! The crate ships the full desk-scale toolchain around that model:
//!
//! * [`geometry`] — scene↔auditory mappings and affine calibration;
//! * [`mixture`] — the generative model, its likelihood and both EM variants;
//! * [`selection`] — BIC scoring, warm-start initialization, merging and
//!   spurious-cluster rejection;
//! * [`pipeline`] — motion-guided and face-guided per-interval procedures;
//! * [`simulator`] — ground-truthed synthetic scene generation;
//! * [`evaluation`] — the matching protocol with FP/FN/TP and ALE metrics;
//! * [`event_sync`] — ApproximateTime/TimeFrame stream synchronization and
//!   record/replay;
//! * [`io`] — line-delimited dataset, result and manifest files.
//!
//! Runnable demonstrations of each capability live under `examples/`; the
//! `avfusion` binary wraps generation, runs and calibration for the command
//! line.

pub mod error;
pub mod evaluation;
pub mod event_sync;
pub mod geometry;
pub mod io;
pub mod mixture;
pub mod pipeline;
pub mod selection;
pub mod simulator;

pub use error::{Error, Result};
pub use geometry::{ItdValue, MicPairConfig, ScenePoint};
pub use mixture::{MixtureParams, OutlierDomain, Posteriors};
pub use pipeline::{AVObject, IntervalObservations, PipelineKnobs};
