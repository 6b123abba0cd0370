//! Streaming multi-modal tactile material identification.
//!
//! The pipeline turns raw multi-rate touch recordings into a running
//! posterior over materials:
//!
//! ```text
//! recording (2.2 kHz vibration + 100 Hz flux/temperature/impedance)
//!   -> non-overlapping 0.25 s windows            [stream]
//!   -> band-limited spectrum + PCA projection    [spectral]
//!   -> contact-area thermal features             [thermal]
//!   -> per-material Gaussian mixture likelihoods [gmm]
//!   -> recursive Bayesian posterior update       [classifier]
//! ```
//!
//! [`synth`] generates seeded benchmark recordings for virtual materials,
//! [`pipeline`] fits models, and [`eval`] reproduces the cross-validated
//! recognition-time / error protocol on them.
//!
//! Batch entry points (`batch_*`, training, evaluation folds) run
//! data-parallel on rayon when the default `parallel` feature is enabled,
//! and fall back to sequential loops without it. Both paths produce
//! bit-identical results: parallelism is only ever across independent
//! items, collected in input order.

pub mod classifier;
pub mod error;
pub mod eval;
mod exec;
pub mod gmm;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod spectral;
pub mod stream;
pub mod synth;
pub mod thermal;

pub use error::{Error, Result};
