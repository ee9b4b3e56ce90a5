//! Structure-based and streaming anomaly detection.
//!
//! Two engine families live here:
//!
//! - Preference Isolation Forest: points are embedded into a preference space
//!   through randomly sampled parametric models ([`geometry`], [`preference`]),
//!   then isolated by Voronoi trees ([`voronoi`]) or RuzHash trees
//!   ([`ruzhash`]). [`sliding`] runs the pipeline window-wise on range images.
//! - Online Isolation Forest ([`online`]): adaptive multi-resolution histogram
//!   trees over a sliding buffer.
//!
//! [`datasets`], [`baseline`] and [`metrics`] provide seeded synthetic
//! benchmarks, an axis-parallel isolation forest and ROC AUC.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.
//! All randomized entry points take an explicit seed or RNG.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod baseline;
pub mod datasets;
mod error;
pub mod geometry;
pub mod isolation;
pub mod metrics;
pub mod online;
pub mod pif;
pub mod preference;
pub mod rng;
pub mod ruzhash;
pub mod sliding;
pub mod voronoi;

pub use error::{Error, Result};
