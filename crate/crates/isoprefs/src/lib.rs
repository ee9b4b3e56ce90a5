//! File formats, run manifests and the command-line driver around
//! [`isoprefs_core`].

pub mod cli;
pub mod formats;
pub mod manifest;

pub use isoprefs_core as core;
