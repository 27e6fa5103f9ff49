//! File formats, a parallel sweep harness, run manifests and the `xpoint`
//! command-line tool on top of [`xpoint_core`].

pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod manifest;

pub use error::{Error, Result};
pub use harness::{run_sweep, SweepSpec};
pub use manifest::RunManifest;
pub use xpoint_core as core;
