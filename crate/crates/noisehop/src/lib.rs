//! Configuration, artifact formats and experiment driver around
//! `noisehop-core`.

pub mod compare;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod presets;
pub mod runner;
pub mod sweep;

pub use config::RunConfig;
pub use error::{RunError, RunResult};
