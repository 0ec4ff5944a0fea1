//! Noisy-coupling chain models, their master equations, stochastic unravelings
//! and the classical walks they reduce to.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod lindblad;
pub mod linalg;
pub mod models;
pub mod observables;
pub mod operators;
pub mod oracle;
pub mod sparse;
pub mod state;
pub mod stochastic;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
