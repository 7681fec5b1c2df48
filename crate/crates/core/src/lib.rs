//! Frequency-domain model of an optomechanical filter cavity for squeezed
//! light, with its decoherence budget, the optical trap that dilutes the
//! mechanical damping, and a design optimizer.
//!
//! Angular frequencies are rad/s internally; configuration files and emitted
//! tables use Hz. Sideband frequencies `omega` are measured from the
//! control carrier, and the cavity field is expanded with `e^{-i w t}`.

pub mod budget;
pub mod config;
pub mod constants;
pub mod ddouble;
pub mod derived;
pub mod dilution;
pub mod emit;
pub mod error;
pub mod exec;
pub mod filter;
pub mod grid;
pub mod linalg;
pub mod optimizer;
pub mod report;
pub mod squeezing;
pub mod thermal;

pub use config::SystemConfig;
pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{FrequencyGrid, Spacing};
