//! Schauder-multiplier semigroups on sequence spaces and finite certificates
//! that their Rademacher averages blow up.

pub mod bases;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod rademacher;
pub mod report;
pub mod rng;
pub mod semigroup;
pub mod spaces;
pub mod summation;

pub use error::{Error, Result};
