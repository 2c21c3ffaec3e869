pub mod cli;
pub mod elementary;
pub mod error;
pub mod fixedpoint;
pub mod lattice;
pub mod machin;
pub mod powerprod;
pub mod relations;
pub mod series;

pub use error::{Error, Result};
pub use fixedpoint::FixedPoint;
