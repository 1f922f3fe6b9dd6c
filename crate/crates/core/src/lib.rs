pub mod error;
pub mod expcalc;
pub mod jointree;
pub mod model;
pub mod oracle;
pub mod potential;

pub use error::{Error, Result};
