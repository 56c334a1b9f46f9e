pub mod dimensions;
pub mod drift;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod procedures;
pub mod tabular;

pub use error::{DqiError, Result};
