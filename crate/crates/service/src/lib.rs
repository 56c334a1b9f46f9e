//! HTTP service and command line for the dqi engine.
//!
//! The service keeps sessions in memory (optionally mirrored to a data
//! directory) and exposes them as JSON endpoints; see [`server::router`].
//! It has no authentication and is meant to listen on localhost.

pub mod api;
pub mod cli;
pub mod error;
pub mod openapi;
pub mod server;

pub use error::ApiError;
