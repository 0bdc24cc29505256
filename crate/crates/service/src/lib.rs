//! Session server and command-line front end for space-time cube volumes.

pub mod api;
pub mod cli;
pub mod engine;
pub mod error;
pub mod session;
pub mod socket;
pub mod wire;

pub use engine::Engine;
pub use error::{ServiceError, ServiceResult};
