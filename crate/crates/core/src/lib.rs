pub mod aggregate;
pub mod classify;
pub mod cli;
pub mod error;
pub mod features;
pub mod mesh;
pub mod pipeline;
pub mod synthetic;
pub mod voxelize;

mod util;

pub use error::{Error, Result};
