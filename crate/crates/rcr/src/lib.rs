//! File formats, pipeline stages, evaluation and plots around `rcr-core`,
//! plus the `rcr` command line.

pub mod cli;
pub mod error;
pub mod formats;
pub mod model_io;
pub mod stages;
pub mod viz;

pub use error::{Error, Result};
