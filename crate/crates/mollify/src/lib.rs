//! Files, configuration and batch pipeline around [`mollify_core`].

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;

pub use config::RunConfig;
pub use error::{AppError, AppResult};
pub use pipeline::{Evaluation, MetricsRow, Workspace};
