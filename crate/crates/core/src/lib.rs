//! Motion-aware pipelined video processing.

pub mod analytics;
pub mod backends;
pub mod cli;
pub mod frameio;
pub mod interpolation;
pub mod motion;
pub mod pipeline;
pub mod scheduler;
pub mod segmentation;
pub mod selection;
pub mod synthetic;
