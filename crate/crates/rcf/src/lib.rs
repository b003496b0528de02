//! File formats, reports and the command implementations behind the `rcf`
//! binary. The numerics live in `rcf-core`.

pub mod commands;
pub mod definition;
pub mod parallel;
pub mod points;
pub mod report;

pub use commands::{render, replay, run, Command, Format, RunConfig, RunOutput, Tolerances};
pub use definition::{MetricDefinition, MetricSource};
pub use report::Report;
