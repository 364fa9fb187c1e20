//! Aggregation, bootstrap errors, sweeps and report rendering.

pub mod aggregate;
pub mod bootstrap;
pub mod plot;
pub mod render;
pub mod sweep;

pub use aggregate::{aggregate, attach_iq, class_group_of, model_iq, AggregateOptions, BenchmarkReport, ModelSummary, RunMetadata, Stat};
pub use bootstrap::{bootstrap_se, DEFAULT_RESAMPLES};
pub use plot::{least_squares, lines_svg, scatter_svg};
pub use render::{format_mean_se, render_csv, render_text};
pub use sweep::{sweep, SweepReport, SweepSeries, SweepSetting};
