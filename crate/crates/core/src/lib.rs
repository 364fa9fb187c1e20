//! Evaluation harness for text-guided image editing models.

// `!(x >= 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alignment;
pub mod backends;
pub mod caption;
pub mod config;
pub mod error;
pub mod filter;
pub mod harness;
pub mod lexicon;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod query;
pub mod raster;
pub mod util;
pub mod validation;
pub mod workflows;

pub use error::{Error, Result};
pub use lexicon::{ClassGroup, Lexicon};
pub use model::*;
pub use raster::{Mask, Raster};
