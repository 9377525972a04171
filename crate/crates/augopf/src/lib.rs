//! File formats, parallel label generation, study orchestration and the
//! `augopf` command line on top of [`augopf_core`].
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod format;
pub mod generate;
pub mod pipeline;
pub mod report;
pub mod study;

pub use augopf_core as core;
pub use error::{Error, ErrorClass, Result};
