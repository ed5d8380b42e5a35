// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
pub mod engine;
pub mod error;
pub mod grid;
mod io;
pub mod measure;
pub mod models;
pub mod paths;
pub mod rng;
pub mod runner;
pub mod verify;

pub use error::{Error, Result};
