//! Quantization effects on the nulls of linear differential microphone
//! arrays: signal synthesis, fixed-point quantization, weight design,
//! beamforming, null depth / null width metrics and a measurement pipeline
//! for recorded sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_model;
pub mod beamformer;
pub mod config;
pub mod error;
pub mod experiment;
pub mod measurement;
pub mod metrics;
pub mod quantization;
pub mod weights;

pub use error::{Error, Result};
