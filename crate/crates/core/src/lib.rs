//! Over-the-air function computation for dense sensor clusters.
//!
//! Sensors pre-compensate their readings by their own channel estimate and
//! transmit together, so the cluster-head receives sums (and anything
//! reducible to sums) in one shot. Non-linear aggregates such as max, min and
//! percentiles run as rounds of an OR-channel built on energy detection. The
//! [`planner`] sizes the pilot and repetition budget for a target resolution
//! and reports the throughput gain over one-at-a-time transmission.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bitagg;
pub mod channel;
pub mod error;
pub mod harness;
pub mod linagg;
pub mod model;
pub mod phy;
pub mod planner;

pub use error::{Error, Result};
pub use model::{db, undb, ComplexSample, QuantizationSpec, SeededRng};
