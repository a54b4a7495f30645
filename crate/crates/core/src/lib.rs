//! Latency analysis for priority-aware networks-on-chip that use deflection
//! routing at full ingress buffers.
//!
//! The crate has two independent routes to the same quantity, the average
//! end-to-end packet latency:
//!
//! * [`network::end_to_end_latency`], a two-moment queueing model built from
//!   single-class deflection subsystems ([`canonical`]) combined by
//!   superposition, and
//! * [`sim::run`], a slot-synchronous cycle-accurate simulator of the same
//!   router semantics.
//!
//! [`harness`] drives both over parameter sweeps and writes CSV reports.

// `!(x >= 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Lane and position indices address several parallel tables at once.
#![allow(clippy::needless_range_loop)]

pub mod canonical;
pub mod error;
pub mod harness;
pub mod network;
pub mod par;
pub mod sim;
pub mod topology;
pub mod traffic;

pub use error::{Error, Result};
