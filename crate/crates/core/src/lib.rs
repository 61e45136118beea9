//! Multibeam satellite forward-link precoding laboratory.
//!
//! The crate is split along the processing chain of a precoded forward link:
//!
//! * [`channel`]: multibeam channel generation, CSV I/O and CSI error injection.
//! * [`precoding`]: ZF, MMSE, per-antenna constrained MMSE, optimal linear
//!   (uplink/downlink duality) precoders and the normalization variants.
//! * [`linkmetrics`]: SNIR, power profiles, MODCOD throughput mapping and
//!   four-colour frequency-reuse baselines.
//! * [`superframe`]: a symbol-level superframe with unprecoded SOSF and pilots,
//!   AWGN transmission, frame detection and pilot-based CSI estimation.
//! * [`runner`]: scenario configuration, sweeps, benchmarks and CSV reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod channel;
pub mod error;
pub mod linalg;
pub mod linkmetrics;
pub mod precoding;
pub mod runner;
pub mod seed;
pub mod superframe;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Dense complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<Complex64>;
