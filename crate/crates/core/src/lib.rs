//! Sparse signal recovery from very sparse Gaussian random projections.
//!
//! * [`sensing`]: signals, the sparsified Gaussian design, measurements.
//! * [`decoder`]: ratio statistics, the absolute-minimum and tie
//!   estimators, and the iterative mixed decoding procedure.
//! * [`theory`]: closed-form error probabilities and sample-complexity
//!   planners.
//! * [`harness`]: seeded Monte Carlo experiments, CSV and contour output.

pub mod decoder;
pub mod harness;
pub mod seed;
pub mod sensing;
pub mod theory;
pub mod validation;

pub use decoder::{CoordinateStatus, DecodeResult, DecoderConfig, RatioColumn};
pub use sensing::{MeasurementSet, Signal, SparseDesign};
