//! Minimum complexity pursuit.
//!
//! Recovers structured signals in `[0, 1]^n` from `d < n` Gaussian
//! measurements by searching for the shortest description, under a family
//! of prefix-free codecs, of an `m`-bit quantized vector consistent with
//! the measurements.

// `!(x > 0.0)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bits;
pub mod codecs;
pub mod error;
pub mod harness;
pub mod measure;
pub mod quantize;
pub mod signals;
pub mod solver;

pub use bits::BitString;
pub use codecs::{dl_surrogate, CodecId, CodedSignal, DlBudget};
pub use error::{McpError, Result};
pub use quantize::{quantization_gap_bound, quantize_vector, truncate_bits, DyadicValue, QuantizedVector};
