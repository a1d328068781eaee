//! Synthesis of multiplierless and hybrid FIR filter datapaths.
//!
//! The pipeline runs in the order the modules are listed:
//!
//! - [`coeffs`]: low-pass design, quantization, and partitioning of the
//!   coefficient magnitudes into a small set (shared adder graph) and a large
//!   set (constant multipliers).
//! - [`costtable`]: exhaustive single-constant adder costs and cost-level
//!   classification.
//! - [`graph`]: the adder-graph IR with exact evaluation and verification.
//! - [`rag`]: the reduced-adder-graph synthesis heuristic.
//! - [`arch`]: clocked filter architectures, the golden convolution and a
//!   cycle-accurate simulator.
//! - [`hdl`]: structural Verilog emission plus an interpreter for the emitted
//!   text.

pub mod arch;
pub mod coeffs;
pub mod costtable;
pub mod csd;
pub mod graph;
pub mod hdl;
pub mod rag;

pub use arch::{golden, Architecture, FilterNetlist, NetlistMetrics, SimTrace};
pub use coeffs::{CoefficientPartition, FilterSpec, QuantizedFilter, Symmetry};
pub use costtable::{CostClassification, CostTable};
pub use graph::{AdderGraph, GraphMetrics};
pub use hdl::HdlArtifact;
pub use rag::SynthesisMode;

/// Number of bits needed to represent `v` (0 for 0).
pub(crate) fn bit_length(v: u64) -> u32 {
    u64::BITS - v.leading_zeros()
}

/// Splits `v > 0` into `(odd, shift)` with `v = odd << shift`.
pub fn odd_part(v: u64) -> (u64, u32) {
    debug_assert!(v > 0);
    let shift = v.trailing_zeros();
    (v >> shift, shift)
}
