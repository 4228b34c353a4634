//! Error-bounded lossy compression for tree-based AMR data.
//!
//! Each refinement level of an AMR dataset is compressed in 3D after a
//! pre-processing pass that removes or pads its empty regions: sparse-tensor
//! extraction of maximal occupied cubes (OpST), an adaptive k-d tree
//! (AKDTree), naive unit-block extraction (NaST), or ghost-shell padding
//! (GSP). The extracted blocks go through a prediction + quantization +
//! Huffman codec; with Shared Huffman Encoding every block of a level is
//! predicted independently but entropy-coded with a single shared table.
//! Baselines (zero-filling, per-level 1D, up-sampled 3D), a synthetic
//! dataset generator, and a rate-distortion benchmark harness round out the
//! library. See the `examples/` directory for runnable entry points and the
//! `tacplus` binary for the command-line interface.

pub mod amr;
mod bitmap;
pub mod codec;
pub mod datagen;
pub mod error;
pub mod grid;
pub mod partition;

pub use error::{Error, Result};
