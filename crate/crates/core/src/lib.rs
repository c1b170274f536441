//! Parameter initialization for QAOA on unit-weight Max-Cut.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: Erdős–Rényi instances, cut values, exhaustive Max-Cut.
//! - [`simulator`]: statevector engine, energies, exact gradients.
//! - [`optimizers`]: Adam / RMSProp / Adagrad ascent and the refinement loop.
//! - [`meta_gru`]: GRU meta-optimizer proposing depth-1 angles, trained by BPTT.
//! - [`cnn`]: convolutional predictor mapping depth-1 angles to depth-2 angles.
//! - [`bilinear`]: depth-progressive extrapolation to deeper circuits.
//! - [`checkpoint`]: JSON checkpoints for the two networks.
//! - [`bench`]: experiment grids, training pipeline and CSV reports.
//!
//! See the `examples/` directory for one runnable program per capability.

pub mod bench;
pub mod bilinear;
pub mod checkpoint;
pub mod cnn;
pub mod error;
pub mod graph;
pub mod meta_gru;
pub mod optimizers;
pub mod rng;
pub mod simulator;
pub mod tensors;

pub use error::{CheckpointError, Error, Result};
pub use graph::{generate_erdos_renyi, Graph};
pub use simulator::{GradientMethod, QaoaParams, QaoaProblem, StateVector};
