//! Frame-based variational deconvolution.
//!
//! The crate builds non-tight frame operators from polyphase filter banks
//! and dual-tree wavelet transforms, computes their frame bounds, and solves
//! synthesis-form and analysis-form restoration problems with a parallel
//! proximal algorithm whose quadratic subproblems are inverted exactly in
//! the frequency domain.

pub mod dense;
pub mod dwt;
pub mod error;
pub mod fft;
pub mod filter;
pub mod frame;
pub mod image_io;
pub mod prox;
pub mod restore;
pub mod rng;
pub mod signal;
pub mod solver;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use filter::{FrequencyGrid, MimoFilter, SisoFilter};
pub use frame::{FrameBounds, FrameOperator, SemiOrthogonal};
pub use prox::{ScalarPotential, SeparableFunction};
pub use restore::{BlurOperator, Metrics, NoiseKind, RestorationProblem};
pub use signal::{MultiSignal, Shape, Signal};
pub use solver::{
    ConvolutiveTerm, FrameTerm, ProblemForm, SolveResult, SolverParams, SolverProblem, Trace,
};
