//! Convergence and defect-measure diagnostics for compressible Euler
//! approximations.
//!
//! The crate takes families of discrete flow fields on refining grids and
//! answers one question about them: does the family converge strongly to
//! a weak solution, or does it shed oscillation and concentration defects
//! on the way? Everything downstream of that question lives here: the
//! polytropic energy landscape and its relative (Bregman) form, weak
//! residuals against compactly supported test batteries, defect-measure
//! assembly with positive-semidefiniteness probes, divergence pairings
//! for rigid-field checks, and atomic Young measures with Jensen-gap
//! classification.
//!
//! Numerical conventions are deliberately rigid: midpoint rule in space,
//! trapezoid rule in time, seeded ChaCha randomness, no wall-clock input,
//! no hash-order iteration. Equal inputs give byte-equal outputs.
//!
//! Start with the `examples/` directory; every major capability has a
//! runnable example. The `euler-defect` binary wraps the same pipelines
//! behind a small config-driven CLI.

pub mod algebra;
pub mod config;
pub mod defect;
pub mod eos;
pub mod error;
pub mod extended;
pub mod grid;
pub mod generators;
pub mod liouville;
pub mod phase;
pub mod pipeline;
pub mod residuals;
pub mod riemann;
pub mod testfn;
pub mod young;

pub use error::{Error, Result};
pub use extended::ExtendedReal;
