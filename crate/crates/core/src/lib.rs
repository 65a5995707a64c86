//! Short-time asymptotics of continuous-time walks on graphs.
//!
//! For a linear evolution `dX/dt = M(t) X` whose generator is supported on a
//! graph, the entry `<m|X(t)|n>` starts out as a power law in `t` whose
//! exponent is the directed distance from `n` to `m`. The leading coefficient
//! is a sum over shortest paths of iterated integrals of generator entries,
//! and the truncation error is bounded by an explicit exponential envelope.
//!
//! The crate is organised as follows:
//!
//! - [`graph`]: graphs, BFS distances, shortest-path counts and enumeration.
//! - [`linalg`]: dense complex algebra, spectral norm and exact propagation
//!   (the oracle every asymptotic prediction is checked against).
//! - [`generators`]: classical (Laplacian), tight-binding, chiral,
//!   interaction-picture and rotating-frame generators.
//! - [`gauge`]: removal of hopping phases by diagonal unitaries.
//! - [`asymptotics`]: path amplitudes, timescales, leading-order predictions,
//!   error envelopes and power-law fits.
//! - [`lindblad`]: the quantum stochastic walk superoperator and the geometry
//!   of its support graph.
//! - [`experiments`]: sweeps shared by the command-line tool and the
//!   acceptance suite (bound verification, exponent fits, disorder ensembles).

pub mod asymptotics;
pub mod error;
pub mod experiments;
pub mod gauge;
pub mod generators;
pub mod graph;
pub mod lindblad;
pub mod linalg;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
