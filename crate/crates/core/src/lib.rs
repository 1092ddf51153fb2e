//! Markovian simulation of average bipartite purity in random quantum
//! circuits.
//!
//! A circuit is built from a fixed 2-qubit gate in canonical form, dressed
//! with independent Haar-random 1-qubit unitaries. Averaging over the 1-qubit
//! unitaries maps the evolution of the purity of every bipartition onto a
//! linear (non-stochastic) Markov chain: a vector with 2^n entries, one per
//! bipartition, is propagated by a product of 4x4 two-site matrices.
//!
//! The crate provides
//!
//! - the single-gate transfer matrices in both bases with their exact
//!   eigensystem ([`gate`]), plus a Monte-Carlo oracle sampling actual
//!   Haar 1-qubit unitaries ([`mc`]),
//! - gate-ordering protocols on chains and on a 2D grid, together with the
//!   spectrum-preserving rewrites that canonicalize them ([`protocol`],
//!   [`geometry`]),
//! - dense evolution of the purity vector with rate extraction ([`purity`]),
//! - non-Hermitian spectral analysis of the one-period transfer matrix:
//!   left/right eigenvectors, expansion coefficients, phantom-eigenvalue
//!   diagnostics and a deflated power method ([`spectral`]),
//! - a rank-bounded tensor-train engine for sizes beyond the dense cap
//!   ([`mps`]),
//! - the all-to-all averaged gate and its asymptotic spectral gap
//!   ([`meanfield`]), and effective-eigenvalue analysis of layered 2D
//!   protocols ([`sycamore`]).

pub mod bits;
pub mod error;
pub mod gate;
pub mod geometry;
pub mod mc;
pub mod protocol;
pub mod purity;
pub mod meanfield;
pub mod mps;
pub mod spectral;
pub mod sycamore;

pub use error::{Error, Result};
pub use gate::{Basis, GateCoefficients, GateParams, TwoSiteMatrix};
pub use protocol::{Bond, Boundary, Protocol};
pub use purity::{BipartitionMask, PurityVector, RateTrace};
