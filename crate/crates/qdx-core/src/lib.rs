//! Symbolic-numeric toolkit for the local analytic theory of linear
//! q-difference equations `X(qz) = A(z) X(z)` with `|q| > 1`.
//!
//! The crate covers the computable core of the subject:
//!
//! - truncated two-sided Laurent arithmetic with the dilation operator σ_q
//!   ([`numkernel`]);
//! - Jacobi theta functions, their powers, and the "good value of q" test
//!   ([`theta`]);
//! - points of the elliptic curve E_q = C*/q^Z, q-spirals, root grids and
//!   residues ([`elliptic`]);
//! - block q-difference systems, Newton polygons and Birkhoff-Guenther
//!   normal forms ([`qdmod`]);
//! - algebraic summation in a direction of E_q and Stokes cocycles
//!   ([`stokes`]);
//! - q-alien derivatives with closed forms, numeric residue oracles and
//!   canonical bases ([`alien`]);
//! - the formal (pure) Galois group calculus, the wild group law and its
//!   action on alien symbols ([`formal`]);
//! - ramification, μ_r-averaging and Hilbert-90 style descent ([`ramify`]).


pub mod alien;
pub mod cmatrix;
pub mod elliptic;
pub mod error;
pub mod formal;
pub mod json;
pub mod lmatrix;
pub mod numkernel;
pub mod qdmod;
pub mod ramify;
pub mod rat;
pub mod rng;
pub mod stokes;
pub mod theta;
pub mod verify;

pub use error::{Error, Result};
pub use numkernel::{LaurentSeries, QParams};

/// Complex scalar used throughout the crate.
pub type C = num_complex::Complex64;
