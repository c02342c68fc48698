//! Finite-dimensional quantum hypothesis-testing numerics.
//!
//! The crate computes the optimal type-II error quantity beta_{eps,n} with
//! rigorous two-sided bounds, the multinomial type decomposition and
//! pinching map of product density operators, the abelian (Hiai-Petz)
//! restriction that turns quantum relative entropy into a classical KL plus
//! exact correction terms, classical typical-set statistics by enumeration
//! over types, and CPTP channels with Stinespring dilations - everything
//! needed to verify quantum Stein's lemma and the monotonicity of the
//! relative entropy at desk scale.

#![forbid(unsafe_code)]

pub mod abelian;
pub mod channels;
pub mod entropy;
pub mod error;
pub mod files;
pub mod hypothesis;
pub mod operators;
pub mod seed;
pub mod type_classes;
pub mod typical;

pub use error::{Error, Result};
