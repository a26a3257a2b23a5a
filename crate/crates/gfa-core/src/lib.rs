//! Computable shadows of Colombeau-type generalized functions.
//!
//! The crate models generalized numbers and points on an exact and a sampled
//! layer, ingests ε-parametrized families through a small expression
//! language or programmatically, and decides membership and regularity
//! questions by fitting ε-exponents of sups over prescribed regions.

pub mod classify;
pub mod dsl;
pub mod examples;
pub mod ext;
pub mod fourier;
pub mod points;
pub mod quad;
pub mod scale;
pub mod verify;

pub use ext::Ext;
