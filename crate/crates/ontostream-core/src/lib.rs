//! Core of an ontology-mediated analytical stream query engine.
//!
//! This crate holds everything that is independent of the operating system:
//! the ontology data model with aggregate concepts and its reasoning
//! operations, conjunctive-query rewriting, mapping-based unfolding into a
//! relational/stream algebra, the query-language frontend, and the window,
//! signature, and correlation machinery of the stream engine. IO, file
//! formats on disk, threads, and the CLI live in the companion `ontostream`
//! crate.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `std` feature is on
//! by default and only switches the float math primitives.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod engine;
pub mod ir;
pub mod mapping;
pub mod ontology;
pub mod partition;
pub mod query;
pub mod rational;
pub mod rewrite;
pub mod starql;
pub mod testgen;

pub use ontology::{Dataset, Ontology};
pub use rational::Rational;

/// Float math shims so the numeric code reads the same with and without std.
pub(crate) mod fmath {
    #[cfg(feature = "std")]
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }

    #[cfg(not(feature = "std"))]
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[cfg(feature = "std")]
    #[inline]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }

    #[cfg(not(feature = "std"))]
    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
}
