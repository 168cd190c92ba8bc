//! Desk-scale toolkit for stationary symbolic processes.
//!
//! The crate has five parts:
//!
//! - [`words`]: finite words and fixed-length languages, full-binary-tree
//!   admission over the language trie with checkable certificates, and
//!   extraction of coordinatewise-separated word pairs.
//! - [`process`]: i.i.d., Markov, function-of-Markov, and empirical source
//!   models; seeded path sampling; exact and empirical block laws, plain and
//!   conditioned on fixed symbol patterns.
//! - [`entropy`]: base-2 entropies, conditional entropy, entropy-rate
//!   ladders, greedy typical sets, chain-rule residuals, and the numerical
//!   hypothesis checker for tree admission of conditioned blocks.
//! - [`construct`]: the end-to-end construction of a non-recurrent pair for
//!   a positive-entropy source — block-scheme geometry, conditioning atoms,
//!   typical restriction, tree admission, pair assembly, and a deterministic
//!   shift-by-shift verifier.
//! - [`tightness`]: windowed mean-Hamming (d-bar) estimates, search for
//!   mean-asymptotic pairs, and greedy Hamming-ball covers of typical sets.
//!
//! Every randomized operation takes an explicit seed and derives independent
//! streams from it, so all outputs are reproducible bit for bit.

pub mod construct;
pub mod entropy;
mod error;
pub mod process;
pub mod rng;
pub mod tightness;
pub mod words;

pub use error::{Error, Result};
