//! Language-encoded episodic memory.
//!
//! Frames from a first-person video are captioned ([`capture`]), the caption
//! history is cut into overlapping token windows, embedded and indexed
//! ([`memory`]), and questions are answered from the retrieved windows
//! ([`qa`]). [`eval`] scores answers against reference QA datasets.
//!
//! With the default `parallel` feature the encoding pool, batch embedding,
//! index scans and evaluation run on rayon; without it every path is
//! sequential.

pub mod capture;
pub mod error;
pub mod eval;
mod hashing;
pub mod ingest;
pub mod memory;
pub mod qa;
pub mod retry;

pub use error::{Error, ProviderError, Result};
pub use hashing::{fnv1a, fnv1a_with_seed};
