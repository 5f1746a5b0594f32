//! Reconstruction of curve intersection sets, cell adjacency graphs, Tutte
//! embeddings and area measures from the support of a permuton built out of
//! two space-filling grid curves.
//!
//! Indices are 0-based throughout the library. Files written by the harness
//! use 1-based ranks and vertices, and 0-based cell coordinates.

pub mod combinatorics;
pub mod curve;
pub mod error;
pub mod harness;
pub mod measure;
pub mod numeric;
pub mod permuton;
pub mod seeds;
pub mod tm;
pub mod tutte;
pub mod walks;

pub use error::{Error, Result};
