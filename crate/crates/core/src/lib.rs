//! Computational toolkit for Kleinian groups: Möbius kernel, group
//! constructors, Klein combination and pull-apart sequences, limit-set
//! sampling, Hausdorff-dimension estimates and covering-mass certificates,
//! and the book-of-I-bundles circle-tree construction.

pub mod booktree;
pub mod circletree;
pub mod cli;
pub mod combine;
pub mod dimension;
pub mod error;
pub mod groups;
pub mod limitset;
pub mod moebius;
pub mod tolerances;

pub use error::{Error, Result};
