//! Pseudospectral solver and Besov-space toolkit for the higher-dimensional
//! Camassa–Holm (Euler–Poincaré) system on periodic boxes.

pub mod chdf;
pub mod convergence;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod field;
pub mod fixtures;
pub mod grid;
pub mod littlewood_paley;
pub mod sequences;
pub mod serde_ext;
pub mod transform;

pub use error::{Error, Result};
pub use field::{Field, ScalarField, VectorField};
pub use grid::GridSpec;
pub use littlewood_paley::{BesovParams, DyadicPartition};
pub use rustfft::num_complex::Complex64;
