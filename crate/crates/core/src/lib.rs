//! Lorentz-type Besov quasi-norms, their difference characterizations, and numerical
//! experiments around them.

#![forbid(unsafe_code)]

pub mod besov_norms;
pub mod counterexamples;
pub mod differences;
pub mod error;
pub mod extensions;
pub mod grid;
pub mod harness;
pub mod littlewood_paley;
pub mod lorentz;
pub mod quadrature;
pub mod wavelets;

pub use error::{Error, Result};
pub use grid::{AnalyticField, Lattice, SampledFunction, Spectrum};
pub use lorentz::{Exponent, LorentzParams, WeightedValueSet};
