//! Monte Carlo laboratory for wave-function localization driven by
//! light-cone colored noise.

pub mod analytic;
pub mod config;
pub mod correlation;
pub mod error;
pub mod flrw;
pub mod harness;
pub mod lattice;
pub mod noise;
pub mod output;
pub mod potential;
pub mod quadrature;
pub mod selftest;
pub mod stats;
pub mod wavefunction;

pub use error::{Error, Result};
pub use lattice::{CellKey, GridSpec, Lattice, PhysParams};
pub use noise::{NoiseField, Refinement};
pub use potential::{PotentialSample, TimeWindow};
