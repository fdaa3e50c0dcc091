//! Shared fixtures for the criterion benchmarks.

use nloc_core::{GridSpec, Lattice, PhysParams};

/// Reference lattice shrunk to a radius of 1 so one pass stays in the millisecond range.
pub fn bench_lattice() -> Lattice {
    Lattice::new(
        PhysParams::new(2.0, 1.0, 3.0, 1.0),
        GridSpec::new(0.1, 0.02, 0.01, 51),
    )
    .expect("valid bench lattice")
}
