//! Shared fixtures for the benchmarks.

use llb_core::verify::{curved_setup, StandardRun};

/// The flat standard setup on an `n x n` grid.
pub fn flat(n: usize) -> StandardRun {
    StandardRun::new(n, 1e-4, 1e-3).expect("standard setup")
}

/// Conformal metric with a non-abelian connection, same initial data as [`flat`].
pub fn curved(n: usize) -> StandardRun {
    let (grid, conn) = curved_setup(n).expect("curved setup");
    StandardRun::on(grid, conn, 1e-6, 1e-5).expect("curved run")
}
