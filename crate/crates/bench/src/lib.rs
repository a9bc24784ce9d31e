//! Shared fixtures for the benchmarks.

use quasinoise::floquet::{build_grid, Grid};
use quasinoise::ModelParams;

/// Reduced double well (`E_b = 8`) whose grids stay small enough to
/// benchmark in milliseconds.
pub fn small_model(drive: f64) -> ModelParams {
    ModelParams {
        barrier_height: 8.0,
        ..ModelParams::reference(drive)
    }
}

pub fn small_grid(p: &ModelParams, n_points: usize) -> Grid {
    build_grid(p, 3.0 * p.barrier_height, n_points).expect("grid")
}
