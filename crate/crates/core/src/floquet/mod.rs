//! One-period Floquet operator of a driven system on a position grid, its
//! quasienergies, and the selection of states that do not feel the grid edge.

mod grid;
mod propagator;
mod spectrum;

pub use grid::{build_grid, minimum_points, Grid, MOMENTUM_MARGIN, POSITION_MARGIN};
pub use propagator::{
    propagate, propagate_period, propagate_state, unitarity_defect, UnitaryPropagator, MIN_SLICES,
    UNITARITY_TOLERANCE,
};
pub use spectrum::{
    quasienergies, quasienergy_of, select_bound_states, zone_width, BoundStates, FloquetEigen,
    QuasiSpectrum, EIGENVALUE_MODULUS_TOLERANCE, MIN_RETAINED_STATES,
};

/// Default number of grid points.
pub const DEFAULT_POINTS: usize = 1024;
/// Default number of time slices per period.
pub const DEFAULT_SLICES: usize = 4096;
/// Default edge region (per side) for bound-state selection.
pub const DEFAULT_EDGE_FRACTION: f64 = 0.1;
/// Default edge-probability threshold for bound-state selection.
pub const DEFAULT_EDGE_THRESHOLD: f64 = 1e-6;
