//! Phase-space resolution of the return probability: the diagonal of the
//! Wigner propagator, its classical Liouville counterpart, Poincaré
//! sections and Monte-Carlo classical return probabilities.

mod classical;
mod field;
mod wigner;

pub use classical::{
    classical_return_probability, default_epsilon, determinant, finite_difference_jacobian, flow,
    flow_with_tangent, integrate_trajectory, liouville_diagonal_estimate, poincare_section,
    poincare_section_with_step, static_orbit_period, ClassicalReturn, PhasePoint, PoincareSection,
    SectionOrbit, Trajectory, TrajectoryEnsemble, DEFAULT_STEPS_PER_PERIOD, MIN_RETURN_SAMPLES,
    MIN_STEPS_PER_PERIOD,
};
pub use field::{FieldKind, PhaseSpaceField, PhaseWindow};
pub use wigner::{
    check_trace_identity, full_window, wigner_of_state, wigner_propagator_diagonal, Refinement,
    WignerKernel, WignerLattice, DEFAULT_RESOLUTION, WIGNER_OVERSAMPLE,
};
