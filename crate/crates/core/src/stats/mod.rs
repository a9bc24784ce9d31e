//! Unfolding, the `delta_q` series, averaged power spectra, exponent fits,
//! the spectral form factor and the identities that tie them together.

mod delta;
mod fit;
mod form_factor;
mod identity;
mod power;
mod unfold;

pub use delta::{delta_series, DeltaSeries};
pub use fit::{fit_alpha, AlphaFit, MIN_FIT_POINTS};
pub use form_factor::{form_factor, form_factor_quasi, return_probability_qm, FormFactor};
pub use identity::{
    check_power_formfactor_identity, deviation_closure, deviation_law, model_return_probability,
    normalized_deviation, offset_diagnostic, sampled_staircase_power, staircase_power,
    DeviationReport, IdentityReport, OffsetReport, Regime, DEFAULT_OVERSAMPLE, MIN_REALIZATIONS,
};
pub use power::{
    periodogram, power_spectrum_delta, Detrend, PowerAccumulator, PowerOptions, PowerSpectrum,
};
pub use unfold::{
    unfold, unfold_quasienergies, Staircase, UnfoldMethod, UnfoldedSpectrum, MIN_LEVELS,
};
