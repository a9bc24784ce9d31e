use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::PowerSpectrum;

pub const MIN_FIT_POINTS: usize = 8;

/// Least-squares line `ln P_k = log_intercept - alpha ln k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha: f64,
    pub log_intercept: f64,
    pub k_range: [usize; 2],
    pub residual_rms: f64,
}

impl AlphaFit {
    pub fn predict(&self, k: f64) -> f64 {
        (self.log_intercept - self.alpha * k.ln()).exp()
    }
}

pub fn fit_alpha(ps: &PowerSpectrum, k_lo: usize, k_hi: usize) -> Result<AlphaFit> {
    let k_max = ps.k.last().copied().unwrap_or(0);
    if k_lo < 1 || k_hi > k_max || k_hi < k_lo {
        return Err(invalid(
            "fit.k_range",
            format!("need 1 <= k_lo <= k_hi <= {k_max}, got [{k_lo}, {k_hi}]"),
        ));
    }
    let mut pts = Vec::with_capacity(k_hi - k_lo + 1);
    for (&k, &v) in ps.k.iter().zip(&ps.values) {
        if k < k_lo || k > k_hi {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::NonPositivePower { k, value: v });
        }
        pts.push(((k as f64).ln(), v.ln()));
    }
    if pts.len() < MIN_FIT_POINTS {
        return Err(invalid(
            "fit.k_range",
            format!(
                "{} points in range, need at least {MIN_FIT_POINTS}",
                pts.len()
            ),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual_rms = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(AlphaFit {
        alpha: -slope,
        log_intercept: intercept,
        k_range: [k_lo, k_hi],
        residual_rms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synthetic(f: impl Fn(f64) -> f64, k_max: usize) -> PowerSpectrum {
        PowerSpectrum {
            k: (1..=k_max).collect(),
            values: (1..=k_max).map(|k| f(k as f64)).collect(),
            n_averaged: 1,
            window_len: 2 * k_max,
        }
    }

    #[test]
    fn exact_power_laws() {
        let fit = fit_alpha(&synthetic(|k| 7.0 / (k * k), 64), 1, 32).unwrap();
        assert!((fit.alpha - 2.0).abs() < 1e-3);
        assert!((fit.log_intercept - 7.0_f64.ln()).abs() < 1e-10);
        assert!(fit.residual_rms < 1e-12);
        let fit = fit_alpha(&synthetic(|k| 3.0 / k, 64), 1, 32).unwrap();
        assert!((fit.alpha - 1.0).abs() < 1e-3);
        assert!((fit.predict(4.0) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_ranges_and_power() {
        let ps = synthetic(|k| 1.0 / k, 64);
        assert!(fit_alpha(&ps, 0, 10).is_err());
        assert!(fit_alpha(&ps, 1, 65).is_err());
        assert!(fit_alpha(&ps, 1, 5).is_err());
        let mut ps = ps;
        ps.values[3] = 0.0;
        assert!(matches!(
            fit_alpha(&ps, 1, 32),
            Err(Error::NonPositivePower { k: 4, .. })
        ));
    }

    proptest! {
        #[test]
        fn scaling_shifts_only_the_intercept(scale in 1e-6f64..1e6, alpha in 0.5f64..2.5) {
            let base = synthetic(|k| k.powf(-alpha) * (1.0 + 0.1 * (k * 1.7).sin()), 64);
            let mut scaled = base.clone();
            scaled.values.iter_mut().for_each(|v| *v *= scale);
            let a = fit_alpha(&base, 1, 40).unwrap();
            let b = fit_alpha(&scaled, 1, 40).unwrap();
            prop_assert!((a.alpha - b.alpha).abs() < 1e-10);
            prop_assert!((b.log_intercept - a.log_intercept - scale.ln()).abs() < 1e-9);
        }
    }
}
