use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::floquet::QuasiSpectrum;
use crate::stats::UnfoldedSpectrum;

/// `K(tau_l)` on `tau_l = l / D_H`, `l = 0..=l_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormFactor {
    pub tau: Vec<f64>,
    pub values: Vec<f64>,
    pub d_h: usize,
}

impl FormFactor {
    /// Running mean over `2 * half_width + 1` neighbouring `tau` points
    /// (truncated at the ends). `K(0)` is left untouched.
    pub fn smoothed(&self, half_width: usize) -> FormFactor {
        let n = self.values.len();
        let values = (0..n)
            .map(|i| {
                if i == 0 {
                    return self.values[0];
                }
                let lo = i.saturating_sub(half_width).max(1);
                let hi = (i + half_width).min(n - 1);
                self.values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        FormFactor {
            tau: self.tau.clone(),
            values,
            d_h: self.d_h,
        }
    }
}

fn check_dim(d_h: usize) -> Result<()> {
    if d_h < 2 {
        return Err(invalid("D_H", "form factor needs at least 2 levels"));
    }
    Ok(())
}

/// `K(tau_l) = |sum_n exp(2 pi i eps_n l / D_H)|^2 / D_H` from unfolded levels.
pub fn form_factor(u: &UnfoldedSpectrum, l_max: usize) -> Result<FormFactor> {
    let d_h = u.count();
    check_dim(d_h)?;
    let values = (0..=l_max)
        .map(|l| {
            let w = 2.0 * PI * l as f64 / d_h as f64;
            let s: Complex64 = u
                .levels
                .iter()
                .map(|e| Complex64::from_polar(1.0, w * e))
                .sum();
            s.norm_sqr() / d_h as f64
        })
        .collect();
    Ok(FormFactor {
        tau: (0..=l_max).map(|l| l as f64 / d_h as f64).collect(),
        values,
        d_h,
    })
}

/// `K(tau_l) = |Tr U^l|^2 / D_H` directly from quasienergies.
pub fn form_factor_quasi(spec: &QuasiSpectrum, l_max: usize) -> Result<FormFactor> {
    let d_h = spec.dim();
    check_dim(d_h)?;
    Ok(FormFactor {
        tau: (0..=l_max).map(|l| l as f64 / d_h as f64).collect(),
        values: (0..=l_max)
            .map(|l| spec.trace_power(l as i64).norm_sqr() / d_h as f64)
            .collect(),
        d_h,
    })
}

/// `P_ret(lT) = |sum_n exp(-i E_n l T / hbar)|^2` over the retained levels.
pub fn return_probability_qm(spec: &QuasiSpectrum, l: u64) -> Result<f64> {
    if l < 1 {
        return Err(invalid("l", "return probability needs l >= 1"));
    }
    Ok(spec.trace_power(l as i64).norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::unfold_quasienergies;

    fn spectrum() -> QuasiSpectrum {
        let e: Vec<f64> = (0..40)
            .map(|i| -0.47 + 0.0233 * i as f64 + 0.004 * ((i * i) as f64).sin())
            .collect();
        QuasiSpectrum::new(e, 0.95, 1.0).unwrap()
    }

    #[test]
    fn k_at_zero_is_dimension() {
        let s = spectrum();
        let ff = form_factor_quasi(&s, 3).unwrap();
        assert!((ff.values[0] - 40.0).abs() < 1e-12);
        let u = unfold_quasienergies(&s).unwrap();
        assert!((form_factor(&u, 0).unwrap().values[0] - 40.0).abs() < 1e-12);
    }

    #[test]
    fn unfolded_and_direct_forms_agree() {
        let s = spectrum();
        let u = unfold_quasienergies(&s).unwrap();
        let a = form_factor(&u, 100).unwrap();
        let b = form_factor_quasi(&s, 100).unwrap();
        for l in 1..=100 {
            let rel = (a.values[l] - b.values[l]).abs() / b.values[l].max(1e-300);
            assert!(rel < 1e-8, "l = {l}: {} vs {}", a.values[l], b.values[l]);
            let p = return_probability_qm(&s, l as u64).unwrap();
            assert!((p / 40.0 - b.values[l]).abs() <= 1e-10 * b.values[l].max(1.0));
        }
    }

    #[test]
    fn single_level_always_returns() {
        let s = QuasiSpectrum::new(vec![0.123], 0.95, 1.0).unwrap();
        assert!((return_probability_qm(&s, 7).unwrap() - 1.0).abs() < 1e-14);
        assert!(return_probability_qm(&s, 0).is_err());
        assert!(form_factor_quasi(&s, 2).is_err());
    }

    #[test]
    fn smoothing_preserves_constants() {
        let ff = FormFactor {
            tau: (0..10).map(|l| l as f64 / 10.0).collect(),
            values: std::iter::once(10.0)
                .chain(std::iter::repeat_n(1.0, 9))
                .collect(),
            d_h: 10,
        };
        let s = ff.smoothed(3);
        assert_eq!(s.values[0], 10.0);
        assert!(s.values[1..].iter().all(|v| (v - 1.0).abs() < 1e-15));
    }
}
