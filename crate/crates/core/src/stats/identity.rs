use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::{delta_series, form_factor, periodogram, UnfoldedSpectrum};

/// Samples of the staircase per unit of unfolded energy.
pub const DEFAULT_OVERSAMPLE: usize = 32;
/// Ensembles smaller than this are flagged as insufficiently averaged.
pub const MIN_REALIZATIONS: usize = 10;

/// `<P^n(tau)> 4 pi^2 tau^2 / <K(tau)>` per `tau_l = l / D_H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub tau: Vec<f64>,
    pub power_n: Vec<f64>,
    pub form_factor: Vec<f64>,
    pub ratio: Vec<f64>,
    pub realizations: usize,
    /// False when fewer than [`MIN_REALIZATIONS`] spectra were averaged.
    pub sufficient_averaging: bool,
}

impl IdentityReport {
    pub fn max_abs_deviation(&self) -> f64 {
        self.ratio
            .iter()
            .map(|r| (r - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Start of the staircase interval: `eps_1 - 1/2` for open spectra, `0` on
/// the circle. The interval has length `D_H` either way.
fn staircase_origin(u: &UnfoldedSpectrum) -> f64 {
    if u.circumference.is_some() {
        0.0
    } else {
        u.levels[0] - 0.5
    }
}

/// `P^n(tau_l) = |int n~(e) exp(-2 pi i tau_l e) de|^2 / D_H` for
/// `l = 1..=l_max`, with the fluctuating staircase `n~(e) = N(e) - (e - a)`
/// sampled at cell midpoints and transformed by FFT.
pub fn staircase_power(u: &UnfoldedSpectrum, oversample: usize, l_max: usize) -> Result<Vec<f64>> {
    let d = u.count();
    if oversample < 2 {
        return Err(invalid("oversample", "must be >= 2"));
    }
    if l_max >= d * oversample / 2 {
        return Err(Error::OutsideValidity { k: l_max, dim: d });
    }
    let a = staircase_origin(u);
    let m = d * oversample;
    let h = 1.0 / oversample as f64;
    let mut buf = Vec::with_capacity(m);
    let mut count = 0usize;
    for j in 0..m {
        let e = a + (j as f64 + 0.5) * h;
        while count < d && u.levels[count] < e {
            count += 1;
        }
        buf.push(Complex::new(count as f64 - (e - a), 0.0));
    }
    FftPlanner::new().plan_fft_forward(m).process(&mut buf);
    Ok((1..=l_max)
        .map(|l| (h * h) * buf[l].norm_sqr() / d as f64)
        .collect())
}

/// Averages `P^n` (from the staircase) and `K` (from the level phases)
/// separately over the ensemble and reports their ratio on `tau_l`,
/// `l in l_range`.
pub fn check_power_formfactor_identity(
    spectra: &[UnfoldedSpectrum],
    l_range: (usize, usize),
    oversample: usize,
) -> Result<IdentityReport> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::InsufficientData("no spectra supplied".into()))?;
    let d = first.count();
    let (l_lo, l_hi) = l_range;
    if l_lo < 1 || l_hi < l_lo {
        return Err(invalid(
            "l_range",
            format!("need 1 <= l_lo <= l_hi, got {l_range:?}"),
        ));
    }
    if spectra.iter().any(|u| u.count() != d) {
        return Err(invalid("spectra", "all spectra must have the same D_H"));
    }
    let mut pn = vec![0.0; l_hi];
    let mut kk = vec![0.0; l_hi];
    for u in spectra {
        let p = staircase_power(u, oversample, l_hi)?;
        let ff = form_factor(u, l_hi)?;
        for l in 0..l_hi {
            pn[l] += p[l];
            kk[l] += ff.values[l + 1];
        }
    }
    let r = spectra.len() as f64;
    let tau: Vec<f64> = (l_lo..=l_hi).map(|l| l as f64 / d as f64).collect();
    let power_n: Vec<f64> = (l_lo..=l_hi).map(|l| pn[l - 1] / r).collect();
    let form: Vec<f64> = (l_lo..=l_hi).map(|l| kk[l - 1] / r).collect();
    let ratio = tau
        .iter()
        .zip(power_n.iter().zip(&form))
        .map(|(t, (p, k))| p * 4.0 * PI * PI * t * t / k)
        .collect();
    Ok(IdentityReport {
        tau,
        power_n,
        form_factor: form,
        ratio,
        realizations: spectra.len(),
        sufficient_averaging: spectra.len() >= MIN_REALIZATIONS,
    })
}

/// Compares `P^n_k` (the staircase sampled once per unit energy) with
/// `P^delta_k` (one `delta_q` sample per level) on the same spectra. The
/// sampled staircase aliases the high-`tau` tail of `P^n(tau)`, which for
/// chaotic spectra adds the offset `1/12` over `P^delta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffsetReport {
    pub k: Vec<usize>,
    /// `<P^n_k> - <P^delta_k>` per frequency.
    pub difference: Vec<f64>,
    pub mean_difference: f64,
}

/// Periodogram of `n~` sampled at `a + q`, `q = 0..D_H`.
pub fn sampled_staircase_power(u: &UnfoldedSpectrum) -> Vec<f64> {
    let d = u.count();
    let a = staircase_origin(u);
    let mut count = 0usize;
    let samples: Vec<f64> = (0..d)
        .map(|q| {
            let e = a + q as f64;
            while count < d && u.levels[count] < e {
                count += 1;
            }
            count as f64 - q as f64
        })
        .collect();
    periodogram(&samples)
}

pub fn offset_diagnostic(
    spectra: &[UnfoldedSpectrum],
    k_range: (usize, usize),
) -> Result<OffsetReport> {
    let first = spectra
        .first()
        .ok_or_else(|| Error::InsufficientData("no spectra supplied".into()))?;
    let d = first.count();
    let (k_lo, k_hi) = k_range;
    if k_lo < 1 || k_hi < k_lo || k_hi > d / 2 {
        return Err(invalid(
            "k_range",
            format!("need 1 <= k_lo <= k_hi <= {}", d / 2),
        ));
    }
    let mut diff = vec![0.0; k_hi - k_lo + 1];
    for u in spectra {
        if u.count() != d {
            return Err(invalid("spectra", "all spectra must have the same D_H"));
        }
        let pn = sampled_staircase_power(u);
        let pd = periodogram(&delta_series(u).samples());
        for (i, k) in (k_lo..=k_hi).enumerate() {
            diff[i] += pn[k] - pd[k];
        }
    }
    diff.iter_mut().for_each(|x| *x /= spectra.len() as f64);
    let mean_difference = diff.iter().sum::<f64>() / diff.len() as f64;
    Ok(OffsetReport {
        k: (k_lo..=k_hi).collect(),
        difference: diff,
        mean_difference,
    })
}

/// Which regime's return-probability law to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Chaotic { beta: u8 },
    Integrable,
}

/// `D_H^-1 (2 pi tau)^-2 (P_qm - P_cl) / P_cl` on a common `tau` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub tau: Vec<f64>,
    pub values: Vec<f64>,
    /// Input indices omitted because `P_cl = 0` there.
    pub omitted: Vec<usize>,
}

pub fn normalized_deviation(
    tau: &[f64],
    qm: &[f64],
    cl: &[f64],
    d_h: usize,
) -> Result<DeviationReport> {
    if tau.len() != qm.len() || tau.len() != cl.len() {
        return Err(invalid("tau", "tau, qm and cl must have equal length"));
    }
    if d_h == 0 {
        return Err(invalid("D_H", "must be >= 1"));
    }
    let mut out = DeviationReport {
        tau: Vec::new(),
        values: Vec::new(),
        omitted: Vec::new(),
    };
    for (i, ((&t, &q), &c)) in tau.iter().zip(qm).zip(cl).enumerate() {
        if c == 0.0 || t == 0.0 {
            out.omitted.push(i);
            continue;
        }
        let scale = 1.0 / (d_h as f64 * (2.0 * PI * t).powi(2));
        out.tau.push(t);
        out.values.push(scale * (q - c) / c);
    }
    Ok(out)
}

/// Large-`D_H` deviation laws: `(2 pi^2 beta tau)^-1` (chaotic) and
/// `(4 pi^2 tau^2)^-1` (integrable).
pub fn deviation_law(regime: Regime, tau: f64) -> f64 {
    match regime {
        Regime::Chaotic { beta } => 1.0 / (2.0 * PI * PI * beta as f64 * tau),
        Regime::Integrable => 1.0 / (4.0 * PI * PI * tau * tau),
    }
}

/// Model quantum return probability `D_H (2/beta) tau P_cl` or `D_H P_cl`.
pub fn model_return_probability(regime: Regime, tau: f64, p_cl: f64, d_h: usize) -> f64 {
    match regime {
        Regime::Chaotic { beta } => d_h as f64 * (2.0 / beta as f64) * tau * p_cl,
        Regime::Integrable => d_h as f64 * p_cl,
    }
}

/// Exact deviation for the model inputs at finite `D_H`: the large-`D_H`
/// law minus the `P_cl` self term `(4 pi^2 tau^2 D_H)^-1`.
pub fn deviation_closure(regime: Regime, tau: f64, d_h: usize) -> f64 {
    deviation_law(regime, tau) - 1.0 / (4.0 * PI * PI * tau * tau * d_h as f64)
}
