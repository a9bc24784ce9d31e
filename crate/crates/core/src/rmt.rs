//! Reference level sequences from random-matrix and Poisson ensembles, and
//! the closed-form `<P_k^delta>` laws they should reproduce.
//!
//! Gaussian ensembles are sampled through the tridiagonal beta-Hermite model,
//! whose eigenvalue law equals that of the dense GOE/GUE while costing
//! `O(N^2)` per realization. Dense samplers remain available for
//! cross-checks.

use std::f64::consts::PI;

use faer::{c64, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::{unfold, Staircase, UnfoldMethod, UnfoldedSpectrum};

pub const MIN_DIM: usize = 16;
/// Fraction of the Gaussian-ensemble spectrum kept for statistics.
pub const BULK_FRACTION: f64 = 0.8;
/// Staircase polynomial order for Gaussian-ensemble unfolding.
pub const GAUSSIAN_UNFOLD_ORDER: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Goe,
    Gue,
    Gse,
    Cue,
    Coe,
    Poisson,
}

impl EnsembleKind {
    /// Dyson index, `None` for Poisson.
    pub fn beta(self) -> Option<u8> {
        match self {
            Self::Goe | Self::Coe => Some(1),
            Self::Gue | Self::Cue => Some(2),
            Self::Gse => Some(4),
            Self::Poisson => None,
        }
    }

    pub fn theory(self) -> Theory {
        self.beta().map_or(Theory::Poisson, Theory::Beta)
    }

    pub fn is_circular(self) -> bool {
        matches!(self, Self::Cue | Self::Coe)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub dim: usize,
    pub realizations: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dim < MIN_DIM {
            return Err(invalid(
                "ensemble.dim",
                format!("must be >= {MIN_DIM}, got {}", self.dim),
            ));
        }
        if self.realizations < 1 {
            return Err(invalid("ensemble.realizations", "must be >= 1"));
        }
        if self.kind == EnsembleKind::Gse {
            return Err(Error::UnsupportedEnsemble(
                "gse sampling is not implemented; use rmt::theory_pk(Theory::Beta(4), ..) for its curve".into(),
            ));
        }
        Ok(())
    }
}

/// Generator for realization `r`: one ChaCha8 stream per realization under
/// the root seed, so realizations are reproducible independently of order.
pub fn realization_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

/// Sorted levels of one realization. Circular ensembles yield eigenphases in
/// `(-pi, pi]`.
pub fn sample_realization(spec: &EnsembleSpec, r: usize) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut rng = realization_rng(spec.seed, r);
    let n = spec.dim;
    let mut levels = match spec.kind {
        EnsembleKind::Poisson => (0..n).map(|_| rng.random::<f64>() * n as f64).collect(),
        EnsembleKind::Goe => beta_hermite(n, 1.0, &mut rng)?,
        EnsembleKind::Gue => beta_hermite(n, 2.0, &mut rng)?,
        EnsembleKind::Cue => eigenphases(&haar_unitary(n, &mut rng))?,
        EnsembleKind::Coe => {
            let u = haar_unitary(n, &mut rng);
            eigenphases(&(u.transpose() * &u))?
        }
        EnsembleKind::Gse => unreachable!("rejected by validate"),
    };
    levels.sort_by(f64::total_cmp);
    Ok(levels)
}

pub fn sample_levels(spec: &EnsembleSpec) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    (0..spec.realizations)
        .into_par_iter()
        .map(|r| sample_realization(spec, r))
        .collect()
}

/// The standard unfolding for each ensemble: linear for Poisson, uniform
/// circle for circular ensembles, and for Gaussian ensembles the central 80%
/// of each spectrum mapped through one order-7 staircase fitted to the pooled
/// realizations.
pub fn unfold_ensemble(kind: EnsembleKind, spectra: &[Vec<f64>]) -> Result<Vec<UnfoldedSpectrum>> {
    match kind {
        EnsembleKind::Poisson => spectra
            .par_iter()
            .map(|l| unfold(l, UnfoldMethod::Linear))
            .collect(),
        EnsembleKind::Cue | EnsembleKind::Coe => {
            spectra.par_iter().map(|l| unfold_circle(l)).collect()
        }
        EnsembleKind::Goe | EnsembleKind::Gue | EnsembleKind::Gse => {
            let bulk: Vec<&[f64]> = spectra.iter().map(|l| bulk(l)).collect();
            let staircase = Staircase::fit(&bulk, GAUSSIAN_UNFOLD_ORDER)?;
            bulk.par_iter().map(|l| staircase.unfold(l)).collect()
        }
    }
}

fn bulk(levels: &[f64]) -> &[f64] {
    let n = levels.len();
    let cut = ((1.0 - BULK_FRACTION) / 2.0 * n as f64).round() as usize;
    &levels[cut..n - cut]
}

/// Eigenphases in `(-pi, pi]` mapped onto a circle of circumference `n`.
pub fn unfold_circle(phases: &[f64]) -> Result<UnfoldedSpectrum> {
    let n = phases.len() as f64;
    let u = UnfoldedSpectrum {
        levels: phases.iter().map(|t| (t + PI) * n / (2.0 * PI)).collect(),
        circumference: Some(n),
    };
    if let Some(i) = u.levels.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotonic { index: i + 1 });
    }
    Ok(u)
}

pub fn sample_unfolded(spec: &EnsembleSpec) -> Result<Vec<UnfoldedSpectrum>> {
    unfold_ensemble(spec.kind, &sample_levels(spec)?)
}

/// Which closed-form law [`theory_pk`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theory {
    Beta(u8),
    Poisson,
}

/// `D_H / (2 beta pi^2 k)` for chaotic spectra, `D_H^2 / (4 pi^2 k^2)` for
/// Poisson spectra; valid for `1 <= k << D_H`.
pub fn theory_pk(theory: Theory, d_h: usize, k: usize) -> Result<f64> {
    if k < 1 || k >= d_h {
        return Err(Error::OutsideValidity { k, dim: d_h });
    }
    let (d, k) = (d_h as f64, k as f64);
    match theory {
        Theory::Beta(beta @ (1 | 2 | 4)) => Ok(d / (2.0 * beta as f64 * PI * PI * k)),
        Theory::Beta(b) => Err(invalid("beta", format!("must be 1, 2 or 4, got {b}"))),
        Theory::Poisson => Ok(d * d / (4.0 * PI * PI * k * k)),
    }
}

fn chi<R: Rng>(dof: f64, rng: &mut R) -> f64 {
    ChiSquared::new(dof)
        .expect("positive degrees of freedom")
        .sample(rng)
        .sqrt()
}

/// Eigenvalues of the `beta`-Hermite tridiagonal matrix: diagonal
/// `N(0, 2) / sqrt 2`, off-diagonal `chi_{beta (n - i)} / sqrt 2`.
fn beta_hermite<R: Rng>(n: usize, beta: f64, rng: &mut R) -> Result<Vec<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut d: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            z * 2.0_f64.sqrt() * s
        })
        .collect();
    let mut e: Vec<f64> = (1..n)
        .map(|i| chi(beta * (n - i) as f64, rng) * s)
        .collect();
    tridiagonal_eigenvalues(&mut d, &mut e)?;
    Ok(d)
}

/// Eigenvalues (unsorted, in `d`) of the symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e`, by implicit QL with Wilkinson shifts.
pub fn tridiagonal_eigenvalues(d: &mut [f64], e: &mut Vec<f64>) -> Result<()> {
    let n = d.len();
    if e.len() + 1 != n {
        return Err(invalid("e", "off-diagonal must have length n - 1"));
    }
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::Eigen(format!(
                    "tridiagonal QL did not converge at index {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = (g * g + 1.0).sqrt();
            g = d[m] - d[l] + e[l] / (g + if g >= 0.0 { r } else { -r });
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = (f * f + g * g).sqrt();
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    e.pop();
    Ok(())
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the phases
/// of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng>(n: usize, rng: &mut R) -> Mat<c64> {
    let z = Mat::from_fn(n, n, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    let phases: Vec<c64> = (0..n)
        .map(|j| {
            let d = r[(j, j)];
            if d.norm() > 0.0 {
                d / d.norm()
            } else {
                c64::new(1.0, 0.0)
            }
        })
        .collect();
    Mat::from_fn(n, n, |i, j| q[(i, j)] * phases[j])
}

fn eigenphases(u: &Mat<c64>) -> Result<Vec<f64>> {
    let evd = u.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(evd
        .S()
        .column_vector()
        .iter()
        .map(|l| {
            let a = l.im.atan2(l.re);
            if a <= -PI {
                PI
            } else {
                a
            }
        })
        .collect())
}

/// Dense GOE (`beta = 1`) or GUE (`beta = 2`) eigenvalues with the same
/// normalization as the tridiagonal sampler.
pub fn sample_dense_gaussian<R: Rng>(n: usize, beta: u8, rng: &mut R) -> Result<Vec<f64>> {
    let mut levels = match beta {
        1 => {
            let a = Mat::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let h = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)]) / 2.0);
            h.self_adjoint_eigenvalues(faer::Side::Lower)
                .map_err(|e| Error::Eigen(format!("{e:?}")))?
        }
        2 => {
            let a = Mat::from_fn(n, n, |_, _| complex_gaussian(rng));
            let h = Mat::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) / 2.0);
            h.self_adjoint_eigenvalues(faer::Side::Lower)
                .map_err(|e| Error::Eigen(format!("{e:?}")))?
        }
        b => {
            return Err(invalid(
                "beta",
                format!("dense sampling supports beta 1 or 2, got {b}"),
            ))
        }
    };
    levels.sort_by(f64::total_cmp);
    Ok(levels)
}
