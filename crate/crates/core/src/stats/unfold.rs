use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floquet::QuasiSpectrum;

/// Fewest levels accepted by [`unfold`].
pub const MIN_LEVELS: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnfoldMethod {
    /// Affine map onto unit mean spacing; for spectra with uniform mean
    /// density.
    Linear,
    /// Least-squares polynomial of the given order fitted to the staircase.
    Polynomial(usize),
}

/// Levels mapped through the smooth staircase so that the mean spacing is 1.
///
/// Open sequences satisfy `levels[0] = 0`, `levels[n-1] = n - 1`. Circular
/// sequences (quasienergies) have `circumference = Some(n)`: the `n` spacings
/// including the wrap-around one average exactly 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnfoldedSpectrum {
    pub levels: Vec<f64>,
    pub circumference: Option<f64>,
}

impl UnfoldedSpectrum {
    /// `D_H`
    pub fn count(&self) -> usize {
        self.levels.len()
    }

    /// Nearest-neighbour spacings (including the wrap-around spacing for
    /// circular spectra).
    pub fn spacings(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.levels.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(c) = self.circumference {
            s.push(self.levels[0] + c - self.levels[self.levels.len() - 1]);
        }
        s
    }

    pub fn mean_spacing(&self) -> f64 {
        let s = self.spacings();
        s.iter().sum::<f64>() / s.len() as f64
    }
}

fn check_sorted(raw: &[f64]) -> Result<()> {
    if raw.len() < MIN_LEVELS {
        return Err(Error::TooFewLevels {
            got: raw.len(),
            required: MIN_LEVELS,
        });
    }
    if let Some(i) = raw.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonMonotonic { index: i });
    }
    if let Some(i) = raw.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::NonMonotonic { index: i + 1 });
    }
    Ok(())
}

/// Affine rescaling so that the first level sits at 0 and the last at `n - 1`.
fn rescale_open(mapped: &[f64]) -> Vec<f64> {
    let n = mapped.len();
    let first = mapped[0];
    let span = mapped[n - 1] - first;
    let scale = (n - 1) as f64 / span;
    let mut out: Vec<f64> = mapped.iter().map(|x| (x - first) * scale).collect();
    out[n - 1] = (n - 1) as f64;
    out
}

/// Unfolds a strictly increasing open sequence of levels.
pub fn unfold(raw: &[f64], method: UnfoldMethod) -> Result<UnfoldedSpectrum> {
    check_sorted(raw)?;
    match method {
        UnfoldMethod::Linear => Ok(UnfoldedSpectrum {
            levels: rescale_open(raw),
            circumference: None,
        }),
        UnfoldMethod::Polynomial(order) => Staircase::fit(&[raw], order)?.unfold(raw),
    }
}

/// Smooth staircase `N(E)`: a Legendre series on a fixed energy interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Staircase {
    pub coefficients: Vec<f64>,
    pub center: f64,
    pub half_width: f64,
}

impl Staircase {
    /// Least-squares fit to the pooled staircases `N(E_i) = i + 1/2` of one
    /// or more spectra. Pooling spectra fits the ensemble-mean staircase, which
    /// does not absorb the low-frequency fluctuations of any single spectrum.
    pub fn fit(spectra: &[&[f64]], order: usize) -> Result<Self> {
        let rows: usize = spectra.iter().map(|s| s.len()).sum();
        let min_len = spectra.iter().map(|s| s.len()).min().unwrap_or(0);
        if order == 0 || order + 1 >= min_len {
            return Err(Error::DegenerateFit(format!(
                "polynomial order {order} needs between 1 and {} levels",
                min_len.saturating_sub(2)
            )));
        }
        let lo = spectra.iter().map(|s| s[0]).fold(f64::INFINITY, f64::min);
        let hi = spectra
            .iter()
            .map(|s| s[s.len() - 1])
            .fold(f64::NEG_INFINITY, f64::max);
        let (center, half_width) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let mut a = Mat::<f64>::zeros(rows, order + 1);
        let mut b = Mat::<f64>::zeros(rows, 1);
        let mut basis = vec![0.0; order + 1];
        let mut r = 0;
        for s in spectra {
            for (i, &e) in s.iter().enumerate() {
                legendre_basis((e - center) / half_width, order, &mut basis);
                for (k, v) in basis.iter().enumerate() {
                    a[(r, k)] = *v;
                }
                b[(r, 0)] = i as f64 + 0.5;
                r += 1;
            }
        }
        let qr = a.qr();
        let rm = qr.R();
        let diag_max = (0..=order).map(|k| rm[(k, k)].abs()).fold(0.0, f64::max);
        if (0..=order).any(|k| !(rm[(k, k)].abs() > 1e-12 * diag_max)) {
            return Err(Error::DegenerateFit(
                "rank-deficient staircase design matrix".into(),
            ));
        }
        let x = qr.solve_lstsq(&b);
        let coefficients: Vec<f64> = (0..=order).map(|k| x[(k, 0)]).collect();
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::DegenerateFit("non-finite coefficients".into()));
        }
        Ok(Self {
            coefficients,
            center,
            half_width,
        })
    }

    pub fn eval(&self, e: f64) -> f64 {
        let mut basis = vec![0.0; self.coefficients.len()];
        legendre_basis(
            (e - self.center) / self.half_width,
            self.coefficients.len() - 1,
            &mut basis,
        );
        self.coefficients
            .iter()
            .zip(&basis)
            .map(|(c, b)| c * b)
            .sum()
    }

    /// Maps `raw` through the staircase, then rescales affinely onto
    /// `[0, n - 1]`.
    pub fn unfold(&self, raw: &[f64]) -> Result<UnfoldedSpectrum> {
        check_sorted(raw)?;
        let mapped: Vec<f64> = raw.iter().map(|&e| self.eval(e)).collect();
        if let Some(i) = mapped.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateFit(format!(
                "staircase fit is not monotonic near level {}",
                i + 1
            )));
        }
        Ok(UnfoldedSpectrum {
            levels: rescale_open(&mapped),
            circumference: None,
        })
    }
}

/// Quasienergies have uniform mean density `D_H / (hbar W)` on the circle;
/// the map `(E + hbar W / 2) D_H / (hbar W)` preserves the phases `E T / hbar`
/// up to a common offset.
pub fn unfold_quasienergies(spectrum: &QuasiSpectrum) -> Result<UnfoldedSpectrum> {
    check_sorted(&spectrum.energies)?;
    let width = spectrum.zone_width();
    let n = spectrum.dim() as f64;
    Ok(UnfoldedSpectrum {
        levels: spectrum
            .energies
            .iter()
            .map(|e| (e + width / 2.0) * n / width)
            .collect(),
        circumference: Some(n),
    })
}

fn legendre_basis(x: f64, order: usize, out: &mut [f64]) {
    out[0] = 1.0;
    if order >= 1 {
        out[1] = x;
    }
    for k in 2..=order {
        let kf = k as f64;
        out[k] = ((2.0 * kf - 1.0) * x * out[k - 1] - (kf - 1.0) * out[k - 2]) / kf;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn integers_unfold_to_unit_spacing() {
        let raw: Vec<f64> = (0..20).map(f64::from).collect();
        let u = unfold(&raw, UnfoldMethod::Linear).unwrap();
        assert!(u.spacings().iter().all(|s| (s - 1.0).abs() < 1e-14));
        let shifted: Vec<f64> = raw.iter().map(|x| 3.0 * x + 7.0).collect();
        assert_eq!(unfold(&shifted, UnfoldMethod::Linear).unwrap(), u);
    }

    #[test]
    fn linear_unfolding_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut raw: Vec<f64> = (0..300).map(|_| rng.random::<f64>() * 40.0).collect();
        raw.sort_by(f64::total_cmp);
        let once = unfold(&raw, UnfoldMethod::Linear).unwrap();
        let twice = unfold(&once.levels, UnfoldMethod::Linear).unwrap();
        for (a, b) in once.levels.iter().zip(&twice.levels) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unsorted_and_short_input() {
        let mut raw: Vec<f64> = (0..20).map(f64::from).collect();
        raw.swap(4, 5);
        assert!(matches!(
            unfold(&raw, UnfoldMethod::Linear),
            Err(Error::NonMonotonic { index: 5 })
        ));
        let short: Vec<f64> = (0..10).map(f64::from).collect();
        assert!(matches!(
            unfold(&short, UnfoldMethod::Linear),
            Err(Error::TooFewLevels { .. })
        ));
        let dup = vec![1.0; 20];
        assert!(unfold(&dup, UnfoldMethod::Linear).is_err());
    }

    #[test]
    fn degenerate_polynomial_order_is_rejected() {
        let raw: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(matches!(
            unfold(&raw, UnfoldMethod::Polynomial(19)),
            Err(Error::DegenerateFit(_))
        ));
        assert!(matches!(
            unfold(&raw, UnfoldMethod::Polynomial(0)),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn poisson_levels_polynomial_unfolding() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut raw: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        raw.sort_by(f64::total_cmp);
        let u = unfold(&raw, UnfoldMethod::Polynomial(7)).unwrap();
        let s = u.spacings();
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let var = s.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / s.len() as f64;
        assert!((mean - 1.0).abs() < 1e-9);
        // exponential spacings: variance 1, sampling error ~ sqrt(8 / n)
        assert!((var - 1.0).abs() < 0.1, "var = {var}");
    }

    #[test]
    fn polynomial_unfolding_flattens_a_smooth_density() {
        // levels drawn from density rho(E) ~ 1 + E on [0, 1] via inverse CDF
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut raw: Vec<f64> = (0..4000)
            .map(|_| {
                let u: f64 = rng.random();
                -1.0 + (1.0 + 3.0 * u).sqrt()
            })
            .collect();
        raw.sort_by(f64::total_cmp);
        let u = unfold(&raw, UnfoldMethod::Polynomial(5)).unwrap();
        let s = u.spacings();
        let half = s.len() / 2;
        let first: f64 = s[..half].iter().sum::<f64>() / half as f64;
        let second: f64 = s[half..].iter().sum::<f64>() / (s.len() - half) as f64;
        assert!((first - second).abs() < 0.08, "{first} vs {second}");
    }

    #[test]
    fn quasienergy_unfolding_scales_by_zone_density() {
        let energies: Vec<f64> = (0..32).map(|i| -0.47 + 0.029 * i as f64).collect();
        let spec = QuasiSpectrum::new(energies.clone(), 0.95, 1.0).unwrap();
        let u = unfold_quasienergies(&spec).unwrap();
        let scale = 32.0 / 0.95;
        for (w, e) in u.levels.windows(2).zip(energies.windows(2)) {
            assert!(((w[1] - w[0]) - (e[1] - e[0]) * scale).abs() < 1e-12);
        }
        assert!((u.mean_spacing() - 1.0).abs() < 1e-12);
    }
}
