use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::stats::DeltaSeries;

/// Trend removal applied to each window before the transform.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    None,
    /// Subtract the straight line through `x_a` and `x_{a+D_w}`, turning the
    /// window into a bridge that vanishes at both ends.
    #[default]
    Bridge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerOptions {
    /// `D_w`; `None` takes the whole series as one window.
    pub window_len: Option<usize>,
    pub overlap: f64,
    pub detrend: Detrend,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            window_len: None,
            overlap: 0.0,
            detrend: Detrend::Bridge,
        }
    }
}

/// Averaged `<P_k>` for `k = 1..=D_w/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub k: Vec<usize>,
    pub values: Vec<f64>,
    pub n_averaged: usize,
    pub window_len: usize,
}

impl PowerSpectrum {
    pub fn value(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.values.get(i)).copied()
    }
}

/// `P_k = |sum_q x_q exp(-2 pi i k q / n)|^2 / n` for `k = 0..n`.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|c| c.norm_sqr() / n as f64).collect()
}

/// Running sum of window periodograms; merge partial sums in any order and
/// divide once in [`PowerAccumulator::finish`].
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAccumulator {
    window_len: usize,
    sums: Vec<f64>,
    count: usize,
}

impl PowerAccumulator {
    pub fn new(window_len: usize) -> Result<Self> {
        if window_len < 2 {
            return Err(invalid("window_len", "must be >= 2"));
        }
        Ok(Self {
            window_len,
            sums: vec![0.0; window_len],
            count: 0,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds every window of `d`; returns the number of windows used.
    pub fn add_series(&mut self, d: &DeltaSeries, overlap: f64, detrend: Detrend) -> Result<usize> {
        if !(0.0..=0.9).contains(&overlap) {
            return Err(invalid(
                "overlap",
                format!("must lie in [0, 0.9], got {overlap}"),
            ));
        }
        let w = self.window_len;
        let n = d.level_count();
        let step = ((w as f64 * (1.0 - overlap)).round() as usize).max(1);
        let starts: Vec<usize> = if d.circular {
            if w > n {
                Vec::new()
            } else if w == n {
                vec![0]
            } else {
                (0..n).step_by(step).collect()
            }
        } else {
            // a bridge needs the sample one past the window end
            let needed = w + usize::from(detrend == Detrend::Bridge);
            if needed > n {
                Vec::new()
            } else {
                (0..=n - needed).step_by(step).collect()
            }
        };
        if starts.is_empty() {
            return Err(Error::InsufficientData(format!(
                "window of {w} exceeds the series of {n} samples"
            )));
        }
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(w);
        let mut buf = vec![Complex::new(0.0, 0.0); w];
        for &a in &starts {
            let x0 = d.at(a);
            let slope = match detrend {
                Detrend::None => 0.0,
                Detrend::Bridge => (d.at(a + w) - x0) / w as f64,
            };
            for (i, b) in buf.iter_mut().enumerate() {
                let base = if detrend == Detrend::Bridge {
                    x0 + slope * i as f64
                } else {
                    0.0
                };
                *b = Complex::new(d.at(a + i) - base, 0.0);
            }
            fft.process(&mut buf);
            for (s, c) in self.sums.iter_mut().zip(&buf) {
                *s += c.norm_sqr() / w as f64;
            }
        }
        self.count += starts.len();
        Ok(starts.len())
    }

    pub fn merge(&mut self, other: &PowerAccumulator) -> Result<()> {
        if other.window_len != self.window_len {
            return Err(invalid(
                "window_len",
                "cannot merge spectra of different window lengths",
            ));
        }
        self.sums
            .iter_mut()
            .zip(&other.sums)
            .for_each(|(a, b)| *a += b);
        self.count += other.count;
        Ok(())
    }

    /// Mean periodogram over all windows, `k = 0..D_w`.
    pub fn full_average(&self) -> Result<Vec<f64>> {
        if self.count == 0 {
            return Err(Error::InsufficientData("no windows accumulated".into()));
        }
        Ok(self.sums.iter().map(|s| s / self.count as f64).collect())
    }

    pub fn finish(&self) -> Result<PowerSpectrum> {
        let avg = self.full_average()?;
        let half = self.window_len / 2;
        Ok(PowerSpectrum {
            k: (1..=half).collect(),
            values: avg[1..=half].to_vec(),
            n_averaged: self.count,
            window_len: self.window_len,
        })
    }
}

/// Window- and ensemble-averaged power spectrum of delta series.
pub fn power_spectrum_delta(series: &[DeltaSeries], opts: &PowerOptions) -> Result<PowerSpectrum> {
    let first = series
        .first()
        .ok_or_else(|| Error::InsufficientData("no delta series supplied".into()))?;
    let window_len = match opts.window_len {
        Some(w) => w,
        None if first.circular => first.level_count(),
        None => first.level_count() - usize::from(opts.detrend == Detrend::Bridge),
    };
    let mut acc = PowerAccumulator::new(window_len)?;
    for d in series {
        acc.add_series(d, opts.overlap, opts.detrend)?;
    }
    acc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pure_tone_has_a_single_peak() {
        let w = 256;
        let k0 = 17;
        let values: Vec<f64> = (1..w)
            .map(|q| (2.0 * PI * (k0 * q) as f64 / w as f64).sin())
            .collect();
        let d = DeltaSeries {
            values,
            circular: false,
        };
        let opts = PowerOptions {
            window_len: Some(w),
            overlap: 0.0,
            detrend: Detrend::None,
        };
        let ps = power_spectrum_delta(&[d], &opts).unwrap();
        let peak = ps.value(k0).unwrap();
        assert!((peak - w as f64 / 4.0).abs() < 1e-9);
        for (k, v) in ps.k.iter().zip(&ps.values) {
            if *k != k0 {
                assert!(*v <= 1e-20 * peak, "k = {k}: {v}");
            }
        }
    }

    #[test]
    fn parseval_holds_for_the_full_periodogram() {
        let x: Vec<f64> = (0..300)
            .map(|q| ((q * q) as f64 * 0.37).sin() + 0.01 * q as f64)
            .collect();
        let p = periodogram(&x);
        let lhs: f64 = p.iter().sum();
        let rhs: f64 = x.iter().map(|v| v * v).sum();
        assert!(((lhs - rhs) / rhs).abs() < 1e-10);
    }

    #[test]
    fn accumulation_is_associative() {
        let make = |seed: usize| DeltaSeries {
            values: (1..600)
                .map(|q| ((q * seed) as f64 * 0.013).sin() * 3.0)
                .collect(),
            circular: seed.is_multiple_of(2),
        };
        let series: Vec<DeltaSeries> = (1..5).map(make).collect();
        let mut whole = PowerAccumulator::new(128).unwrap();
        for d in &series {
            whole.add_series(d, 0.5, Detrend::Bridge).unwrap();
        }
        let mut left = PowerAccumulator::new(128).unwrap();
        let mut right = PowerAccumulator::new(128).unwrap();
        left.add_series(&series[0], 0.5, Detrend::Bridge).unwrap();
        for d in &series[1..] {
            right.add_series(d, 0.5, Detrend::Bridge).unwrap();
        }
        right.merge(&left).unwrap();
        let a = whole.finish().unwrap();
        let b = right.finish().unwrap();
        assert_eq!(a.n_averaged, b.n_averaged);
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn window_longer_than_series_is_rejected() {
        let d = DeltaSeries {
            values: vec![0.1; 99],
            circular: false,
        };
        let opts = PowerOptions {
            window_len: Some(256),
            ..PowerOptions::default()
        };
        assert!(matches!(
            power_spectrum_delta(&[d], &opts),
            Err(Error::InsufficientData(_))
        ));
        let bad = PowerOptions {
            window_len: Some(16),
            overlap: 0.95,
            detrend: Detrend::None,
        };
        let d = DeltaSeries {
            values: vec![0.1; 99],
            circular: false,
        };
        assert!(power_spectrum_delta(&[d], &bad).is_err());
    }

    #[test]
    fn circular_windows_wrap_around() {
        let d = DeltaSeries {
            values: (1..100).map(|q| (q as f64 * 0.3).sin()).collect(),
            circular: true,
        };
        let mut acc = PowerAccumulator::new(64).unwrap();
        assert_eq!(acc.add_series(&d, 0.5, Detrend::Bridge).unwrap(), 4);
        let mut full = PowerAccumulator::new(100).unwrap();
        assert_eq!(full.add_series(&d, 0.5, Detrend::Bridge).unwrap(), 1);
    }
}
