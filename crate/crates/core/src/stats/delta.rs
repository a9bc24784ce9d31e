use serde::{Deserialize, Serialize};

use crate::stats::UnfoldedSpectrum;

/// Cumulative spacing fluctuations `delta_q = eps_{q+1} - eps_1 - q`,
/// `q = 1..count-1`.
///
/// A circular series comes from levels on a circle of circumference `count`;
/// it is periodic with `delta_0 = delta_count = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSeries {
    pub values: Vec<f64>,
    pub circular: bool,
}

impl DeltaSeries {
    /// Number of levels the series was built from.
    pub fn level_count(&self) -> usize {
        self.values.len() + 1
    }

    /// `delta_0 = 0` followed by `values`: one sample per level.
    pub fn samples(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.values.len() + 1);
        x.push(0.0);
        x.extend_from_slice(&self.values);
        x
    }

    /// Sample `q` of the series; wraps for circular series.
    pub fn at(&self, q: usize) -> f64 {
        let n = self.level_count();
        let q = if self.circular { q % n } else { q };
        if q == 0 {
            0.0
        } else {
            self.values[q - 1]
        }
    }
}

pub fn delta_series(u: &UnfoldedSpectrum) -> DeltaSeries {
    let first = u.levels.first().copied().unwrap_or(0.0);
    let values = u
        .levels
        .iter()
        .enumerate()
        .skip(1)
        .map(|(q, e)| e - first - q as f64)
        .collect();
    DeltaSeries {
        values,
        circular: u.circumference.is_some(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn open(levels: Vec<f64>) -> UnfoldedSpectrum {
        UnfoldedSpectrum {
            levels,
            circumference: None,
        }
    }

    #[test]
    fn equally_spaced_levels_have_no_fluctuation() {
        let d = delta_series(&open((0..50).map(f64::from).collect()));
        assert!(d.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn four_level_example() {
        let d = delta_series(&open(vec![0.0, 1.5, 2.0, 3.0]));
        assert_eq!(d.values, vec![0.5, 0.0, 0.0]);
        assert_eq!(d.samples(), vec![0.0, 0.5, 0.0, 0.0]);
    }

    #[test]
    fn circular_series_wraps() {
        let u = UnfoldedSpectrum {
            levels: vec![0.2, 1.0, 2.4, 3.1],
            circumference: Some(4.0),
        };
        let d = delta_series(&u);
        assert!(d.circular);
        assert_eq!(d.at(4), 0.0);
        assert_eq!(d.at(6), d.at(2));
    }

    proptest! {
        #[test]
        fn cumulative_sum_matches_closed_form(gaps in prop::collection::vec(0.01f64..3.0, 2..200)) {
            let mut levels = vec![0.0];
            for g in &gaps {
                levels.push(levels.last().unwrap() + g);
            }
            let n = levels.len() as f64;
            let span = levels.last().unwrap() - levels[0];
            let levels: Vec<f64> = levels.iter().map(|x| x * (n - 1.0) / span).collect();
            let u = open(levels);
            let d = delta_series(&u);
            let mean = u.mean_spacing();
            let mut acc = 0.0;
            for (q, s) in u.spacings().iter().enumerate() {
                acc += s - mean;
                prop_assert!((acc - d.values[q]).abs() < 1e-12 * (1.0 + n));
            }
        }
    }
}
