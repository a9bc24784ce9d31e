use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::Hamiltonian;

/// Extra room beyond the outermost classical turning point.
pub const POSITION_MARGIN: f64 = 1.25;
/// Nyquist momentum must exceed `sqrt(2 m e_max)` by this factor.
pub const MOMENTUM_MARGIN: f64 = 1.05;

/// Periodic position grid `q_j = q_min + j dq`, `j = 0..n_points`, with
/// `dq = (q_max - q_min) / n_points`. `q_max` is the (excluded) period end.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub q_min: f64,
    pub q_max: f64,
    pub n_points: usize,
    pub hbar: f64,
}

impl Grid {
    pub fn new(q_min: f64, q_max: f64, n_points: usize, hbar: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(invalid(
                "n_points",
                format!("must be a power of two >= 2, got {n_points}"),
            ));
        }
        if !(q_max > q_min) || !q_min.is_finite() || !q_max.is_finite() {
            return Err(invalid(
                "q_max",
                format!("need finite q_max > q_min, got [{q_min}, {q_max}]"),
            ));
        }
        if !(hbar > 0.0) {
            return Err(invalid("hbar_eff", "must be > 0"));
        }
        Ok(Self {
            q_min,
            q_max,
            n_points,
            hbar,
        })
    }

    /// Grid symmetric about the origin: `[-half_width, half_width)`.
    pub fn symmetric(half_width: f64, n_points: usize, hbar: f64) -> Result<Self> {
        Self::new(-half_width, half_width, n_points, hbar)
    }

    pub fn length(&self) -> f64 {
        self.q_max - self.q_min
    }

    pub fn dq(&self) -> f64 {
        self.length() / self.n_points as f64
    }

    /// Momentum spacing `2 pi hbar / (n dq)`.
    pub fn dp(&self) -> f64 {
        2.0 * PI * self.hbar / self.length()
    }

    /// Largest representable momentum, `pi hbar / dq`.
    pub fn p_nyquist(&self) -> f64 {
        PI * self.hbar / self.dq()
    }

    pub fn position(&self, j: usize) -> f64 {
        self.q_min + j as f64 * self.dq()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.position(j)).collect()
    }

    /// Momentum of FFT bin `k` (standard FFT ordering, negative half last).
    pub fn momentum(&self, k: usize) -> f64 {
        let n = self.n_points as isize;
        let k = k as isize;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 * self.dp()
    }

    /// Index of the grid point nearest to `q`, if inside the grid.
    pub fn index_of(&self, q: f64) -> Option<usize> {
        let x = ((q - self.q_min) / self.dq()).round();
        (x >= 0.0 && x < self.n_points as f64).then_some(x as usize)
    }
}

/// Smallest power-of-two grid for `h` resolving classical motion up to
/// energy `e_max`: positions out to `POSITION_MARGIN` times the outer turning
/// point, momenta up to `MOMENTUM_MARGIN * sqrt(2 m e_max)`.
pub fn minimum_points<H: Hamiltonian>(h: &H, e_max: f64) -> Result<(f64, usize)> {
    if !(e_max > 0.0) || !e_max.is_finite() {
        return Err(invalid(
            "e_max",
            format!("must be > 0 (no accessible region), got {e_max}"),
        ));
    }
    let q_turn = h
        .outer_turning_point(e_max)
        .ok_or_else(|| invalid("e_max", format!("no turning point at energy {e_max}")))?;
    let half_width = POSITION_MARGIN * q_turn;
    let p_needed = MOMENTUM_MARGIN * (2.0 * h.mass() * e_max).sqrt();
    // p_nyquist = pi hbar n / L >= p_needed
    let n_min = (p_needed * 2.0 * half_width / (PI * h.hbar())).ceil() as usize;
    Ok((half_width, n_min.max(2)))
}

/// Symmetric grid covering the turning points at `e_max` (plus 25%) with
/// `n_points` points; errors when `n_points` cannot also cover the momenta.
pub fn build_grid<H: Hamiltonian>(h: &H, e_max: f64, n_points: usize) -> Result<Grid> {
    let (half_width, n_min) = minimum_points(h, e_max)?;
    if n_points < n_min || !n_points.is_power_of_two() {
        return Err(Error::InsufficientGridPoints {
            got: n_points,
            min_points: n_min.next_power_of_two(),
        });
    }
    Grid::symmetric(half_width, n_points, h.hbar())
}
