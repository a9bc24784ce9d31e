//! The harmonically driven quartic double well and the static reference
//! Hamiltonian used to validate the Floquet propagator.
//!
//! The potential is
//!
//! ```text
//! V(q, t) = -m w0^2 q^2 / 4 + m^2 w0^4 q^4 / (64 E_b) + S q cos(W t + phi)
//! ```
//!
//! with minima at `q^2 = 8 E_b / (m w0^2)`, depth `-E_b`, and local well
//! frequency `w0`. The drive couples linearly to the coordinate.

use std::f64::consts::{PI, TAU};

use faer::{c64, Mat};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::floquet::Grid;

/// Anything that can be propagated classically and quantum mechanically on a
/// one-dimensional grid: `H = p^2 / 2m + V(q, t)` with `V` periodic in `t`.
pub trait Hamiltonian: Sync {
    fn mass(&self) -> f64;
    fn hbar(&self) -> f64;
    /// Period of the time dependence (the drive period, or the natural period
    /// for autonomous systems).
    fn period(&self) -> f64;
    fn potential(&self, q: f64, t: f64) -> f64;
    /// `-dV/dq`
    fn force(&self, q: f64, t: f64) -> f64;
    /// `dF/dq = -d^2V/dq^2`, used for tangent-map propagation.
    fn force_gradient(&self, q: f64, t: f64) -> f64;
    /// The undriven part of the potential.
    fn static_potential(&self, q: f64) -> f64;
    /// Largest `|q|` with `static_potential(q) = e`, if any.
    fn outer_turning_point(&self, e: f64) -> Option<f64>;

    fn energy(&self, q: f64, p: f64, t: f64) -> f64 {
        p * p / (2.0 * self.mass()) + self.potential(q, t)
    }

    fn static_energy(&self, q: f64, p: f64) -> f64 {
        p * p / (2.0 * self.mass()) + self.static_potential(q)
    }

    /// Whether `V(-q, t + T/2) = V(q, t)`. The one-period propagator is then
    /// assembled from half a period as `P A P A` with `P` the parity operator.
    fn half_period_parity(&self) -> bool {
        false
    }

    /// The same system with the time dependence switched off.
    fn undriven(&self) -> Self
    where
        Self: Sized;
}

/// Physical parameters of the driven double well.
///
/// Config keys follow the physics notation (`m`, `omega0`, `Omega`, `E_b`,
/// `S`, `phi`, `hbar_eff`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(rename = "m", default = "one")]
    pub mass: f64,
    #[serde(rename = "omega0", default = "one")]
    pub omega0: f64,
    #[serde(rename = "Omega")]
    pub drive_frequency: f64,
    #[serde(rename = "E_b")]
    pub barrier_height: f64,
    #[serde(rename = "S", default)]
    pub drive_strength: f64,
    #[serde(rename = "phi", default)]
    pub phase: f64,
    #[serde(rename = "hbar_eff", default = "one")]
    pub hbar: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::reference(0.0)
    }
}

impl ModelParams {
    /// `w0 = 1`, `W = 0.95`, `E_b = 100`, `phi = pi/3`, `m = hbar = 1`.
    pub fn reference(drive_strength: f64) -> Self {
        Self {
            mass: 1.0,
            omega0: 1.0,
            drive_frequency: 0.95,
            barrier_height: 100.0,
            drive_strength,
            phase: PI / 3.0,
            hbar: 1.0,
        }
    }

    pub fn with_drive(mut self, drive_strength: f64) -> Self {
        self.drive_strength = drive_strength;
        self
    }

    /// Field-level violations of the parameter invariants.
    pub fn issues(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut positive = |name: &'static str, v: f64| {
            if !(v.is_finite() && v > 0.0) {
                out.push((name, format!("must be finite and > 0, got {v}")));
            }
        };
        positive("m", self.mass);
        positive("omega0", self.omega0);
        positive("Omega", self.drive_frequency);
        positive("E_b", self.barrier_height);
        positive("hbar_eff", self.hbar);
        if !(self.drive_strength.is_finite() && self.drive_strength >= 0.0) {
            out.push((
                "S",
                format!("must be finite and >= 0, got {}", self.drive_strength),
            ));
        }
        if !self.phase.is_finite() {
            out.push(("phi", "must be finite".to_string()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.issues().into_iter().next() {
            None => Ok(()),
            Some((field, reason)) => Err(invalid(field, reason)),
        }
    }

    fn quadratic(&self) -> f64 {
        self.mass * self.omega0 * self.omega0 / 4.0
    }

    fn quartic(&self) -> f64 {
        let w2 = self.omega0 * self.omega0;
        self.mass * self.mass * w2 * w2 / (64.0 * self.barrier_height)
    }

    /// Position of the right-hand minimum of the static potential.
    pub fn well_position(&self) -> f64 {
        (8.0 * self.barrier_height / (self.mass * self.omega0 * self.omega0)).sqrt()
    }

    pub fn drive(&self, t: f64) -> f64 {
        (self.drive_frequency * t + self.phase).cos()
    }
}

impl Hamiltonian for ModelParams {
    fn mass(&self) -> f64 {
        self.mass
    }

    fn hbar(&self) -> f64 {
        self.hbar
    }

    fn period(&self) -> f64 {
        TAU / self.drive_frequency
    }

    fn potential(&self, q: f64, t: f64) -> f64 {
        self.static_potential(q) + self.drive_strength * q * self.drive(t)
    }

    fn force(&self, q: f64, t: f64) -> f64 {
        2.0 * self.quadratic() * q
            - 4.0 * self.quartic() * q * q * q
            - self.drive_strength * self.drive(t)
    }

    fn force_gradient(&self, q: f64, _t: f64) -> f64 {
        2.0 * self.quadratic() - 12.0 * self.quartic() * q * q
    }

    fn static_potential(&self, q: f64) -> f64 {
        let q2 = q * q;
        self.quartic() * q2 * q2 - self.quadratic() * q2
    }

    fn outer_turning_point(&self, e: f64) -> Option<f64> {
        // a u^2 - b u - e = 0 with u = q^2
        let (a, b) = (self.quartic(), self.quadratic());
        let disc = b * b + 4.0 * a * e;
        if disc < 0.0 {
            return None;
        }
        let u = (b + disc.sqrt()) / (2.0 * a);
        (u >= 0.0).then(|| u.sqrt())
    }

    fn half_period_parity(&self) -> bool {
        true
    }

    fn undriven(&self) -> Self {
        self.with_drive(0.0)
    }
}

/// Harmonic oscillator `V = m w^2 q^2 / 2`; the isochronous reference system
/// (every orbit closes after `2 pi / w`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarmonicOscillator {
    pub mass: f64,
    pub omega: f64,
    pub hbar: f64,
}

impl HarmonicOscillator {
    pub fn new(mass: f64, omega: f64, hbar: f64) -> Self {
        Self { mass, omega, hbar }
    }
}

impl Hamiltonian for HarmonicOscillator {
    fn mass(&self) -> f64 {
        self.mass
    }

    fn hbar(&self) -> f64 {
        self.hbar
    }

    fn period(&self) -> f64 {
        TAU / self.omega
    }

    fn potential(&self, q: f64, _t: f64) -> f64 {
        self.static_potential(q)
    }

    fn force(&self, q: f64, _t: f64) -> f64 {
        -self.mass * self.omega * self.omega * q
    }

    fn force_gradient(&self, _q: f64, _t: f64) -> f64 {
        -self.mass * self.omega * self.omega
    }

    fn static_potential(&self, q: f64) -> f64 {
        0.5 * self.mass * self.omega * self.omega * q * q
    }

    fn outer_turning_point(&self, e: f64) -> Option<f64> {
        (e >= 0.0).then(|| (2.0 * e / (self.mass * self.omega * self.omega)).sqrt())
    }

    fn half_period_parity(&self) -> bool {
        true
    }

    fn undriven(&self) -> Self {
        *self
    }
}

/// Free-function form of [`Hamiltonian::potential`] for the double well.
pub fn potential(q: f64, t: f64, p: &ModelParams) -> f64 {
    p.potential(q, t)
}

/// Free-function form of [`Hamiltonian::force`] for the double well.
pub fn force(q: f64, t: f64, p: &ModelParams) -> f64 {
    p.force(q, t)
}

/// Kinetic energy operator `F^-1 diag(p^2 / 2m) F` on the grid, i.e. the same
/// spectral discretization the split-operator propagator uses.
pub(crate) fn kinetic_matrix(mass: f64, grid: &Grid) -> Mat<c64> {
    let n = grid.n_points;
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let kin: Vec<f64> = (0..n)
        .map(|k| {
            let p = grid.momentum(k);
            p * p / (2.0 * mass) / n as f64
        })
        .collect();
    let mut out = Mat::<c64>::zeros(n, n);
    let mut col = vec![c64::new(0.0, 0.0); n];
    for j in 0..n {
        col.iter_mut().for_each(|c| *c = c64::new(0.0, 0.0));
        col[j] = c64::new(1.0, 0.0);
        forward.process(&mut col);
        col.iter_mut().zip(&kin).for_each(|(c, k)| *c *= *k);
        inverse.process(&mut col);
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    // exact Hermitian symmetrization removes FFT round-off asymmetry
    for j in 0..n {
        for i in 0..j {
            let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
            out[(i, j)] = avg;
            out[(j, i)] = avg.conj();
        }
        out[(j, j)] = c64::new(out[(j, j)].re, 0.0);
    }
    out
}

/// Discretized undriven Hamiltonian on `grid`.
///
/// Fails when the grid does not contain the classically allowed region at the
/// barrier-top energy (both wells) with the same 25% margin `build_grid` uses.
pub fn static_hamiltonian<H: Hamiltonian>(h: &H, grid: &Grid) -> Result<Mat<c64>> {
    if let Some(q_turn) = h.outer_turning_point(0.0) {
        let needed = 1.25 * q_turn;
        if grid.q_min > -needed || grid.q_max < needed {
            return Err(Error::GridTooSmall(format!(
                "grid [{}, {}) must contain [-{needed:.3}, {needed:.3}] (turning points at the barrier top plus 25%)",
                grid.q_min, grid.q_max
            )));
        }
    }
    let mut hm = kinetic_matrix(h.mass(), grid);
    for i in 0..grid.n_points {
        hm[(i, i)] += c64::new(h.static_potential(grid.position(i)), 0.0);
    }
    Ok(hm)
}

/// Sorted eigenvalues and eigenvectors (columns) of the static Hamiltonian.
pub fn static_eigensystem<H: Hamiltonian>(h: &H, grid: &Grid) -> Result<(Vec<f64>, Mat<c64>)> {
    let hm = static_hamiltonian(h, grid)?;
    let evd = hm
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().map(|v| v.re).collect();
    Ok((values, evd.U().to_owned()))
}
