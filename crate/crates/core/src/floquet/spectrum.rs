use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::floquet::UnitaryPropagator;

/// Tolerance on `| |lambda| - 1 |` for eigenvalues of a unitary operator.
pub const EIGENVALUE_MODULUS_TOLERANCE: f64 = 1e-8;
/// Smallest spectrum accepted by [`select_bound_states`].
pub const MIN_RETAINED_STATES: usize = 64;

/// Sorted quasienergies in the zone `(-hbar W / 2, hbar W / 2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiSpectrum {
    pub energies: Vec<f64>,
    pub drive_frequency: f64,
    pub hbar: f64,
}

impl QuasiSpectrum {
    pub fn new(mut energies: Vec<f64>, drive_frequency: f64, hbar: f64) -> Result<Self> {
        if !(drive_frequency > 0.0 && hbar > 0.0) {
            return Err(invalid(
                "Omega",
                "drive frequency and hbar must be positive",
            ));
        }
        let half = zone_width(drive_frequency, hbar) / 2.0;
        if let Some(e) = energies.iter().find(|e| !(**e > -half && **e <= half)) {
            return Err(invalid(
                "energies",
                format!("{e} outside the zone (-{half}, {half}]"),
            ));
        }
        energies.sort_by(f64::total_cmp);
        Ok(Self {
            energies,
            drive_frequency,
            hbar,
        })
    }

    /// Effective dimension `D_H`.
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.drive_frequency
    }

    pub fn zone_width(&self) -> f64 {
        zone_width(self.drive_frequency, self.hbar)
    }

    pub fn mean_spacing(&self) -> f64 {
        self.zone_width() / self.dim() as f64
    }

    /// `t_H = D_H T`
    pub fn heisenberg_time(&self) -> f64 {
        self.dim() as f64 * self.period()
    }

    /// `Tr U^l` restricted to these levels: `sum_n exp(-i E_n l T / hbar)`.
    pub fn trace_power(&self, l: i64) -> c64 {
        let scale = l as f64 * self.period() / self.hbar;
        self.energies
            .iter()
            .map(|e| c64::from_polar(1.0, -e * scale))
            .sum()
    }
}

pub fn zone_width(drive_frequency: f64, hbar: f64) -> f64 {
    hbar * drive_frequency
}

/// Quasienergy of a unit-modulus eigenvalue, `E = -(hbar / T) arg(lambda)`,
/// with the branch chosen so that `lambda = -1` maps to `+hbar W / 2`.
pub fn quasienergy_of(lambda: c64, period: f64, hbar: f64) -> f64 {
    let mut arg = lambda.im.atan2(lambda.re);
    if arg >= PI {
        arg -= 2.0 * PI;
    }
    // rounding at the branch point must not leave the zone
    (-hbar * arg / period).min(hbar * PI / period)
}

/// Eigendecomposition of a Floquet operator.
#[derive(Clone, Debug)]
pub struct FloquetEigen {
    pub eigenvalues: Vec<c64>,
    /// Unit-norm eigenvectors as columns, aligned with `eigenvalues`.
    pub vectors: Mat<c64>,
    /// `quasienergies[n]` belongs to `eigenvalues[n]`.
    pub quasienergies: Vec<f64>,
    pub period: f64,
    pub hbar: f64,
}

impl FloquetEigen {
    pub fn drive_frequency(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// The full (unfiltered) quasienergy spectrum.
    pub fn spectrum(&self) -> QuasiSpectrum {
        let mut energies = self.quasienergies.clone();
        energies.sort_by(f64::total_cmp);
        QuasiSpectrum {
            energies,
            drive_frequency: self.drive_frequency(),
            hbar: self.hbar,
        }
    }

    /// Probability of eigenvector `n` on the outer `edge_points` grid points
    /// at each end.
    pub fn edge_weight(&self, n: usize, edge_points: usize) -> f64 {
        let col = self.vectors.col(n);
        let dim = col.nrows();
        let total: f64 = (0..dim).map(|i| col[i].norm_sqr()).sum();
        let edge: f64 = (0..edge_points)
            .chain(dim - edge_points..dim)
            .map(|i| col[i].norm_sqr())
            .sum();
        edge / total
    }

    /// `sum_n lambda_n |n><n|` over the given eigenvectors, orthonormalized.
    pub fn projected_propagator(&self, indices: &[usize]) -> Mat<c64> {
        let n = self.vectors.nrows();
        let k = indices.len();
        let v = Mat::from_fn(n, k, |i, j| self.vectors[(i, indices[j])]);
        let q = v.qr().compute_thin_Q();
        // column phases of Q drop out of |q><q|
        let scaled = Mat::from_fn(n, k, |i, j| q[(i, j)] * self.eigenvalues[indices[j]]);
        &scaled * q.adjoint()
    }
}

/// Diagonalizes `U` and converts eigenvalues to quasienergies.
pub fn quasienergies(u: &UnitaryPropagator, hbar: f64) -> Result<FloquetEigen> {
    let evd = u
        .matrix
        .eigen()
        .map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = evd.S();
    let eigenvalues: Vec<c64> = s.column_vector().iter().copied().collect();
    if let Some(bad) = eigenvalues
        .iter()
        .find(|l| !((l.norm() - 1.0).abs() < EIGENVALUE_MODULUS_TOLERANCE))
    {
        return Err(Error::Eigen(format!(
            "eigenvalue {bad} of a unitary operator has modulus {}",
            bad.norm()
        )));
    }
    let mut vectors = evd.U().to_owned();
    for j in 0..vectors.ncols() {
        let norm: f64 = (0..vectors.nrows())
            .map(|i| vectors[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        for i in 0..vectors.nrows() {
            vectors[(i, j)] /= norm;
        }
    }
    let quasienergies = eigenvalues
        .iter()
        .map(|&l| quasienergy_of(l, u.period, hbar))
        .collect();
    Ok(FloquetEigen {
        eigenvalues,
        vectors,
        quasienergies,
        period: u.period,
        hbar,
    })
}

/// Floquet states that stay away from the grid boundary.
#[derive(Clone, Debug)]
pub struct BoundStates {
    pub spectrum: QuasiSpectrum,
    /// Eigenvector indices (into [`FloquetEigen`]) of the retained states,
    /// ordered by quasienergy.
    pub indices: Vec<usize>,
}

/// Retains states whose probability in the outer `edge_fraction` of the grid
/// (on each side) is below `threshold`.
pub fn select_bound_states(
    eig: &FloquetEigen,
    edge_fraction: f64,
    threshold: f64,
) -> Result<BoundStates> {
    if !(edge_fraction > 0.0 && edge_fraction < 0.5) {
        return Err(invalid(
            "edge_fraction",
            format!("must lie in (0, 0.5), got {edge_fraction}"),
        ));
    }
    if !(threshold > 0.0) {
        return Err(invalid("threshold", "must be > 0"));
    }
    let dim = eig.vectors.nrows();
    let edge_points = ((edge_fraction * dim as f64).round() as usize).max(1);
    let mut indices: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&n| eig.edge_weight(n, edge_points) < threshold)
        .collect();
    if indices.len() < MIN_RETAINED_STATES {
        return Err(Error::TooFewStates {
            retained: indices.len(),
            required: MIN_RETAINED_STATES,
        });
    }
    indices.sort_by(|&a, &b| eig.quasienergies[a].total_cmp(&eig.quasienergies[b]));
    let energies = indices.iter().map(|&n| eig.quasienergies[n]).collect();
    Ok(BoundStates {
        spectrum: QuasiSpectrum {
            energies,
            drive_frequency: eig.drive_frequency(),
            hbar: eig.hbar,
        },
        indices,
    })
}
