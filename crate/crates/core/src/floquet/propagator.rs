use faer::{c64, Mat};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::floquet::Grid;
use crate::model::Hamiltonian;

/// Minimum number of time slices per propagation.
pub const MIN_SLICES: usize = 256;
/// Tolerance on `max |U'U - I|`.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;

const COLUMN_BLOCK: usize = 16;

/// Discretized time-evolution operator over `[t0, t0 + duration]` on a grid.
/// Column `j` is the evolved image of the position basis vector `j`.
#[derive(Clone, Debug)]
pub struct UnitaryPropagator {
    pub matrix: Mat<c64>,
    pub period: f64,
    pub slices: usize,
    pub grid: Grid,
}

impl UnitaryPropagator {
    pub fn identity(grid: Grid, period: f64) -> Self {
        Self {
            matrix: Mat::identity(grid.n_points, grid.n_points),
            period,
            slices: 0,
            grid,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> c64 {
        (0..self.dim()).map(|i| self.matrix[(i, i)]).sum()
    }

    pub fn apply(&self, psi: &[c64]) -> Vec<c64> {
        let n = self.dim();
        assert_eq!(psi.len(), n);
        let mut out = vec![c64::new(0.0, 0.0); n];
        for (j, &x) in psi.iter().enumerate() {
            if x == c64::new(0.0, 0.0) {
                continue;
            }
            let col = self.matrix.col(j);
            for i in 0..n {
                out[i] += col[i] * x;
            }
        }
        out
    }

    /// `max_ij |(U'U - I)_ij|`
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.matrix)
    }

    /// `U^l` by repeated squaring.
    pub fn power(&self, l: u32) -> Mat<c64> {
        let n = self.dim();
        let mut result = Mat::<c64>::identity(n, n);
        let mut base = self.matrix.clone();
        let mut e = l;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }
}

pub fn unitarity_defect(u: &Mat<c64>) -> f64 {
    let g = u.adjoint() * u;
    let mut worst = 0.0_f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - c64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Precomputed factors of the symmetric split-operator product
/// `prod_j exp(-i V(t_j) dt / 2h) exp(-i T dt / h) exp(-i V(t_j) dt / 2h)`,
/// with `t_j` the slice midpoints. Adjacent potential half-steps are merged.
struct SplitOperator {
    n: usize,
    kinetic: Vec<c64>,
    /// `slices + 1` diagonal potential factors, `n` each.
    kicks: Vec<c64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SplitOperator {
    fn new<H: Hamiltonian>(h: &H, grid: &Grid, t0: f64, duration: f64, slices: usize) -> Self {
        let n = grid.n_points;
        let dt = duration / slices as f64;
        let hbar = h.hbar();
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        // 1/n from the unnormalized FFT pair folded into the kinetic factor
        let kinetic = (0..n)
            .map(|k| {
                let p = grid.momentum(k);
                c64::from_polar(1.0 / n as f64, -p * p / (2.0 * h.mass()) * dt / hbar)
            })
            .collect();
        let q = grid.positions();
        let half_phase = |t: f64| -> Vec<f64> {
            q.iter()
                .enumerate()
                .map(|(i, &x)| {
                    // q_min and q_max are the same point of the periodic grid;
                    // take the midpoint of any jump between the two images
                    let v = if i == 0 {
                        0.5 * (h.potential(x, t) + h.potential(grid.q_max, t))
                    } else {
                        h.potential(x, t)
                    };
                    -v * dt / (2.0 * hbar)
                })
                .collect()
        };
        let mut kicks = Vec::with_capacity((slices + 1) * n);
        let mut prev: Option<Vec<f64>> = None;
        for j in 0..=slices {
            let next = (j < slices).then(|| half_phase(t0 + (j as f64 + 0.5) * dt));
            for i in 0..n {
                let phase =
                    prev.as_ref().map_or(0.0, |v| v[i]) + next.as_ref().map_or(0.0, |v| v[i]);
                kicks.push(c64::from_polar(1.0, phase));
            }
            prev = next;
        }
        Self {
            n,
            kinetic,
            kicks,
            forward,
            inverse,
        }
    }

    fn slices(&self) -> usize {
        self.kicks.len() / self.n - 1
    }

    /// Evolves a contiguous block of state vectors (length multiple of `n`).
    fn evolve(&self, block: &mut [c64]) {
        let n = self.n;
        let mut scratch = vec![
            c64::new(0.0, 0.0);
            self.forward
                .get_inplace_scratch_len()
                .max(self.inverse.get_inplace_scratch_len())
        ];
        let kick = |block: &mut [c64], j: usize| {
            let d = &self.kicks[j * n..(j + 1) * n];
            for col in block.chunks_exact_mut(n) {
                col.iter_mut().zip(d).for_each(|(x, f)| *x *= *f);
            }
        };
        kick(block, 0);
        for j in 1..=self.slices() {
            self.forward.process_with_scratch(block, &mut scratch);
            for col in block.chunks_exact_mut(n) {
                col.iter_mut()
                    .zip(&self.kinetic)
                    .for_each(|(x, k)| *x *= *k);
            }
            self.inverse.process_with_scratch(block, &mut scratch);
            kick(block, j);
        }
    }
}

fn check_slices(slices: usize) -> Result<()> {
    if slices < MIN_SLICES {
        return Err(invalid(
            "slices",
            format!("need at least {MIN_SLICES} time slices, got {slices}"),
        ));
    }
    Ok(())
}

/// Time-evolution operator from `t0` to `t0 + duration`.
pub fn propagate<H: Hamiltonian>(
    h: &H,
    grid: &Grid,
    t0: f64,
    duration: f64,
    slices: usize,
) -> Result<UnitaryPropagator> {
    check_slices(slices)?;
    if !(duration > 0.0) {
        return Err(invalid("duration", "must be > 0"));
    }
    let n = grid.n_points;
    let split = SplitOperator::new(h, grid, t0, duration, slices);
    let mut data = vec![c64::new(0.0, 0.0); n * n];
    data.par_chunks_mut(n * COLUMN_BLOCK)
        .enumerate()
        .for_each(|(b, block)| {
            let first = b * COLUMN_BLOCK;
            for (c, col) in block.chunks_exact_mut(n).enumerate() {
                col[first + c] = c64::new(1.0, 0.0);
            }
            split.evolve(block);
        });
    let matrix = Mat::from_fn(n, n, |i, j| data[j * n + i]);
    let prop = UnitaryPropagator {
        matrix,
        period: duration,
        slices,
        grid: *grid,
    };
    let deviation = prop.unitarity_defect();
    if !(deviation < UNITARITY_TOLERANCE) {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(prop)
}

/// One-period Floquet operator `U(T, 0)`.
///
/// For systems with [`Hamiltonian::half_period_parity`] on a grid symmetric
/// about the origin (and an even slice count) only the first half period is
/// integrated; the result uses the same time slices as the direct product.
pub fn propagate_period<H: Hamiltonian>(
    h: &H,
    grid: &Grid,
    slices: usize,
) -> Result<UnitaryPropagator> {
    let symmetric = (grid.q_min + grid.q_max).abs() <= 1e-12 * grid.length();
    if h.half_period_parity() && symmetric && slices.is_multiple_of(2) && slices / 2 >= MIN_SLICES {
        let half = propagate(h, grid, 0.0, 0.5 * h.period(), slices / 2)?;
        let n = grid.n_points;
        // q_i -> -q_i is i -> n - i on the periodic grid
        let mirror = |i: usize| (n - i) % n;
        let a = &half.matrix;
        let reflected = Mat::from_fn(n, n, |i, j| a[(mirror(i), mirror(j))]);
        let matrix = &reflected * a;
        let prop = UnitaryPropagator {
            matrix,
            period: h.period(),
            slices,
            grid: *grid,
        };
        let deviation = prop.unitarity_defect();
        if !(deviation < UNITARITY_TOLERANCE) {
            return Err(Error::NotUnitary { deviation });
        }
        return Ok(prop);
    }
    propagate(h, grid, 0.0, h.period(), slices)
}

/// Evolves a single state with the same split-operator scheme.
pub fn propagate_state<H: Hamiltonian>(
    h: &H,
    grid: &Grid,
    psi: &[c64],
    t0: f64,
    duration: f64,
    slices: usize,
) -> Result<Vec<c64>> {
    check_slices(slices)?;
    if psi.len() != grid.n_points {
        return Err(invalid("psi", "length must match the grid"));
    }
    let split = SplitOperator::new(h, grid, t0, duration, slices);
    let mut out = psi.to_vec();
    split.evolve(&mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HarmonicOscillator, ModelParams};

    #[test]
    fn rejects_too_few_slices() {
        let g = Grid::symmetric(5.0, 16, 1.0).unwrap();
        let h = HarmonicOscillator::new(1.0, 1.0, 1.0);
        assert!(propagate_period(&h, &g, 100).is_err());
    }

    #[test]
    fn half_period_assembly_matches_direct_product() {
        let p = ModelParams {
            barrier_height: 4.0,
            drive_strength: 0.7,
            ..ModelParams::reference(0.0)
        };
        let g = Grid::symmetric(12.0, 64, 1.0).unwrap();
        let fast = propagate_period(&p, &g, 1024).unwrap();
        let direct = propagate(&p, &g, 0.0, p.period(), 1024).unwrap();
        let mut worst = 0.0f64;
        for i in 0..64 {
            for j in 0..64 {
                worst = worst.max((fast.matrix[(i, j)] - direct.matrix[(i, j)]).norm());
            }
        }
        assert!(worst < 1e-11, "{worst}");
    }

    #[test]
    fn product_of_unitaries_is_unitary() {
        let g = Grid::symmetric(8.0, 64, 1.0).unwrap();
        let h = HarmonicOscillator::new(1.0, 1.0, 1.0);
        let u = propagate_period(&h, &g, 256).unwrap();
        assert!(u.unitarity_defect() < 1e-12);
        let u5 = u.power(5);
        assert!(unitarity_defect(&u5) < 5e-12);
    }

    #[test]
    fn state_propagation_matches_matrix_columns() {
        let g = Grid::symmetric(8.0, 32, 1.0).unwrap();
        let h = HarmonicOscillator::new(1.0, 1.3, 1.0);
        let u = propagate(&h, &g, 0.2, 1.7, 300).unwrap();
        let psi: Vec<c64> = g
            .positions()
            .iter()
            .map(|&q| c64::from_polar((-(q - 1.0) * (q - 1.0)).exp(), 0.5 * q))
            .collect();
        let a = u.apply(&psi);
        let b = propagate_state(&h, &g, &psi, 0.2, 1.7, 300).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn harmonic_ground_state_acquires_zero_point_phase() {
        let (omega, hbar) = (1.0, 1.0);
        let h = HarmonicOscillator::new(1.0, omega, hbar);
        let g = Grid::symmetric(10.0, 128, hbar).unwrap();
        let psi: Vec<c64> = g
            .positions()
            .iter()
            .map(|&q| c64::new((-q * q / 2.0).exp(), 0.0))
            .collect();
        let t = 0.8;
        let out = propagate_state(&h, &g, &psi, 0.0, t, 1024).unwrap();
        let overlap: c64 = psi.iter().zip(&out).map(|(a, b)| a.conj() * b).sum();
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        let expected = c64::from_polar(1.0, -0.5 * omega * t);
        assert!((overlap / norm - expected).norm() < 1e-6);
    }
}
