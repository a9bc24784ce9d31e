//! Weyl-Wigner representation of grid operators.
//!
//! Operators are first refined onto a grid with twice the points by
//! band-limited (zero-padded Fourier) interpolation. On the refined grid the
//! momentum period of the lattice Wigner transform covers the full momentum
//! band of the original grid, so nothing is aliased.
//!
//! With refined spacing `h`, lattice rows `s = i + k` sit at
//! `q_s = q_min + s h / 2` and the diagonal of the Wigner propagator reads
//!
//! ```text
//! G(q_s, p) = (2 / pi hbar) sum_d c_s(d) exp(-2 i p d h / hbar),
//! c_s(d)    = sum_{i - k = d} U_ik conj(U_{s-i, s-k}),
//! ```
//!
//! which integrates over phase space to `|Tr U|^2`.

use std::f64::consts::PI;

use faer::{c64, Mat, MatRef};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::floquet::{Grid, UnitaryPropagator};
use crate::phase_space::{FieldKind, PhaseSpaceField, PhaseWindow};

/// Refinement factor applied before any Wigner transform.
pub const WIGNER_OVERSAMPLE: usize = 2;
/// Default raster resolution of propagator fields.
pub const DEFAULT_RESOLUTION: (usize, usize) = (256, 256);

const ZERO: c64 = c64 { re: 0.0, im: 0.0 };

/// Isometric band-limited embedding `E` of a grid into one with
/// `WIGNER_OVERSAMPLE` times as many points (`E^dagger E = I`).
#[derive(Clone, Debug)]
pub struct Refinement {
    pub coarse: Grid,
    pub n_fine: usize,
    embed: Mat<c64>,
}

impl Refinement {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n_points;
        let nf = n * WIGNER_OVERSAMPLE;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(nf);
        let scale = 1.0 / ((n * nf) as f64).sqrt();
        let mut embed = Mat::<c64>::zeros(nf, n);
        let mut col = vec![ZERO; n];
        let mut fine = vec![ZERO; nf];
        for j in 0..n {
            col.iter_mut().for_each(|c| *c = ZERO);
            col[j] = c64::new(1.0, 0.0);
            fwd.process(&mut col);
            fine.iter_mut().for_each(|c| *c = ZERO);
            for (k, &v) in col.iter().enumerate() {
                // keep each bin at its signed momentum
                let dst = if k < n / 2 { k } else { k + nf - n };
                fine[dst] = v;
            }
            inv.process(&mut fine);
            for i in 0..nf {
                embed[(i, j)] = fine[i] * scale;
            }
        }
        Self {
            coarse: *grid,
            n_fine: nf,
            embed,
        }
    }

    pub fn dq_fine(&self) -> f64 {
        self.coarse.dq() / WIGNER_OVERSAMPLE as f64
    }

    pub fn embed_state(&self, psi: &[c64]) -> Vec<c64> {
        (0..self.n_fine)
            .map(|i| (0..psi.len()).map(|j| self.embed[(i, j)] * psi[j]).sum())
            .collect()
    }

    /// `E A E^dagger`.
    pub fn embed_operator(&self, a: MatRef<'_, c64>) -> Mat<c64> {
        let left = &self.embed * a;
        &left * self.embed.adjoint()
    }
}

fn check_window(grid: &Grid, window: &PhaseWindow) -> Result<()> {
    window.validate()?;
    let tol = 1e-9 * grid.length();
    let pn = grid.p_nyquist();
    if window.q_min < grid.q_min - tol || window.q_max > grid.q_max + tol {
        return Err(Error::WindowOutsideGrid(format!(
            "q window [{}, {}] vs grid [{}, {}]",
            window.q_min, window.q_max, grid.q_min, grid.q_max
        )));
    }
    if window.p_min < -pn * (1.0 + 1e-12) || window.p_max > pn * (1.0 + 1e-12) {
        return Err(Error::WindowOutsideGrid(format!(
            "p window [{}, {}] vs momentum band [-{pn}, {pn}]",
            window.p_min, window.p_max
        )));
    }
    Ok(())
}

/// Window spanning the whole grid and its momentum band.
pub fn full_window(grid: &Grid) -> PhaseWindow {
    let pn = grid.p_nyquist();
    PhaseWindow {
        q_min: grid.q_min,
        q_max: grid.q_max,
        p_min: -pn,
        p_max: pn,
    }
}

/// `c_s(d)` for `d = 0..n`, stored per `d` over `s = 0..2n-1`.
fn offset_correlations(u: MatRef<'_, c64>) -> Vec<Vec<c64>> {
    let n = u.nrows();
    let len = 2 * n;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    (0..n)
        .into_par_iter()
        .map(|d| {
            let mut a = vec![ZERO; len];
            let mut b = vec![ZERO; len];
            for i in d..n {
                a[i] = u[(i, i - d)];
            }
            for j in 0..n - d {
                b[j] = u[(j, j + d)].conj();
            }
            fwd.process(&mut a);
            fwd.process(&mut b);
            a.iter_mut().zip(&b).for_each(|(x, y)| *x *= *y / len as f64);
            inv.process(&mut a);
            a.truncate(len - 1);
            a
        })
        .collect()
}

/// Diagonal `G_W(r, t; r, 0)` of the Wigner propagator of `u`, integrated
/// over the cells of a `resolution` raster of `window` and divided by the
/// cell area.
///
/// The window must lie inside the grid and its momentum band.
pub fn wigner_propagator_diagonal(
    u: &UnitaryPropagator,
    window: &PhaseWindow,
    resolution: (usize, usize),
) -> Result<PhaseSpaceField> {
    let grid = &u.grid;
    if u.matrix.nrows() != grid.n_points || u.matrix.ncols() != grid.n_points {
        return Err(invalid("U", "matrix size must match the grid"));
    }
    check_window(grid, window)?;
    let mut field = PhaseSpaceField::zeros(window, resolution, u.period, FieldKind::WignerDiagonal)?;
    let refine = Refinement::new(grid);
    let fine = refine.embed_operator(u.matrix.as_ref());
    let n = refine.n_fine;
    let h = refine.dq_fine();
    let hbar = grid.hbar;
    let period_p = PI * hbar / h;
    let m = n;
    let dp_lat = period_p / m as f64;
    let p0 = -0.5 * period_p;
    let cell_weight = 0.5 * h * dp_lat;
    let norm = 2.0 / (PI * hbar);

    let corr = offset_correlations(fine.as_ref());
    drop(fine);

    let (nq, np) = (field.nq(), field.np());
    let (cdq, cdp) = (field.dq(), field.dp());
    // lattice momentum -> raster column
    let p_cell: Vec<Option<usize>> = (0..m)
        .map(|j| {
            let p = p0 + j as f64 * dp_lat;
            window
                .contains(0.5 * (window.q_min + window.q_max), p)
                .then(|| (((p - window.p_min) / cdp).floor() as usize).min(np - 1))
        })
        .collect();
    let rows: Vec<(usize, usize)> = (0..2 * n - 1)
        .filter_map(|s| {
            let q = grid.q_min + 0.5 * h * s as f64;
            (q >= window.q_min && q < window.q_max)
                .then(|| (s, (((q - window.q_min) / cdq).floor() as usize).min(nq - 1)))
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(m);
    let partial: Vec<(usize, Vec<f64>)> = rows
        .par_iter()
        .map(|&(s, iq)| {
            let mut buf: Vec<c64> = (0..m)
                .map(|d| if d % 2 == 0 { corr[d][s] } else { -corr[d][s] })
                .collect();
            let c0 = corr[0][s].re;
            fwd.process(&mut buf);
            let mut acc = vec![0.0; np];
            for (j, x) in buf.iter().enumerate() {
                if let Some(ip) = p_cell[j] {
                    acc[ip] += norm * (2.0 * x.re - c0) * cell_weight;
                }
            }
            (iq, acc)
        })
        .collect();
    let area = field.cell_area();
    for (iq, acc) in partial {
        for (ip, v) in acc.into_iter().enumerate() {
            field.values[iq * np + ip] += v / area;
        }
    }
    Ok(field)
}

/// `(cell sum x cell area) / |Tr U|^2`.
pub fn check_trace_identity(field: &PhaseSpaceField, u: &UnitaryPropagator) -> f64 {
    field.integral() / u.trace().norm_sqr()
}

/// Lattice Wigner function on the refined grid.
///
/// Rows `s = 0..2n-1` sit at `q_min + s h / 2`; columns `j = 0..2n` at
/// `p_j = -P + j P / n` with `P = pi hbar / h`. The lattice carries the
/// band `|p| < P / 2` plus its sign-alternated image, which keeps the
/// transform invertible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerLattice {
    pub n_fine: usize,
    pub q_min: f64,
    pub spacing: f64,
    pub hbar: f64,
    pub values: Vec<f64>,
}

impl WignerLattice {
    pub fn rows(&self) -> usize {
        2 * self.n_fine - 1
    }

    pub fn cols(&self) -> usize {
        2 * self.n_fine
    }

    pub fn position(&self, s: usize) -> f64 {
        self.q_min + 0.5 * self.spacing * s as f64
    }

    pub fn momentum(&self, j: usize) -> f64 {
        let period = PI * self.hbar / self.spacing;
        -period + j as f64 * period / self.n_fine as f64
    }

    pub fn get(&self, s: usize, j: usize) -> f64 {
        self.values[s * self.cols() + j]
    }

    /// Area represented by one lattice point.
    pub fn cell_area(&self) -> f64 {
        0.5 * self.spacing * PI * self.hbar / (self.spacing * self.n_fine as f64)
    }

    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    /// `||self - other|| / ||other||` over the lattice.
    pub fn relative_l2_error(&self, other: &WignerLattice) -> f64 {
        let num: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let den: f64 = other.values.iter().map(|b| b * b).sum();
        (num / den).sqrt()
    }

    /// Weyl transform of a density matrix given on the refined grid.
    pub fn from_density(rho: MatRef<'_, c64>, q_min: f64, spacing: f64, hbar: f64) -> Self {
        let n = rho.nrows();
        let len = 2 * n;
        let fwd = FftPlanner::<f64>::new().plan_fft_forward(len);
        let norm = 1.0 / (PI * hbar);
        let values: Vec<f64> = (0..2 * n - 1)
            .into_par_iter()
            .flat_map_iter(|s| {
                let mut buf = vec![ZERO; len];
                for k in s.saturating_sub(n - 1)..=s.min(n - 1) {
                    let x = s as isize - 2 * k as isize;
                    let sign = if x.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                    buf[x.rem_euclid(len as isize) as usize] = rho[(s - k, k)] * sign;
                }
                fwd.process(&mut buf);
                buf.into_iter().map(move |c| norm * c.re)
            })
            .collect();
        Self {
            n_fine: n,
            q_min,
            spacing,
            hbar,
            values,
        }
    }

    /// Inverse Weyl transform back to a density matrix on the refined grid.
    pub fn to_density(&self) -> Mat<c64> {
        let n = self.n_fine;
        let len = 2 * n;
        let inv = FftPlanner::<f64>::new().plan_fft_inverse(len);
        let scale = PI * self.hbar / len as f64;
        let mut rho = Mat::<c64>::zeros(n, n);
        let rows: Vec<Vec<c64>> = (0..2 * n - 1)
            .into_par_iter()
            .map(|s| {
                let mut buf: Vec<c64> = self.values[s * len..(s + 1) * len]
                    .iter()
                    .map(|&v| c64::new(v * scale, 0.0))
                    .collect();
                inv.process(&mut buf);
                buf
            })
            .collect();
        for (s, buf) in rows.iter().enumerate() {
            for k in s.saturating_sub(n - 1)..=s.min(n - 1) {
                let x = s as isize - 2 * k as isize;
                let sign = if x.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                rho[(s - k, k)] = buf[x.rem_euclid(len as isize) as usize] * sign;
            }
        }
        rho
    }
}

/// Wigner function of a grid state (refined before the transform).
pub fn wigner_of_state(psi: &[c64], grid: &Grid) -> Result<WignerLattice> {
    if psi.len() != grid.n_points {
        return Err(invalid("psi", "length must match the grid"));
    }
    let refine = Refinement::new(grid);
    let fine = refine.embed_state(psi);
    let rho = Mat::from_fn(fine.len(), fine.len(), |i, k| fine[i] * fine[k].conj());
    Ok(WignerLattice::from_density(
        rho.as_ref(),
        grid.q_min,
        refine.dq_fine(),
        grid.hbar,
    ))
}

/// The full (off-diagonal) Wigner propagator of `U`, applied as
/// `W -> Weyl(U' rho U'^dagger)` with `rho` the inverse transform of `W`.
#[derive(Clone, Debug)]
pub struct WignerKernel {
    fine: Mat<c64>,
    q_min: f64,
    spacing: f64,
    hbar: f64,
}

impl WignerKernel {
    pub fn new(u: &UnitaryPropagator) -> Self {
        let refine = Refinement::new(&u.grid);
        Self {
            fine: refine.embed_operator(u.matrix.as_ref()),
            q_min: u.grid.q_min,
            spacing: refine.dq_fine(),
            hbar: u.grid.hbar,
        }
    }

    pub fn apply(&self, w: &WignerLattice) -> Result<WignerLattice> {
        if w.n_fine != self.fine.nrows() || (w.spacing - self.spacing).abs() > 1e-12 * self.spacing {
            return Err(invalid("wigner", "lattice does not match the propagator grid"));
        }
        let rho = w.to_density();
        let tmp = &self.fine * &rho;
        let out = &tmp * self.fine.adjoint();
        Ok(WignerLattice::from_density(
            out.as_ref(),
            self.q_min,
            self.spacing,
            self.hbar,
        ))
    }
}
