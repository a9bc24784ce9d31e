//! Classical flow of `H = p^2/2m + V(q, t)`.
//!
//! Integration uses the fourth-order position-extended Forest-Ruth-like
//! (PEFRL) splitting of Omelyan, Mryglod and Folk. Time is treated as an
//! extra coordinate advanced by the drift stages, so the scheme stays
//! symplectic for explicitly time-dependent forces.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::Hamiltonian;
use crate::phase_space::{FieldKind, PhaseSpaceField, PhaseWindow};

/// Integration steps per drive period unless stated otherwise.
pub const DEFAULT_STEPS_PER_PERIOD: usize = 2048;
/// Coarsest admissible step is `T / MIN_STEPS_PER_PERIOD`.
pub const MIN_STEPS_PER_PERIOD: usize = 1024;
/// Minimum Monte-Carlo sample count for return probabilities.
pub const MIN_RETURN_SAMPLES: usize = 10_000;

const XI: f64 = 0.178_617_895_844_809_1;
const LAMBDA: f64 = -0.212_341_831_062_605_4;
const CHI: f64 = -0.066_264_582_669_818_5;

/// `(drift, kick)` coefficient pairs; a final drift of `XI` closes the step.
const STAGES: [(f64, f64); 4] = [
    (XI, 0.5 - LAMBDA),
    (CHI, LAMBDA),
    (1.0 - 2.0 * (CHI + XI), LAMBDA),
    (CHI, 0.5 - LAMBDA),
];

/// Phase-space point `(q, p)`.
pub type PhasePoint = (f64, f64);

/// One PEFRL step; optionally carries a tangent matrix `[[dq/dq0, dq/dp0], [dp/dq0, dp/dp0]]`.
fn step<H: Hamiltonian>(h: &H, s: &mut [f64; 3], dt: f64, tangent: Option<&mut [[f64; 2]; 2]>) {
    let inv_m = 1.0 / h.mass();
    let [q, p, t] = s;
    match tangent {
        None => {
            for (c, d) in STAGES {
                *q += c * dt * *p * inv_m;
                *t += c * dt;
                *p += d * dt * h.force(*q, *t);
            }
        }
        Some(j) => {
            for (c, d) in STAGES {
                *q += c * dt * *p * inv_m;
                *t += c * dt;
                for col in 0..2 {
                    j[0][col] += c * dt * j[1][col] * inv_m;
                }
                let g = h.force_gradient(*q, *t);
                *p += d * dt * h.force(*q, *t);
                for col in 0..2 {
                    j[1][col] += d * dt * g * j[0][col];
                }
            }
            for col in 0..2 {
                j[0][col] += XI * dt * j[1][col] * inv_m;
            }
        }
    }
    *q += XI * dt * *p * inv_m;
    *t += XI * dt;
}

fn steps_for(h: &impl Hamiltonian, duration: f64, dt: f64) -> Result<usize> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(invalid("t_final", "must be finite and >= 0"));
    }
    let max_dt = h.period() / MIN_STEPS_PER_PERIOD as f64;
    if !(dt > 0.0 && dt <= max_dt * (1.0 + 1e-12)) {
        return Err(invalid(
            "dt",
            format!("need 0 < dt <= T/{MIN_STEPS_PER_PERIOD} = {max_dt}, got {dt}"),
        ));
    }
    Ok((duration / dt - 1e-9).ceil().max(0.0) as usize)
}

fn default_dt(h: &impl Hamiltonian) -> f64 {
    h.period() / DEFAULT_STEPS_PER_PERIOD as f64
}

/// Advances `r` from `t0` by `duration` in `steps` equal steps.
fn advance<H: Hamiltonian>(h: &H, r: PhasePoint, t0: f64, duration: f64, steps: usize) -> Result<PhasePoint> {
    let mut s = [r.0, r.1, t0];
    if steps == 0 {
        return Ok(r);
    }
    let dt = duration / steps as f64;
    for _ in 0..steps {
        step(h, &mut s, dt, None);
        if !(s[0].is_finite() && s[1].is_finite()) {
            return Err(Error::BlowUp { time: s[2] });
        }
    }
    Ok((s[0], s[1]))
}

/// Sampled classical trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<PhasePoint>,
}

impl Trajectory {
    pub fn last(&self) -> PhasePoint {
        *self.states.last().expect("trajectories hold the initial state")
    }
}

/// Integrates from `r0` at `t = 0` to `t_final`, recording every step.
///
/// The step is shrunk so that an integer number of steps lands exactly on
/// `t_final`; `dt` must not exceed `T/1024`.
pub fn integrate_trajectory<H: Hamiltonian>(h: &H, r0: PhasePoint, t_final: f64, dt: f64) -> Result<Trajectory> {
    let steps = steps_for(h, t_final, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(0.0);
    states.push(r0);
    if steps > 0 {
        let dt = t_final / steps as f64;
        let mut s = [r0.0, r0.1, 0.0];
        for k in 1..=steps {
            step(h, &mut s, dt, None);
            if !(s[0].is_finite() && s[1].is_finite()) {
                return Err(Error::BlowUp { time: s[2] });
            }
            times.push(k as f64 * dt);
            states.push((s[0], s[1]));
        }
    }
    Ok(Trajectory { times, states })
}

/// Final state after `t_final` without storing the path.
pub fn flow<H: Hamiltonian>(h: &H, r0: PhasePoint, t_final: f64, dt: f64) -> Result<PhasePoint> {
    let steps = steps_for(h, t_final, dt)?;
    advance(h, r0, 0.0, t_final, steps)
}

/// Final state and tangent map (Jacobian of the flow) after `t_final`.
pub fn flow_with_tangent<H: Hamiltonian>(
    h: &H,
    r0: PhasePoint,
    t_final: f64,
    dt: f64,
) -> Result<(PhasePoint, [[f64; 2]; 2])> {
    let steps = steps_for(h, t_final, dt)?;
    let mut s = [r0.0, r0.1, 0.0];
    let mut j = [[1.0, 0.0], [0.0, 1.0]];
    if steps > 0 {
        let dt = t_final / steps as f64;
        for _ in 0..steps {
            step(h, &mut s, dt, Some(&mut j));
            if !(s[0].is_finite() && s[1].is_finite()) {
                return Err(Error::BlowUp { time: s[2] });
            }
        }
    }
    Ok(((s[0], s[1]), j))
}

/// Central finite-difference Jacobian of the time-`t_final` map.
pub fn finite_difference_jacobian<H: Hamiltonian>(
    h: &H,
    r0: PhasePoint,
    t_final: f64,
    dt: f64,
    delta: f64,
) -> Result<[[f64; 2]; 2]> {
    let mut j = [[0.0; 2]; 2];
    for col in 0..2 {
        let shift = |sign: f64| {
            if col == 0 {
                (r0.0 + sign * delta, r0.1)
            } else {
                (r0.0, r0.1 + sign * delta)
            }
        };
        let plus = flow(h, shift(1.0), t_final, dt)?;
        let minus = flow(h, shift(-1.0), t_final, dt)?;
        j[0][col] = (plus.0 - minus.0) / (2.0 * delta);
        j[1][col] = (plus.1 - minus.1) / (2.0 * delta);
    }
    Ok(j)
}

pub fn determinant(j: &[[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// Initial and final states of many independent trajectories.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub initial_conditions: Vec<PhasePoint>,
    pub final_states: Vec<PhasePoint>,
    pub time: f64,
    pub integrator_step: f64,
}

impl TrajectoryEnsemble {
    /// Integrates every initial condition to `time` (in parallel).
    pub fn evolve<H: Hamiltonian>(h: &H, initial_conditions: Vec<PhasePoint>, time: f64, dt: f64) -> Result<Self> {
        let steps = steps_for(h, time, dt)?;
        let final_states = initial_conditions
            .par_iter()
            .map(|&r| advance(h, r, 0.0, time, steps))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            initial_conditions,
            final_states,
            time,
            integrator_step: if steps == 0 { dt } else { time / steps as f64 },
        })
    }

    /// `max |H0(final) - H0(initial)|` using the undriven Hamiltonian.
    pub fn max_static_energy_drift<H: Hamiltonian>(&self, h: &H) -> f64 {
        self.initial_conditions
            .iter()
            .zip(&self.final_states)
            .map(|(a, b)| (h.static_energy(b.0, b.1) - h.static_energy(a.0, a.1)).abs())
            .fold(0.0, f64::max)
    }

    /// Phase-space distance `|Phi_t(r) - r|` per trajectory.
    pub fn return_distances(&self) -> Vec<f64> {
        self.initial_conditions
            .iter()
            .zip(&self.final_states)
            .map(|(a, b)| (b.0 - a.0).hypot(b.1 - a.1))
            .collect()
    }
}

/// Stroboscopic points of one seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionOrbit {
    pub seed: PhasePoint,
    /// States at `t = l T`, `l = 1..=n_periods`.
    pub points: Vec<PhasePoint>,
}

impl SectionOrbit {
    /// Spread `max - min` of the undriven energy over the seed and its
    /// section points.
    pub fn energy_spread<H: Hamiltonian>(&self, h: &H) -> f64 {
        let mut lo = h.static_energy(self.seed.0, self.seed.1);
        let mut hi = lo;
        for &(q, p) in &self.points {
            let e = h.static_energy(q, p);
            lo = lo.min(e);
            hi = hi.max(e);
        }
        hi - lo
    }
}

/// Seeds whose trajectory blew up are listed in `dropped` with the failure
/// time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoincareSection {
    pub orbits: Vec<SectionOrbit>,
    pub dropped: Vec<(PhasePoint, f64)>,
    pub n_periods: usize,
}

impl PoincareSection {
    /// Fraction of surviving seeds whose section stays inside an energy shell
    /// of total width `shell_width` (undriven energy).
    pub fn shell_fraction<H: Hamiltonian>(&self, h: &H, shell_width: f64) -> f64 {
        if self.orbits.is_empty() {
            return 0.0;
        }
        let inside = self
            .orbits
            .iter()
            .filter(|o| o.energy_spread(h) <= shell_width)
            .count();
        inside as f64 / self.orbits.len() as f64
    }

    pub fn points(&self) -> impl Iterator<Item = PhasePoint> + '_ {
        self.orbits.iter().flat_map(|o| o.points.iter().copied())
    }
}

/// Stroboscopic map samples of each seed at the default step.
pub fn poincare_section<H: Hamiltonian>(h: &H, seeds: &[PhasePoint], n_periods: usize) -> Result<PoincareSection> {
    poincare_section_with_step(h, seeds, n_periods, DEFAULT_STEPS_PER_PERIOD)
}

pub fn poincare_section_with_step<H: Hamiltonian>(
    h: &H,
    seeds: &[PhasePoint],
    n_periods: usize,
    steps_per_period: usize,
) -> Result<PoincareSection> {
    if n_periods < 1 {
        return Err(invalid("n_periods", "must be >= 1"));
    }
    if steps_per_period < MIN_STEPS_PER_PERIOD {
        return Err(invalid(
            "steps_per_period",
            format!("must be >= {MIN_STEPS_PER_PERIOD}"),
        ));
    }
    let period = h.period();
    let results: Vec<std::result::Result<SectionOrbit, (PhasePoint, f64)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut points = Vec::with_capacity(n_periods);
            let mut r = seed;
            for l in 0..n_periods {
                // restart the clock each period: the force is T-periodic
                match advance(h, r, 0.0, period, steps_per_period) {
                    Ok(next) => {
                        r = next;
                        points.push(r);
                    }
                    Err(Error::BlowUp { time }) => return Err((seed, l as f64 * period + time)),
                    Err(_) => return Err((seed, l as f64 * period)),
                }
            }
            Ok(SectionOrbit { seed, points })
        })
        .collect();
    let mut orbits = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match r {
            Ok(o) => orbits.push(o),
            Err(d) => dropped.push(d),
        }
    }
    Ok(PoincareSection {
        orbits,
        dropped,
        n_periods,
    })
}

/// Monte-Carlo estimate of the regularized classical return probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalReturn {
    /// `|W| * (returned / samples) / (pi epsilon^2)`.
    pub density: f64,
    pub fraction: f64,
    pub returns: usize,
    pub n_samples: usize,
    pub epsilon: f64,
    pub window: PhaseWindow,
    /// Set when no sample returned; `density` is then 0.
    pub low_statistics: bool,
}

impl ClassicalReturn {
    /// One-sigma binomial error of `density`.
    pub fn std_error(&self) -> f64 {
        let f = self.fraction;
        let scale = self.window.area() / (PI * self.epsilon * self.epsilon);
        scale * (f * (1.0 - f) / self.n_samples as f64).sqrt()
    }
}

/// Uniform samples over `window` are evolved for time `t`; a sample returns
/// when `|Phi_t(r) - r| < epsilon`.
pub fn classical_return_probability<H: Hamiltonian>(
    h: &H,
    t: f64,
    window: &PhaseWindow,
    n_samples: usize,
    epsilon: f64,
    seed: u64,
) -> Result<ClassicalReturn> {
    window.validate()?;
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be > 0"));
    }
    if n_samples < MIN_RETURN_SAMPLES {
        return Err(invalid(
            "n_samples",
            format!("need at least {MIN_RETURN_SAMPLES}, got {n_samples}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial: Vec<PhasePoint> = (0..n_samples)
        .map(|_| {
            (
                rng.random_range(window.q_min..window.q_max),
                rng.random_range(window.p_min..window.p_max),
            )
        })
        .collect();
    let ens = TrajectoryEnsemble::evolve(h, initial, t, default_dt(h))?;
    let returns = ens.return_distances().iter().filter(|&&d| d < epsilon).count();
    let fraction = returns as f64 / n_samples as f64;
    Ok(ClassicalReturn {
        density: window.area() * fraction / (PI * epsilon * epsilon),
        fraction,
        returns,
        n_samples,
        epsilon,
        window: *window,
        low_statistics: returns == 0,
    })
}

/// Classical diagonal propagator on a raster: each cell centre `r` gets
/// `exp(-|Phi_t(r) - r|^2 / 2 eps^2) / (2 pi eps^2)`.
pub fn liouville_diagonal_estimate<H: Hamiltonian>(
    h: &H,
    t: f64,
    window: &PhaseWindow,
    resolution: (usize, usize),
    epsilon: f64,
) -> Result<PhaseSpaceField> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be > 0"));
    }
    let mut field = PhaseSpaceField::zeros(window, resolution, t, FieldKind::LiouvilleDiagonal)?;
    let centres: Vec<PhasePoint> = field
        .q_axis
        .iter()
        .flat_map(|&q| field.p_axis.iter().map(move |&p| (q, p)))
        .collect();
    let ens = TrajectoryEnsemble::evolve(h, centres, t, default_dt(h))?;
    let norm = 1.0 / (2.0 * PI * epsilon * epsilon);
    field.values = ens
        .return_distances()
        .iter()
        .map(|d| norm * (-d * d / (2.0 * epsilon * epsilon)).exp())
        .collect();
    Ok(field)
}

/// Default regularization width `sqrt(hbar)`.
pub fn default_epsilon<H: Hamiltonian>(h: &H) -> f64 {
    h.hbar().sqrt()
}

/// Period of the undriven orbit through `r`, from successive upward
/// crossings of `p = 0` by linear interpolation. Integrates at most
/// `max_time`.
pub fn static_orbit_period<H: Hamiltonian>(h: &H, r: PhasePoint, max_time: f64) -> Option<f64> {
    let sys = h.undriven();
    let dt = h.period() / DEFAULT_STEPS_PER_PERIOD as f64;
    let mut s = [r.0, r.1, 0.0];
    let mut crossings = Vec::new();
    while s[2] < max_time && crossings.len() < 2 {
        let prev = s;
        step(&sys, &mut s, dt, None);
        if prev[1] < 0.0 && s[1] >= 0.0 {
            let frac = prev[1] / (prev[1] - s[1]);
            crossings.push(prev[2] + frac * dt);
        }
    }
    (crossings.len() == 2).then(|| crossings[1] - crossings[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HarmonicOscillator, ModelParams};

    fn model(s: f64) -> ModelParams {
        ModelParams::reference(s)
    }

    #[test]
    fn minimum_is_a_fixed_point() {
        let p = model(0.0);
        let q0 = p.well_position();
        let tr = integrate_trajectory(&p, (q0, 0.0), p.period(), default_dt(&p)).unwrap();
        for &(q, v) in &tr.states {
            assert!((q - q0).abs() < 1e-10 && v.abs() < 1e-10);
        }
        assert_eq!(tr.times.len(), DEFAULT_STEPS_PER_PERIOD + 1);
        assert!((tr.times.last().unwrap() - p.period()).abs() < 1e-12);
    }

    #[test]
    fn energy_is_conserved_without_drive() {
        let p = model(0.0);
        let eb = p.barrier_height;
        let seeds = [(0.1, 0.0), (28.0, 5.0), (-10.0, 18.0), (0.0, 25.0), (40.0, -3.0)];
        let ens = TrajectoryEnsemble::evolve(&p, seeds.to_vec(), p.period(), default_dt(&p)).unwrap();
        let drift = ens.max_static_energy_drift(&p);
        assert!(drift < 1e-8 * eb, "drift {drift}");
    }

    #[test]
    fn step_bound_is_enforced() {
        let p = model(0.0);
        assert!(flow(&p, (1.0, 0.0), 1.0, p.period() / 512.0).is_err());
        assert!(flow(&p, (1.0, 0.0), -1.0, 1e-3).is_err());
    }

    #[test]
    fn tangent_map_matches_finite_differences() {
        let p = model(2.5);
        let dt = default_dt(&p);
        for r in [(3.0, 1.0), (-25.0, 4.0), (12.0, -9.0)] {
            let (_, j) = flow_with_tangent(&p, r, p.period(), dt).unwrap();
            let fd = finite_difference_jacobian(&p, r, p.period(), dt, 1e-6).unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    let scale = j[a][b].abs().max(1.0);
                    assert!((j[a][b] - fd[a][b]).abs() < 1e-4 * scale, "{j:?} vs {fd:?}");
                }
            }
            assert!((determinant(&j) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn harmonic_orbits_close_after_one_period() {
        let h = HarmonicOscillator::new(1.0, 1.3, 1.0);
        let r = flow(&h, (2.0, -1.0), h.period(), default_dt(&h)).unwrap();
        assert!((r.0 - 2.0).abs() < 1e-9 && (r.1 + 1.0).abs() < 1e-9);
        let w = PhaseWindow::new(-3.0, 3.0, -3.0, 3.0).unwrap();
        let ret = classical_return_probability(&h, h.period(), &w, 10_000, 0.1, 7).unwrap();
        assert_eq!(ret.returns, 10_000);
        assert!((ret.density - 36.0 / (PI * 0.01)).abs() < 1e-9);
        assert!(!ret.low_statistics);
    }

    #[test]
    fn no_returns_are_flagged() {
        let h = HarmonicOscillator::new(1.0, 1.0, 1.0);
        let w = PhaseWindow::new(1.0, 3.0, 1.0, 3.0).unwrap();
        // half a period maps the window onto its mirror image
        let ret = classical_return_probability(&h, 0.5 * h.period(), &w, 10_000, 0.01, 1).unwrap();
        assert!(ret.low_statistics);
        assert_eq!(ret.density, 0.0);
        assert!(classical_return_probability(&h, 1.0, &w, 100, 0.1, 1).is_err());
        assert!(classical_return_probability(&h, 1.0, &w, 10_000, 0.0, 1).is_err());
    }

    #[test]
    fn undriven_section_stays_on_level_sets() {
        let p = model(0.0);
        let seeds = [(20.0, 0.0), (0.5, 1.0), (45.0, 0.0)];
        let sec = poincare_section(&p, &seeds, 20).unwrap();
        assert!(sec.dropped.is_empty());
        for o in &sec.orbits {
            assert_eq!(o.points.len(), 20);
            assert!(o.energy_spread(&p) < 1e-6 * p.barrier_height);
        }
        assert_eq!(sec.shell_fraction(&p, 1e-6 * p.barrier_height), 1.0);
        assert!(poincare_section(&p, &seeds, 0).is_err());
    }

    #[test]
    fn harmonic_period_is_recovered() {
        let h = HarmonicOscillator::new(1.0, 0.8, 1.0);
        let t = static_orbit_period(&h, (1.0, 0.3), 30.0).unwrap();
        assert!((t - 2.0 * PI / 0.8).abs() < 1e-6);
    }

    #[test]
    fn liouville_field_concentrates_as_epsilon_shrinks() {
        let h = HarmonicOscillator::new(1.0, 1.0, 1.0);
        let w = PhaseWindow::new(-2.0, 2.0, -2.0, 2.0).unwrap();
        let t = 0.9 * h.period();
        let wide = liouville_diagonal_estimate(&h, t, &w, (16, 16), 0.5).unwrap();
        let narrow = liouville_diagonal_estimate(&h, t, &w, (16, 16), 0.1).unwrap();
        assert!(narrow.max() > wide.max());
        let support = |f: &PhaseSpaceField| f.values.iter().filter(|&&v| v > 1e-3 * f.max()).count();
        assert!(support(&narrow) < support(&wide));
        // the origin is the only fixed point of a non-commensurate rotation
        let (iq, ip) = narrow.cell_of(0.01, 0.01).unwrap();
        assert!((narrow.get(iq, ip) - narrow.max()).abs() < 0.2 * narrow.max());
    }
}
