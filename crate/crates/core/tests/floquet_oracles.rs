//! Floquet-operator oracles.
//!
//! The static-level comparison runs on the reference double well. The
//! split-operator error is second order in the time step, so the slice count
//! is raised until the bound-state error drops below the tolerance. The
//! self-convergence and gauge checks use a shallow well (`E_b = 8`) whose
//! grids are small enough for very fine time steps.

use std::f64::consts::PI;
use std::sync::OnceLock;

use quasinoise::floquet::{
    build_grid, propagate_period, quasienergies, quasienergy_of, select_bound_states,
    unitarity_defect, FloquetEigen,
};
use quasinoise::model::static_eigensystem;
use quasinoise::{c64, Grid, ModelParams, UnitaryPropagator};

/// Fine enough that the S = 0 bound-state error is below 1e-6.
const REFERENCE_SLICES: usize = 16384;

fn reference_grid(p: &ModelParams) -> Grid {
    build_grid(p, 3.0 * p.barrier_height, 1024).unwrap()
}

struct Undriven {
    params: ModelParams,
    u: UnitaryPropagator,
    eigen: FloquetEigen,
    static_levels: Vec<f64>,
}

fn undriven() -> &'static Undriven {
    static CELL: OnceLock<Undriven> = OnceLock::new();
    CELL.get_or_init(|| {
        let params = ModelParams::reference(0.0);
        let g = reference_grid(&params);
        let u = propagate_period(&params, &g, REFERENCE_SLICES).unwrap();
        let eigen = quasienergies(&u, params.hbar).unwrap();
        let (static_levels, _) = static_eigensystem(&params, &g).unwrap();
        Undriven {
            params,
            u,
            eigen,
            static_levels,
        }
    })
}

fn shallow(drive: f64) -> ModelParams {
    ModelParams {
        barrier_height: 8.0,
        ..ModelParams::reference(drive)
    }
}

fn shallow_grid(p: &ModelParams) -> Grid {
    build_grid(p, 3.0 * p.barrier_height, 128).unwrap()
}

fn circular_distance(a: f64, b: f64, width: f64) -> f64 {
    let x = (a - b).rem_euclid(width);
    x.min(width - x)
}

fn nearest(levels: &[f64], e: f64, width: f64) -> f64 {
    levels
        .iter()
        .map(|&x| circular_distance(x, e, width))
        .fold(f64::INFINITY, f64::min)
}

fn folded(e: f64, period: f64, hbar: f64) -> f64 {
    quasienergy_of(c64::cis(-e * period / hbar), period, hbar)
}

#[test]
fn undriven_eigenphases_match_static_levels_below_the_barrier() {
    let r = undriven();
    let w = r.params.hbar * r.params.drive_frequency;
    let period = r.u.period;
    let bound: Vec<f64> = r.static_levels.iter().copied().filter(|&e| e < 0.0).collect();
    assert!(bound.len() > 200, "only {} bound levels", bound.len());
    let worst = bound
        .iter()
        .map(|&e| nearest(&r.eigen.quasienergies, folded(e, period, r.params.hbar), w))
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "max |dE| = {worst:e} over {} levels", bound.len());
}

#[test]
fn quasienergies_are_folded_into_one_zone() {
    let r = undriven();
    let half = 0.5 * r.params.hbar * r.params.drive_frequency;
    for &e in &r.eigen.quasienergies {
        assert!(e > -half && e <= half, "{e} outside (-{half}, {half}]");
    }
    // levels spanning many zones all land in it
    let span = r.static_levels.last().unwrap() - r.static_levels[0];
    assert!(span > 100.0 * 2.0 * half);
}

#[test]
fn ground_doublet_survives_bound_state_selection() {
    let r = undriven();
    let w = r.params.hbar * r.params.drive_frequency;
    let kept = select_bound_states(&r.eigen, 0.1, 1e-6).unwrap();
    for n in 0..2 {
        let target = folded(r.static_levels[n], r.u.period, r.params.hbar);
        let d = nearest(&kept.spectrum.energies, target, w);
        assert!(d < 1e-6, "level {n} missing from the retained spectrum ({d:e})");
    }
}

#[test]
fn trace_equals_sum_of_eigenvalues() {
    let r = undriven();
    let sum: c64 = r.eigen.eigenvalues.iter().copied().sum();
    let d = (r.u.trace() - sum).norm();
    assert!(d < 1e-10, "|Tr U - sum lambda| = {d:e}");
}

#[test]
fn slice_doubling_changes_retained_quasienergies_below_1e8() {
    let p = shallow(0.0);
    let g = shallow_grid(&p);
    let w = p.hbar * p.drive_frequency;
    let m = 65536;
    let a = quasienergies(&propagate_period(&p, &g, m).unwrap(), p.hbar).unwrap();
    let b = quasienergies(&propagate_period(&p, &g, 2 * m).unwrap(), p.hbar).unwrap();
    let edge = (0.1 * g.n_points as f64).round() as usize;
    let kept: Vec<f64> = (0..g.n_points)
        .filter(|&n| a.edge_weight(n, edge) < 1e-6)
        .map(|n| a.quasienergies[n])
        .collect();
    assert!(kept.len() >= 30, "only {} bound states", kept.len());
    let worst = kept
        .iter()
        .map(|&e| nearest(&b.quasienergies, e, w))
        .fold(0.0, f64::max);
    assert!(worst < 1e-8 * w, "M vs 2M: max change {:e} hbar*Omega", worst / w);
}

#[test]
fn drive_phase_is_a_gauge_choice() {
    for s in [2.5, 10.0] {
        let p = shallow(s);
        let g = shallow_grid(&p);
        let w = p.hbar * p.drive_frequency;
        let base = quasienergies(&propagate_period(&p, &g, 2048).unwrap(), p.hbar).unwrap();
        for delta in [PI / 7.0, PI / 3.0] {
            let shifted = ModelParams {
                phase: p.phase + delta,
                ..p
            };
            let u = propagate_period(&shifted, &g, 2048).unwrap();
            let e = quasienergies(&u, p.hbar).unwrap();
            let worst = base
                .quasienergies
                .iter()
                .map(|&x| nearest(&e.quasienergies, x, w))
                .fold(0.0, f64::max);
            assert!(worst < 1e-9, "S = {s}, delta = {delta}: {worst:e}");
        }
    }
}

#[test]
fn powers_of_the_floquet_operator_stay_unitary() {
    let p = shallow(2.5);
    let g = shallow_grid(&p);
    let u = propagate_period(&p, &g, 1024).unwrap();
    for l in [1u32, 2, 7, 16, 50] {
        let d = unitarity_defect(&u.power(l));
        assert!(d < l as f64 * 1e-9, "l = {l}: defect {d:e}");
    }
}
