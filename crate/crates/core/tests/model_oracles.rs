//! Oracles for the static double well on the default grid.

use proptest::prelude::*;
use quasinoise::floquet::build_grid;
use quasinoise::model::{static_eigensystem, static_hamiltonian};
use quasinoise::{c64, Hamiltonian, ModelParams};

const N_DEFAULT: usize = 1024;

fn reference() -> ModelParams {
    ModelParams::reference(0.0)
}

fn e_max(p: &ModelParams) -> f64 {
    3.0 * p.barrier_height
}

#[test]
fn ground_state_sits_half_a_quantum_above_the_well_bottom() {
    let p = reference();
    let g = build_grid(&p, e_max(&p), N_DEFAULT).unwrap();
    let (e, _) = static_eigensystem(&p, &g).unwrap();
    assert!((e[0] + 99.5).abs() < 0.1, "E_0 = {}", e[0]);
}

#[test]
fn static_hamiltonian_is_hermitian() {
    let p = reference();
    let g = build_grid(&p, e_max(&p), N_DEFAULT).unwrap();
    let h = static_hamiltonian(&p, &g).unwrap();
    let n = h.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..=i {
            let d: c64 = h[(i, j)] - h[(j, i)].conj();
            worst = worst.max(d.norm());
        }
    }
    assert!(worst < 1e-12, "max |H - H^dagger| = {worst}");
}

#[test]
fn deep_levels_form_tunnelling_doublets() {
    let p = reference();
    let g = build_grid(&p, e_max(&p), N_DEFAULT).unwrap();
    let (e, _) = static_eigensystem(&p, &g).unwrap();
    // well below the barrier the splitting is far smaller than the spacing
    for n in 0..10 {
        let splitting = e[2 * n + 1] - e[2 * n];
        let spacing = e[2 * n + 2] - e[2 * n];
        assert!(splitting >= -1e-9, "level order broken at doublet {n}");
        assert!(
            splitting < 1e-6 * spacing,
            "doublet {n}: splitting {splitting:e}, spacing {spacing}"
        );
        assert!((0.7..1.0).contains(&spacing), "doublet {n}: spacing {spacing}");
    }
}

#[test]
fn lowest_levels_converge_under_grid_doubling() {
    let p = reference();
    let coarse = build_grid(&p, e_max(&p), N_DEFAULT).unwrap();
    let fine = build_grid(&p, e_max(&p), 2 * N_DEFAULT).unwrap();
    assert!((coarse.length() - fine.length()).abs() < 1e-9);
    let (a, _) = static_eigensystem(&p, &coarse).unwrap();
    let (b, _) = static_eigensystem(&p, &fine).unwrap();
    let worst = (0..100).map(|n| (a[n] - b[n]).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-8, "max |E_n(N) - E_n(2N)| = {worst:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn force_matches_central_differences(
        q in -60.0f64..60.0,
        t in 0.0f64..50.0,
        s in prop::sample::select(vec![0.0, 2.5, 10.0, 100.0]),
    ) {
        let p = ModelParams::reference(s);
        let h = 1e-4;
        let fd = -(p.potential(q + h, t) - p.potential(q - h, t)) / (2.0 * h);
        let f = p.force(q, t);
        prop_assert!((f - fd).abs() <= 1e-6 * (1.0 + f.abs()), "F = {f}, FD = {fd}");
    }

    #[test]
    fn static_energy_is_even_in_q_and_p(q in -60.0f64..60.0, pm in -30.0f64..30.0) {
        let p = reference();
        let a = p.static_energy(q, pm);
        let b = p.static_energy(-q, -pm);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}
