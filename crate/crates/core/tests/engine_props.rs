mod support;

use uc_benders::engine::{solve_exhaustive, solve_sa, to_ising, IsingProblem, SamplerParams};
use uc_benders::qubo::QuboMatrix;

fn ising_gap(m: &QuboMatrix) -> f64 {
    let ising = to_ising(m);
    support::all_assignments(m.n())
        .map(|x| (m.energy(&x) - ising.energy(&IsingProblem::spins(&x))).abs())
        .fold(0.0, f64::max)
}

#[test]
fn ising_energies_match_on_random_matrices() {
    for seed in 0..40u64 {
        let m = support::random_matrix(seed, 1 + (seed % 12) as usize);
        assert!(ising_gap(&m) <= 1e-9, "seed {seed}");
    }
}

#[test]
fn ising_energies_match_on_built_problems() {
    let mut done = 0;
    for seed in 0.. {
        let Some((_, _, p)) = support::small_qubo_case(seed, 12) else { continue };
        assert!(ising_gap(&p.matrix) <= 1e-9 * (1.0 + p.matrix.magnitude()), "seed {seed}");
        done += 1;
        if done == 30 {
            break;
        }
    }
}

#[test]
fn ising_ground_state_is_the_qubo_ground_state() {
    for seed in 0..30u64 {
        let m = support::random_matrix(seed ^ 0x77, 2 + (seed % 11) as usize);
        let ising = to_ising(&m);
        let best = solve_exhaustive(&m).unwrap();
        let best = best.best().unwrap();
        let ground = support::all_assignments(m.n())
            .map(|x| ising.energy(&IsingProblem::spins(&x)))
            .fold(f64::INFINITY, f64::min);
        assert!((ground - best.energy).abs() <= 1e-9);
        assert!((ising.energy(&IsingProblem::spins(&best.x)) - ground).abs() <= 1e-9);
    }
}

#[test]
fn minimum_ignores_bit_order() {
    for seed in 0..20u64 {
        let n = 10;
        let m = support::random_matrix(seed, n);
        let rev = QuboMatrix::from_entries(
            n,
            m.entries().iter().map(|&(i, j, q)| (n - 1 - j, n - 1 - i, q)),
            m.offset(),
        );
        let a = solve_exhaustive(&m).unwrap();
        let b = solve_exhaustive(&rev).unwrap();
        let (a, b) = (a.best().unwrap(), b.best().unwrap());
        assert!((a.energy - b.energy).abs() <= 1e-9);
        let flipped: Vec<bool> = b.x.iter().rev().copied().collect();
        assert!((m.energy(&flipped) - a.energy).abs() <= 1e-9);
    }
}

#[test]
fn exhaustive_minimum_is_the_enumerated_minimum() {
    for seed in 0..20u64 {
        let m = support::random_matrix(seed ^ 0xABC, 1 + (seed % 14) as usize);
        let got = solve_exhaustive(&m).unwrap();
        let want = support::all_assignments(m.n()).map(|x| m.energy(&x)).fold(f64::INFINITY, f64::min);
        assert_eq!(got.best().unwrap().energy, want);
    }
}

#[test]
fn annealing_finds_ground_states() {
    let params = SamplerParams { sweeps: Some(2000), restarts: 20, seed: 5, ..SamplerParams::default() };
    let mut hits = 0;
    for seed in 0..100u64 {
        let m = support::random_matrix(seed ^ 0x5A5A, 4 + (seed % 13) as usize);
        let exact = solve_exhaustive(&m).unwrap().best().unwrap().energy;
        let sa = solve_sa(&m, &SamplerParams { seed, ..params }).unwrap();
        if (sa.best().unwrap().energy - exact).abs() <= 1e-9 * (1.0 + exact.abs()) {
            hits += 1;
        }
    }
    assert!(hits >= 95, "{hits} of 100");
}

#[test]
fn annealing_is_deterministic_per_seed() {
    let m = support::random_matrix(9, 14);
    let p = SamplerParams { sweeps: Some(300), restarts: 8, seed: 11, ..SamplerParams::default() };
    assert_eq!(solve_sa(&m, &p).unwrap(), solve_sa(&m, &p).unwrap());
}
