//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uc_benders::cuts::{
    build_feasibility_cuts, build_optimality_cut, CutPool, FeasibilityCut, FeasibilityMode, OptimalityCut, CUT_TOL,
};
use uc_benders::qubo::{build_qubo, PenaltyConfig, QuboMatrix, QuboProblem};
use uc_benders::dispatch::{solve_dispatch, solve_feasibility};
use uc_benders::harness::{gen_instance, CostRanges, DemandProfile, GeneratorSpec, Range};
use uc_benders::model::{Instance, Microgrid, Schedule, UnitParams};

/// Desk-scale random instance with at most 12 commitment bits and 1 to 3
/// microgrids.
pub fn random_instance(seed: u64) -> Instance {
    let n_mgs = 1 + (seed % 3) as usize;
    let units_per_mg = if n_mgs == 3 { 1 } else { 1 + (seed / 3 % 2) as usize };
    let horizon = (12 / (n_mgs * units_per_mg)).clamp(2, 4);
    let profile = match seed % 4 {
        0 => DemandProfile::Flat { level: 25.0 + (seed % 7) as f64 * 5.0 },
        1 => DemandProfile::Sinusoidal { base: 30.0, amplitude: 20.0 },
        2 => DemandProfile::Sinusoidal { base: 10.0, amplitude: 8.0 },
        _ => DemandProfile::ScaledWeekly { decay_pct: 10.0 },
    };
    let spec = GeneratorSpec {
        n_mgs,
        units_per_mg,
        horizon_t: horizon,
        demand_profile: profile,
        cost_ranges: CostRanges {
            p_min: Range::new(0.0, 8.0),
            ..CostRanges::default()
        },
        seed: seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xA5,
        infeasible_at: None,
    };
    gen_instance(&spec).unwrap()
}

/// Up/down violations of one row as `(switch hour, was_on_before)`, found by
/// run-length encoding the history followed by the row.
pub fn row_violations(unit: &UnitParams, row: &[bool]) -> Vec<(usize, bool)> {
    let dur = unit.initial.duration.max(1);
    let pre = unit.t_on.max(unit.t_off) + dur + 1;
    let mut states: Vec<bool> = (0..pre)
        .map(|k| if pre - k <= dur { unit.initial.was_on } else { !unit.initial.was_on })
        .collect();
    states.extend_from_slice(row);
    let mut runs: Vec<(bool, usize, usize)> = Vec::new();
    for (k, &s) in states.iter().enumerate() {
        match runs.last_mut() {
            Some(r) if r.0 == s => r.2 += 1,
            _ => runs.push((s, k, 1)),
        }
    }
    runs.windows(2)
        .filter(|w| w[1].1 >= pre)
        .filter(|w| w[0].2 < if w[0].0 { unit.t_on } else { unit.t_off })
        .map(|w| (w[1].1 - pre, w[0].0))
        .collect()
}

pub fn row_feasible(unit: &UnitParams, row: &[bool]) -> bool {
    row_violations(unit, row).is_empty()
}

/// Cheapest dispatch of one hour by bisection on the marginal price.
/// Returns `None` when committed capacity is short.
pub fn hour_cost(units: &[(&UnitParams, bool)], demand: f64) -> Option<f64> {
    let on: Vec<&UnitParams> = units.iter().filter(|u| u.1).map(|u| u.0).collect();
    let cap: f64 = on.iter().map(|u| u.p_max).sum();
    if cap < demand - 1e-9 {
        return None;
    }
    let output = |lam: f64| -> Vec<f64> {
        on.iter()
            .map(|u| {
                assert!(u.a > 0.0, "oracle needs strictly convex units");
                ((lam - u.b) / (2.0 * u.a)).clamp(u.p_min, u.p_max)
            })
            .collect()
    };
    let total = |lam: f64| output(lam).iter().sum::<f64>();
    let p = if total(-1e12) >= demand {
        output(-1e12)
    } else {
        let (mut lo, mut hi) = (-1e6, 1e6);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if total(mid) < demand {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        output(hi)
    };
    Some(
        on.iter()
            .zip(&p)
            .map(|(u, &p)| u.a * p * p + u.b * p + u.c + u.d)
            .sum(),
    )
}

pub fn microgrid_cost(mg: &Microgrid, rows: &[&[bool]]) -> Option<f64> {
    let mut total = 0.0;
    for (t, &d) in mg.demand.iter().enumerate() {
        let units: Vec<(&UnitParams, bool)> = mg.units.iter().zip(rows).map(|(u, r)| (u, r[t])).collect();
        total += hour_cost(&units, d)?;
    }
    Some(total)
}

/// Operation charge of a schedule, `None` if some hour is short.
pub fn schedule_cost(inst: &Instance, u: &Schedule) -> Option<f64> {
    let mut total = 0.0;
    for (g, mg) in inst.microgrids().iter().enumerate() {
        let off = inst.unit_offset(g);
        let rows: Vec<&[bool]> = (0..mg.units.len()).map(|k| u.row(off + k)).collect();
        total += microgrid_cost(mg, &rows)?;
    }
    Some(total)
}

pub fn schedules(inst: &Instance) -> impl Iterator<Item = Schedule> + '_ {
    let (units, horizon) = (inst.num_units(), inst.horizon());
    (0..1u64 << (units * horizon)).map(move |mask| {
        Schedule::from_bits(units, horizon, (0..units * horizon).map(|b| mask >> b & 1 == 1).collect())
    })
}

pub fn updown_ok(inst: &Instance, u: &Schedule) -> bool {
    inst.units().all(|(g, _, unit)| row_feasible(unit, u.row(g)))
}

/// Optimal cost over every schedule that meets the up/down rules and can
/// cover demand, with one minimizer.
pub fn brute_force(inst: &Instance) -> Option<(f64, Schedule)> {
    let mut best: Option<(f64, Schedule)> = None;
    for u in schedules(inst) {
        if !updown_ok(inst, &u) {
            continue;
        }
        if let Some(c) = schedule_cost(inst, &u) {
            if best.as_ref().is_none_or(|b| c < b.0) {
                best = Some((c, u));
            }
        }
    }
    best
}

/// Cuts generated at schedule `u`: the optimality cut when every microgrid
/// can dispatch, otherwise the feasibility cuts in `mode`.
pub fn cuts_at(
    inst: &Instance,
    u: &Schedule,
    iter: usize,
    mode: FeasibilityMode,
) -> (Option<OptimalityCut>, Vec<FeasibilityCut>) {
    let mut outcomes = Vec::new();
    let mut short = Vec::new();
    for (g, mg) in inst.microgrids().iter().enumerate() {
        let local = u.slice_units(inst.unit_offset(g), mg.units.len());
        let out = solve_dispatch(mg, &local, 1e-9).unwrap();
        if !out.is_optimal() {
            short.push((g, solve_feasibility(mg, &local).unwrap()));
        }
        outcomes.push(out);
    }
    if short.is_empty() {
        (Some(build_optimality_cut(&outcomes, inst, iter).unwrap()), Vec::new())
    } else {
        (None, build_feasibility_cuts(&short, inst, iter, mode).unwrap())
    }
}

pub fn random_schedule(inst: &Instance, rng: &mut impl Rng) -> Schedule {
    let n = inst.num_units() * inst.horizon();
    Schedule::from_bits(inst.num_units(), inst.horizon(), (0..n).map(|_| rng.gen()).collect())
}

/// Pool of cuts generated at `k` random schedules of `inst`.
pub fn random_pool(inst: &Instance, seed: u64, k: usize, mode: FeasibilityMode) -> CutPool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = CutPool::new();
    for e in 0..k {
        let u = random_schedule(inst, &mut rng);
        let (opt, fea) = cuts_at(inst, &u, e, mode);
        if let Some(c) = opt {
            pool.push_optimality(c).unwrap();
        }
        for c in fea {
            pool.push_feasibility(c).unwrap();
        }
    }
    pool
}

/// Instance with at most six commitment bits.
pub fn tiny_instance(seed: u64) -> Instance {
    let units_per_mg = 1 + (seed % 2) as usize;
    let spec = GeneratorSpec {
        n_mgs: 1,
        units_per_mg,
        horizon_t: if units_per_mg == 2 { 2 + (seed / 2 % 2) as usize } else { 2 + (seed / 2 % 4) as usize },
        demand_profile: DemandProfile::Sinusoidal { base: 20.0, amplitude: 15.0 },
        cost_ranges: CostRanges {
            p_min: Range::new(0.0, 8.0),
            ..CostRanges::default()
        },
        seed: seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ 0x5A,
        infeasible_at: None,
    };
    gen_instance(&spec).unwrap()
}

/// Random cut pool whose QUBO has at most `max_bits` bits, with its build.
pub fn small_qubo_case(seed: u64, max_bits: usize) -> Option<(Instance, CutPool, QuboProblem)> {
    let inst = tiny_instance(seed);
    let mode = if seed.is_multiple_of(3) { FeasibilityMode::Single } else { FeasibilityMode::Multi };
    let pool = random_pool(&inst, seed ^ 0x1234, 1 + (seed % 4) as usize, mode);
    let problem = build_qubo(&pool, &inst.commitment_rules(), &PenaltyConfig::default(), 2000.0).ok()?;
    (problem.n() <= max_bits).then_some((inst, pool, problem))
}

/// Schedules meeting the up/down rules and every feasibility cut in `pool`.
pub fn master_feasible(inst: &Instance, pool: &CutPool, u: &Schedule) -> bool {
    updown_ok(inst, u) && pool.feasibility().iter().all(|c| c.eval(u).unwrap() <= CUT_TOL)
}

pub fn all_assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0..1u64 << n).map(move |m| (0..n).map(|b| m >> b & 1 == 1).collect())
}

/// Dense-ish random upper-triangular matrix with entries in [-10, 10].
pub fn random_matrix(seed: u64, n: usize) -> QuboMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i..n {
            if i == j || rng.gen_bool(0.5) {
                entries.push((i, j, rng.gen_range(-10.0..10.0)));
            }
        }
    }
    QuboMatrix::from_entries(n, entries, rng.gen_range(-5.0..5.0))
}
