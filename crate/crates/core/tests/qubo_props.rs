mod support;

use std::collections::BTreeSet;

use uc_benders::cuts::{CutCoeffs, CutPool, OptimalityCut};
use uc_benders::engine::{solve_exhaustive, ExhaustiveSampler, Sampler};
use uc_benders::model::Schedule;
use uc_benders::qubo::{
    build_qubo, complete_assignment, decode, lower_bound, parse_dump, write_dump, PenaltyConfig,
};

fn cases(count: usize, max_bits: usize) -> Vec<(uc_benders::model::Instance, CutPool, uc_benders::qubo::QuboProblem)> {
    (0..)
        .filter_map(|s| support::small_qubo_case(s, max_bits))
        .take(count)
        .collect()
}

#[test]
fn zero_penalty_set_is_the_feasible_set() {
    let all = cases(30, 16);
    assert!(all.iter().filter(|c| !c.1.feasibility().is_empty()).count() >= 5);
    for (inst, pool, problem) in all {
        let mut from_qubo = BTreeSet::new();
        for x in support::all_assignments(problem.n()) {
            if problem.satisfied(&x) {
                let u = decode(&x, &problem.registry).unwrap().u;
                assert!(support::master_feasible(&inst, &pool, &u), "zero penalty at infeasible {u:?}");
                assert_eq!(problem.penalty(&x), 0.0);
                from_qubo.insert(u);
            } else {
                assert!(problem.penalty(&x) > 0.0);
            }
        }
        let feasible: BTreeSet<Schedule> = support::schedules(&inst)
            .filter(|u| support::master_feasible(&inst, &pool, u))
            .collect();
        assert_eq!(from_qubo, feasible);
    }
}

#[test]
fn completion_round_trips_every_feasible_schedule() {
    for (inst, pool, problem) in cases(40, 40) {
        for u in support::schedules(&inst) {
            let x = complete_assignment(&problem, &u);
            assert_eq!(x[problem.registry.unit_bits()], problem.registry.encode_schedule(&u)[problem.registry.unit_bits()]);
            assert_eq!(decode(&x, &problem.registry).unwrap().u, u);
            assert_eq!(problem.satisfied(&x), support::master_feasible(&inst, &pool, &u));
        }
    }
}

#[test]
fn lower_bound_is_the_cut_envelope() {
    for (inst, pool, _) in cases(40, 40) {
        for u in support::schedules(&inst) {
            let env = pool.optimality().iter().map(|c| c.eval(&u).unwrap()).fold(f64::NEG_INFINITY, f64::max);
            match lower_bound(&u, &pool) {
                Ok(lb) => assert_eq!(lb, env),
                Err(_) => assert!(pool.optimality().is_empty()),
            }
        }
    }
}

#[test]
fn optimality_cuts_leave_bit_count_alone() {
    for (inst, pool, problem) in cases(30, 40) {
        let mut fea_only = CutPool::new();
        for c in pool.feasibility() {
            fea_only.push_feasibility(c.clone()).unwrap();
        }
        let bare = build_qubo(&fea_only, &inst.commitment_rules(), &PenaltyConfig::default(), 2000.0).unwrap();
        assert_eq!(bare.n(), problem.n());
    }
}

fn single_cut(values: Vec<f64>, constant: f64) -> CutPool {
    let mut pool = CutPool::new();
    pool.push_optimality(OptimalityCut {
        iter: 0,
        coeffs: CutCoeffs { units: 1, horizon: values.len(), values },
        value_const: constant,
        demand_const: 0.0,
    })
    .unwrap();
    pool
}

#[test]
fn single_cut_energy_orders_schedules_above_the_vertex() {
    // With one cut the objective part is h(Z) - h(C), h(Z) = Z + mu (Z - ub)^2,
    // which is increasing for Z above ub - 1/(2 mu).
    for (inst, pool, _) in cases(40, 40) {
        let Some(cut) = pool.optimality().first() else { continue };
        let mut one = CutPool::new();
        one.push_optimality(cut.clone()).unwrap();
        let rules = inst.commitment_rules();
        let ub = 1500.0;
        let problem = build_qubo(&one, &rules, &PenaltyConfig::default(), ub).unwrap();
        let mu = problem.penalties.mu;
        let h = |z: f64| z + mu * (z - ub) * (z - ub);
        let vertex = ub - 1.0 / (2.0 * mu);
        let mut pts: Vec<(f64, f64)> = Vec::new();
        for u in support::schedules(&inst) {
            if !support::updown_ok(&inst, &u) {
                continue;
            }
            let x = complete_assignment(&problem, &u);
            let z = cut.eval(&u).unwrap();
            let e = problem.energy(&x);
            let want = h(z) - h(cut.constant());
            assert!((e - want).abs() <= 1e-7 * (1.0 + want.abs()), "{e} vs {want}");
            if z >= vertex {
                pts.push((z, e));
            }
        }
        for a in &pts {
            for b in &pts {
                if a.0 < b.0 - 1e-9 {
                    assert!(a.1 < b.1 + 1e-9 * (1.0 + b.1.abs()));
                }
            }
        }
    }
}

#[test]
fn single_cut_energy_can_reverse_below_the_vertex() {
    // Z(0) = 0 and Z(1) = -10 with ub = 0 and mu = 0.01: the vertex sits at -50.
    let pool = single_cut(vec![-10.0], 0.0);
    let rules = support::tiny_instance(1).commitment_rules();
    let rules = uc_benders::model::CommitmentRules { horizon: 1, rules: vec![rules.rules[0]] };
    let mut rules = rules;
    rules.rules[0].t_on = 1;
    rules.rules[0].t_off = 1;
    let cfg = PenaltyConfig { mu: Some(0.01), ..PenaltyConfig::default() };
    let problem = build_qubo(&pool, &rules, &cfg, 0.0).unwrap();
    let e0 = problem.energy(&[false]);
    let e1 = problem.energy(&[true]);
    assert!(e1 < e0, "above the vertex the lower cut value wins");

    // Same cut with ub far above: both Z lie below the vertex and the order flips.
    let problem = build_qubo(&pool, &rules, &cfg, 1000.0).unwrap();
    assert!(problem.energy(&[true]) > problem.energy(&[false]));
}

#[test]
fn dump_round_trips() {
    for (_, _, problem) in cases(20, 60) {
        let parsed = parse_dump(&write_dump(&problem)).unwrap();
        assert_eq!(parsed.matrix, problem.matrix);
        assert_eq!(parsed.meanings, problem.registry.entries());
    }
}

#[test]
fn split_sampler_finds_the_global_minimum() {
    for (_, _, problem) in cases(30, 20) {
        let split = ExhaustiveSampler::best_only().sample(&problem).unwrap();
        let full = solve_exhaustive(&problem.matrix).unwrap();
        let (a, b) = (split.best().unwrap().energy, full.best().unwrap().energy);
        assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
    }
}
