//! Per-microgrid economic dispatch for a fixed commitment.
//!
//! The dispatch problem separates over hours. For each hour it minimizes
//! `Σ a p² + b p` over committed units subject to `Σ p ≥ D` and the gated
//! boxes `p_min u ≤ p ≤ p_max u`. It is solved by lambda iteration on the
//! demand multiplier: every unit's best response to a price `λ` is
//! `clip((λ - b) / 2a, p_min, p_max)`, total response is monotone in `λ`, and
//! the smallest `λ ≥ 0` whose response covers demand is found by walking the
//! sorted response breakpoints and solving the last linear piece exactly.
//!
//! Multipliers follow the Lagrangian
//!
//! ```text
//! L = Σ (a p² + b p) + Σ_t l_t (D_t - Σ p) + Σ m (p_min u - p) + Σ n (p - p_max u)
//! ```
//!
//! with `l, m, n ≥ 0`, so stationarity reads `2 a p + b - l - m + n = 0`.
//! That condition is imposed on decommitted units too (where `p = 0` and both
//! box constraints are active); it is what makes the resulting Benders cuts
//! valid at schedules other than the one they came from.

use thiserror::Error;

use crate::model::{Dispatch, Microgrid, Schedule, UnitParams, MW_TOL};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error("unit {unit} has negative quadratic cost {a}")]
    NonConvexUnit { unit: usize, a: f64 },
    #[error("tolerance {0} must be positive and finite")]
    InvalidTolerance(f64),
    #[error("schedule is {units}x{horizon}, microgrid needs {expected_units}x{expected_horizon}")]
    DimensionMismatch {
        units: usize,
        horizon: usize,
        expected_units: usize,
        expected_horizon: usize,
    },
}

/// Lagrange multipliers of one microgrid solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DualBundle {
    /// Demand multiplier per hour.
    pub l: Vec<f64>,
    /// Lower-box multiplier per (local unit, hour), row-major.
    pub m: Vec<f64>,
    /// Upper-box multiplier per (local unit, hour), row-major.
    pub n: Vec<f64>,
}

impl DualBundle {
    fn zeros(units: usize, horizon: usize) -> Self {
        Self {
            l: vec![0.0; horizon],
            m: vec![0.0; units * horizon],
            n: vec![0.0; units * horizon],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    pub p: Dispatch,
    pub duals: DualBundle,
    /// Operation charge of this microgrid, including `c + d` for committed hours.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DispatchOutcome {
    Optimal(DispatchSolution),
    /// Committed capacity falls short of demand at the listed hours.
    Infeasible { short_hours: Vec<usize> },
}

impl DispatchOutcome {
    pub fn is_optimal(&self) -> bool {
        matches!(self, DispatchOutcome::Optimal(_))
    }

    pub fn solution(&self) -> Option<&DispatchSolution> {
        match self {
            DispatchOutcome::Optimal(s) => Some(s),
            DispatchOutcome::Infeasible { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityResult {
    pub p: Dispatch,
    /// Demand relaxation per hour, MW.
    pub slack: Vec<f64>,
    pub duals: DualBundle,
    /// Total relaxation `Σ_t slack_t`.
    pub objective: f64,
}

fn check_inputs(mg: &Microgrid, u: &Schedule) -> Result<(), DispatchError> {
    if u.units() != mg.units.len() || u.horizon() != mg.demand.len() {
        return Err(DispatchError::DimensionMismatch {
            units: u.units(),
            horizon: u.horizon(),
            expected_units: mg.units.len(),
            expected_horizon: mg.demand.len(),
        });
    }
    for (k, unit) in mg.units.iter().enumerate() {
        if unit.a < 0.0 {
            return Err(DispatchError::NonConvexUnit { unit: k, a: unit.a });
        }
    }
    Ok(())
}

/// Solves the economic dispatch of one microgrid under schedule `u_mg`
/// (rows are the microgrid's units in local order).
pub fn solve_dispatch(
    mg: &Microgrid,
    u_mg: &Schedule,
    tol: f64,
) -> Result<DispatchOutcome, DispatchError> {
    check_inputs(mg, u_mg)?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(DispatchError::InvalidTolerance(tol));
    }
    let horizon = mg.demand.len();
    let nu = mg.units.len();

    let short_hours: Vec<usize> = (0..horizon)
        .filter(|&t| committed_capacity(mg, u_mg, t) < mg.demand[t] - tol)
        .collect();
    if !short_hours.is_empty() {
        return Ok(DispatchOutcome::Infeasible { short_hours });
    }

    let mut p = Dispatch::zeros(nu, horizon);
    let mut duals = DualBundle::zeros(nu, horizon);
    let mut objective = 0.0;
    for t in 0..horizon {
        let on: Vec<usize> = (0..nu).filter(|&k| u_mg.get(k, t)).collect();
        let units: Vec<&UnitParams> = on.iter().map(|&k| &mg.units[k]).collect();
        let hour = dispatch_hour(&units, mg.demand[t]);
        duals.l[t] = hour.lambda;
        for (j, &k) in on.iter().enumerate() {
            let unit = &mg.units[k];
            let pk = hour.p[j];
            p.set(k, t, pk);
            let (m, n) = box_duals(unit, pk, hour.lambda, true);
            duals.m[k * horizon + t] = m;
            duals.n[k * horizon + t] = n;
            objective += unit.a * pk * pk + unit.b * pk + unit.c + unit.d;
        }
        for k in (0..nu).filter(|&k| !u_mg.get(k, t)) {
            let (m, n) = box_duals(&mg.units[k], 0.0, hour.lambda, false);
            duals.m[k * horizon + t] = m;
            duals.n[k * horizon + t] = n;
        }
    }
    Ok(DispatchOutcome::Optimal(DispatchSolution { p, duals, objective }))
}

fn committed_capacity(mg: &Microgrid, u: &Schedule, t: usize) -> f64 {
    mg.units
        .iter()
        .enumerate()
        .filter(|&(k, _)| u.get(k, t))
        .map(|(_, unit)| unit.p_max)
        .sum()
}

/// Box multipliers that make `2 a p + b - l - m + n` vanish exactly.
fn box_duals(unit: &UnitParams, p: f64, l: f64, committed: bool) -> (f64, f64) {
    let g = 2.0 * unit.a * p + unit.b - l;
    if committed {
        let at_min = p <= unit.p_min;
        let at_max = p >= unit.p_max;
        if !at_min && !at_max {
            // interior: g is zero up to rounding in the price solve
            return (0.0, 0.0);
        }
        if g > 0.0 && at_min {
            return (g, 0.0);
        }
        if g < 0.0 && at_max {
            return (0.0, -g);
        }
        return (0.0, 0.0);
    }
    if g > 0.0 {
        (g, 0.0)
    } else {
        (0.0, -g)
    }
}

struct HourSolution {
    lambda: f64,
    p: Vec<f64>,
}

/// Best response of one unit to price `lambda`. Units with `a = 0` and
/// `b = lambda` are indifferent; `upper` picks which end of their range.
fn response(unit: &UnitParams, lambda: f64, upper: bool) -> f64 {
    if unit.a > 0.0 {
        ((lambda - unit.b) / (2.0 * unit.a)).clamp(unit.p_min, unit.p_max)
    } else if lambda > unit.b || (lambda == unit.b && upper) {
        unit.p_max
    } else {
        unit.p_min
    }
}

fn total_response(units: &[&UnitParams], lambda: f64, upper: bool) -> f64 {
    units.iter().map(|u| response(u, lambda, upper)).sum()
}

/// Lambda iteration for one hour. `units` are the committed units; the
/// caller has already checked that their capacity covers `demand` within
/// tolerance.
fn dispatch_hour(units: &[&UnitParams], demand: f64) -> HourSolution {
    let capacity: f64 = units.iter().map(|u| u.p_max).sum();
    let target = demand.min(capacity);

    let mut lambda = 0.0;
    if total_response(units, 0.0, true) < target {
        let mut points: Vec<f64> = units
            .iter()
            .flat_map(|u| {
                if u.a > 0.0 {
                    vec![u.b + 2.0 * u.a * u.p_min, u.b + 2.0 * u.a * u.p_max]
                } else {
                    vec![u.b]
                }
            })
            .filter(|&x| x > 0.0)
            .collect();
        points.sort_by(f64::total_cmp);
        points.dedup();

        let mut prev = 0.0;
        let mut found = false;
        for &bp in &points {
            if total_response(units, bp, true) >= target {
                // units whose response is strictly increasing just above `prev`
                let slope: f64 = units
                    .iter()
                    .filter(|u| {
                        u.a > 0.0
                            && u.b + 2.0 * u.a * u.p_min <= prev
                            && u.b + 2.0 * u.a * u.p_max > prev
                    })
                    .map(|u| 1.0 / (2.0 * u.a))
                    .sum();
                let at_prev = total_response(units, prev, true);
                let left_limit = total_response(units, bp, false);
                lambda = if left_limit >= target && slope > 0.0 {
                    (prev + (target - at_prev) / slope).clamp(prev, bp)
                } else {
                    bp
                };
                found = true;
                break;
            }
            prev = bp;
        }
        if !found {
            lambda = points.last().copied().unwrap_or(0.0);
        }
    }

    // Indifferent units start at p_min and absorb the residual in order.
    let mut p: Vec<f64> = units.iter().map(|u| response(u, lambda, false)).collect();
    let mut residual = target - p.iter().sum::<f64>();
    for (j, u) in units.iter().enumerate() {
        if residual <= 0.0 {
            break;
        }
        if u.a == 0.0 && u.b == lambda {
            let add = residual.min(u.p_max - p[j]);
            p[j] += add;
            residual -= add;
        }
    }
    HourSolution { lambda, p }
}

/// Slack-relaxed feasibility problem: per hour, minimize the demand
/// relaxation `s ≥ 0` subject to `Σ p + s ≥ D` and the gated boxes.
///
/// When capacity is short the optimal vertex runs every committed unit at
/// `p_max` with `l = 1` and `n = 1`; otherwise `s = 0` and all multipliers
/// are zero. Decommitted units carry `n = l` by stationarity.
#[allow(clippy::needless_range_loop)]
pub fn solve_feasibility(mg: &Microgrid, u_mg: &Schedule) -> Result<FeasibilityResult, DispatchError> {
    check_inputs(mg, u_mg)?;
    let horizon = mg.demand.len();
    let nu = mg.units.len();
    let mut p = Dispatch::zeros(nu, horizon);
    let mut duals = DualBundle::zeros(nu, horizon);
    let mut slack = vec![0.0; horizon];
    for t in 0..horizon {
        let demand = mg.demand[t];
        let capacity = committed_capacity(mg, u_mg, t);
        if capacity < demand - MW_TOL {
            slack[t] = demand - capacity;
            duals.l[t] = 1.0;
            for k in 0..nu {
                if u_mg.get(k, t) {
                    p.set(k, t, mg.units[k].p_max);
                }
                duals.n[k * horizon + t] = 1.0;
            }
        } else {
            // slack-free vertex: minimum outputs, then fill in unit order
            let mut supplied = 0.0;
            for k in (0..nu).filter(|&k| u_mg.get(k, t)) {
                p.set(k, t, mg.units[k].p_min);
                supplied += mg.units[k].p_min;
            }
            for k in (0..nu).filter(|&k| u_mg.get(k, t)) {
                let need = demand - supplied;
                if need <= 0.0 {
                    break;
                }
                let add = need.min(mg.units[k].p_max - mg.units[k].p_min);
                p.set(k, t, p.get(k, t) + add);
                supplied += add;
            }
        }
    }
    let objective = slack.iter().sum();
    Ok(FeasibilityResult { p, slack, duals, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::unit;
    use crate::model::InitialState;

    fn mg(units: Vec<UnitParams>, demand: Vec<f64>) -> Microgrid {
        Microgrid { id: 0, units, demand }
    }

    fn solved(out: DispatchOutcome) -> DispatchSolution {
        match out {
            DispatchOutcome::Optimal(s) => s,
            other => panic!("expected optimal, got {other:?}"),
        }
    }

    #[test]
    fn linear_unit_binding_demand() {
        let g = mg(vec![unit(0.0, 1.0, 0.0, 0.0, 0.0, 10.0)], vec![5.0]);
        let s = solved(solve_dispatch(&g, &Schedule::all_on(1, 1), 1e-9).unwrap());
        assert_eq!(s.p.get(0, 0), 5.0);
        assert_eq!(s.duals.l, vec![1.0]);
        assert_eq!(s.duals.m, vec![0.0]);
        assert_eq!(s.duals.n, vec![0.0]);
        assert_eq!(s.objective, 5.0);
    }

    #[test]
    fn two_quadratic_units_equal_marginal_cost() {
        // Oracle: scan p1 over [0, 6] in 1e-4 steps minimizing p1² + 2 (6 - p1)².
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=60_000 {
            let p1 = k as f64 * 1e-4;
            let f = p1 * p1 + 2.0 * (6.0 - p1) * (6.0 - p1);
            if f < best.0 {
                best = (f, p1);
            }
        }
        let (oracle_f, oracle_p1) = best;
        // the derivative of the reduced objective at the optimum is the price
        let oracle_l = 2.0 * oracle_p1;

        let g = mg(
            vec![unit(1.0, 0.0, 0.0, 0.0, 0.0, 10.0), unit(2.0, 0.0, 0.0, 0.0, 0.0, 10.0)],
            vec![6.0],
        );
        let s = solved(solve_dispatch(&g, &Schedule::all_on(2, 1), 1e-9).unwrap());
        assert!((s.p.get(0, 0) - oracle_p1).abs() < 1e-3);
        assert!((s.p.get(1, 0) - (6.0 - oracle_p1)).abs() < 1e-3);
        assert!((s.duals.l[0] - oracle_l).abs() < 1e-3);
        assert!((s.objective - oracle_f).abs() < 1e-6);
        assert!((s.p.get(0, 0) - 4.0).abs() < 1e-12 && (s.duals.l[0] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn short_capacity_is_infeasible() {
        let g = mg(vec![unit(0.0, 1.0, 0.0, 0.0, 0.0, 3.0)], vec![5.0]);
        let out = solve_dispatch(&g, &Schedule::all_on(1, 1), 1e-9).unwrap();
        assert_eq!(out, DispatchOutcome::Infeasible { short_hours: vec![0] });
    }

    #[test]
    fn over_generation_sits_at_minimum_output() {
        let g = mg(vec![unit(0.5, 2.0, 0.0, 0.0, 4.0, 10.0)], vec![1.0]);
        let s = solved(solve_dispatch(&g, &Schedule::all_on(1, 1), 1e-9).unwrap());
        assert_eq!(s.p.get(0, 0), 4.0);
        assert_eq!(s.duals.l[0], 0.0);
        assert_eq!(s.duals.m[0], 2.0 * 0.5 * 4.0 + 2.0);
    }

    #[test]
    fn degenerate_linear_units_fill_in_order() {
        let g = mg(
            vec![unit(0.0, 3.0, 0.0, 0.0, 1.0, 5.0), unit(0.0, 3.0, 0.0, 0.0, 1.0, 5.0)],
            vec![7.0],
        );
        let s = solved(solve_dispatch(&g, &Schedule::all_on(2, 1), 1e-9).unwrap());
        assert_eq!((s.p.get(0, 0), s.p.get(1, 0)), (5.0, 2.0));
        assert_eq!(s.duals.l[0], 3.0);
    }

    #[test]
    fn decommitted_units_get_stationary_duals() {
        let g = mg(
            vec![unit(0.0, 1.0, 0.0, 0.0, 0.0, 10.0), unit(0.0, 4.0, 0.0, 0.0, 0.0, 10.0), unit(0.0, 0.5, 0.0, 0.0, 0.0, 10.0)],
            vec![5.0],
        );
        let u = Schedule::from_rows(&[vec![true], vec![false], vec![false]]);
        let s = solved(solve_dispatch(&g, &u, 1e-9).unwrap());
        assert_eq!(s.p.get(1, 0), 0.0);
        // l = 1: the dearer unit has m = b - l, the cheaper one n = l - b
        assert_eq!((s.duals.m[1], s.duals.n[1]), (3.0, 0.0));
        assert_eq!((s.duals.m[2], s.duals.n[2]), (0.0, 0.5));
    }

    #[test]
    fn feasibility_with_short_capacity() {
        let g = mg(vec![unit(0.0, 1.0, 0.0, 0.0, 0.0, 3.0)], vec![5.0]);
        let r = solve_feasibility(&g, &Schedule::all_on(1, 1)).unwrap();
        assert_eq!(r.p.get(0, 0), 3.0);
        assert_eq!(r.slack, vec![2.0]);
        assert_eq!((r.duals.l[0], r.duals.n[0], r.duals.m[0]), (1.0, 1.0, 0.0));
        assert_eq!(r.objective, 2.0);
    }

    #[test]
    fn feasibility_without_shortfall() {
        let g = mg(
            vec![unit(0.0, 1.0, 0.0, 0.0, 0.0, 3.0), unit(0.0, 1.0, 0.0, 0.0, 0.0, 4.0)],
            vec![5.0],
        );
        let r = solve_feasibility(&g, &Schedule::all_on(2, 1)).unwrap();
        assert_eq!(r.slack, vec![0.0]);
        assert!((r.p.get(0, 0) + r.p.get(1, 0) - 5.0).abs() < 1e-12);
        assert!(r.p.get(0, 0) <= 3.0 && r.p.get(1, 0) <= 4.0);
        assert_eq!(r.duals.l, vec![0.0]);

        let g = mg(vec![unit(0.0, 1.0, 0.0, 0.0, 0.0, 3.0)], vec![0.0]);
        let r = solve_feasibility(&g, &Schedule::all_off(1, 1)).unwrap();
        assert_eq!((r.p.get(0, 0), r.slack[0], r.duals.n[0], r.duals.m[0], r.duals.l[0]), (0.0, 0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut bad = unit(0.0, 1.0, 0.0, 0.0, 0.0, 3.0);
        bad.a = -1.0;
        let g = mg(vec![bad], vec![1.0]);
        assert!(matches!(
            solve_dispatch(&g, &Schedule::all_on(1, 1), 1e-9),
            Err(DispatchError::NonConvexUnit { .. })
        ));
        let g = mg(vec![unit(0.0, 1.0, 0.0, 0.0, 0.0, 3.0)], vec![1.0]);
        assert!(matches!(
            solve_dispatch(&g, &Schedule::all_on(1, 1), 0.0),
            Err(DispatchError::InvalidTolerance(_))
        ));
        assert!(matches!(
            solve_dispatch(&g, &Schedule::all_on(2, 1), 1e-9),
            Err(DispatchError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn initial_state_does_not_affect_dispatch() {
        let mut u0 = unit(0.1, 1.0, 2.0, 3.0, 1.0, 10.0);
        u0.initial = InitialState { was_on: true, duration: 4 };
        let g = mg(vec![u0], vec![5.0, 0.0]);
        let s = solved(solve_dispatch(&g, &Schedule::all_on(1, 2), 1e-9).unwrap());
        assert_eq!(s.p.get(0, 1), 1.0);
    }
}
