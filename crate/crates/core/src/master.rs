//! Mixed-binary master problem solved over the commitment matrix.
//!
//! `min Z s.t. Z ≥ cut_e(u)` collapses to `min_u max_e cut_e(u)` over the
//! schedules that satisfy minimum up/down times and every feasibility cut.
//! The exact strategy enumerates per-unit rows that already satisfy the
//! up/down rules and walks their product in lexicographic order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cuts::{CutPool, CUT_TOL};
use crate::model::{CommitmentRules, Schedule};

/// Largest `units * horizon` the exhaustive strategy accepts.
pub const MAX_EXHAUSTIVE_BITS: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasterStrategy {
    Exhaustive,
    LocalSearch { restarts: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasterStatus {
    /// Exhaustive search: the schedule is a global minimizer.
    Proven,
    /// Local search: best feasible schedule found, optimality not certified.
    BestFound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MasterSolution {
    pub u: Schedule,
    /// `max_e cut_e(u)`, or `-inf` with no optimality cuts.
    pub z: f64,
    pub status: MasterStatus,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MasterError {
    #[error("{bits} binary variables exceed the exhaustive limit of {MAX_EXHAUSTIVE_BITS}")]
    TooLargeForExhaustive { bits: usize },
    #[error("no schedule satisfies the up/down rules and feasibility cuts")]
    Infeasible,
    #[error("local search found no feasible schedule; best violating candidate kept")]
    LocalSearchStalled { best: Schedule },
}

pub fn solve_master(
    pool: &CutPool,
    rules: &CommitmentRules,
    strategy: MasterStrategy,
) -> Result<MasterSolution, MasterError> {
    match strategy {
        MasterStrategy::Exhaustive => exhaustive(pool, rules),
        MasterStrategy::LocalSearch { restarts, seed } => local_search(pool, rules, restarts, seed),
    }
}

fn row_bits(mask: u64, horizon: usize) -> Vec<bool> {
    (0..horizon).map(|t| mask >> (horizon - 1 - t) & 1 == 1).collect()
}

/// Values within this relative distance are treated as ties.
fn tie_tol(z: f64) -> f64 {
    1e-9 * (1.0 + z.abs())
}

fn exhaustive(pool: &CutPool, rules: &CommitmentRules) -> Result<MasterSolution, MasterError> {
    let units = rules.num_units();
    let horizon = rules.horizon;
    if units * horizon > MAX_EXHAUSTIVE_BITS {
        return Err(MasterError::TooLargeForExhaustive {
            bits: units * horizon,
        });
    }
    // Feasible rows per unit, in lexicographic order (hour 0 most significant).
    let rows: Vec<Vec<Vec<bool>>> = rules
        .rules
        .iter()
        .map(|rule| {
            (0..1u64 << horizon)
                .map(|mask| row_bits(mask, horizon))
                .filter(|row| rule.row_ok(row))
                .collect()
        })
        .collect();
    if rows.iter().any(Vec::is_empty) {
        return Err(MasterError::Infeasible);
    }

    // Per-cut, per-unit, per-row partial sums.
    let contrib = |coeffs: &crate::cuts::CutCoeffs| -> Vec<Vec<f64>> {
        rows.iter()
            .enumerate()
            .map(|(i, unit_rows)| {
                unit_rows
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(_, &on)| on)
                            .map(|(t, _)| coeffs.get(i, t))
                            .sum()
                    })
                    .collect()
            })
            .collect()
    };
    let opt: Vec<(f64, Vec<Vec<f64>>)> = pool
        .optimality()
        .iter()
        .map(|c| (c.constant(), contrib(&c.coeffs)))
        .collect();
    let fea: Vec<(f64, Vec<Vec<f64>>)> = pool
        .feasibility()
        .iter()
        .map(|c| (c.constant, contrib(&c.coeffs)))
        .collect();

    let mut choice = vec![0usize; units];
    let mut best: Option<(f64, Vec<usize>)> = None;
    'outer: loop {
        let admissible = fea.iter().all(|(c, parts)| {
            let v: f64 = c + choice.iter().enumerate().map(|(i, &r)| parts[i][r]).sum::<f64>();
            v <= CUT_TOL
        });
        if admissible {
            let z = opt
                .iter()
                .map(|(c, parts)| {
                    c + choice.iter().enumerate().map(|(i, &r)| parts[i][r]).sum::<f64>()
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let better = match &best {
                None => true,
                Some((bz, _)) => z < bz - tie_tol(*bz),
            };
            if better {
                best = Some((z, choice.clone()));
            }
        }
        // odometer, last unit fastest
        let mut i = units;
        loop {
            if i == 0 {
                break 'outer;
            }
            i -= 1;
            choice[i] += 1;
            if choice[i] < rows[i].len() {
                break;
            }
            choice[i] = 0;
        }
    }
    let (z, choice) = best.ok_or(MasterError::Infeasible)?;
    let bits: Vec<bool> = choice
        .iter()
        .enumerate()
        .flat_map(|(i, &r)| rows[i][r].iter().copied())
        .collect();
    Ok(MasterSolution {
        u: Schedule::from_bits(units, horizon, bits),
        z,
        status: MasterStatus::Proven,
    })
}

/// Cut values and up/down violations of the current schedule, updated
/// incrementally as bits flip.
struct Search<'a> {
    pool: &'a CutPool,
    rules: &'a CommitmentRules,
    u: Schedule,
    opt: Vec<f64>,
    fea: Vec<f64>,
    row_viol: Vec<usize>,
    penalty: f64,
}

impl<'a> Search<'a> {
    fn new(pool: &'a CutPool, rules: &'a CommitmentRules, u: Schedule, penalty: f64) -> Self {
        let opt = pool
            .optimality()
            .iter()
            .map(|c| c.eval(&u).expect("dimensions fixed by rules"))
            .collect();
        let fea = pool
            .feasibility()
            .iter()
            .map(|c| c.eval(&u).expect("dimensions fixed by rules"))
            .collect();
        let row_viol = rules
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| r.violations(u.row(i)).len())
            .collect();
        Self {
            pool,
            rules,
            u,
            opt,
            fea,
            row_viol,
            penalty,
        }
    }

    fn objective(&self, z: f64, violation: f64) -> f64 {
        let z = if z.is_finite() { z } else { 0.0 };
        z + self.penalty * violation
    }

    /// `(z, violation)` after flipping `(i, t)` and, when given, `(i, t2)`.
    fn evaluate(&self, i: usize, t: usize, t2: Option<usize>) -> (f64, f64) {
        let flips = [Some(t), t2];
        let delta = |coeffs: &crate::cuts::CutCoeffs| -> f64 {
            flips
                .iter()
                .flatten()
                .map(|&h| {
                    let f = coeffs.get(i, h);
                    if self.u.get(i, h) {
                        -f
                    } else {
                        f
                    }
                })
                .sum()
        };
        let z = self
            .pool
            .optimality()
            .iter()
            .zip(&self.opt)
            .map(|(c, v)| v + delta(&c.coeffs))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut violation: f64 = self
            .pool
            .feasibility()
            .iter()
            .zip(&self.fea)
            .map(|(c, v)| v + delta(&c.coeffs))
            .filter(|&v| v > CUT_TOL)
            .sum();
        let mut row = self.u.row(i).to_vec();
        for &h in flips.iter().flatten() {
            row[h] = !row[h];
        }
        let others: usize = self.row_viol.iter().sum::<usize>() - self.row_viol[i];
        violation += (others + self.rules.rules[i].violations(&row).len()) as f64;
        (z, violation)
    }

    fn current(&self) -> (f64, f64) {
        let z = self.opt.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let fea: f64 = self.fea.iter().filter(|&&v| v > CUT_TOL).sum();
        (z, fea + self.row_viol.iter().sum::<usize>() as f64)
    }

    fn apply(&mut self, i: usize, t: usize, t2: Option<usize>) {
        for h in [Some(t), t2].into_iter().flatten() {
            let on = self.u.get(i, h);
            for (c, v) in self.pool.optimality().iter().zip(&mut self.opt) {
                *v += if on { -c.coeffs.get(i, h) } else { c.coeffs.get(i, h) };
            }
            for (c, v) in self.pool.feasibility().iter().zip(&mut self.fea) {
                *v += if on { -c.coeffs.get(i, h) } else { c.coeffs.get(i, h) };
            }
            self.u.set(i, h, !on);
        }
        self.row_viol[i] = self.rules.rules[i].violations(self.u.row(i)).len();
    }
}

/// Multi-restart steepest descent on `max_e cut_e(u) + P · violation`, with
/// `P = 1e6 · max |cut constant|`. Moves flip one bit or two bits of the same
/// unit, so a unit can shift a run by an hour without passing through an
/// up/down violation.
fn local_search(
    pool: &CutPool,
    rules: &CommitmentRules,
    restarts: usize,
    seed: u64,
) -> Result<MasterSolution, MasterError> {
    let units = rules.num_units();
    let horizon = rules.horizon;
    let nbits = units * horizon;
    let scale = pool
        .optimality()
        .iter()
        .map(|c| c.constant().abs())
        .chain(pool.feasibility().iter().map(|c| c.constant.abs()))
        .fold(1.0, f64::max);
    let penalty = 1e6 * scale;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Schedule, f64, f64)> = None;
    for r in 0..restarts.max(1) {
        let start = if r == 0 {
            Schedule::all_off(units, horizon)
        } else {
            Schedule::from_bits(units, horizon, (0..nbits).map(|_| rng.gen_bool(0.5)).collect())
        };
        let mut s = Search::new(pool, rules, start, penalty);
        loop {
            let (z, v) = s.current();
            let mut target = s.objective(z, v);
            let mut step = None;
            for i in 0..units {
                for t in 0..horizon {
                    for t2 in std::iter::once(None).chain((t + 1..horizon).map(Some)) {
                        let (z, v) = s.evaluate(i, t, t2);
                        let o = s.objective(z, v);
                        if o < target - tie_tol(target) {
                            target = o;
                            step = Some((i, t, t2));
                        }
                    }
                }
            }
            match step {
                Some((i, t, t2)) => s.apply(i, t, t2),
                None => break,
            }
        }
        let (z, v) = s.current();
        let o = s.objective(z, v);
        let replace = match &best {
            None => true,
            Some((bu, bz, bv)) => {
                let bo = s.objective(*bz, *bv);
                o < bo - tie_tol(bo) || (o <= bo + tie_tol(bo) && s.u < *bu)
            }
        };
        if replace {
            best = Some((s.u, z, v));
        }
    }
    let (u, _, violation) = best.expect("at least one restart");
    if violation > 0.0 {
        return Err(MasterError::LocalSearchStalled { best: u });
    }
    // Report the envelope exactly rather than the incrementally updated value.
    let z = pool
        .max_optimality(&u)
        .expect("dimensions fixed by rules")
        .unwrap_or(f64::NEG_INFINITY);
    Ok(MasterSolution {
        u,
        z,
        status: MasterStatus::BestFound,
    })
}
