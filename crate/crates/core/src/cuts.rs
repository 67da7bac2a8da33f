//! Benders optimality and feasibility cuts.
//!
//! Every cut is affine in the commitment matrix: a constant plus one
//! coefficient per (global unit, hour). Cuts are assembled from per-microgrid
//! partial cuts, each computed by the microgrid from its own solution and
//! multipliers. Partials carry no fuel parameters, so summing them is all the
//! coordinating side ever does with microgrid data.
//!
//! With gated fuel cost the subproblem value is
//! `Z(u) = Σ (c + d) u + V(u)`, where `V` is the dispatch optimum. The
//! Lagrangian bound on `V` then gives
//!
//! ```text
//! Z(u) ≥ Σ [a p² + (b - m + n) p] + Σ_t l_t (D_t - Σ p) + Σ (c + d + m p_min - n p_max) u
//! ```
//!
//! which is tight at the generating schedule.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dispatch::{DispatchOutcome, DispatchSolution, FeasibilityResult};
use crate::model::{Instance, Microgrid, Schedule};

/// A schedule is admissible for a feasibility cut when its value is at most this.
pub const CUT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CutError {
    #[error("microgrid {mg} is infeasible; optimality cuts need every microgrid optimal")]
    MixedStatus { mg: usize },
    #[error("no relaxation is positive; nothing to cut off")]
    NoViolation,
    #[error("schedule is {units}x{horizon}, cut covers {expected_units}x{expected_horizon}")]
    DimensionMismatch {
        units: usize,
        horizon: usize,
        expected_units: usize,
        expected_horizon: usize,
    },
    #[error("cut pool: {0}")]
    Pool(String),
}

/// Which hours a feasibility cut covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CutScope {
    /// One cut per hour (multi-cut).
    Hour(usize),
    /// A single cut summed over the horizon.
    Horizon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeasibilityMode {
    Single,
    Multi,
}

/// Coefficients over (unit, hour) stored densely, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutCoeffs {
    pub units: usize,
    pub horizon: usize,
    pub values: Vec<f64>,
}

impl CutCoeffs {
    pub fn zeros(units: usize, horizon: usize) -> Self {
        Self {
            units,
            horizon,
            values: vec![0.0; units * horizon],
        }
    }

    pub fn get(&self, unit: usize, t: usize) -> f64 {
        self.values[unit * self.horizon + t]
    }

    fn add(&mut self, unit: usize, t: usize, v: f64) {
        self.values[unit * self.horizon + t] += v;
    }

    fn dot(&self, u: &Schedule) -> Result<f64, CutError> {
        if u.units() != self.units || u.horizon() != self.horizon {
            return Err(CutError::DimensionMismatch {
                units: u.units(),
                horizon: u.horizon(),
                expected_units: self.units,
                expected_horizon: self.horizon,
            });
        }
        Ok(self
            .values
            .iter()
            .zip(u.bits())
            .filter(|(_, &on)| on)
            .map(|(f, _)| f)
            .sum())
    }

    fn nonzero(&self) -> Vec<(usize, usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, &v)| (k / self.horizon, k % self.horizon, v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityCut {
    pub iter: usize,
    pub coeffs: CutCoeffs,
    /// `Σ [(b - m + n) p + a p²]` over committed hours.
    pub value_const: f64,
    /// `Σ_t l_t (D_t - Σ p)`.
    pub demand_const: f64,
}

impl OptimalityCut {
    pub fn constant(&self) -> f64 {
        self.value_const + self.demand_const
    }

    /// Lower bound on the operation charge at `u`.
    pub fn eval(&self, u: &Schedule) -> Result<f64, CutError> {
        Ok(self.constant() + self.coeffs.dot(u)?)
    }

    pub fn record(&self) -> CutRecord {
        CutRecord {
            kind: CutKind::Opt,
            iter: self.iter,
            t: None,
            constants: vec![self.value_const, self.demand_const],
            coeffs: self.coeffs.nonzero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityCut {
    pub iter: usize,
    pub scope: CutScope,
    pub coeffs: CutCoeffs,
    pub constant: f64,
}

impl FeasibilityCut {
    /// `u` is admissible iff the value is at most [`CUT_TOL`].
    pub fn eval(&self, u: &Schedule) -> Result<f64, CutError> {
        Ok(self.constant + self.coeffs.dot(u)?)
    }

    pub fn admits(&self, u: &Schedule) -> Result<bool, CutError> {
        Ok(self.eval(u)? <= CUT_TOL)
    }

    pub fn record(&self) -> CutRecord {
        CutRecord {
            kind: CutKind::Feas,
            iter: self.iter,
            t: match self.scope {
                CutScope::Hour(t) => Some(t),
                CutScope::Horizon => None,
            },
            constants: vec![self.constant],
            coeffs: self.coeffs.nonzero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutKind {
    Opt,
    Feas,
}

/// Wire form of a cut: constants plus nonzero `(unit, hour, coefficient)`
/// triples. Optimality cuts carry `[value, demand]` constants, feasibility
/// cuts `[c]`; a feasibility record without `t` spans the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub kind: CutKind,
    pub iter: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t: Option<usize>,
    pub constants: Vec<f64>,
    pub coeffs: Vec<(usize, usize, f64)>,
}

/// One microgrid's contribution to an optimality cut.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialOptimalityCut {
    pub value_const: f64,
    pub demand_const: f64,
    /// Nonzero `(global unit, hour, coefficient)` entries.
    pub coeffs: Vec<(usize, usize, f64)>,
}

/// One microgrid's contribution to the feasibility cut of one hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialFeasibilityCut {
    pub t: usize,
    pub constant: f64,
    pub slack: f64,
    pub coeffs: Vec<(usize, usize, f64)>,
}

/// Contribution of microgrid `mg` (first global unit `offset`) to the
/// optimality cut at its dispatch solution.
pub fn partial_optimality_cut(
    mg: &Microgrid,
    offset: usize,
    sol: &DispatchSolution,
) -> PartialOptimalityCut {
    let horizon = mg.demand.len();
    let mut value_const = 0.0;
    let mut demand_const = 0.0;
    let mut coeffs = Vec::new();
    for t in 0..horizon {
        let mut supplied = 0.0;
        for (k, unit) in mg.units.iter().enumerate() {
            let p = sol.p.get(k, t);
            let m = sol.duals.m[k * horizon + t];
            let n = sol.duals.n[k * horizon + t];
            supplied += p;
            value_const += (unit.b - m + n) * p + unit.a * p * p;
            let f = unit.c + unit.d + m * unit.p_min - n * unit.p_max;
            if f != 0.0 {
                coeffs.push((offset + k, t, f));
            }
        }
        demand_const += sol.duals.l[t] * (mg.demand[t] - supplied);
    }
    PartialOptimalityCut {
        value_const,
        demand_const,
        coeffs,
    }
}

/// Contributions of microgrid `mg` to feasibility cuts, one per hour with
/// positive relaxation.
pub fn partial_feasibility_cuts(
    mg: &Microgrid,
    offset: usize,
    res: &FeasibilityResult,
) -> Vec<PartialFeasibilityCut> {
    let horizon = mg.demand.len();
    let mut out = Vec::new();
    for t in 0..horizon {
        if res.slack[t] <= 0.0 {
            continue;
        }
        let mut constant = 0.0;
        let mut supplied = 0.0;
        let mut coeffs = Vec::new();
        for (k, unit) in mg.units.iter().enumerate() {
            let p = res.p.get(k, t);
            let m = res.duals.m[k * horizon + t];
            let n = res.duals.n[k * horizon + t];
            supplied += p;
            constant += (n - m) * p;
            let f = m * unit.p_min - n * unit.p_max;
            if f != 0.0 {
                coeffs.push((offset + k, t, f));
            }
        }
        constant += res.duals.l[t] * (mg.demand[t] - supplied);
        out.push(PartialFeasibilityCut {
            t,
            constant,
            slack: res.slack[t],
            coeffs,
        });
    }
    out
}

/// Sums microgrid partials into one optimality cut.
pub fn aggregate_optimality(
    iter: usize,
    units: usize,
    horizon: usize,
    partials: &[PartialOptimalityCut],
) -> OptimalityCut {
    let mut coeffs = CutCoeffs::zeros(units, horizon);
    let mut value_const = 0.0;
    let mut demand_const = 0.0;
    for part in partials {
        value_const += part.value_const;
        demand_const += part.demand_const;
        for &(i, t, f) in &part.coeffs {
            coeffs.add(i, t, f);
        }
    }
    OptimalityCut {
        iter,
        coeffs,
        value_const,
        demand_const,
    }
}

/// Sums microgrid partials into feasibility cuts: one per hour with positive
/// relaxation in multi mode, or their sum in single mode.
pub fn aggregate_feasibility(
    iter: usize,
    units: usize,
    horizon: usize,
    partials: &[PartialFeasibilityCut],
    mode: FeasibilityMode,
) -> Result<Vec<FeasibilityCut>, CutError> {
    if !partials.iter().any(|p| p.slack > 0.0) {
        return Err(CutError::NoViolation);
    }
    let mut by_hour: Vec<Option<FeasibilityCut>> = vec![None; horizon];
    for part in partials {
        let cut = by_hour[part.t].get_or_insert_with(|| FeasibilityCut {
            iter,
            scope: CutScope::Hour(part.t),
            coeffs: CutCoeffs::zeros(units, horizon),
            constant: 0.0,
        });
        cut.constant += part.constant;
        for &(i, t, f) in &part.coeffs {
            cut.coeffs.add(i, t, f);
        }
    }
    let hourly: Vec<FeasibilityCut> = by_hour.into_iter().flatten().collect();
    Ok(match mode {
        FeasibilityMode::Multi => hourly,
        FeasibilityMode::Single => {
            let mut total = FeasibilityCut {
                iter,
                scope: CutScope::Horizon,
                coeffs: CutCoeffs::zeros(units, horizon),
                constant: 0.0,
            };
            for cut in hourly {
                total.constant += cut.constant;
                for (acc, v) in total.coeffs.values.iter_mut().zip(&cut.coeffs.values) {
                    *acc += v;
                }
            }
            vec![total]
        }
    })
}

/// Optimality cut from the dispatch outcomes of every microgrid (in
/// microgrid order).
pub fn build_optimality_cut(
    results: &[DispatchOutcome],
    inst: &Instance,
    iter: usize,
) -> Result<OptimalityCut, CutError> {
    let mut partials = Vec::with_capacity(results.len());
    for (g, (res, mg)) in results.iter().zip(inst.microgrids()).enumerate() {
        let sol = res.solution().ok_or(CutError::MixedStatus { mg: g })?;
        partials.push(partial_optimality_cut(mg, inst.unit_offset(g), sol));
    }
    Ok(aggregate_optimality(iter, inst.num_units(), inst.horizon(), &partials))
}

/// Feasibility cuts from the relaxed solves of the infeasible microgrids,
/// given as `(microgrid index, result)`.
pub fn build_feasibility_cuts(
    results: &[(usize, FeasibilityResult)],
    inst: &Instance,
    iter: usize,
    mode: FeasibilityMode,
) -> Result<Vec<FeasibilityCut>, CutError> {
    let partials: Vec<PartialFeasibilityCut> = results
        .iter()
        .flat_map(|(g, res)| {
            partial_feasibility_cuts(&inst.microgrids()[*g], inst.unit_offset(*g), res)
        })
        .collect();
    aggregate_feasibility(iter, inst.num_units(), inst.horizon(), &partials, mode)
}

/// Every cut generated so far. Cuts are never dropped.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutPool {
    optimality: Vec<OptimalityCut>,
    feasibility: Vec<FeasibilityCut>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn optimality(&self) -> &[OptimalityCut] {
        &self.optimality
    }

    pub fn feasibility(&self) -> &[FeasibilityCut] {
        &self.feasibility
    }

    pub fn push_optimality(&mut self, cut: OptimalityCut) -> Result<(), CutError> {
        if let Some(last) = self.optimality.last() {
            if cut.iter < last.iter {
                return Err(CutError::Pool(format!(
                    "optimality cut iteration {} after {}",
                    cut.iter, last.iter
                )));
            }
        }
        self.optimality.push(cut);
        Ok(())
    }

    pub fn push_feasibility(&mut self, cut: FeasibilityCut) -> Result<(), CutError> {
        if let Some(last) = self.feasibility.last() {
            if cut.iter < last.iter {
                return Err(CutError::Pool(format!(
                    "feasibility cut iteration {} after {}",
                    cut.iter, last.iter
                )));
            }
        }
        if self
            .feasibility
            .iter()
            .any(|c| c.iter == cut.iter && c.scope == cut.scope)
        {
            return Err(CutError::Pool(format!(
                "duplicate feasibility cut ({}, {:?})",
                cut.iter, cut.scope
            )));
        }
        self.feasibility.push(cut);
        Ok(())
    }

    /// `max_e` of the optimality cuts at `u`, or `None` with no optimality cuts.
    pub fn max_optimality(&self, u: &Schedule) -> Result<Option<f64>, CutError> {
        let mut best: Option<f64> = None;
        for cut in &self.optimality {
            let v = cut.eval(u)?;
            best = Some(best.map_or(v, |b| b.max(v)));
        }
        Ok(best)
    }

    pub fn admits(&self, u: &Schedule) -> Result<bool, CutError> {
        for cut in &self.feasibility {
            if !cut.admits(u)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
