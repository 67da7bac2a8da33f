//! Problem data for unit commitment over networked microgrids.
//!
//! An [`Instance`] is a list of microgrids sharing one planning horizon. Each
//! microgrid owns an ordered list of generating units and a local demand
//! profile. Units are addressed globally by concatenating the per-microgrid
//! unit lists in order, so unit `k` of microgrid `g` has global index
//! `instance.unit_offset(g) + k` for the whole run.
//!
//! Cost convention: the fuel term `a p² + b p + c` is charged only for hours
//! in which the unit is committed, and `d` is charged once per committed hour.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on MW quantities used by the constraint checks.
pub const MW_TOL: f64 = 1e-9;

/// State of a unit before the first hour of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialState {
    pub was_on: bool,
    /// Hours already spent in `was_on` at the start of the horizon.
    pub duration: usize,
}

impl InitialState {
    /// The unit is in `was_on` at hour -1 by definition, so a zero duration
    /// still counts as a run of one hour.
    pub fn effective_duration(&self) -> usize {
        self.duration.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitParams {
    /// Quadratic fuel coefficient, $/MW².
    pub a: f64,
    /// Linear fuel coefficient, $/MW.
    pub b: f64,
    /// Constant fuel charge per committed hour, $.
    pub c: f64,
    /// On charge per committed hour, $.
    pub d: f64,
    pub p_min: f64,
    pub p_max: f64,
    /// Minimum number of consecutive hours on.
    pub t_on: usize,
    /// Minimum number of consecutive hours off.
    pub t_off: usize,
    pub initial: InitialState,
}

impl UnitParams {
    pub fn commitment_rule(&self) -> CommitmentRule {
        CommitmentRule {
            t_on: self.t_on,
            t_off: self.t_off,
            initial: self.initial,
        }
    }

    fn fuel(&self, p: f64) -> f64 {
        self.a * p * p + self.b * p + self.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Microgrid {
    pub id: usize,
    pub units: Vec<UnitParams>,
    /// MW per hour; length equals the instance horizon.
    pub demand: Vec<f64>,
}

/// A field-level problem found by [`validate_instance`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationIssue {
    #[error("horizon must be at least one hour")]
    EmptyHorizon,
    #[error("instance has no microgrids")]
    NoMicrogrids,
    #[error("microgrid {mg} has no units")]
    EmptyMicrogrid { mg: usize },
    #[error("microgrid {mg}: demand has {found} entries, horizon is {expected}")]
    DemandLengthMismatch {
        mg: usize,
        expected: usize,
        found: usize,
    },
    #[error("microgrid {mg}: demand[{t}] = {value} is negative or not finite")]
    BadDemand { mg: usize, t: usize, value: f64 },
    #[error("microgrid {mg} unit {unit}: p_min {p_min} exceeds p_max {p_max}")]
    BoundsInverted {
        mg: usize,
        unit: usize,
        p_min: f64,
        p_max: f64,
    },
    #[error("microgrid {mg} unit {unit}: negative p_min {p_min}")]
    NegativeMinOutput { mg: usize, unit: usize, p_min: f64 },
    #[error("microgrid {mg} unit {unit}: quadratic cost a = {a} is negative")]
    NegativeCostCurvature { mg: usize, unit: usize, a: f64 },
    #[error("microgrid {mg} unit {unit}: field `{field}` is not finite")]
    NonFinite {
        mg: usize,
        unit: usize,
        field: &'static str,
    },
    #[error("microgrid {mg} unit {unit}: minimum on/off times must be at least 1")]
    BadMinTime { mg: usize, unit: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ValidationErrors(pub Vec<ValidationIssue>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation issue(s)", self.0.len())?;
        for issue in &self.0 {
            write!(f, "; {issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected_units}x{expected_horizon}, got {units}x{horizon}")]
    DimensionMismatch {
        expected_units: usize,
        expected_horizon: usize,
        units: usize,
        horizon: usize,
    },
}

/// A validated problem instance. Construct with [`validate_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    horizon: usize,
    microgrids: Vec<Microgrid>,
    offsets: Vec<usize>,
    num_units: usize,
}

/// Checks every invariant of the raw data and returns the instance, or all
/// violations found.
pub fn validate_instance(
    horizon: usize,
    microgrids: Vec<Microgrid>,
) -> Result<Instance, ValidationErrors> {
    let mut issues = Vec::new();
    if horizon == 0 {
        issues.push(ValidationIssue::EmptyHorizon);
    }
    if microgrids.is_empty() {
        issues.push(ValidationIssue::NoMicrogrids);
    }
    for (g, mg) in microgrids.iter().enumerate() {
        if mg.units.is_empty() {
            issues.push(ValidationIssue::EmptyMicrogrid { mg: g });
        }
        if mg.demand.len() != horizon {
            issues.push(ValidationIssue::DemandLengthMismatch {
                mg: g,
                expected: horizon,
                found: mg.demand.len(),
            });
        }
        for (t, &value) in mg.demand.iter().enumerate() {
            if !(value.is_finite() && value >= 0.0) {
                issues.push(ValidationIssue::BadDemand { mg: g, t, value });
            }
        }
        for (k, u) in mg.units.iter().enumerate() {
            let fields = [
                ("a", u.a),
                ("b", u.b),
                ("c", u.c),
                ("d", u.d),
                ("p_min", u.p_min),
                ("p_max", u.p_max),
            ];
            let mut finite = true;
            for (name, v) in fields {
                if !v.is_finite() {
                    finite = false;
                    issues.push(ValidationIssue::NonFinite {
                        mg: g,
                        unit: k,
                        field: name,
                    });
                }
            }
            if !finite {
                continue;
            }
            if u.p_min < 0.0 {
                issues.push(ValidationIssue::NegativeMinOutput {
                    mg: g,
                    unit: k,
                    p_min: u.p_min,
                });
            }
            if u.p_min > u.p_max {
                issues.push(ValidationIssue::BoundsInverted {
                    mg: g,
                    unit: k,
                    p_min: u.p_min,
                    p_max: u.p_max,
                });
            }
            if u.a < 0.0 {
                issues.push(ValidationIssue::NegativeCostCurvature {
                    mg: g,
                    unit: k,
                    a: u.a,
                });
            }
            if u.t_on == 0 || u.t_off == 0 {
                issues.push(ValidationIssue::BadMinTime { mg: g, unit: k });
            }
        }
    }
    if !issues.is_empty() {
        return Err(ValidationErrors(issues));
    }
    let mut offsets = Vec::with_capacity(microgrids.len());
    let mut num_units = 0;
    for mg in &microgrids {
        offsets.push(num_units);
        num_units += mg.units.len();
    }
    Ok(Instance {
        horizon,
        microgrids,
        offsets,
        num_units,
    })
}

impl Instance {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn microgrids(&self) -> &[Microgrid] {
        &self.microgrids
    }

    pub fn num_units(&self) -> usize {
        self.num_units
    }

    /// Global index of the first unit of microgrid `mg`.
    pub fn unit_offset(&self, mg: usize) -> usize {
        self.offsets[mg]
    }

    /// Units in global order as `(global index, microgrid index, params)`.
    pub fn units(&self) -> impl Iterator<Item = (usize, usize, &UnitParams)> + '_ {
        self.microgrids
            .iter()
            .enumerate()
            .flat_map(move |(g, mg)| {
                let off = self.offsets[g];
                mg.units.iter().enumerate().map(move |(k, u)| (off + k, g, u))
            })
    }

    pub fn unit(&self, global: usize) -> &UnitParams {
        let g = self.offsets.partition_point(|&o| o <= global) - 1;
        &self.microgrids[g].units[global - self.offsets[g]]
    }

    /// The cost-free view of the instance: everything the coordinating side
    /// needs to enforce binary constraints.
    pub fn commitment_rules(&self) -> CommitmentRules {
        CommitmentRules {
            horizon: self.horizon,
            rules: self.units().map(|(_, _, u)| u.commitment_rule()).collect(),
        }
    }

    fn check_dims(&self, units: usize, horizon: usize) -> Result<(), ModelError> {
        if units != self.num_units || horizon != self.horizon {
            return Err(ModelError::DimensionMismatch {
                expected_units: self.num_units,
                expected_horizon: self.horizon,
                units,
                horizon,
            });
        }
        Ok(())
    }
}

/// Binary on/off matrix indexed by (unit, hour), stored row-major.
///
/// The derived ordering compares the row-major bit string lexicographically
/// with `false < true`, which is the tie-break order used by the masters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Schedule {
    units: usize,
    horizon: usize,
    on: Vec<bool>,
}

impl Schedule {
    pub fn all_off(units: usize, horizon: usize) -> Self {
        Self {
            units,
            horizon,
            on: vec![false; units * horizon],
        }
    }

    pub fn all_on(units: usize, horizon: usize) -> Self {
        Self {
            units,
            horizon,
            on: vec![true; units * horizon],
        }
    }

    /// Builds from a row-major bit vector of length `units * horizon`.
    pub fn from_bits(units: usize, horizon: usize, on: Vec<bool>) -> Self {
        assert_eq!(on.len(), units * horizon, "bit vector length");
        Self { units, horizon, on }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let horizon = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == horizon), "ragged rows");
        Self {
            units: rows.len(),
            horizon,
            on: rows.concat(),
        }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, unit: usize, t: usize) -> bool {
        self.on[unit * self.horizon + t]
    }

    pub fn set(&mut self, unit: usize, t: usize, value: bool) {
        self.on[unit * self.horizon + t] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.on
    }

    pub fn row(&self, unit: usize) -> &[bool] {
        &self.on[unit * self.horizon..(unit + 1) * self.horizon]
    }

    /// The rows `first..first + count` as a schedule of their own.
    pub fn slice_units(&self, first: usize, count: usize) -> Schedule {
        Schedule {
            units: count,
            horizon: self.horizon,
            on: self.on[first * self.horizon..(first + count) * self.horizon].to_vec(),
        }
    }
}

/// Real power matrix in MW indexed by (unit, hour), stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispatch {
    units: usize,
    horizon: usize,
    p: Vec<f64>,
}

impl Dispatch {
    pub fn zeros(units: usize, horizon: usize) -> Self {
        Self {
            units,
            horizon,
            p: vec![0.0; units * horizon],
        }
    }

    pub fn from_values(units: usize, horizon: usize, p: Vec<f64>) -> Self {
        assert_eq!(p.len(), units * horizon, "value vector length");
        Self { units, horizon, p }
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn get(&self, unit: usize, t: usize) -> f64 {
        self.p[unit * self.horizon + t]
    }

    pub fn set(&mut self, unit: usize, t: usize, value: f64) {
        self.p[unit * self.horizon + t] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.p
    }

    /// Copies `block` into rows starting at `first`.
    pub fn write_units(&mut self, first: usize, block: &Dispatch) {
        assert_eq!(block.horizon, self.horizon);
        let start = first * self.horizon;
        self.p[start..start + block.p.len()].copy_from_slice(&block.p);
    }
}

/// Operation charge of a full schedule and dispatch.
pub fn total_cost(inst: &Instance, u: &Schedule, p: &Dispatch) -> Result<f64, ModelError> {
    inst.check_dims(u.units(), u.horizon())?;
    inst.check_dims(p.units(), p.horizon())?;
    let mut total = 0.0;
    for (i, _, unit) in inst.units() {
        for t in 0..inst.horizon() {
            if u.get(i, t) {
                total += unit.fuel(p.get(i, t)) + unit.d;
            }
        }
    }
    Ok(total)
}

/// Minimum on/off times and pre-horizon history of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentRule {
    pub t_on: usize,
    pub t_off: usize,
    pub initial: InitialState,
}

impl CommitmentRule {
    /// State of the unit at hour `j < 0`. The history is one uniform run of
    /// `effective_duration` hours in `was_on`, preceded by the opposite state.
    pub fn history(&self, j: isize) -> bool {
        debug_assert!(j < 0);
        if -j <= self.initial.effective_duration() as isize {
            self.initial.was_on
        } else {
            !self.initial.was_on
        }
    }

    /// Hours at which a run that is too short ends, for one unit's row.
    pub fn violations(&self, row: &[bool]) -> Vec<(usize, UpDownKind)> {
        let mut out = Vec::new();
        let mut prev = self.initial.was_on;
        let mut run = self.initial.effective_duration();
        for (t, &on) in row.iter().enumerate() {
            if on == prev {
                run += 1;
                continue;
            }
            if prev && run < self.t_on {
                out.push((t, UpDownKind::MinOn));
            } else if !prev && run < self.t_off {
                out.push((t, UpDownKind::MinOff));
            }
            prev = on;
            run = 1;
        }
        out
    }

    pub fn row_ok(&self, row: &[bool]) -> bool {
        self.violations(row).is_empty()
    }
}

/// Binary-side data of an instance, with no cost or demand information.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitmentRules {
    pub horizon: usize,
    pub rules: Vec<CommitmentRule>,
}

impl CommitmentRules {
    pub fn num_units(&self) -> usize {
        self.rules.len()
    }

    pub fn violations(&self, u: &Schedule) -> Vec<UpDownViolation> {
        self.rules
            .iter()
            .enumerate()
            .flat_map(|(i, rule)| {
                rule.violations(u.row(i))
                    .into_iter()
                    .map(move |(t, kind)| UpDownViolation { unit: i, t, kind })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UpDownKind {
    /// The unit shut down before its minimum on time elapsed.
    MinOn,
    /// The unit started before its minimum off time elapsed.
    MinOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UpDownViolation {
    pub unit: usize,
    /// Hour at which the offending switch happens.
    pub t: usize,
    pub kind: UpDownKind,
}

/// Minimum up/down time violations, counting pre-horizon history. A run cut
/// short by the end of the horizon is not a violation.
pub fn check_min_updown(inst: &Instance, u: &Schedule) -> Result<Vec<UpDownViolation>, ModelError> {
    inst.check_dims(u.units(), u.horizon())?;
    Ok(inst.commitment_rules().violations(u))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DispatchViolation {
    DemandShortfall { mg: usize, t: usize, amount: f64 },
    BelowMin { unit: usize, t: usize, amount: f64 },
    AboveMax { unit: usize, t: usize, amount: f64 },
}

/// Demand shortfalls per microgrid and gated box violations per unit, each
/// with its magnitude.
pub fn check_dispatch_constraints(
    inst: &Instance,
    u: &Schedule,
    p: &Dispatch,
) -> Result<Vec<DispatchViolation>, ModelError> {
    inst.check_dims(u.units(), u.horizon())?;
    inst.check_dims(p.units(), p.horizon())?;
    let mut out = Vec::new();
    for (g, mg) in inst.microgrids().iter().enumerate() {
        let off = inst.unit_offset(g);
        for t in 0..inst.horizon() {
            let supplied: f64 = (0..mg.units.len()).map(|k| p.get(off + k, t)).sum();
            let short = mg.demand[t] - supplied;
            if short > MW_TOL {
                out.push(DispatchViolation::DemandShortfall { mg: g, t, amount: short });
            }
        }
    }
    for (i, _, unit) in inst.units() {
        for t in 0..inst.horizon() {
            let gate = if u.get(i, t) { 1.0 } else { 0.0 };
            let v = p.get(i, t);
            let lo = unit.p_min * gate - v;
            let hi = v - unit.p_max * gate;
            if lo > MW_TOL {
                out.push(DispatchViolation::BelowMin { unit: i, t, amount: lo });
            }
            if hi > MW_TOL {
                out.push(DispatchViolation::AboveMax { unit: i, t, amount: hi });
            }
        }
    }
    Ok(out)
}
