use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::matrix::QuboMatrix;
use super::registry::{BitMeaning, BitRegistry};
use crate::cuts::{CutPool, CutScope, FeasibilityCut, CUT_TOL};
use crate::model::{CommitmentRule, CommitmentRules, Schedule};

/// Quantization width used when a cut's support is too wide to verify.
pub const DEFAULT_QUANT_BITS: u32 = 8;
/// Widest cut support whose quantization is checked by enumeration.
pub const MAX_VERIFIED_SUPPORT: usize = 16;
const MAX_QUANT_BITS: u32 = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuboError {
    #[error("instance has no unit bits")]
    EmptyInstance,
    #[error("negative slack range {0}")]
    NegativeRange(i64),
    #[error("feasibility cut from iteration {iter} ({scope:?}) admits no schedule")]
    UnsatisfiableCut { iter: usize, scope: CutScope },
    #[error("upper bound must be finite when optimality cuts are present, got {0}")]
    NonFiniteUpperBound(f64),
    #[error("penalty parameter {name} must be positive and finite, got {value}")]
    BadPenalty { name: &'static str, value: f64 },
    #[error("cut pool is {units}x{horizon}, rules are {expected_units}x{expected_horizon}")]
    DimensionMismatch {
        units: usize,
        horizon: usize,
        expected_units: usize,
        expected_horizon: usize,
    },
    #[error("assignment has {got} bits, registry has {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("no optimality cuts in the pool")]
    EmptyPool,
}

/// Penalty weights and objective shaping. `None` picks the per-build default.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub xi_on: Option<f64>,
    pub xi_off: Option<f64>,
    pub xi_fea: Option<f64>,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    /// Quantization width for feasibility cuts too wide to verify.
    pub quant_bits: Option<u32>,
}

/// Which constraint a penalty group enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupLabel {
    MinOn { unit: usize, t: usize },
    MinOff { unit: usize, t: usize },
    Product { unit: usize, t: usize },
    Feasibility { iter: usize, scope: CutScope },
}

/// Integer form of a penalty before weighting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PenaltyForm {
    /// `(constant + Σ coef·x)²`.
    Square { constant: i64, terms: Vec<(usize, i64)> },
    /// Rosenberg gadget `xy − 2xz − 2yz + 3z`, zero iff `z = xy`.
    Product { x: usize, y: usize, z: usize },
}

impl PenaltyForm {
    pub fn residual(&self, x: &[bool]) -> i64 {
        match self {
            PenaltyForm::Square { constant, terms } => {
                let v = constant + terms.iter().filter(|(k, _)| x[*k]).map(|(_, c)| c).sum::<i64>();
                v * v
            }
            &PenaltyForm::Product { x: a, y: b, z: c } => {
                let (a, b, c) = (x[a] as i64, x[b] as i64, x[c] as i64);
                a * b - 2 * a * c - 2 * b * c + 3 * c
            }
        }
    }

    /// Slack bits of a square group with their place values.
    fn slack_terms<'a>(&'a self, reg: &'a BitRegistry) -> impl Iterator<Item = (usize, u32)> + 'a {
        let terms: &[(usize, i64)] = match self {
            PenaltyForm::Square { terms, .. } => terms,
            PenaltyForm::Product { .. } => &[],
        };
        terms.iter().filter_map(move |&(k, _)| match reg.entries()[k] {
            BitMeaning::SlackOn { k: b, .. }
            | BitMeaning::SlackOff { k: b, .. }
            | BitMeaning::SlackFea { k: b, .. } => Some((k, b)),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyGroup {
    pub label: GroupLabel,
    pub weight: f64,
    pub form: PenaltyForm,
}

/// Weights actually used by a build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedPenalties {
    pub xi_on: f64,
    pub xi_off: f64,
    pub xi_fea: f64,
    pub mu: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    pub matrix: QuboMatrix,
    pub registry: BitRegistry,
    pub groups: Vec<PenaltyGroup>,
    pub penalties: ResolvedPenalties,
}

impl QuboProblem {
    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn energy(&self, x: &[bool]) -> f64 {
        self.matrix.energy(x)
    }

    /// Weighted penalty part of the energy.
    pub fn penalty(&self, x: &[bool]) -> f64 {
        self.groups
            .iter()
            .map(|g| g.weight * g.form.residual(x) as f64)
            .sum()
    }

    /// True when every penalty group is exactly zero.
    pub fn satisfied(&self, x: &[bool]) -> bool {
        self.groups.iter().all(|g| g.form.residual(x) == 0)
    }
}

/// Bits needed so that `Σ 2^k b_k` spans `0..=range`.
pub fn slack_bits(range: i64) -> Result<u32, QuboError> {
    if range < 0 {
        return Err(QuboError::NegativeRange(range));
    }
    Ok(64 - (range as u64).leading_zeros())
}

/// Integer version of a feasibility cut `constant + Σ coeffs·u ≤ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCut {
    pub constant: i64,
    /// `(unit bit, coefficient)` over the cut's support.
    pub coeffs: Vec<(usize, i64)>,
    pub scale: f64,
    pub exact: bool,
}

impl QuantizedCut {
    /// Largest slack the cut can need.
    pub fn range(&self) -> i64 {
        -self.constant - self.coeffs.iter().map(|&(_, c)| c.min(0)).sum::<i64>()
    }
}

/// Scales and rounds a cut to integers. The smallest width whose integer cut
/// admits exactly the same schedules on the support is chosen; wide supports
/// fall back to `fallback_bits`. `Ok(None)` means the cut admits everything.
pub fn quantize_feasibility_cut(
    cut: &FeasibilityCut,
    fallback_bits: u32,
) -> Result<Option<QuantizedCut>, QuboError> {
    let unsat = QuboError::UnsatisfiableCut {
        iter: cut.iter,
        scope: cut.scope,
    };
    // Fold the admission tolerance into the constant so `≤ 0` is exact.
    let c = cut.constant - CUT_TOL;
    let support: Vec<(usize, f64)> = cut
        .coeffs
        .values
        .iter()
        .enumerate()
        .filter(|(_, &f)| f != 0.0)
        .map(|(k, &f)| (k, f))
        .collect();
    let best = c + support.iter().map(|&(_, f)| f.min(0.0)).sum::<f64>();
    if best > 0.0 {
        return Err(unsat);
    }
    let worst = c + support.iter().map(|&(_, f)| f.max(0.0)).sum::<f64>();
    if worst <= 0.0 {
        return Ok(None);
    }
    let mass = c.abs() + support.iter().map(|&(_, f)| f.abs()).sum::<f64>();
    let build = |bits: u32| {
        let s = ((1u64 << bits) - 1) as f64 / mass;
        QuantizedCut {
            constant: (s * c).round() as i64,
            coeffs: support
                .iter()
                .map(|&(k, f)| (k, (s * f).round() as i64))
                .filter(|&(_, v)| v != 0)
                .collect(),
            scale: s,
            exact: false,
        }
    };
    let chosen = if support.len() <= MAX_VERIFIED_SUPPORT {
        let real: Vec<bool> = (0..1u32 << support.len())
            .map(|mask| {
                let v = c + support
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, &(_, f))| f)
                    .sum::<f64>();
                v <= 0.0
            })
            .collect();
        let agrees = |q: &QuantizedCut| {
            let coef: Vec<i64> = support
                .iter()
                .map(|&(k, _)| q.coeffs.iter().find(|e| e.0 == k).map_or(0, |e| e.1))
                .collect();
            real.iter().enumerate().all(|(mask, &ok)| {
                let v = q.constant
                    + coef
                        .iter()
                        .enumerate()
                        .filter(|(b, _)| mask >> b & 1 == 1)
                        .map(|(_, c)| c)
                        .sum::<i64>();
                (v <= 0) == ok
            })
        };
        let mut found = None;
        for bits in 1..=MAX_QUANT_BITS {
            let q = build(bits);
            if agrees(&q) {
                found = Some(QuantizedCut { exact: true, ..q });
                break;
            }
        }
        found.unwrap_or_else(|| build(MAX_QUANT_BITS))
    } else {
        build(fallback_bits)
    };
    if chosen.range() < 0 {
        return Err(unsat);
    }
    Ok(Some(chosen))
}

/// `max_e` of the optimality cuts at `u`.
pub fn lower_bound(u: &Schedule, pool: &CutPool) -> Result<f64, QuboError> {
    pool.max_optimality(u)
        .map_err(|_| QuboError::DimensionMismatch {
            units: u.units(),
            horizon: u.horizon(),
            expected_units: pool.optimality().first().map_or(0, |c| c.coeffs.units),
            expected_horizon: pool.optimality().first().map_or(0, |c| c.coeffs.horizon),
        })?
        .ok_or(QuboError::EmptyPool)
}

/// Schedule and reassembled slack values of a bit assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub u: Schedule,
    /// Slack per group; feasibility slacks are divided back by their scale.
    pub slacks: BTreeMap<GroupLabel, f64>,
}

pub fn decode(x: &[bool], reg: &BitRegistry) -> Result<Decoded, QuboError> {
    if x.len() != reg.len() {
        return Err(QuboError::LengthMismatch {
            got: x.len(),
            expected: reg.len(),
        });
    }
    let mut u = Schedule::all_off(reg.units(), reg.horizon());
    let mut ints: BTreeMap<GroupLabel, i64> = BTreeMap::new();
    for (bit, meaning) in reg.entries().iter().enumerate() {
        let (label, k) = match *meaning {
            BitMeaning::Unit { unit, t } => {
                u.set(unit, t, x[bit]);
                continue;
            }
            BitMeaning::Product { .. } => continue,
            BitMeaning::SlackOn { unit, t, k } => (GroupLabel::MinOn { unit, t }, k),
            BitMeaning::SlackOff { unit, t, k } => (GroupLabel::MinOff { unit, t }, k),
            BitMeaning::SlackFea { iter, scope, k } => (GroupLabel::Feasibility { iter, scope }, k),
        };
        *ints.entry(label).or_insert(0) += (x[bit] as i64) << k;
    }
    let slacks = ints
        .into_iter()
        .map(|(label, v)| {
            let scale = match label {
                GroupLabel::Feasibility { iter, scope } => reg.fea_scale(iter, scope).unwrap_or(1.0),
                _ => 1.0,
            };
            (label, v as f64 / scale)
        })
        .collect();
    Ok(Decoded { u, slacks })
}

/// Affine integer expression over unit hours of one unit and the product bit.
#[derive(Debug, Default)]
struct UnitExpr {
    constant: i64,
    hours: BTreeMap<usize, i64>,
    product: i64,
}

impl UnitExpr {
    fn add_hour(&mut self, t: usize, c: i64) {
        *self.hours.entry(t).or_insert(0) += c;
    }

    /// Exact `(min, max)` over all settings of the row, with the product
    /// bit consistent with `u_{t-1} u_t`.
    fn range(&self, t: usize) -> (i64, i64) {
        let mut vars: BTreeSet<usize> = self.hours.keys().copied().collect();
        if self.product != 0 {
            vars.insert(t - 1);
            vars.insert(t);
        }
        let vars: Vec<usize> = vars.into_iter().collect();
        let (mut lo, mut hi) = (i64::MAX, i64::MIN);
        for mask in 0..1u32 << vars.len() {
            let val = |h: usize| vars.iter().position(|&v| v == h).map_or(0, |p| (mask >> p & 1) as i64);
            let mut g = self.constant;
            for (&h, &c) in &self.hours {
                g += c * val(h);
            }
            if self.product != 0 {
                g += self.product * val(t - 1) * val(t);
            }
            lo = lo.min(g);
            hi = hi.max(g);
        }
        (lo, hi)
    }
}

/// Min-on condition at hour `t`: `Σ_{window} u_j − T_on·u_{t-1}(1 − u_t) ≥ 0`.
fn min_on_expr(rule: &CommitmentRule, t: usize) -> UnitExpr {
    let mut e = UnitExpr::default();
    let len = rule.t_on as isize;
    for j in t as isize - len..t as isize {
        if j >= 0 {
            e.add_hour(j as usize, 1);
        } else if rule.history(j) {
            e.constant += 1;
        }
    }
    let k = rule.t_on as i64;
    if t == 0 {
        if rule.history(-1) {
            e.constant -= k;
            e.add_hour(0, k);
        }
    } else {
        e.add_hour(t - 1, -k);
        e.product += k;
    }
    e
}

/// Min-off condition at hour `t`: `Σ_{window} (1 − u_j) − T_off·u_t(1 − u_{t-1}) ≥ 0`.
fn min_off_expr(rule: &CommitmentRule, t: usize) -> UnitExpr {
    let mut e = UnitExpr::default();
    let len = rule.t_off as isize;
    for j in t as isize - len..t as isize {
        if j >= 0 {
            e.constant += 1;
            e.add_hour(j as usize, -1);
        } else if !rule.history(j) {
            e.constant += 1;
        }
    }
    let k = rule.t_off as i64;
    if t == 0 {
        if !rule.history(-1) {
            e.add_hour(0, -k);
        }
    } else {
        e.add_hour(t, -k);
        e.product += k;
    }
    e
}

/// Accumulates `weight · (constant + Σ a_k x_k)²` with `x² = x`.
fn expand_square(
    q: &mut BTreeMap<(usize, usize), f64>,
    offset: &mut f64,
    weight: f64,
    constant: i64,
    terms: &[(usize, i64)],
) {
    let c = constant as f64;
    *offset += weight * c * c;
    for (idx, &(k, a)) in terms.iter().enumerate() {
        let a = a as f64;
        *q.entry((k, k)).or_insert(0.0) += weight * (2.0 * c * a + a * a);
        for &(l, b) in &terms[idx + 1..] {
            let key = if k <= l { (k, l) } else { (l, k) };
            *q.entry(key).or_insert(0.0) += weight * 2.0 * a * b as f64;
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, QuboError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(QuboError::BadPenalty { name, value })
    }
}

/// Builds the QUBO master over the commitment rules and the cut pool.
///
/// Bit layout: unit bits, then per (unit, hour) the product bit and the
/// min-on and min-off slack bits, then feasibility slack bits in pool order.
/// Constraints that hold for every schedule get no bits.
pub fn build_qubo(
    pool: &CutPool,
    rules: &CommitmentRules,
    cfg: &PenaltyConfig,
    ub: f64,
) -> Result<QuboProblem, QuboError> {
    let units = rules.num_units();
    let horizon = rules.horizon;
    if units == 0 || horizon == 0 {
        return Err(QuboError::EmptyInstance);
    }
    let dims = pool
        .optimality()
        .iter()
        .map(|c| &c.coeffs)
        .chain(pool.feasibility().iter().map(|c| &c.coeffs));
    for coeffs in dims {
        if coeffs.units != units || coeffs.horizon != horizon {
            return Err(QuboError::DimensionMismatch {
                units: coeffs.units,
                horizon: coeffs.horizon,
                expected_units: units,
                expected_horizon: horizon,
            });
        }
    }
    if !pool.optimality().is_empty() && !ub.is_finite() {
        return Err(QuboError::NonFiniteUpperBound(ub));
    }

    let mut reg = BitRegistry::new(units, horizon);
    let mut q: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut offset = 0.0;

    // Objective part over unit bits.
    let mu = match cfg.mu {
        Some(v) => positive("mu", v)?,
        None => 1.0 / (ub.abs() + 1.0),
    };
    let mu = if ub.is_finite() { mu } else { cfg.mu.unwrap_or(1.0) };
    let eta = match cfg.eta {
        Some(v) => positive("eta", v)?,
        None => mu,
    };
    for cut in pool.optimality() {
        let c = cut.constant();
        let nz: Vec<(usize, f64)> = cut
            .coeffs
            .values
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != 0.0)
            .map(|(k, &f)| (k, f))
            .collect();
        for (idx, &(k, f)) in nz.iter().enumerate() {
            *q.entry((k, k)).or_insert(0.0) += f + 2.0 * mu * (c - ub) * f + eta * f * f;
            for &(l, g) in &nz[idx + 1..] {
                *q.entry((k, l)).or_insert(0.0) += 2.0 * eta * f * g;
            }
        }
    }
    let op_scale: f64 = q.values().map(|v| v.abs()).sum();
    let default_xi = 10.0 * (op_scale + 1.0);
    let xi_on = cfg.xi_on.map_or(Ok(default_xi), |v| positive("xi_on", v))?;
    let xi_off = cfg.xi_off.map_or(Ok(default_xi), |v| positive("xi_off", v))?;
    let xi_fea = cfg.xi_fea.map_or(Ok(default_xi), |v| positive("xi_fea", v))?;
    let quant_bits = cfg.quant_bits.unwrap_or(DEFAULT_QUANT_BITS).clamp(1, MAX_QUANT_BITS);

    let mut groups = Vec::new();
    for (i, rule) in rules.rules.iter().enumerate() {
        for t in 0..horizon {
            let exprs = [
                (min_on_expr(rule, t), true),
                (min_off_expr(rule, t), false),
            ];
            let kept: Vec<(&UnitExpr, bool, i64)> = exprs
                .iter()
                .filter_map(|(e, on)| {
                    let (lo, hi) = e.range(t);
                    (lo < 0).then_some((e, *on, hi))
                })
                .collect();
            let needs_product = kept.iter().any(|(e, _, _)| e.product != 0);
            let product = needs_product.then(|| {
                let w = reg.push(BitMeaning::Product { unit: i, t });
                groups.push(PenaltyGroup {
                    label: GroupLabel::Product { unit: i, t },
                    weight: xi_on,
                    form: PenaltyForm::Product {
                        x: reg.unit_bit(i, t - 1),
                        y: reg.unit_bit(i, t),
                        z: w,
                    },
                });
                w
            });
            for (e, on, hi) in kept {
                let mut terms: Vec<(usize, i64)> = e
                    .hours
                    .iter()
                    .filter(|(_, &c)| c != 0)
                    .map(|(&h, &c)| (reg.unit_bit(i, h), c))
                    .collect();
                if e.product != 0 {
                    terms.push((product.expect("product bit allocated"), e.product));
                }
                for k in 0..slack_bits(hi)? {
                    let meaning = if on {
                        BitMeaning::SlackOn { unit: i, t, k }
                    } else {
                        BitMeaning::SlackOff { unit: i, t, k }
                    };
                    terms.push((reg.push(meaning), -(1i64 << k)));
                }
                let (label, weight) = if on {
                    (GroupLabel::MinOn { unit: i, t }, xi_on)
                } else {
                    (GroupLabel::MinOff { unit: i, t }, xi_off)
                };
                groups.push(PenaltyGroup {
                    label,
                    weight,
                    form: PenaltyForm::Square {
                        constant: e.constant,
                        terms,
                    },
                });
            }
        }
    }

    for cut in pool.feasibility() {
        let Some(qc) = quantize_feasibility_cut(cut, quant_bits)? else {
            continue;
        };
        reg.set_scale((cut.iter, cut.scope), qc.scale);
        let mut terms = qc.coeffs.clone();
        for k in 0..slack_bits(qc.range())? {
            let bit = reg.push(BitMeaning::SlackFea {
                iter: cut.iter,
                scope: cut.scope,
                k,
            });
            terms.push((bit, 1i64 << k));
        }
        groups.push(PenaltyGroup {
            label: GroupLabel::Feasibility {
                iter: cut.iter,
                scope: cut.scope,
            },
            weight: xi_fea,
            form: PenaltyForm::Square {
                constant: qc.constant,
                terms,
            },
        });
    }

    for g in &groups {
        match &g.form {
            PenaltyForm::Square { constant, terms } => {
                expand_square(&mut q, &mut offset, g.weight, *constant, terms)
            }
            &PenaltyForm::Product { x, y, z } => {
                let w = g.weight;
                *q.entry((x.min(y), x.max(y))).or_insert(0.0) += w;
                *q.entry((x.min(z), x.max(z))).or_insert(0.0) -= 2.0 * w;
                *q.entry((y.min(z), y.max(z))).or_insert(0.0) -= 2.0 * w;
                *q.entry((z, z)).or_insert(0.0) += 3.0 * w;
            }
        }
    }

    Ok(QuboProblem {
        matrix: QuboMatrix::from_map(reg.len(), q, offset),
        registry: reg,
        groups,
        penalties: ResolvedPenalties {
            xi_on,
            xi_off,
            xi_fea,
            mu,
            eta,
        },
    })
}

/// Completes `u` with auxiliary bits that zero every penalty it can.
/// Product bits take `u_{t-1} u_t`; slack bits take the binary expansion of
/// the constraint's residual when it is in range.
pub fn complete_assignment(problem: &QuboProblem, u: &Schedule) -> Vec<bool> {
    let reg = &problem.registry;
    let mut x = reg.encode_schedule(u);
    for g in &problem.groups {
        if let &PenaltyForm::Product { x: a, y: b, z } = &g.form {
            x[z] = x[a] && x[b];
        }
    }
    for g in &problem.groups {
        let PenaltyForm::Square { constant, terms } = &g.form else {
            continue;
        };
        let slack: Vec<(usize, u32)> = g.form.slack_terms(reg).collect();
        let sign = terms
            .iter()
            .find(|(k, _)| slack.iter().any(|s| s.0 == *k))
            .map_or(1, |&(_, c)| c.signum());
        let base = constant
            + terms
                .iter()
                .filter(|(k, _)| !slack.iter().any(|s| s.0 == *k) && x[*k])
                .map(|(_, c)| c)
                .sum::<i64>();
        // Need base + sign·s = 0.
        let want = -sign * base;
        if want < 0 || (slack.len() < 63 && want >> slack.len() != 0) {
            continue;
        }
        for &(k, b) in &slack {
            x[k] = want >> b & 1 == 1;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::{CutCoeffs, OptimalityCut};
    use crate::model::InitialState;

    fn rules(units: usize, horizon: usize, t_on: usize, t_off: usize) -> CommitmentRules {
        CommitmentRules {
            horizon,
            rules: vec![
                CommitmentRule {
                    t_on,
                    t_off,
                    initial: InitialState { was_on: false, duration: t_off },
                };
                units
            ],
        }
    }

    fn opt_cut(iter: usize, units: usize, horizon: usize, c: f64, f: &[(usize, f64)]) -> OptimalityCut {
        let mut coeffs = CutCoeffs::zeros(units, horizon);
        for &(k, v) in f {
            coeffs.values[k] = v;
        }
        OptimalityCut {
            iter,
            coeffs,
            value_const: c,
            demand_const: 0.0,
        }
    }

    fn fea_cut(iter: usize, units: usize, horizon: usize, c: f64, f: &[(usize, f64)]) -> FeasibilityCut {
        let mut coeffs = CutCoeffs::zeros(units, horizon);
        for &(k, v) in f {
            coeffs.values[k] = v;
        }
        FeasibilityCut {
            iter,
            scope: CutScope::Horizon,
            coeffs,
            constant: c,
        }
    }

    #[test]
    fn slack_bit_widths() {
        assert_eq!(slack_bits(0), Ok(0));
        assert_eq!(slack_bits(1), Ok(1));
        assert_eq!(slack_bits(5), Ok(3));
        assert_eq!(slack_bits(7), Ok(3));
        assert_eq!(slack_bits(8), Ok(4));
        assert_eq!(slack_bits(-1), Err(QuboError::NegativeRange(-1)));
    }

    #[test]
    fn empty_pool_single_bit() {
        let p = build_qubo(&CutPool::new(), &rules(1, 1, 1, 1), &PenaltyConfig::default(), f64::INFINITY)
            .unwrap();
        assert_eq!(p.n(), 1);
        assert!(p.matrix.entries().is_empty());
        assert_eq!(p.matrix.offset(), 0.0);
        let empty = CommitmentRules { horizon: 0, rules: vec![] };
        assert_eq!(
            build_qubo(&CutPool::new(), &empty, &PenaltyConfig::default(), 0.0),
            Err(QuboError::EmptyInstance)
        );
    }

    #[test]
    fn objective_coefficient_of_one_cut() {
        let mut pool = CutPool::new();
        pool.push_optimality(opt_cut(0, 1, 1, 10.0, &[(0, 2.0)])).unwrap();
        let cfg = PenaltyConfig {
            mu: Some(0.5),
            eta: Some(1.0),
            ..Default::default()
        };
        let p = build_qubo(&pool, &rules(1, 1, 1, 1), &cfg, 10.0).unwrap();
        // Symbolic expansion: (1 + 2μ(C − ub))·f + η f² on the single bit.
        let expected = (1.0 + 2.0 * 0.5 * (10.0 - 10.0)) * 2.0 + 1.0 * 2.0 * 2.0;
        assert_eq!(p.matrix.entries(), &[(0, 0, expected)]);
        assert_eq!(expected, 6.0);
    }

    #[test]
    fn unsatisfiable_feasibility_cut() {
        let mut pool = CutPool::new();
        pool.push_feasibility(fea_cut(0, 1, 1, 5.0, &[(0, -3.0)])).unwrap();
        let err = build_qubo(&pool, &rules(1, 1, 1, 1), &PenaltyConfig::default(), 0.0).unwrap_err();
        assert_eq!(
            err,
            QuboError::UnsatisfiableCut {
                iter: 0,
                scope: CutScope::Horizon
            }
        );
    }

    #[test]
    fn quantization_preserves_admission() {
        let cut = fea_cut(0, 1, 3, 0.7, &[(0, -0.3), (1, -0.45), (2, 0.05)]);
        let qc = quantize_feasibility_cut(&cut, 8).unwrap().unwrap();
        assert!(qc.exact);
        for mask in 0..8u32 {
            let u: Vec<bool> = (0..3).map(|b| mask >> b & 1 == 1).collect();
            let real = 0.7 + [-0.3, -0.45, 0.05].iter().zip(&u).filter(|p| *p.1).map(|p| p.0).sum::<f64>();
            let int = qc.constant + qc.coeffs.iter().filter(|c| u[c.0]).map(|c| c.1).sum::<i64>();
            assert_eq!(real <= CUT_TOL, int <= 0, "mask {mask}");
        }
        // A cut satisfied by every schedule needs no bits.
        let loose = fea_cut(0, 1, 2, -4.0, &[(0, 1.0), (1, 2.0)]);
        assert_eq!(quantize_feasibility_cut(&loose, 8).unwrap(), None);
    }

    #[test]
    fn optimality_cuts_do_not_add_bits() {
        let r = rules(2, 3, 2, 2);
        let mut pool = CutPool::new();
        pool.push_feasibility(fea_cut(0, 2, 3, 1.0, &[(0, -1.0), (3, -1.0)])).unwrap();
        let n0 = build_qubo(&pool, &r, &PenaltyConfig::default(), 0.0).unwrap().n();
        pool.push_optimality(opt_cut(1, 2, 3, 4.0, &[(1, 2.0), (4, 3.0)])).unwrap();
        let n1 = build_qubo(&pool, &r, &PenaltyConfig::default(), 9.0).unwrap().n();
        assert_eq!(n0, n1);
    }

    #[test]
    fn decode_and_encode() {
        let p = build_qubo(&CutPool::new(), &rules(1, 3, 2, 2), &PenaltyConfig::default(), 0.0).unwrap();
        let zeros = vec![false; p.n()];
        let d = decode(&zeros, &p.registry).unwrap();
        assert_eq!(d.u, Schedule::all_off(1, 3));
        assert!(d.slacks.values().all(|&s| s == 0.0));
        assert_eq!(
            decode(&[true], &p.registry),
            Err(QuboError::LengthMismatch { got: 1, expected: p.n() })
        );
        let one = build_qubo(&CutPool::new(), &rules(1, 1, 1, 1), &PenaltyConfig::default(), 0.0).unwrap();
        assert_eq!(decode(&[true], &one.registry).unwrap().u, Schedule::all_on(1, 1));
    }

    #[test]
    fn lower_bound_takes_the_max() {
        let mut pool = CutPool::new();
        assert_eq!(lower_bound(&Schedule::all_on(1, 1), &pool), Err(QuboError::EmptyPool));
        pool.push_optimality(opt_cut(0, 1, 1, 5.0, &[])).unwrap();
        pool.push_optimality(opt_cut(1, 1, 1, 0.0, &[(0, 7.0)])).unwrap();
        assert_eq!(lower_bound(&Schedule::all_on(1, 1), &pool), Ok(7.0));
        assert_eq!(lower_bound(&Schedule::all_off(1, 1), &pool), Ok(5.0));
    }

    #[test]
    fn zero_penalty_exactly_on_feasible_rows() {
        let r = rules(1, 4, 2, 3);
        let p = build_qubo(&CutPool::new(), &r, &PenaltyConfig::default(), 0.0).unwrap();
        assert!(p.n() <= 20);
        let mut zero_rows = BTreeSet::new();
        for mask in 0..1u32 << p.n() {
            let x: Vec<bool> = (0..p.n()).map(|b| mask >> b & 1 == 1).collect();
            if p.satisfied(&x) {
                zero_rows.insert(x[..4].to_vec());
            }
        }
        for mask in 0..16u32 {
            let row: Vec<bool> = (0..4).map(|b| mask >> b & 1 == 1).collect();
            assert_eq!(r.rules[0].row_ok(&row), zero_rows.contains(&row), "{row:?}");
            if r.rules[0].row_ok(&row) {
                let u = Schedule::from_rows(&[row]);
                assert!(p.satisfied(&complete_assignment(&p, &u)));
            }
        }
    }
}
