use std::fmt;
use std::str::FromStr;

use crate::cuts::CutScope;
use crate::model::Schedule;

/// What a QUBO bit stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BitMeaning {
    /// Commitment `u(unit, t)`.
    Unit { unit: usize, t: usize },
    /// Auxiliary product `u(unit, t-1) · u(unit, t)`.
    Product { unit: usize, t: usize },
    /// Bit `k` of the minimum-on slack at `(unit, t)`.
    SlackOn { unit: usize, t: usize, k: u32 },
    /// Bit `k` of the minimum-off slack at `(unit, t)`.
    SlackOff { unit: usize, t: usize, k: u32 },
    /// Bit `k` of the slack of the feasibility cut `(iter, scope)`.
    SlackFea { iter: usize, scope: CutScope, k: u32 },
}

impl fmt::Display for BitMeaning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BitMeaning::Unit { unit, t } => write!(f, "unit {unit} {t}"),
            BitMeaning::Product { unit, t } => write!(f, "product {unit} {t}"),
            BitMeaning::SlackOn { unit, t, k } => write!(f, "slack_on {unit} {t} {k}"),
            BitMeaning::SlackOff { unit, t, k } => write!(f, "slack_off {unit} {t} {k}"),
            BitMeaning::SlackFea { iter, scope, k } => match scope {
                CutScope::Hour(t) => write!(f, "slack_fea {iter} {t} {k}"),
                CutScope::Horizon => write!(f, "slack_fea {iter} * {k}"),
            },
        }
    }
}

impl FromStr for BitMeaning {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        let num = |i: usize| -> Result<usize, String> {
            parts
                .get(i)
                .ok_or_else(|| format!("missing field {i} in `{s}`"))?
                .parse()
                .map_err(|e| format!("`{s}`: {e}"))
        };
        let bit = |i: usize| -> Result<u32, String> { num(i).map(|v| v as u32) };
        match parts.first().copied() {
            Some("unit") => Ok(BitMeaning::Unit { unit: num(1)?, t: num(2)? }),
            Some("product") => Ok(BitMeaning::Product { unit: num(1)?, t: num(2)? }),
            Some("slack_on") => Ok(BitMeaning::SlackOn { unit: num(1)?, t: num(2)?, k: bit(3)? }),
            Some("slack_off") => Ok(BitMeaning::SlackOff { unit: num(1)?, t: num(2)?, k: bit(3)? }),
            Some("slack_fea") => {
                let scope = match parts.get(2) {
                    Some(&"*") => CutScope::Horizon,
                    _ => CutScope::Hour(num(2)?),
                };
                Ok(BitMeaning::SlackFea { iter: num(1)?, scope, k: bit(3)? })
            }
            _ => Err(format!("unknown bit meaning `{s}`")),
        }
    }
}

/// Dense map from bit index to meaning. Unit bits come first, row-major by
/// (unit, hour), so bit `i * horizon + t` is `u(i, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BitRegistry {
    units: usize,
    horizon: usize,
    entries: Vec<BitMeaning>,
    /// Scale applied to each feasibility cut before binarization.
    fea_scales: Vec<((usize, CutScope), f64)>,
}

impl BitRegistry {
    pub(crate) fn new(units: usize, horizon: usize) -> Self {
        let entries = (0..units)
            .flat_map(|unit| (0..horizon).map(move |t| BitMeaning::Unit { unit, t }))
            .collect();
        Self {
            units,
            horizon,
            entries,
            fea_scales: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, meaning: BitMeaning) -> usize {
        debug_assert!(!self.entries.contains(&meaning), "duplicate bit {meaning}");
        self.entries.push(meaning);
        self.entries.len() - 1
    }

    pub(crate) fn set_scale(&mut self, key: (usize, CutScope), scale: f64) {
        self.fea_scales.push((key, scale));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn entries(&self) -> &[BitMeaning] {
        &self.entries
    }

    pub fn unit_bit(&self, unit: usize, t: usize) -> usize {
        unit * self.horizon + t
    }

    pub fn unit_bits(&self) -> std::ops::Range<usize> {
        0..self.units * self.horizon
    }

    pub fn fea_scale(&self, iter: usize, scope: CutScope) -> Option<f64> {
        self.fea_scales
            .iter()
            .find(|(key, _)| *key == (iter, scope))
            .map(|&(_, s)| s)
    }

    /// Bit vector with `u` on the unit bits and every auxiliary bit zero.
    pub fn encode_schedule(&self, u: &Schedule) -> Vec<bool> {
        assert_eq!((u.units(), u.horizon()), (self.units, self.horizon));
        let mut x = vec![false; self.entries.len()];
        x[..u.bits().len()].copy_from_slice(u.bits());
        x
    }
}
