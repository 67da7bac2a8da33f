use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{validate_instance, InitialState, Instance, Microgrid, UnitParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandProfile {
    Flat { level: f64 },
    /// `base + amplitude · sin(2π t / 24)`.
    Sinusoidal { base: f64, amplitude: f64 },
    /// A daily curve at up to 90% of the safe peak, reduced by `decay_pct`
    /// on every other day.
    ScaledWeekly { decay_pct: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let v = if self.hi > self.lo { rng.gen_range(self.lo..=self.hi) } else { self.lo };
        (v * 1000.0).round() / 1000.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostRanges {
    pub a: Range,
    pub b: Range,
    pub c: Range,
    pub d: Range,
    pub p_min: Range,
    pub p_max: Range,
    /// Inclusive bounds for both minimum on and minimum off times.
    pub min_time: (usize, usize),
}

impl Default for CostRanges {
    fn default() -> Self {
        Self {
            a: Range::new(0.001, 0.05),
            b: Range::new(10.0, 40.0),
            c: Range::new(5.0, 50.0),
            d: Range::new(0.0, 20.0),
            p_min: Range::new(0.0, 5.0),
            p_max: Range::new(10.0, 50.0),
            min_time: (1, 3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_mgs: usize,
    pub units_per_mg: usize,
    pub horizon_t: usize,
    pub demand_profile: DemandProfile,
    #[serde(default)]
    pub cost_ranges: CostRanges,
    pub seed: u64,
    /// Pushes microgrid 0's demand at this hour to 1.25 times its capacity.
    #[serde(default)]
    pub infeasible_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid generator spec: {0}")]
pub struct InvalidSpec(pub String);

fn check(spec: &GeneratorSpec) -> Result<(), InvalidSpec> {
    let bad = |m: String| Err(InvalidSpec(m));
    if spec.n_mgs == 0 || spec.units_per_mg == 0 || spec.horizon_t == 0 {
        return bad("counts must be positive".into());
    }
    let r = &spec.cost_ranges;
    for (name, range) in [("a", r.a), ("b", r.b), ("c", r.c), ("d", r.d), ("p_min", r.p_min), ("p_max", r.p_max)] {
        if !(range.lo.is_finite() && range.hi.is_finite() && range.lo <= range.hi) {
            return bad(format!("range {name} is empty"));
        }
    }
    if r.a.lo < 0.0 || r.p_min.lo < 0.0 || r.p_max.hi <= 0.0 {
        return bad("a, p_min must be nonnegative and p_max positive".into());
    }
    if r.min_time.0 == 0 || r.min_time.0 > r.min_time.1 {
        return bad("min_time must be a nonempty range starting at 1 or more".into());
    }
    match spec.demand_profile {
        DemandProfile::Flat { level } if !(level >= 0.0 && level.is_finite()) => bad("flat level".into()),
        DemandProfile::Sinusoidal { base, amplitude } if !(base.is_finite() && amplitude.is_finite()) => {
            bad("sinusoid parameters".into())
        }
        DemandProfile::ScaledWeekly { decay_pct } if !(0.0..100.0).contains(&decay_pct) => {
            bad("decay_pct must be in [0, 100)".into())
        }
        _ => match spec.infeasible_at {
            Some(t) if t >= spec.horizon_t => bad(format!("infeasible_at {t} outside horizon")),
            _ => Ok(()),
        },
    }
}

fn raw_profile(profile: DemandProfile, horizon: usize, safe_peak: f64) -> Vec<f64> {
    use std::f64::consts::PI;
    (0..horizon)
        .map(|t| {
            let phase = 2.0 * PI * t as f64 / 24.0;
            match profile {
                DemandProfile::Flat { level } => level,
                DemandProfile::Sinusoidal { base, amplitude } => (base + amplitude * phase.sin()).max(0.0),
                DemandProfile::ScaledWeekly { decay_pct } => {
                    let day = t / 24;
                    let factor = if day % 2 == 1 { 1.0 - decay_pct / 100.0 } else { 1.0 };
                    safe_peak * factor * (0.65 + 0.25 * (phase - PI / 2.0).sin())
                }
            }
        })
        .collect()
}

/// Deterministic random instance. Each microgrid's demand is scaled down,
/// if needed, so that its capacity is at least 1.2 times its peak.
pub fn gen_instance(spec: &GeneratorSpec) -> Result<Instance, InvalidSpec> {
    check(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let r = &spec.cost_ranges;
    let mut mgs = Vec::with_capacity(spec.n_mgs);
    for id in 0..spec.n_mgs {
        let units: Vec<UnitParams> = (0..spec.units_per_mg)
            .map(|_| {
                let p_max = r.p_max.draw(&mut rng).max(1e-3);
                let p_min = r.p_min.draw(&mut rng).min(p_max);
                let (a, b, c, d) = (r.a.draw(&mut rng), r.b.draw(&mut rng), r.c.draw(&mut rng), r.d.draw(&mut rng));
                let t_on = rng.gen_range(r.min_time.0..=r.min_time.1);
                let t_off = rng.gen_range(r.min_time.0..=r.min_time.1);
                // Long enough in the initial state to switch at hour 0, so
                // running everything is always allowed.
                let settled = t_on.max(t_off);
                UnitParams {
                    a,
                    b,
                    c,
                    d,
                    p_min,
                    p_max,
                    t_on,
                    t_off,
                    initial: InitialState {
                        was_on: rng.gen(),
                        duration: rng.gen_range(settled..=settled + 2),
                    },
                }
            })
            .collect();
        let capacity: f64 = units.iter().map(|u| u.p_max).sum();
        let safe_peak = capacity / 1.2;
        let mut demand = raw_profile(spec.demand_profile, spec.horizon_t, safe_peak);
        let peak = demand.iter().cloned().fold(0.0, f64::max);
        if peak > safe_peak {
            let s = safe_peak / peak;
            demand.iter_mut().for_each(|d| *d *= s);
        }
        if id == 0 {
            if let Some(t) = spec.infeasible_at {
                demand[t] = 1.25 * capacity;
            }
        }
        mgs.push(Microgrid { id, units, demand });
    }
    validate_instance(spec.horizon_t, mgs).map_err(|e| InvalidSpec(e.to_string()))
}
