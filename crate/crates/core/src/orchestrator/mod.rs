//! The decomposition loop: the coordinator broadcasts a schedule, every
//! microgrid controller answers with its objective and partial cuts, the
//! master proposes the next schedule, and the bounds close in.

mod mgcc;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mgcc::{Mgcc, MgccReply};

use crate::cuts::{
    aggregate_feasibility, aggregate_optimality, CutError, CutKind, CutPool, CutRecord,
    FeasibilityMode, PartialFeasibilityCut, PartialOptimalityCut,
};
use crate::dispatch::DispatchError;
use crate::engine::{AnnealingSampler, EngineError, ExhaustiveSampler, Sampler, SamplerParams};
use crate::master::{solve_master, MasterError, MasterStrategy};
use crate::model::{CommitmentRules, Dispatch, Instance, Schedule};
use crate::qubo::{build_qubo, decode, PenaltyConfig, QuboError, QuboProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Gbda,
    McGbda,
    HqcGbda,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Gbda, Mode::McGbda, Mode::HqcGbda];

    pub fn feasibility_mode(self) -> FeasibilityMode {
        match self {
            Mode::Gbda => FeasibilityMode::Single,
            Mode::McGbda | Mode::HqcGbda => FeasibilityMode::Multi,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Gbda => "gbda",
            Mode::McGbda => "mc_gbda",
            Mode::HqcGbda => "hqc_gbda",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gbda" => Ok(Mode::Gbda),
            "mc_gbda" | "mc-gbda" => Ok(Mode::McGbda),
            "hqc_gbda" | "hqc-gbda" | "hqc" => Ok(Mode::HqcGbda),
            _ => Err(format!("unknown mode `{s}` (gbda, mc_gbda, hqc_gbda)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InitialSchedule {
    AllOff,
    AllOn,
    Random(u64),
}

/// QUBO sampler used by the hybrid mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SamplerChoice {
    /// Exact sampler returning the given number of lowest-energy schedules
    /// (all of them when `None`).
    Exhaustive { reads: Option<usize> },
    Annealing(SamplerParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub epsilon: f64,
    pub max_iters: usize,
    pub initial_u: InitialSchedule,
    pub penalty: PenaltyConfig,
    pub sampler: SamplerChoice,
    pub master: MasterStrategy,
    pub dispatch_tol: f64,
    /// Wall-clock phase timings. Off by default so traces are reproducible.
    pub record_timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Gbda,
            epsilon: 1e-4,
            max_iters: 200,
            initial_u: InitialSchedule::AllOff,
            penalty: PenaltyConfig::default(),
            sampler: SamplerChoice::Exhaustive { reads: None },
            master: MasterStrategy::Exhaustive,
            dispatch_tol: 1e-9,
            record_timings: false,
        }
    }
}

impl RunConfig {
    pub fn with_mode(mode: Mode) -> Self {
        Self {
            mode,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), RunError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(RunError::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(RunError::InvalidConfig("max_iters must be at least 1".into()));
        }
        if let SamplerChoice::Annealing(p) = &self.sampler {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dispatch(#[from] DispatchError),
    #[error(transparent)]
    Cut(#[from] CutError),
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Upper and lower bound with the incumbent behind the upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub ub: f64,
    pub lb: f64,
    pub incumbent: Option<Schedule>,
}

impl Default for Bounds {
    fn default() -> Self {
        Self {
            ub: f64::INFINITY,
            lb: f64::NEG_INFINITY,
            incumbent: None,
        }
    }
}

impl Bounds {
    /// `UB ← min(UB, z_bar)` storing `u` on improvement, `LB ← max(LB, z_lower)`.
    pub fn update(&mut self, z_bar: Option<(f64, &Schedule)>, z_lower: Option<f64>) {
        if let Some((z, u)) = z_bar {
            if z < self.ub {
                self.ub = z;
                self.incumbent = Some(u.clone());
            }
        }
        if let Some(z) = z_lower {
            if z > self.lb {
                self.lb = z;
            }
        }
    }

    pub fn gap(&self) -> f64 {
        self.ub - self.lb
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MgStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub e: usize,
    /// Schedule broadcast at this iteration.
    pub schedule: Schedule,
    #[serde(with = "crate::float_repr")]
    pub ub: f64,
    #[serde(with = "crate::float_repr")]
    pub lb: f64,
    #[serde(with = "crate::float_repr")]
    pub gap: f64,
    pub mg_status: Vec<MgStatus>,
    pub cuts_opt: usize,
    pub cuts_feas: usize,
    /// QUBO size in the hybrid mode, zero otherwise.
    pub master_bits: usize,
    pub ms_sub: f64,
    pub ms_master: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    MaxIters,
    MasterInfeasible,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: Mode,
    pub status: RunStatus,
    pub u: Option<Schedule>,
    pub p: Option<Dispatch>,
    #[serde(with = "crate::float_repr")]
    pub cost: f64,
    #[serde(with = "crate::float_repr")]
    pub lb: f64,
    pub trace: Vec<IterationRecord>,
    /// Every cut generated during the run.
    pub pool: CutPool,
    /// Explanations attached to an early stop.
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    DsoToMg,
    MgToDso,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Schedule { rows: Vec<Vec<u8>> },
    Optimal { objective: f64, cut: CutRecord },
    Infeasible { short_hours: Vec<usize>, cuts: Vec<CutRecord> },
}

/// One coordinator/controller exchange.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub direction: Direction,
    pub iter: usize,
    pub mg: usize,
    pub payload: Payload,
}

/// Hooks into a run. All methods default to no-ops.
pub trait Observer {
    fn message(&mut self, _msg: &Message) {}
    fn qubo_built(&mut self, _iter: usize, _qubo: &QuboProblem) {}
    fn iteration(&mut self, _rec: &IterationRecord) {}
}

pub struct NoObserver;

impl Observer for NoObserver {}

fn opt_record(iter: usize, c: &PartialOptimalityCut) -> CutRecord {
    CutRecord {
        kind: CutKind::Opt,
        iter,
        t: None,
        constants: vec![c.value_const, c.demand_const],
        coeffs: c.coeffs.clone(),
    }
}

fn feas_record(iter: usize, c: &PartialFeasibilityCut) -> CutRecord {
    CutRecord {
        kind: CutKind::Feas,
        iter,
        t: Some(c.t),
        constants: vec![c.constant],
        coeffs: c.coeffs.clone(),
    }
}

fn initial_schedule(init: InitialSchedule, units: usize, horizon: usize) -> Schedule {
    match init {
        InitialSchedule::AllOff => Schedule::all_off(units, horizon),
        InitialSchedule::AllOn => Schedule::all_on(units, horizon),
        InitialSchedule::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Schedule::from_bits(units, horizon, (0..units * horizon).map(|_| rng.gen()).collect())
        }
    }
}

enum MasterStep {
    Next { u: Schedule, z: f64, bits: usize },
    /// `note` says why, and whether infeasibility is proven.
    Infeasible { bits: usize, note: String },
}

fn ms(start: Option<Instant>) -> f64 {
    start.map_or(0.0, |s| s.elapsed().as_secs_f64() * 1e3)
}

/// Picks the sampled schedule with the smallest cut bound among those that
/// satisfy every penalty, the up/down rules and every feasibility cut. Ties
/// keep the sampler's order (energy, then bit string).
fn select_sample(
    qubo: &QuboProblem,
    samples: &crate::engine::SampleSet,
    pool: &CutPool,
    rules: &CommitmentRules,
) -> Result<Option<(Schedule, f64)>, RunError> {
    let mut best: Option<(Schedule, f64)> = None;
    for s in samples.samples() {
        if !qubo.satisfied(&s.x) {
            continue;
        }
        let u = decode(&s.x, &qubo.registry)?.u;
        if !rules.violations(&u).is_empty() || !pool.admits(&u)? {
            continue;
        }
        let z = pool.max_optimality(&u)?.unwrap_or(f64::NEG_INFINITY);
        if best.as_ref().is_none_or(|b| z < b.1) {
            best = Some((u, z));
        }
    }
    Ok(best)
}

fn hybrid_master(
    pool: &CutPool,
    rules: &CommitmentRules,
    cfg: &RunConfig,
    ub: f64,
    sampler: &dyn Sampler,
    observer: &mut dyn Observer,
    iter: usize,
) -> Result<MasterStep, RunError> {
    let qubo = match build_qubo(pool, rules, &cfg.penalty, ub) {
        Ok(q) => q,
        Err(QuboError::UnsatisfiableCut { iter: cut, .. }) => {
            return Ok(MasterStep::Infeasible {
                bits: 0,
                note: format!("iteration {iter}: feasibility cut from iteration {cut} admits no schedule"),
            })
        }
        Err(e) => return Err(e.into()),
    };
    observer.qubo_built(iter, &qubo);
    let bits = qubo.n();
    let samples = sampler.sample(&qubo)?;
    if let Some((u, z)) = select_sample(&qubo, &samples, pool, rules)? {
        return Ok(MasterStep::Next { u, z, bits });
    }
    // A heuristic sampler missing every feasible state is not proof of
    // infeasibility; settle it with an exact pass when the size allows.
    let exact = ExhaustiveSampler::all();
    let proven = if sampler.name() == exact.name() {
        true
    } else {
        match exact.sample(&qubo) {
            Ok(all) => {
                if let Some((u, z)) = select_sample(&qubo, &all, pool, rules)? {
                    return Ok(MasterStep::Next { u, z, bits });
                }
                true
            }
            Err(EngineError::TooLarge { .. }) => false,
            Err(e) => return Err(e.into()),
        }
    };
    let note = if proven {
        format!("iteration {iter}: no schedule meets the up/down rules and feasibility cuts")
    } else {
        format!(
            "iteration {iter}: sampler {} returned {} states and none is penalty-free; \
             {bits} bits is too many for an exact check, so infeasibility is not proven",
            sampler.name(),
            samples.len()
        )
    };
    Ok(MasterStep::Infeasible { bits, note })
}

pub fn run(inst: &Instance, cfg: &RunConfig) -> Result<SolveReport, RunError> {
    run_with(inst, cfg, &mut NoObserver)
}

pub fn run_with(inst: &Instance, cfg: &RunConfig, observer: &mut dyn Observer) -> Result<SolveReport, RunError> {
    match cfg.sampler {
        SamplerChoice::Exhaustive { reads } => {
            run_with_sampler(inst, cfg, &ExhaustiveSampler { num_reads: reads }, observer)
        }
        SamplerChoice::Annealing(params) => {
            run_with_sampler(inst, cfg, &AnnealingSampler { params }, observer)
        }
    }
}

/// Runs the loop with an explicit sampler for the hybrid mode.
pub fn run_with_sampler(
    inst: &Instance,
    cfg: &RunConfig,
    sampler: &dyn Sampler,
    observer: &mut dyn Observer,
) -> Result<SolveReport, RunError> {
    cfg.validate()?;
    let mgccs = Mgcc::for_instance(inst);
    let rules = inst.commitment_rules();
    let (units, horizon) = (inst.num_units(), inst.horizon());
    let timed = cfg.record_timings;

    let mut u = initial_schedule(cfg.initial_u, units, horizon);
    let mut bounds = Bounds::default();
    let mut pool = CutPool::new();
    let mut trace = Vec::new();
    let mut status = RunStatus::MaxIters;
    let mut diagnostics = Vec::new();

    for e in 0..cfg.max_iters {
        let t_sub = timed.then(Instant::now);
        for g in &mgccs {
            let rows = (0..inst.microgrids()[g.index()].units.len())
                .map(|k| u.row(inst.unit_offset(g.index()) + k).iter().map(|&b| b as u8).collect())
                .collect();
            observer.message(&Message {
                direction: Direction::DsoToMg,
                iter: e,
                mg: g.index(),
                payload: Payload::Schedule { rows },
            });
        }
        let replies: Vec<MgccReply> = mgccs
            .par_iter()
            .map(|g| g.respond(&u, cfg.dispatch_tol))
            .collect::<Result<_, _>>()?;

        let mut mg_status = Vec::with_capacity(replies.len());
        let mut opt_parts = Vec::new();
        let mut feas_parts = Vec::new();
        let mut z_bar = 0.0;
        for (g, reply) in replies.iter().enumerate() {
            let payload = match reply {
                MgccReply::Optimal { objective, cut } => {
                    mg_status.push(MgStatus::Optimal);
                    z_bar += objective;
                    opt_parts.push(cut.clone());
                    Payload::Optimal {
                        objective: *objective,
                        cut: opt_record(e, cut),
                    }
                }
                MgccReply::Infeasible { short_hours, cuts } => {
                    mg_status.push(MgStatus::Infeasible);
                    feas_parts.extend(cuts.iter().cloned());
                    Payload::Infeasible {
                        short_hours: short_hours.clone(),
                        cuts: cuts.iter().map(|c| feas_record(e, c)).collect(),
                    }
                }
            };
            observer.message(&Message {
                direction: Direction::MgToDso,
                iter: e,
                mg: g,
                payload,
            });
        }

        let mut cuts_opt = 0;
        let mut cuts_feas = 0;
        if feas_parts.is_empty() {
            bounds.update(Some((z_bar, &u)), None);
            pool.push_optimality(aggregate_optimality(e, units, horizon, &opt_parts))?;
            cuts_opt = 1;
        } else {
            for cut in aggregate_feasibility(e, units, horizon, &feas_parts, cfg.mode.feasibility_mode())? {
                pool.push_feasibility(cut)?;
                cuts_feas += 1;
            }
        }
        let ms_sub = ms(t_sub);

        let t_master = timed.then(Instant::now);
        let step = match cfg.mode {
            Mode::Gbda | Mode::McGbda => match solve_master(&pool, &rules, cfg.master) {
                Ok(sol) => MasterStep::Next {
                    u: sol.u,
                    z: sol.z,
                    bits: 0,
                },
                Err(MasterError::Infeasible) => MasterStep::Infeasible {
                    bits: 0,
                    note: format!("iteration {e}: no schedule meets the up/down rules and feasibility cuts"),
                },
                Err(MasterError::LocalSearchStalled { .. }) => MasterStep::Infeasible {
                    bits: 0,
                    note: format!(
                        "iteration {e}: local search found no schedule meeting every constraint; \
                         infeasibility is not proven"
                    ),
                },
                Err(err) => return Err(err.into()),
            },
            Mode::HqcGbda => hybrid_master(&pool, &rules, cfg, bounds.ub, sampler, observer, e)?,
        };
        let ms_master = ms(t_master);

        let (next, master_bits) = match step {
            MasterStep::Next { u, z, bits } => {
                bounds.update(None, z.is_finite().then_some(z));
                (Some(u), bits)
            }
            MasterStep::Infeasible { bits, note } => {
                diagnostics.push(note);
                (None, bits)
            }
        };
        let rec = IterationRecord {
            e,
            schedule: u.clone(),
            ub: bounds.ub,
            lb: bounds.lb,
            gap: bounds.gap(),
            mg_status,
            cuts_opt,
            cuts_feas,
            master_bits,
            ms_sub,
            ms_master,
        };
        observer.iteration(&rec);
        trace.push(rec);

        let Some(next) = next else {
            status = RunStatus::MasterInfeasible;
            break;
        };
        if bounds.gap() <= cfg.epsilon {
            status = RunStatus::Converged;
            break;
        }
        u = next;
    }

    let mut p = None;
    if let Some(best) = &bounds.incumbent {
        let mut disp = Dispatch::zeros(units, horizon);
        for g in &mgccs {
            g.dispatch_into(best, cfg.dispatch_tol, &mut disp)?;
        }
        p = Some(disp);
    }
    Ok(SolveReport {
        mode: cfg.mode,
        status,
        u: bounds.incumbent,
        p,
        cost: bounds.ub,
        lb: bounds.lb,
        trace,
        pool,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{single, unit};

    #[test]
    fn bounds_fold() {
        let mut b = Bounds::default();
        let u = Schedule::all_on(1, 1);
        b.update(Some((42.0, &u)), None);
        assert_eq!(b.ub, 42.0);
        assert_eq!(b.incumbent, Some(u.clone()));
        b.update(Some((50.0, &Schedule::all_off(1, 1))), Some(10.0));
        assert_eq!((b.ub, b.lb), (42.0, 10.0));
        assert_eq!(b.incumbent, Some(u));
        b.update(None, Some(7.0));
        assert_eq!(b.lb, 10.0);
    }

    #[test]
    fn single_linear_unit_every_mode() {
        let inst = single(vec![unit(0.0, 1.0, 0.0, 0.0, 0.0, 10.0)], vec![5.0]);
        for mode in Mode::ALL {
            let cfg = RunConfig {
                epsilon: 1e-6,
                ..RunConfig::with_mode(mode)
            };
            let r = run(&inst, &cfg).unwrap();
            assert_eq!(r.status, RunStatus::Converged, "{mode}");
            assert_eq!(r.u, Some(Schedule::all_on(1, 1)));
            assert_eq!(r.p.as_ref().unwrap().values(), &[5.0]);
            assert!((r.cost - 5.0).abs() < 1e-9);
        }
    }

    #[test]
    fn short_capacity_is_master_infeasible() {
        let inst = single(
            vec![unit(0.0, 1.0, 0.0, 0.0, 0.0, 3.0), unit(0.0, 2.0, 0.0, 0.0, 0.0, 1.0)],
            vec![2.0, 5.0],
        );
        for mode in Mode::ALL {
            let r = run(&inst, &RunConfig::with_mode(mode)).unwrap();
            assert_eq!(r.status, RunStatus::MasterInfeasible, "{mode}");
            assert!(r.u.is_none());
            assert_eq!(r.diagnostics.len(), 1);
            assert!(!r.diagnostics[0].contains("not proven"), "{}", r.diagnostics[0]);
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in Mode::ALL {
            assert_eq!(mode.to_string().parse::<Mode>(), Ok(mode));
        }
        assert!("bogus".parse::<Mode>().is_err());
    }
}
