//! QUBO solvers behind one sampler interface.

mod anneal;
mod exhaustive;
mod ising;
mod remote;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qubo::{QuboMatrix, QuboProblem};

pub use anneal::{solve_sa, AnnealingSampler};
pub use exhaustive::{solve_exhaustive, ExhaustiveSampler, MAX_COMPONENT_BITS, MAX_ENUM_BITS};
pub use ising::{to_ising, IsingProblem};
pub use remote::CommandSampler;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("{bits} bits exceed the exhaustive limit of {max}")]
    TooLarge { bits: usize, max: usize },
    #[error("invalid sampler parameters: {0}")]
    InvalidParams(String),
    #[error("sampler backend failed: {0}")]
    Backend(String),
    #[error("malformed backend response: {0}")]
    BadResponse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<bool>,
    pub energy: f64,
    pub multiplicity: usize,
}

/// Samples ordered by energy, ties by lexicographic bit string, so the
/// first sample is the best.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SampleSet {
    samples: Vec<Sample>,
}

pub(crate) fn cmp_energy_then_bits(ea: f64, xa: &[bool], eb: f64, xb: &[bool]) -> Ordering {
    ea.total_cmp(&eb).then_with(|| xa.cmp(xb))
}

impl SampleSet {
    /// Merges duplicate states, recomputing every energy from `m`.
    pub fn from_states(m: &QuboMatrix, states: impl IntoIterator<Item = Vec<bool>>) -> Self {
        let mut samples: Vec<Sample> = Vec::new();
        let mut sorted: Vec<Vec<bool>> = states.into_iter().collect();
        sorted.sort();
        for x in sorted {
            match samples.last_mut() {
                Some(last) if last.x == x => last.multiplicity += 1,
                _ => samples.push(Sample {
                    energy: m.energy(&x),
                    x,
                    multiplicity: 1,
                }),
            }
        }
        Self::from_samples(samples)
    }

    pub fn from_samples(mut samples: Vec<Sample>) -> Self {
        samples.sort_by(|a, b| cmp_energy_then_bits(a.energy, &a.x, b.energy, &b.x));
        Self { samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn best(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Anything that maps a QUBO to a set of low-energy assignments.
pub trait Sampler: Send + Sync {
    fn name(&self) -> &str;
    fn sample(&self, problem: &QuboProblem) -> Result<SampleSet, EngineError>;
}

/// Simulated annealing parameters. `sweeps: None` means `100 · n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    pub sweeps: Option<usize>,
    pub restarts: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            sweeps: None,
            restarts: 10,
            beta_start: 0.1,
            beta_end: 10.0,
            seed: 0,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::InvalidParams(m.to_string()));
        if self.sweeps == Some(0) {
            return bad("sweeps must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.beta_start > 0.0 && self.beta_start < self.beta_end && self.beta_end.is_finite()) {
            return bad("need 0 < beta_start < beta_end");
        }
        Ok(())
    }
}
