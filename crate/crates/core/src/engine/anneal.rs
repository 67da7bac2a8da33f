use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{EngineError, SampleSet, Sampler, SamplerParams};
use crate::qubo::{QuboMatrix, QuboProblem};

/// Metropolis single-flip annealing over a geometric inverse-temperature
/// schedule. Each restart draws from its own stream seeded with
/// `seed ^ restart` and contributes the best state it visited.
pub fn solve_sa(m: &QuboMatrix, p: &SamplerParams) -> Result<SampleSet, EngineError> {
    p.validate()?;
    let n = m.n();
    if n == 0 {
        return Ok(SampleSet::from_states(m, [Vec::new()]));
    }
    let sweeps = p.sweeps.unwrap_or(100 * n).max(1);
    let (diag, adj) = m.adjacency();
    let tol = 1e-7 * (1.0 + m.magnitude());
    let betas: Vec<f64> = (0..sweeps)
        .map(|s| {
            if sweeps == 1 {
                p.beta_end
            } else {
                let f = s as f64 / (sweeps - 1) as f64;
                p.beta_start * (p.beta_end / p.beta_start).powf(f)
            }
        })
        .collect();

    let states: Vec<Vec<bool>> = (0..p.restarts as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ r);
            let mut x: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            let mut field: Vec<f64> = (0..n)
                .map(|i| diag[i] + adj[i].iter().filter(|e| x[e.0]).map(|e| e.1).sum::<f64>())
                .collect();
            let mut e = m.energy(&x);
            let mut best = (e, x.clone());
            for &beta in &betas {
                for i in 0..n {
                    let delta = if x[i] { -field[i] } else { field[i] };
                    if delta <= 0.0 || rng.gen::<f64>() < (-beta * delta).exp() {
                        let sign = if x[i] { -1.0 } else { 1.0 };
                        x[i] = !x[i];
                        e += delta;
                        for &(j, q) in &adj[i] {
                            field[j] += sign * q;
                        }
                    }
                }
                debug_assert!(
                    (e - m.energy(&x)).abs() <= tol,
                    "incremental energy drifted: {e} vs {}",
                    m.energy(&x)
                );
                if e < best.0 {
                    best = (e, x.clone());
                }
            }
            let exact = m.energy(&x);
            assert!((e - exact).abs() <= tol, "incremental energy drifted");
            best.1
        })
        .collect();
    Ok(SampleSet::from_states(m, states))
}

#[derive(Debug, Clone, Default)]
pub struct AnnealingSampler {
    pub params: SamplerParams,
}

impl Sampler for AnnealingSampler {
    fn name(&self) -> &str {
        "sa"
    }

    fn sample(&self, problem: &QuboProblem) -> Result<SampleSet, EngineError> {
        solve_sa(&problem.matrix, &self.params)
    }
}
