use std::cmp::Ordering;
use std::collections::HashMap;

use super::{EngineError, Sample, SampleSet, Sampler};
use crate::qubo::{QuboMatrix, QuboProblem};

/// Largest bit count enumerated directly.
pub const MAX_ENUM_BITS: usize = 24;
/// Largest group of mutually coupled auxiliary bits the split sampler accepts.
pub const MAX_COMPONENT_BITS: usize = 20;

/// Lexicographic order of two masks read from bit 0 upwards.
fn lex_cmp(a: u64, b: u64) -> Ordering {
    let d = a ^ b;
    if d == 0 {
        Ordering::Equal
    } else if a & (d & d.wrapping_neg()) == 0 {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

fn mask_bits(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|b| mask >> b & 1 == 1).collect()
}

/// Global minimum by Gray-code enumeration; ties go to the lexicographically
/// smallest assignment.
pub fn solve_exhaustive(m: &QuboMatrix) -> Result<SampleSet, EngineError> {
    let n = m.n();
    if n > MAX_ENUM_BITS {
        return Err(EngineError::TooLarge {
            bits: n,
            max: MAX_ENUM_BITS,
        });
    }
    let (diag, adj) = m.adjacency();
    let tol = 1e-9 * (1.0 + m.magnitude());
    let mut x = 0u64;
    let mut e = m.offset();
    let mut best = (e, 0u64);
    for step in 1u64..1 << n {
        let bit = step.trailing_zeros() as usize;
        let mut field = diag[bit];
        for &(j, q) in &adj[bit] {
            if x >> j & 1 == 1 {
                field += q;
            }
        }
        if x >> bit & 1 == 1 {
            e -= field;
        } else {
            e += field;
        }
        x ^= 1 << bit;
        if e <= best.0 + tol {
            let exact = m.energy(&mask_bits(x, n));
            let cur = m.energy(&mask_bits(best.1, n));
            if exact < cur || (exact == cur && lex_cmp(x, best.1) == Ordering::Less) {
                best = (exact, x);
            } else {
                best.0 = cur;
            }
        }
    }
    Ok(SampleSet::from_states(m, [mask_bits(best.1, n)]))
}

/// Auxiliary bits that interact with each other, and the unit bits they see.
struct Component {
    bits: Vec<usize>,
    units: Vec<usize>,
    diag: Vec<f64>,
    /// Couplings inside the component, by local index.
    inner: Vec<(usize, usize, f64)>,
    /// Couplings to unit bits: (local aux, position in `units`, q).
    outer: Vec<(usize, usize, f64)>,
}

impl Component {
    fn minimize(&self, pattern: u64) -> (f64, u64) {
        let s = self.bits.len();
        let mut lin = self.diag.clone();
        for &(a, p, q) in &self.outer {
            if pattern >> p & 1 == 1 {
                lin[a] += q;
            }
        }
        let mut best = (0.0, 0u64);
        for mask in 1u64..1 << s {
            let mut e = 0.0;
            for (a, l) in lin.iter().enumerate() {
                if mask >> a & 1 == 1 {
                    e += l;
                }
            }
            for &(a, b, q) in &self.inner {
                if mask >> a & 1 == 1 && mask >> b & 1 == 1 {
                    e += q;
                }
            }
            if e < best.0 || (e == best.0 && lex_cmp(mask, best.1) == Ordering::Less) {
                best = (e, mask);
            }
        }
        best
    }
}

/// Exact sampler that enumerates the commitment bits and minimizes every
/// group of coupled auxiliary bits separately, memoized on the commitment
/// bits the group touches. Returns the `num_reads` lowest-energy distinct
/// schedules (all of them when `None`), each completed with its best
/// auxiliary bits.
#[derive(Debug, Clone, Default)]
pub struct ExhaustiveSampler {
    pub num_reads: Option<usize>,
}

impl ExhaustiveSampler {
    pub fn best_only() -> Self {
        Self { num_reads: Some(1) }
    }

    pub fn all() -> Self {
        Self { num_reads: None }
    }
}

fn components(m: &QuboMatrix, first_aux: usize) -> Result<Vec<Component>, EngineError> {
    let n = m.n();
    let (diag, adj) = m.adjacency();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in first_aux..n {
        if seen[start] {
            continue;
        }
        let mut bits = vec![start];
        seen[start] = true;
        let mut head = 0;
        while head < bits.len() {
            let b = bits[head];
            head += 1;
            for &(j, _) in &adj[b] {
                if j >= first_aux && !seen[j] {
                    seen[j] = true;
                    bits.push(j);
                }
            }
        }
        bits.sort_unstable();
        if bits.len() > MAX_COMPONENT_BITS {
            return Err(EngineError::TooLarge {
                bits: bits.len(),
                max: MAX_COMPONENT_BITS,
            });
        }
        let local = |g: usize| bits.binary_search(&g).ok();
        let mut units: Vec<usize> = bits
            .iter()
            .flat_map(|&b| adj[b].iter().map(|e| e.0))
            .filter(|&j| j < first_aux)
            .collect();
        units.sort_unstable();
        units.dedup();
        let mut inner = Vec::new();
        let mut outer = Vec::new();
        for (a, &b) in bits.iter().enumerate() {
            for &(j, q) in &adj[b] {
                if j < first_aux {
                    outer.push((a, units.binary_search(&j).unwrap(), q));
                } else if j > b {
                    inner.push((a, local(j).unwrap(), q));
                }
            }
        }
        out.push(Component {
            diag: bits.iter().map(|&b| diag[b]).collect(),
            bits,
            units,
            inner,
            outer,
        });
    }
    Ok(out)
}

impl Sampler for ExhaustiveSampler {
    fn name(&self) -> &str {
        "exhaustive"
    }

    fn sample(&self, problem: &QuboProblem) -> Result<SampleSet, EngineError> {
        let m = &problem.matrix;
        let first_aux = problem.registry.unit_bits().end;
        if first_aux > MAX_ENUM_BITS {
            return Err(EngineError::TooLarge {
                bits: first_aux,
                max: MAX_ENUM_BITS,
            });
        }
        let comps = components(m, first_aux)?;
        let mut memo: Vec<HashMap<u64, (f64, u64)>> = vec![HashMap::new(); comps.len()];

        // Unit-only part, walked in Gray-code order.
        let (diag, adj) = m.adjacency();
        let keep = self.num_reads.unwrap_or(usize::MAX).max(1);
        let mut pool: Vec<(f64, u64)> = Vec::new();
        let order = |a: &(f64, u64), b: &(f64, u64)| a.0.total_cmp(&b.0).then_with(|| lex_cmp(a.1, b.1));
        let mut x = 0u64;
        let mut unit_e = m.offset();
        for step in 0u64..1 << first_aux {
            if step > 0 {
                let bit = step.trailing_zeros() as usize;
                let mut field = diag[bit];
                for &(j, q) in &adj[bit] {
                    if j < first_aux && x >> j & 1 == 1 {
                        field += q;
                    }
                }
                unit_e += if x >> bit & 1 == 1 { -field } else { field };
                x ^= 1 << bit;
            }
            let mut e = unit_e;
            for (c, comp) in comps.iter().enumerate() {
                let pattern = comp
                    .units
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (p, &u)| acc | (x >> u & 1) << p);
                e += memo[c].entry(pattern).or_insert_with(|| comp.minimize(pattern)).0;
            }
            pool.push((e, x));
            if keep < usize::MAX && pool.len() >= 2 * keep + 1024 {
                pool.sort_by(order);
                pool.truncate(keep);
            }
        }
        pool.sort_by(order);
        pool.truncate(keep);

        let samples = pool
            .into_iter()
            .map(|(_, units)| {
                let mut bits = mask_bits(units, first_aux);
                bits.resize(m.n(), false);
                for (c, comp) in comps.iter().enumerate() {
                    let pattern = comp
                        .units
                        .iter()
                        .enumerate()
                        .fold(0u64, |acc, (p, &u)| acc | (units >> u & 1) << p);
                    let aux = memo[c][&pattern].1;
                    for (a, &b) in comp.bits.iter().enumerate() {
                        bits[b] = aux >> a & 1 == 1;
                    }
                }
                Sample {
                    energy: m.energy(&bits),
                    x: bits,
                    multiplicity: 1,
                }
            })
            .collect();
        Ok(SampleSet::from_samples(samples))
    }
}
