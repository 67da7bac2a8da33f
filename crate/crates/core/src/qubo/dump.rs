use std::fmt::Write as _;

use super::build::QuboProblem;
use super::matrix::QuboMatrix;
use super::registry::BitMeaning;

/// Text form: `n offset`, then `i j q` per nonzero, then `bit meaning`.
/// Reals are printed with 17 significant digits so they parse back exactly.
pub fn write_dump(problem: &QuboProblem) -> String {
    let mut out = String::new();
    write_matrix(&mut out, &problem.matrix);
    for (bit, meaning) in problem.registry.entries().iter().enumerate() {
        writeln!(out, "{bit} {meaning}").unwrap();
    }
    out
}

fn write_matrix(out: &mut String, m: &QuboMatrix) {
    writeln!(out, "{} {:.16e}", m.n(), m.offset()).unwrap();
    for &(i, j, q) in m.entries() {
        writeln!(out, "{i} {j} {q:.16e}").unwrap();
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedDump {
    pub matrix: QuboMatrix,
    pub meanings: Vec<BitMeaning>,
}

pub fn parse_dump(text: &str) -> Result<ParsedDump, String> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or("empty dump")?;
    let mut head = header.split_whitespace();
    let n: usize = head
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or("header: bad bit count")?;
    let offset: f64 = head
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or("header: bad offset")?;
    let mut entries = Vec::new();
    let mut meanings = Vec::new();
    for (no, line) in lines {
        let err = |m: &str| format!("line {}: {m}", no + 1);
        let (first, rest) = line.trim().split_once(' ').ok_or_else(|| err("too few fields"))?;
        let idx: usize = first.parse().map_err(|_| err("bad index"))?;
        let mut tail = rest.split_whitespace();
        let second = tail.next().ok_or_else(|| err("too few fields"))?;
        if let Ok(j) = second.parse::<usize>() {
            let q: f64 = tail
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| err("bad coefficient"))?;
            if idx > j || j >= n {
                return Err(err("entry outside upper triangle"));
            }
            entries.push((idx, j, q));
        } else {
            if idx != meanings.len() {
                return Err(err("registry out of order"));
            }
            meanings.push(rest.parse::<BitMeaning>().map_err(|e| err(&e))?);
        }
    }
    if !meanings.is_empty() && meanings.len() != n {
        return Err(format!("registry has {} bits, header says {n}", meanings.len()));
    }
    Ok(ParsedDump {
        matrix: QuboMatrix::from_entries(n, entries, offset),
        meanings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::{CutCoeffs, CutPool, CutScope, FeasibilityCut};
    use crate::model::{CommitmentRule, CommitmentRules, InitialState};
    use crate::qubo::{build_qubo, PenaltyConfig};

    #[test]
    fn dump_round_trips_bit_exactly() {
        let rules = CommitmentRules {
            horizon: 3,
            rules: vec![
                CommitmentRule {
                    t_on: 2,
                    t_off: 2,
                    initial: InitialState { was_on: true, duration: 1 },
                };
                2
            ],
        };
        let mut pool = CutPool::new();
        let mut coeffs = CutCoeffs::zeros(2, 3);
        coeffs.values[1] = -1.0 / 3.0;
        coeffs.values[4] = -0.7;
        pool.push_feasibility(FeasibilityCut {
            iter: 0,
            scope: CutScope::Hour(1),
            coeffs,
            constant: 0.9,
        })
        .unwrap();
        let p = build_qubo(&pool, &rules, &PenaltyConfig::default(), 0.0).unwrap();
        let text = write_dump(&p);
        let back = parse_dump(&text).unwrap();
        assert_eq!(back.matrix, p.matrix);
        assert_eq!(back.meanings, p.registry.entries());
        assert!(text.contains("slack_fea 0 1 0"));
        assert!(parse_dump("2 0\n0 5 1.0\n").is_err());
    }
}
