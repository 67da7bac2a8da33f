use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};

use super::{EngineError, Sample, SampleSet, Sampler};
use crate::qubo::{write_dump, QuboProblem};

/// Out-of-process sampler. The child reads `reads K budget_ms M` followed by
/// the QUBO dump on stdin and answers with `energy multiplicity bitstring`
/// lines on stdout. Energies are recomputed locally and must agree.
#[derive(Debug, Clone)]
pub struct CommandSampler {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub num_reads: usize,
    pub budget_ms: u64,
}

impl CommandSampler {
    pub fn request(&self, problem: &QuboProblem) -> String {
        format!(
            "reads {} budget_ms {}\n{}",
            self.num_reads,
            self.budget_ms,
            write_dump(problem)
        )
    }
}

pub(crate) fn parse_response(problem: &QuboProblem, text: &str) -> Result<SampleSet, EngineError> {
    let n = problem.n();
    let mut samples = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let bad = |m: &str| EngineError::BadResponse(format!("{m}: `{line}`"));
        let f: Vec<&str> = line.split_whitespace().collect();
        let [energy, mult, bits] = f[..] else {
            return Err(bad("expected 3 fields"));
        };
        let energy: f64 = energy.parse().map_err(|_| bad("energy"))?;
        let multiplicity: usize = mult.parse().map_err(|_| bad("multiplicity"))?;
        if bits.len() != n || !bits.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(bad("bitstring"));
        }
        let x: Vec<bool> = bits.bytes().map(|b| b == b'1').collect();
        let local = problem.energy(&x);
        if (local - energy).abs() > 1e-6 * (1.0 + local.abs()) {
            return Err(bad(&format!("energy disagrees with local value {local}")));
        }
        samples.push(Sample {
            x,
            energy: local,
            multiplicity,
        });
    }
    if samples.is_empty() {
        return Err(EngineError::BadResponse("no samples".into()));
    }
    Ok(SampleSet::from_samples(samples))
}

impl Sampler for CommandSampler {
    fn name(&self) -> &str {
        "command"
    }

    fn sample(&self, problem: &QuboProblem) -> Result<SampleSet, EngineError> {
        let backend = |e: std::io::Error| EngineError::Backend(e.to_string());
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(backend)?;
        let request = self.request(problem);
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(request.as_bytes()));
        let mut out = String::new();
        child
            .stdout
            .take()
            .expect("piped stdout")
            .read_to_string(&mut out)
            .map_err(backend)?;
        let status = child.wait().map_err(backend)?;
        // A backend may stop reading early; only its answer matters.
        let _ = writer.join();
        if !status.success() {
            let mut err = String::new();
            if let Some(mut s) = child.stderr.take() {
                let _ = s.read_to_string(&mut err);
            }
            return Err(EngineError::Backend(format!("{status}: {}", err.trim())));
        }
        parse_response(problem, &out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cuts::CutPool;
    use crate::model::{CommitmentRule, CommitmentRules, InitialState};
    use crate::qubo::{build_qubo, PenaltyConfig};

    fn two_bits() -> QuboProblem {
        let rules = CommitmentRules {
            horizon: 1,
            rules: vec![
                CommitmentRule {
                    t_on: 1,
                    t_off: 1,
                    initial: InitialState { was_on: false, duration: 1 },
                };
                2
            ],
        };
        build_qubo(&CutPool::new(), &rules, &PenaltyConfig::default(), 0.0).unwrap()
    }

    #[test]
    fn shell_backend_round_trip() {
        let p = two_bits();
        let sampler = CommandSampler {
            program: "sh".into(),
            args: vec![
                "-c".into(),
                "read h; case \"$h\" in 'reads 4 budget_ms 10') ;; *) exit 9;; esac; cat >/dev/null; echo '0 3 00'; echo '0 1 10'".into(),
            ],
            num_reads: 4,
            budget_ms: 10,
        };
        let set = sampler.sample(&p).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.best().unwrap().x, vec![false, false]);
        assert_eq!(set.best().unwrap().multiplicity, 3);
    }

    #[test]
    fn malformed_answers_are_rejected() {
        let p = two_bits();
        assert!(parse_response(&p, "0 1 0").is_err());
        assert!(parse_response(&p, "5 1 00").is_err());
        assert!(parse_response(&p, "").is_err());
        let failing = CommandSampler {
            program: "sh".into(),
            args: vec!["-c".into(), "cat >/dev/null; echo nope >&2; exit 3".into()],
            num_reads: 1,
            budget_ms: 0,
        };
        assert!(matches!(failing.sample(&p), Err(EngineError::Backend(m)) if m.contains("nope")));
    }
}
