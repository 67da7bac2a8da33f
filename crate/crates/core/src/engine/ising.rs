use crate::qubo::QuboMatrix;

/// Spin form `E(s) = Σ h_i s_i + Σ_{i<j} J_ij s_i s_j + offset`, with
/// `x = (1 − s) / 2`, so spin up is bit zero.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingProblem {
    pub h: Vec<f64>,
    pub j: Vec<(usize, usize, f64)>,
    pub offset: f64,
}

impl IsingProblem {
    pub fn energy(&self, s: &[i8]) -> f64 {
        assert_eq!(s.len(), self.h.len(), "spin vector length");
        let mut e = self.offset;
        for (hi, &si) in self.h.iter().zip(s) {
            e += hi * si as f64;
        }
        for &(i, j, c) in &self.j {
            e += c * (s[i] * s[j]) as f64;
        }
        e
    }

    pub fn spins(x: &[bool]) -> Vec<i8> {
        x.iter().map(|&b| if b { -1 } else { 1 }).collect()
    }
}

pub fn to_ising(m: &QuboMatrix) -> IsingProblem {
    let mut h = vec![0.0; m.n()];
    let mut j = Vec::new();
    let mut offset = m.offset();
    for &(a, b, q) in m.entries() {
        if a == b {
            h[a] -= q / 2.0;
            offset += q / 2.0;
        } else {
            h[a] -= q / 4.0;
            h[b] -= q / 4.0;
            j.push((a, b, q / 4.0));
            offset += q / 4.0;
        }
    }
    IsingProblem { h, j, offset }
}
