use std::collections::BTreeMap;

/// Upper-triangular QUBO coefficients: `E(x) = Σ_{i≤j} q_ij x_i x_j + offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix {
    n: usize,
    /// Nonzero `(i, j, q_ij)` with `i ≤ j`, sorted by `(i, j)`.
    entries: Vec<(usize, usize, f64)>,
    offset: f64,
}

impl QuboMatrix {
    /// Accumulates possibly repeated, possibly lower-triangular entries.
    pub fn from_entries(
        n: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
        offset: f64,
    ) -> Self {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, q) in entries {
            assert!(i < n && j < n, "entry ({i}, {j}) outside {n} bits");
            let key = if i <= j { (i, j) } else { (j, i) };
            *acc.entry(key).or_insert(0.0) += q;
        }
        Self::from_map(n, acc, offset)
    }

    pub(crate) fn from_map(n: usize, acc: BTreeMap<(usize, usize), f64>, offset: f64) -> Self {
        let entries = acc
            .into_iter()
            .filter(|&(_, q)| q != 0.0)
            .map(|((i, j), q)| (i, j, q))
            .collect();
        Self { n, entries, offset }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn energy(&self, x: &[bool]) -> f64 {
        assert_eq!(x.len(), self.n, "assignment length");
        let mut e = self.offset;
        for &(i, j, q) in &self.entries {
            if x[i] && x[j] {
                e += q;
            }
        }
        e
    }

    /// Diagonal coefficients and symmetric neighbour lists `(j, q_ij)`.
    pub fn adjacency(&self) -> (Vec<f64>, Vec<Vec<(usize, f64)>>) {
        let mut diag = vec![0.0; self.n];
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j, q) in &self.entries {
            if i == j {
                diag[i] += q;
            } else {
                adj[i].push((j, q));
                adj[j].push((i, q));
            }
        }
        (diag, adj)
    }

    /// Sum of absolute coefficients; a scale for tolerances.
    pub fn magnitude(&self) -> f64 {
        self.entries.iter().map(|e| e.2.abs()).sum::<f64>() + self.offset.abs()
    }
}
