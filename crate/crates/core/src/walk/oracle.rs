//! Exact one-step transition probabilities, enumerated from faces, cofaces
//! and neighbour sets. Used by tests and diagnostics only.

use crate::complex::{SimplexId, SimplicialComplex};

use super::{SamplingStrategy, WalkError, WalkParams};

#[derive(Debug, Clone)]
pub struct TransitionOracle {
    pub order: usize,
    /// Row-major `n_k x n_k`; `matrix[v][u] = P(next = u | current = v)`.
    pub matrix: Vec<Vec<f64>>,
}

impl TransitionOracle {
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.matrix[from][to]
    }
}

pub fn transition_oracle(c: &SimplicialComplex, order: usize, params: WalkParams) -> Result<TransitionOracle, WalkError> {
    let n = c.count(order);
    let mut matrix = vec![vec![0.0; n]; n];
    for (v, row) in matrix.iter_mut().enumerate() {
        let s = SimplexId::new(order, v);
        match params.strategy {
            SamplingStrategy::UniformConnection => {
                let mut conns: Vec<Vec<usize>> = Vec::new();
                if params.mode.allows_faces(order) {
                    for f in c.faces(s)? {
                        conns.push(c.cofaces(f)?.iter().map(|x| x.index).collect());
                    }
                }
                if params.mode.allows_cofaces(order) {
                    for f in c.cofaces(s)? {
                        conns.push(c.faces(f)?.iter().map(|x| x.index).collect());
                    }
                }
                if conns.is_empty() {
                    row[v] = 1.0;
                    continue;
                }
                let pe = 1.0 / conns.len() as f64;
                for targets in conns {
                    let targets: Vec<usize> = if params.exclude_return && targets.len() > 1 {
                        targets.into_iter().filter(|&u| u != v).collect()
                    } else {
                        targets
                    };
                    let pu = pe / targets.len() as f64;
                    for u in targets {
                        row[u] += pu;
                    }
                }
            }
            SamplingStrategy::UniformNeighbor => {
                let mut set: Vec<usize> = Vec::new();
                if params.mode.allows_faces(order) {
                    set.extend(c.lower_neighbors(s, params.include_self)?.iter().map(|x| x.index));
                }
                if params.mode.allows_cofaces(order) {
                    set.extend(c.upper_neighbors(s, params.include_self)?.iter().map(|x| x.index));
                }
                set.sort_unstable();
                set.dedup();
                if set.is_empty() {
                    row[v] = 1.0;
                    continue;
                }
                let p = 1.0 / set.len() as f64;
                for u in set {
                    row[u] += p;
                }
            }
        }
    }
    Ok(TransitionOracle { order, matrix })
}
