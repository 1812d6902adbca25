//! Long-run analysis of finite Markov chains.
//!
//! The limit returned is the Cesàro limit of the state-occupancy
//! distributions from a given initial law: the stationary law of every
//! closed class weighted by the probability of being absorbed into it. For
//! an irreducible chain that is simply the unique stationary distribution.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

/// Row-stochastic matrix stored as sparse rows of `(column, probability)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseChain {
    rows: Vec<Vec<(usize, f64)>>,
}

/// Result of [`SparseChain::long_run`].
#[derive(Debug, Clone)]
pub struct LongRun {
    pub distribution: Vec<f64>,
    /// Closed communicating classes of the whole chain.
    pub closed_classes: Vec<Vec<usize>>,
}

impl LongRun {
    pub fn is_unichain(&self) -> bool {
        self.closed_classes.len() == 1
    }
}

impl SparseChain {
    pub fn new(rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            let mut total = 0.0;
            for &(j, p) in row {
                if j >= n {
                    return Err(Error::param("chain", format!("row {i} points to state {j} >= {n}")));
                }
                if !(p >= 0.0) {
                    return Err(Error::param("chain", format!("row {i} has entry {p}")));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::param("chain", format!("row {i} sums to {total}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter(|&j| m[(i, j)] != 0.0)
                    .map(|j| (j, m[(i, j)]))
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// One step of the forward equation `μ ↦ μ P`.
    pub fn propagate(&self, mu: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (i, row) in self.rows.iter().enumerate() {
            if mu[i] == 0.0 {
                continue;
            }
            for &(j, p) in row {
                out[j] += mu[i] * p;
            }
        }
        out
    }

    pub fn closed_classes(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut graph = DiGraph::<(), ()>::with_capacity(n, 0);
        let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, p) in row {
                if p > 0.0 {
                    graph.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        let sccs = tarjan_scc(&graph);
        let mut owner = vec![0usize; n];
        for (c, scc) in sccs.iter().enumerate() {
            for v in scc {
                owner[v.index()] = c;
            }
        }
        let mut closed: Vec<Vec<usize>> = sccs
            .iter()
            .enumerate()
            .filter(|(c, scc)| {
                scc.iter().all(|v| {
                    self.rows[v.index()]
                        .iter()
                        .all(|&(j, p)| p == 0.0 || owner[j] == *c)
                })
            })
            .map(|(_, scc)| {
                let mut states: Vec<usize> = scc.iter().map(|v| v.index()).collect();
                states.sort_unstable();
                states
            })
            .collect();
        closed.sort();
        closed
    }

    /// Cesàro-limit occupancy starting from `init`.
    pub fn long_run(&self, init: &[f64]) -> Result<LongRun> {
        let n = self.len();
        if init.len() != n {
            return Err(Error::DimensionMismatch {
                context: "initial distribution",
                expected: (n, 1),
                actual: (init.len(), 1),
            });
        }
        let closed = self.closed_classes();
        let mut class_of = vec![None; n];
        for (c, class) in closed.iter().enumerate() {
            for &s in class {
                class_of[s] = Some(c);
            }
        }

        // absorption mass per closed class
        let mut mass: Vec<f64> = closed
            .iter()
            .map(|class| class.iter().map(|&s| init[s]).sum())
            .collect();
        let transient: Vec<usize> = (0..n).filter(|&s| class_of[s].is_none()).collect();
        if !transient.is_empty() && transient.iter().any(|&t| init[t] > 0.0) {
            let mut local = vec![usize::MAX; n];
            for (k, &t) in transient.iter().enumerate() {
                local[t] = k;
            }
            let m = transient.len();
            // (I − P_TT)ᵀ x = μ_T: x is the expected number of visits.
            let mut a = DMatrix::<f64>::identity(m, m);
            for (k, &t) in transient.iter().enumerate() {
                for &(j, p) in &self.rows[t] {
                    if local[j] != usize::MAX {
                        a[(local[j], k)] -= p;
                    }
                }
            }
            let rhs = DVector::from_iterator(m, transient.iter().map(|&t| init[t]));
            let visits = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::param("chain", "singular transient system"))?;
            for (k, &t) in transient.iter().enumerate() {
                for &(j, p) in &self.rows[t] {
                    if let Some(c) = class_of[j] {
                        mass[c] += visits[k] * p;
                    }
                }
            }
        }

        let mut distribution = vec![0.0; n];
        for (class, &w) in closed.iter().zip(&mass) {
            if w <= 0.0 {
                continue;
            }
            let pi = self.class_stationary(class)?;
            for (&s, p) in class.iter().zip(pi) {
                distribution[s] += w * p;
            }
        }
        let total: f64 = distribution.iter().sum();
        if total > 0.0 {
            for p in &mut distribution {
                *p /= total;
            }
        }
        Ok(LongRun {
            distribution,
            closed_classes: closed,
        })
    }

    /// Stationary law of a closed class: solve `π (I − P) = 0` with one
    /// balance equation replaced by `Σ π = 1`.
    fn class_stationary(&self, class: &[usize]) -> Result<Vec<f64>> {
        let k = class.len();
        if k == 1 {
            return Ok(vec![1.0]);
        }
        let mut local = std::collections::HashMap::with_capacity(k);
        for (i, &s) in class.iter().enumerate() {
            local.insert(s, i);
        }
        let mut a = DMatrix::<f64>::identity(k, k);
        for (i, &s) in class.iter().enumerate() {
            for &(j, p) in &self.rows[s] {
                if let Some(&jj) = local.get(&j) {
                    a[(jj, i)] -= p;
                }
            }
        }
        for i in 0..k {
            a[(k - 1, i)] = 1.0;
        }
        let mut rhs = DVector::zeros(k);
        rhs[k - 1] = 1.0;
        let pi = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::param("chain", "singular stationary system"))?;
        let mut pi: Vec<f64> = pi.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = pi.iter().sum();
        for p in &mut pi {
            *p /= total;
        }
        Ok(pi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_init() {
        let chain = SparseChain::from_dense(&DMatrix::identity(3, 3)).unwrap();
        let lr = chain.long_run(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(lr.distribution, vec![0.0, 1.0, 0.0]);
        assert_eq!(lr.closed_classes.len(), 3);
    }

    #[test]
    fn periodic_pair() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let chain = SparseChain::from_dense(&m).unwrap();
        let lr = chain.long_run(&[1.0, 0.0]).unwrap();
        assert!((lr.distribution[0] - 0.5).abs() < 1e-15);
        assert!(lr.is_unichain());
    }

    #[test]
    fn absorption_split_matches_gamblers_ruin() {
        // 0 and 3 absorbing, fair walk in between; from 1 absorbed at 0 w.p. 2/3.
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[1.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0],
        );
        let chain = SparseChain::from_dense(&m).unwrap();
        let lr = chain.long_run(&[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((lr.distribution[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((lr.distribution[3] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn matches_power_iteration_on_irreducible_chain() {
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.4, 0.4, 0.2]);
        let chain = SparseChain::from_dense(&m).unwrap();
        let lr = chain.long_run(&[1.0, 0.0, 0.0]).unwrap();
        let mut mu = vec![1.0, 0.0, 0.0];
        for _ in 0..500 {
            mu = chain.propagate(&mu);
        }
        for (a, b) in lr.distribution.iter().zip(&mu) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(SparseChain::new(vec![vec![(0, 0.5)]]).is_err());
        assert!(SparseChain::new(vec![vec![(1, 1.0)]]).is_err());
    }
}
