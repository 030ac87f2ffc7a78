//! Task connectivity graphs and the kernels derived from them.

use std::collections::VecDeque;
use std::num::NonZeroUsize;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::StochasticMatrix;

/// Digraph of one-hop controllable task transitions.
///
/// Every task has a self-loop and the digraph is strongly connected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<bool>>", into = "Vec<Vec<bool>>")]
pub struct TaskGraph {
    num_tasks: usize,
    edges: Vec<bool>,
}

impl TaskGraph {
    pub fn from_adjacency(rows: Vec<Vec<bool>>) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidGraph("graph has no tasks".into()));
        }
        let mut edges = Vec::with_capacity(m * m);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidGraph(format!(
                    "row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if !row[i] {
                return Err(Error::InvalidGraph(format!("task {i} lacks a self-loop")));
            }
            edges.extend(row);
        }
        let g = Self { num_tasks: m, edges };
        if !strongly_connected(m, |i, j| g.has_edge(i, j)) {
            return Err(Error::InvalidGraph("graph is not strongly connected".into()));
        }
        Ok(g)
    }

    pub fn num_tasks(&self) -> usize {
        self.num_tasks
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges[i * self.num_tasks + j]
    }

    /// Number of outgoing edges of `i`, self-loop included.
    pub fn degree(&self, i: usize) -> usize {
        self.row(i).iter().filter(|&&e| e).count()
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.edges[i * self.num_tasks..(i + 1) * self.num_tasks]
    }

    pub fn to_adjacency(&self) -> Vec<Vec<bool>> {
        self.edges.chunks(self.num_tasks).map(<[bool]>::to_vec).collect()
    }
}

impl TryFrom<Vec<Vec<bool>>> for TaskGraph {
    type Error = Error;

    fn try_from(rows: Vec<Vec<bool>>) -> Result<Self> {
        Self::from_adjacency(rows)
    }
}

impl From<TaskGraph> for Vec<Vec<bool>> {
    fn from(g: TaskGraph) -> Self {
        g.to_adjacency()
    }
}

/// `rows × cols` lattice where each task connects to its (up to 8) Moore
/// neighbours and itself. Tasks are numbered row-major.
pub fn build_moore_grid(rows: NonZeroUsize, cols: NonZeroUsize) -> TaskGraph {
    let (r, c) = (rows.get(), cols.get());
    let m = r * c;
    let mut edges = vec![false; m * m];
    for i in 0..r {
        for j in 0..c {
            let from = i * c + j;
            for ni in i.saturating_sub(1)..=(i + 1).min(r - 1) {
                for nj in j.saturating_sub(1)..=(j + 1).min(c - 1) {
                    edges[from * m + ni * c + nj] = true;
                }
            }
        }
    }
    TaskGraph { num_tasks: m, edges }
}

/// Uniform random walk on `g`: each row spreads mass evenly over the task's
/// neighbours, itself included.
pub fn normalize_adjacency(g: &TaskGraph) -> StochasticMatrix {
    let m = g.num_tasks();
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        let w = 1.0 / g.degree(i) as f64;
        for j in 0..m {
            if g.has_edge(i, j) {
                entries[i * m + j] = w;
            }
        }
    }
    StochasticMatrix::from_raw(m, entries)
}

/// Strong connectivity of the digraph of positive entries of `p`.
pub fn is_irreducible(p: &StochasticMatrix) -> bool {
    strongly_connected(p.dim(), |i, j| p.get(i, j) > 0.0)
}

fn strongly_connected(m: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let reach_all = |forward: bool| {
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for v in 0..m {
                let linked = if forward { edge(u, v) } else { edge(v, u) };
                if linked && !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == m
    };
    reach_all(true) && reach_all(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nz(n: usize) -> NonZeroUsize {
        NonZeroUsize::new(n).unwrap()
    }

    #[test]
    fn moore_grid_degrees() {
        let g = build_moore_grid(nz(5), nz(7));
        assert_eq!(g.num_tasks(), 35);
        let neighbours = |i| g.degree(i) - 1;
        assert_eq!(neighbours(0), 3);
        assert_eq!(neighbours(6), 3);
        assert_eq!(neighbours(34), 3);
        assert_eq!(neighbours(3), 5);
        assert_eq!(neighbours(7), 5);
        assert_eq!(neighbours(8), 8);
        assert_eq!(neighbours(2 * 7 + 3), 8);
        let mut counts = [0usize; 9];
        for i in 0..35 {
            counts[neighbours(i)] += 1;
        }
        assert_eq!((counts[3], counts[5], counts[8]), (4, 16, 15));
        assert!(strongly_connected(35, |i, j| g.has_edge(i, j)));
    }

    #[test]
    fn degenerate_grids() {
        let one = build_moore_grid(nz(1), nz(1));
        assert_eq!(one.to_adjacency(), vec![vec![true]]);
        let four = build_moore_grid(nz(2), nz(2));
        assert!(four.edges.iter().all(|&e| e));
    }

    #[test]
    fn normalized_kernels() {
        let p = normalize_adjacency(&build_moore_grid(nz(2), nz(2)));
        assert!(p.entries().iter().all(|&v| v == 0.25));
        let p = normalize_adjacency(&build_moore_grid(nz(1), nz(1)));
        assert_eq!(p.entries(), &[1.0]);
        let p = normalize_adjacency(&build_moore_grid(nz(1), nz(2)));
        assert_eq!(p.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        let p = normalize_adjacency(&build_moore_grid(nz(5), nz(7)));
        assert!(p.row_sum_deviation() < 1e-12);
        assert!(is_irreducible(&p));
        assert!((0..35).all(|i| p.diagonal(i) > 0.0));
    }

    #[test]
    fn irreducibility_examples() {
        let u = StochasticMatrix::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let abs = StochasticMatrix::from_rows(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(is_irreducible(&u));
        assert!(!is_irreducible(&abs));
        assert!(is_irreducible(&StochasticMatrix::identity(1)));
        assert!(!is_irreducible(&StochasticMatrix::identity(2)));
    }

    #[test]
    fn adjacency_validation() {
        assert!(TaskGraph::from_adjacency(vec![]).is_err());
        assert!(TaskGraph::from_adjacency(vec![vec![false]]).is_err());
        assert!(TaskGraph::from_adjacency(vec![vec![true, false], vec![false, true]]).is_err());
        assert!(TaskGraph::from_adjacency(vec![vec![true, true], vec![true]]).is_err());
        // directed 3-cycle with self-loops
        let g = TaskGraph::from_adjacency(vec![
            vec![true, true, false],
            vec![false, true, true],
            vec![true, false, true],
        ])
        .unwrap();
        assert_eq!(g.degree(0), 2);
    }
}
