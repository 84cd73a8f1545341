//! Strategy matrix `S = sum_i b_i b_i^T` and strategy-equivalent partitions.

use std::collections::BTreeMap;
use std::fmt;

use crate::linalg::Matrix;
use crate::topology::{strategy_vector, Topology};

/// Symmetric `(H+1) x (H+1)` matrix of nonnegative integers. Entry `(i, j)`
/// counts agents whose strategy vector covers both slots `i` and `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrategyMatrix {
    size: usize,
    entries: Vec<u64>,
}

impl StrategyMatrix {
    fn zeros(size: usize) -> Self {
        StrategyMatrix {
            size,
            entries: vec![0; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.entries[i * self.size + j]
    }

    fn add(&mut self, i: usize, j: usize, v: u64) {
        self.entries[i * self.size + j] += v;
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.entries
            .chunks(self.size)
            .map(<[u64]>::to_vec)
            .collect()
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.entries[i * self.size..(i + 1) * self.size]
            .iter()
            .sum()
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_fn(self.size, self.size, |i, j| self.get(i, j) as f64)
    }

    /// Symmetry, `S[0][0] = H`, and row 0 equal to the diagonal.
    pub fn check_invariants(&self) -> bool {
        let n = self.size;
        (0..n).all(|i| (0..n).all(|j| self.get(i, j) == self.get(j, i)))
            && self.get(0, 0) == (n - 1) as u64
            && (0..n).all(|i| self.get(0, i) == self.get(i, i))
    }
}

impl fmt::Display for StrategyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .entries
            .iter()
            .map(|v| v.to_string().len())
            .max()
            .unwrap_or(1);
        for row in self.entries.chunks(self.size) {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:>width$}")).collect();
            writeln!(f, "{}", cells.join(" "))?;
        }
        Ok(())
    }
}

/// Sum of outer products of all strategy vectors.
pub fn strategy_matrix(top: &Topology) -> StrategyMatrix {
    let n = top.agents() + 1;
    let mut s = StrategyMatrix::zeros(n);
    for agent in 1..=top.agents() {
        let b = strategy_vector(top, agent).expect("agent index in range");
        for i in 0..n {
            for j in 0..n {
                s.add(i, j, u64::from(b[i] * b[j]));
            }
        }
    }
    s
}

/// Same matrix by counting: entry `(i, j)` is the number of agents `k` whose
/// closed neighbourhood, extended with the regulator, contains both `i` and `j`.
pub fn common_neighbor_matrix(top: &Topology) -> StrategyMatrix {
    let h = top.agents();
    let mut adjacent = vec![false; (h + 1) * (h + 1)];
    for (a, b) in top.edges() {
        adjacent[a * (h + 1) + b] = true;
        adjacent[b * (h + 1) + a] = true;
    }
    let covers = |k: usize, slot: usize| slot == 0 || slot == k || adjacent[k * (h + 1) + slot];
    let mut s = StrategyMatrix::zeros(h + 1);
    for i in 0..=h {
        for j in 0..=h {
            let count = (1..=h).filter(|&k| covers(k, i) && covers(k, j)).count();
            s.add(i, j, count as u64);
        }
    }
    s
}

/// Partition of `{0, ..., H}` with the regulator alone in cell 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cells: Vec<Vec<usize>>,
}

impl Partition {
    /// Sorts members and orders cells by their minimum member.
    pub fn new(mut cells: Vec<Vec<usize>>) -> Self {
        for c in &mut cells {
            c.sort_unstable();
        }
        cells.retain(|c| !c.is_empty());
        cells.sort_by_key(|c| c[0]);
        Partition { cells }
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn nontrivial_cells(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.cells.iter().filter(|c| c.len() > 1)
    }

    /// Index of the cell containing each slot.
    pub fn cell_of(&self) -> Vec<usize> {
        let size = self.cells.iter().map(Vec::len).sum();
        let mut out = vec![usize::MAX; size];
        for (k, cell) in self.cells.iter().enumerate() {
            for &m in cell {
                out[m] = k;
            }
        }
        out
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self
            .cells
            .iter()
            .map(|c| {
                let m: Vec<String> = c.iter().map(usize::to_string).collect();
                format!("{{{}}}", m.join(","))
            })
            .collect();
        write!(f, "{{{}}}", cells.join(", "))
    }
}

pub fn cell_strategy_count(s: &StrategyMatrix, i: usize, cell: &[usize]) -> u64 {
    cell.iter().map(|&k| s.get(i, k)).sum()
}

/// True when every two members of a cell send the same strategy count into
/// every cell.
pub fn is_equitable(s: &StrategyMatrix, p: &Partition) -> bool {
    p.cells().iter().all(|cell| {
        p.cells().iter().all(|target| {
            let first = cell_strategy_count(s, cell[0], target);
            cell.iter()
                .all(|&i| cell_strategy_count(s, i, target) == first)
        })
    })
}

/// Coarsest strategy-equivalent partition, by signature refinement from
/// `{{0}, {1..H}}`. The regulator stays a singleton.
pub fn coarsest_sep(s: &StrategyMatrix) -> Partition {
    coarsest_sep_traced(s).0
}

/// As [`coarsest_sep`], also returning the number of refinement rounds that
/// changed the partition.
pub fn coarsest_sep_traced(s: &StrategyMatrix) -> (Partition, usize) {
    let n = s.size();
    let mut colour: Vec<usize> = (0..n).map(|i| usize::from(i != 0)).collect();
    let mut colours = if n > 1 { 2 } else { 1 };
    let mut rounds = 0;
    loop {
        // Signature: own colour, then the strategy count into each colour class.
        let mut classes: BTreeMap<(usize, Vec<u64>), usize> = BTreeMap::new();
        let signatures: Vec<(usize, Vec<u64>)> = (0..n)
            .map(|i| {
                let mut sums = vec![0u64; colours];
                for k in 0..n {
                    sums[colour[k]] += s.get(i, k);
                }
                (colour[i], sums)
            })
            .collect();
        // Number new classes in order of first appearance so labels stay stable.
        let mut next = Vec::with_capacity(n);
        for sig in &signatures {
            let fresh = classes.len();
            next.push(*classes.entry(sig.clone()).or_insert(fresh));
        }
        let count = classes.len();
        if count == colours {
            break;
        }
        colour = next;
        colours = count;
        rounds += 1;
    }
    let mut cells = vec![Vec::new(); colours];
    for (i, &c) in colour.iter().enumerate() {
        cells[c].push(i);
    }
    (Partition::new(cells), rounds)
}

pub fn has_nontrivial_cell(p: &Partition) -> bool {
    p.cells().iter().any(|c| c.len() >= 2)
}
