//! Optimal and greedy bipartite assignment.
//!
//! [`solve_assignment`] maximizes cardinality first and minimizes total cost
//! second, which keeps gating from starving matchable pairs. Both solvers
//! scan in increasing `(row, col)` order so results are reproducible.

use crate::error::{Error, Result};

/// Rectangular cost matrix with an optional forbidden mask. Entries must be
/// finite and non-negative; forbidden entries are never assigned.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
    forbidden: Vec<bool>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>) -> Result<CostMatrix> {
        if costs.len() != rows * cols {
            return Err(Error::shape(format!(
                "cost matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                costs.len()
            )));
        }
        if costs.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::invalid("costs must be finite and non-negative"));
        }
        let forbidden = vec![false; rows * cols];
        Ok(CostMatrix { rows, cols, costs, forbidden })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<CostMatrix> {
        let mut costs = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                costs.push(f(r, c));
            }
        }
        CostMatrix::new(rows, cols, costs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.costs[r * self.cols + c]
    }

    pub fn is_forbidden(&self, r: usize, c: usize) -> bool {
        self.forbidden[r * self.cols + c]
    }

    pub fn forbid(&mut self, r: usize, c: usize) {
        self.forbidden[r * self.cols + c] = true;
    }

    /// Forbid every entry at or above `gate`.
    pub fn forbid_at_or_above(&mut self, gate: f64) {
        for i in 0..self.costs.len() {
            if self.costs[i] >= gate {
                self.forbidden[i] = true;
            }
        }
    }
}

/// One-to-one partial assignment maximizing cardinality, then minimizing
/// total cost over non-forbidden entries. Returns `(row, col)` pairs sorted
/// by row.
///
/// Forbidden entries are priced above the sum of all real costs, so the
/// minimum-cost perfect matching on the padded square matrix uses as few of
/// them as possible; those pairs (and dummy padding) are dropped from the
/// result.
pub fn solve_assignment(c: &CostMatrix) -> Vec<(usize, usize)> {
    let dim = c.rows.max(c.cols);
    if dim == 0 {
        return Vec::new();
    }
    let real_sum: f64 = (0..c.rows)
        .flat_map(|r| (0..c.cols).map(move |cc| (r, cc)))
        .filter(|&(r, cc)| !c.is_forbidden(r, cc))
        .map(|(r, cc)| c.get(r, cc))
        .sum();
    let big = real_sum + 1.0;
    let cost_at = |r: usize, cc: usize| -> f64 {
        if r < c.rows && cc < c.cols {
            if c.is_forbidden(r, cc) {
                big
            } else {
                c.get(r, cc)
            }
        } else {
            0.0
        }
    };

    // Shortest-augmenting-path Hungarian with row/column potentials, O(n^3).
    // Indices are 1-based internally; slot 0 is the virtual start column.
    let mut u = vec![0.0f64; dim + 1];
    let mut v = vec![0.0f64; dim + 1];
    let mut row_of_col = vec![0usize; dim + 1];
    let mut way = vec![0usize; dim + 1];
    for i in 1..=dim {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; dim + 1];
        let mut used = vec![false; dim + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=dim {
                if used[j] {
                    continue;
                }
                let cur = cost_at(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=dim {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        // Unwind the augmenting path.
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=dim)
        .filter_map(|j| {
            let i = row_of_col[j];
            if i == 0 {
                return None;
            }
            let (r, cc) = (i - 1, j - 1);
            if r < c.rows && cc < c.cols && !c.is_forbidden(r, cc) {
                Some((r, cc))
            } else {
                None
            }
        })
        .collect();
    pairs.sort_unstable();
    pairs
}

/// Greedy matching: repeatedly take the globally smallest unforbidden entry
/// strictly below `gate` among still-unassigned rows and columns. Ties break
/// on the lowest `(row, col)` index. Pairs are returned sorted by row.
pub fn greedy_assignment(c: &CostMatrix, gate: f64) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for r in 0..c.rows {
        for cc in 0..c.cols {
            let cost = c.get(r, cc);
            if !c.is_forbidden(r, cc) && cost < gate {
                candidates.push((cost, r, cc));
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .expect("costs are finite")
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut row_taken = vec![false; c.rows];
    let mut col_taken = vec![false; c.cols];
    let mut pairs = Vec::new();
    for (_, r, cc) in candidates {
        if !row_taken[r] && !col_taken[cc] {
            row_taken[r] = true;
            col_taken[cc] = true;
            pairs.push((r, cc));
        }
    }
    pairs.sort_unstable();
    pairs
}

pub fn total_cost(c: &CostMatrix, pairs: &[(usize, usize)]) -> f64 {
    pairs.iter().map(|&(r, cc)| c.get(r, cc)).sum()
}

/// Exhaustive search over all one-to-one partial assignments: maximum
/// cardinality, then minimum cost. Exponential; only for cross-checking the
/// solvers on tiny matrices.
pub fn brute_force_assignment(c: &CostMatrix) -> (usize, f64) {
    fn recurse(
        c: &CostMatrix,
        row: usize,
        col_used: &mut Vec<bool>,
        card: usize,
        cost: f64,
        best: &mut (usize, f64),
    ) {
        if row == c.rows() {
            if card > best.0 || (card == best.0 && cost < best.1) {
                *best = (card, cost);
            }
            return;
        }
        recurse(c, row + 1, col_used, card, cost, best);
        for cc in 0..c.cols() {
            if !col_used[cc] && !c.is_forbidden(row, cc) {
                col_used[cc] = true;
                recurse(c, row + 1, col_used, card + 1, cost + c.get(row, cc), best);
                col_used[cc] = false;
            }
        }
    }
    let mut best = (0usize, f64::INFINITY);
    let mut used = vec![false; c.cols()];
    recurse(c, 0, &mut used, 0, 0.0, &mut best);
    if best.0 == 0 {
        best.1 = 0.0;
    }
    (best.0, best.1)
}
