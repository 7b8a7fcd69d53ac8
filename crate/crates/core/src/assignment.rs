//! Linear assignment (Hungarian method) and maximum bipartite matching.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dense row-major cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> CostMatrix<T> {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::RaggedMatrix);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }
}

/// A one-to-one assignment as `(row, col)` pairs sorted by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment<T> {
    pub pairs: Vec<(usize, usize)>,
    pub cost: T,
}

/// Minimum-cost one-to-one assignment of size `min(rows, cols)`.
///
/// Among all optimal assignments, returns the one whose column sequence
/// (indexed by row, with rows left unassigned in a tall matrix ordered after
/// every real column) is lexicographically smallest. Costs within a small
/// relative tolerance of each other are treated as tied.
pub fn hungarian<T: Scalar>(cost: &CostMatrix<T>) -> Result<Assignment<T>> {
    for i in 0..cost.rows {
        for j in 0..cost.cols {
            if !cost.get(i, j).is_finite() {
                return Err(Error::NonFiniteCost { row: i, col: j });
            }
        }
    }
    if cost.rows == 0 || cost.cols == 0 {
        return Ok(Assignment {
            pairs: Vec::new(),
            cost: T::zero(),
        });
    }

    let n = cost.rows.max(cost.cols);
    let c = |i: usize, j: usize| -> T {
        if i < cost.rows && j < cost.cols {
            cost.get(i, j)
        } else {
            T::zero()
        }
    };

    // Shortest augmenting path with potentials, 1-based with a sentinel
    // column 0.
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    let mut col_to_row = vec![0usize; n];
    for j in 1..=n {
        row_to_col[p[j] - 1] = j - 1;
        col_to_row[j - 1] = p[j] - 1;
    }

    // Every optimal assignment lives on edges with zero reduced cost, so the
    // lexicographically smallest optimum is the lexicographically smallest
    // perfect matching of that tight subgraph.
    let mut scale = T::one();
    for i in 0..n {
        for j in 0..n {
            scale = scale.max(c(i, j).abs());
        }
    }
    let tol = T::epsilon() * T::lit(1024.0) * T::from_count(n) * scale;
    let tight = |i: usize, j: usize| c(i, j) - u[i + 1] - v[j + 1] <= tol;
    lexicographic_rematch(n, &tight, &mut row_to_col, &mut col_to_row);

    let mut pairs = Vec::with_capacity(cost.rows.min(cost.cols));
    let mut total = T::zero();
    for (i, &j) in row_to_col.iter().enumerate().take(cost.rows) {
        if j < cost.cols {
            pairs.push((i, j));
            total = total + cost.get(i, j);
        }
    }
    Ok(Assignment { pairs, cost: total })
}

fn lexicographic_rematch(
    n: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    row_to_col: &mut [usize],
    col_to_row: &mut [usize],
) {
    let mut row_fixed = vec![false; n];
    let mut col_fixed = vec![false; n];
    for i in 0..n {
        for j in 0..n {
            if col_fixed[j] || !tight(i, j) {
                continue;
            }
            if row_to_col[i] == j {
                row_fixed[i] = true;
                col_fixed[j] = true;
                break;
            }
            // Move i onto j; the displaced row must reach i's old column
            // through an alternating path among the remaining tight edges.
            let displaced = col_to_row[j];
            let freed = row_to_col[i];
            let saved_rows = row_to_col.to_vec();
            let saved_cols = col_to_row.to_vec();
            row_fixed[i] = true;
            col_fixed[j] = true;
            row_to_col[i] = j;
            col_to_row[j] = i;
            // `freed` is the only unmatched column among unfixed ones.
            col_to_row[freed] = usize::MAX;
            let mut seen = vec![false; n];
            if augment(
                displaced, tight, &row_fixed, &col_fixed, row_to_col, col_to_row, &mut seen,
            ) {
                break;
            }
            row_to_col.copy_from_slice(&saved_rows);
            col_to_row.copy_from_slice(&saved_cols);
            row_fixed[i] = false;
            col_fixed[j] = false;
        }
        if !row_fixed[i] {
            // Only reachable if rounding hid a matched edge from `tight`.
            row_fixed[i] = true;
            col_fixed[row_to_col[i]] = true;
        }
    }
}

fn augment(
    row: usize,
    tight: &dyn Fn(usize, usize) -> bool,
    row_fixed: &[bool],
    col_fixed: &[bool],
    row_to_col: &mut [usize],
    col_to_row: &mut [usize],
    seen: &mut [bool],
) -> bool {
    for j in 0..row_to_col.len() {
        if col_fixed[j] || seen[j] || !tight(row, j) {
            continue;
        }
        seen[j] = true;
        let holder = col_to_row[j];
        if holder == usize::MAX
            || (!row_fixed[holder]
                && augment(
                    holder, tight, row_fixed, col_fixed, row_to_col, col_to_row, seen,
                ))
        {
            row_to_col[row] = j;
            col_to_row[j] = row;
            return true;
        }
    }
    false
}

/// Maximum matching of a bipartite graph given as adjacency lists from the
/// left side (`adj[l]` lists right vertices `< right`). Returns `(left, right)`
/// pairs sorted by left vertex. Deterministic: left vertices are processed in
/// order and neighbours in list order.
pub fn maximum_matching(adj: &[Vec<usize>], right: usize) -> Vec<(usize, usize)> {
    fn try_kuhn(
        l: usize,
        adj: &[Vec<usize>],
        seen: &mut [bool],
        match_right: &mut [Option<usize>],
    ) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if match_right[r].is_none_or(|other| try_kuhn(other, adj, seen, match_right)) {
                match_right[r] = Some(l);
                return true;
            }
        }
        false
    }

    let mut match_right: Vec<Option<usize>> = vec![None; right];
    let mut seen = vec![false; right];
    for l in 0..adj.len() {
        seen.iter_mut().for_each(|s| *s = false);
        try_kuhn(l, adj, &mut seen, &mut match_right);
    }
    let mut pairs: Vec<(usize, usize)> = match_right
        .iter()
        .enumerate()
        .filter_map(|(r, l)| l.map(|l| (l, r)))
        .collect();
    pairs.sort_unstable();
    pairs
}
