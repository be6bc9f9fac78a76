//! Linear assignment (Hungarian algorithm with potentials) and helpers.
//!
//! The solver is generic over the weight type so the tracklet matcher can run
//! on exact integers while the metrics use plain `f64`.

use std::ops::{Add, Sub};

pub trait Weight: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> {
    const ZERO: Self;
    const INF: Self;
}

impl Weight for i128 {
    const ZERO: Self = 0;
    const INF: Self = i128::MAX / 4;
}

impl Weight for i64 {
    const ZERO: Self = 0;
    const INF: Self = i64::MAX / 4;
}

impl Weight for f64 {
    const ZERO: Self = 0.0;
    const INF: Self = f64::INFINITY;
}

/// Optimal min-cost assignment plus the dual potentials.
///
/// `row_to_col[i]` is the column assigned to row `i`. The potentials satisfy
/// `cost[i][j] - row_potential[i] - col_potential[j] >= 0` everywhere with
/// equality on assigned cells.
#[derive(Debug, Clone)]
pub struct Assignment<T> {
    pub row_to_col: Vec<usize>,
    pub row_potential: Vec<T>,
    pub col_potential: Vec<T>,
}

impl<T: Weight> Assignment<T> {
    pub fn reduced_cost(&self, cost: &[Vec<T>], i: usize, j: usize) -> T {
        cost[i][j] - self.row_potential[i] - self.col_potential[j]
    }
}

/// Min-cost assignment of every row to a distinct column. Requires
/// `rows <= cols` and a rectangular matrix; O(rows^2 * cols).
pub fn hungarian_min<T: Weight>(cost: &[Vec<T>]) -> Assignment<T> {
    let n = cost.len();
    if n == 0 {
        return Assignment {
            row_to_col: Vec::new(),
            row_potential: Vec::new(),
            col_potential: Vec::new(),
        };
    }
    let m = cost[0].len();
    assert!(n <= m, "hungarian_min needs rows <= cols ({n} > {m})");
    debug_assert!(cost.iter().all(|r| r.len() == m));

    // 1-based arrays; index 0 is the virtual root.
    let mut u = vec![T::ZERO; n + 1];
    let mut v = vec![T::ZERO; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![T::INF; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = T::INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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

    let mut row_to_col = vec![usize::MAX; n];
    for j in 1..=m {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    Assignment {
        row_to_col,
        row_potential: u[1..].to_vec(),
        col_potential: v[1..].to_vec(),
    }
}

/// Maximum-weight matching in a bipartite graph given as weighted edges.
/// Vertices may stay unmatched. Edges with non-positive weight are never
/// selected. Returns `(row, col)` pairs sorted by row.
pub fn max_weight_matching(rows: usize, cols: usize, edges: &[(usize, usize, f64)]) -> Vec<(usize, usize)> {
    let k = rows.max(cols);
    if k == 0 || edges.is_empty() {
        return Vec::new();
    }
    // Non-edges cost 0, which stands for "unmatched".
    let mut cost = vec![vec![0.0f64; k]; k];
    let mut real = vec![vec![false; k]; k];
    for &(r, c, w) in edges {
        if w > 0.0 {
            cost[r][c] = -w;
            real[r][c] = true;
        }
    }
    let a = hungarian_min(&cost);
    a.row_to_col
        .iter()
        .enumerate()
        .filter(|&(r, &c)| real[r][c])
        .map(|(r, &c)| (r, c))
        .collect()
}

/// Whether the square 0/1 adjacency matrix admits a perfect matching
/// (Kuhn's augmenting paths).
pub fn has_perfect_matching(adj: &[Vec<bool>]) -> bool {
    let n = adj.len();
    let mut match_col: Vec<Option<usize>> = vec![None; n];

    fn augment(r: usize, adj: &[Vec<bool>], seen: &mut [bool], match_col: &mut [Option<usize>]) -> bool {
        for c in 0..adj[r].len() {
            if adj[r][c] && !seen[c] {
                seen[c] = true;
                let free = match match_col[c] {
                    None => true,
                    Some(other) => augment(other, adj, seen, match_col),
                };
                if free {
                    match_col[c] = Some(r);
                    return true;
                }
            }
        }
        false
    }

    for r in 0..n {
        let mut seen = vec![false; n];
        if !augment(r, adj, &mut seen, &mut match_col) {
            return false;
        }
    }
    true
}
