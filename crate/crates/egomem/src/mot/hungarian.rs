//! Minimum-cost assignment via the Hungarian algorithm with potentials.
//!
//! O(n^2 * m) on an m x n cost matrix; rectangular inputs are handled by
//! solving with rows as the smaller side and transposing the result.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Solves the minimum-cost assignment for a rectangular cost matrix.
///
/// Returns min(m, n) disjoint (row, col) pairs of minimum total cost,
/// sorted by row. All costs must be finite.
pub fn hungarian_assign(cost: &Matrix) -> Result<Vec<(usize, usize)>> {
    let (m, n) = (cost.rows(), cost.cols());
    if m == 0 || n == 0 {
        return Err(Error::Domain("cost matrix must be at least 1x1".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain("cost matrix entries must be finite".into()));
    }

    if m <= n {
        Ok(solve(m, n, |i, j| cost.get(i, j)))
    } else {
        let mut pairs: Vec<(usize, usize)> = solve(n, m, |i, j| cost.get(j, i))
            .into_iter()
            .map(|(col, row)| (row, col))
            .collect();
        pairs.sort_unstable();
        Ok(pairs)
    }
}

/// Potentials-based Hungarian algorithm for `rows <= cols`.
/// Indices are offset by one internally; column 0 is the virtual root.
fn solve(rows: usize, cols: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut assigned_row = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for i in 1..=rows {
        assigned_row[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];

        loop {
            used[j0] = true;
            let i0 = assigned_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let slack = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if slack < min_slack[j] {
                    min_slack[j] = slack;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
                if used[j] {
                    u[assigned_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if assigned_row[j0] == 0 {
                break;
            }
        }

        // Walk the augmenting path back to the root.
        loop {
            let j1 = way[j0];
            assigned_row[j0] = assigned_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs: Vec<(usize, usize)> = (1..=cols)
        .filter(|&j| assigned_row[j] != 0)
        .map(|j| (assigned_row[j] - 1, j - 1))
        .collect();
    pairs.sort_unstable();
    pairs
}
