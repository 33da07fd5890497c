//! Minimum-cost bipartite assignment (Hungarian method, shortest augmenting paths).

use crate::error::{Error, Result};

/// For an `n x m` cost matrix with `n <= m`, returns the column assigned to each row
/// so that the total cost is minimal. Runs in `O(n^2 m)`.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if cost.iter().any(|r| r.len() != m) {
        return Err(Error::invalid("ragged cost matrix"));
    }
    if n > m {
        return Err(Error::invalid(format!("{n} rows cannot be assigned to {m} columns")));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite assignment cost".into()));
    }
    // potentials u (rows) and v (columns); p[j] = row matched to column j; index 0 is
    // a virtual column used as the augmenting path source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
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
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
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
    let mut out = vec![0; n];
    for j in 1..=m {
        if p[j] != 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    Ok(out)
}

/// Minimum-cost matching of `min(rows, cols)` pairs for a matrix of either
/// orientation. Returns `(row, col)` pairs sorted by row.
pub fn min_cost_pairs(cost: &[Vec<f64>]) -> Result<Vec<(usize, usize)>> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Ok(Vec::new());
    }
    if n <= m {
        return Ok(hungarian(cost)?.into_iter().enumerate().collect());
    }
    let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
    let mut pairs: Vec<(usize, usize)> = hungarian(&t)?.into_iter().enumerate().map(|(j, i)| (i, j)).collect();
    pairs.sort_unstable();
    Ok(pairs)
}
