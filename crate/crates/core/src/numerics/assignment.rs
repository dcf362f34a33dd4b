use crate::error::{Error, Result};

/// Result of a minimum-cost assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column matched to each row; `None` when the row was matched to padding.
    pub row_to_col: Vec<Option<usize>>,
    /// Sum of the matched real entries. Infinite when a forbidden entry had to be used.
    pub cost: f64,
}

/// Minimum-cost matching of a rectangular cost matrix, padded to square with zeros.
///
/// Infinite entries are treated as forbidden; they are only used when no other
/// perfect matching exists, in which case the reported cost is infinite.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Assignment> {
    let rows = cost.len();
    let cols = cost.first().map_or(0, |r| r.len());
    if rows == 0 || cols == 0 {
        return Err(Error::Parameter("assignment needs a non-empty cost matrix".into()));
    }
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::Parameter("cost matrix rows have different lengths".into()));
    }
    if cost.iter().flatten().any(|c| c.is_nan() || *c == f64::NEG_INFINITY) {
        return Err(Error::Parameter("cost entries must be finite or +inf".into()));
    }
    let n = rows.max(cols);
    let finite_max = cost.iter().flatten().filter(|c| c.is_finite()).fold(0.0f64, |m, c| m.max(c.abs()));
    let big = (finite_max + 1.0) * (n as f64 + 1.0) * 4.0;
    let at = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            let c = cost[i][j];
            if c.is_finite() {
                c
            } else {
                big
            }
        } else {
            0.0
        }
    };

    // Shortest augmenting paths with row/column potentials; arrays are 1-based.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = at(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
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

    let mut row_to_col = vec![None; rows];
    for j in 1..=n {
        let i = p[j];
        if i >= 1 && i <= rows && j <= cols {
            row_to_col[i - 1] = Some(j - 1);
        }
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|j| cost[i][j]))
        .sum();
    Ok(Assignment { row_to_col, cost: total })
}
