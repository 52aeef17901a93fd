//! Rectangular min-cost assignment (Hungarian method with row/column
//! potentials and shortest augmenting paths).
//!
//! Every row of the smaller side is matched; a wider-than-tall matrix is
//! solved directly and a taller one is transposed first. Worst case is
//! `O(n² m)` for `n = min(rows, cols)`, `m = max(rows, cols)`.

/// Matching plus the work spent finding it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Column assigned to each original row, if any.
    pub row_to_col: Vec<Option<usize>>,
    /// Number of reduced-cost relaxations performed: one per (row, column)
    /// examined while growing augmenting paths.
    pub iterations: u64,
}

/// Minimum-cost assignment over a row-major `rows × cols` cost table.
///
/// Ties are broken toward lower indices: rows are inserted in index order and
/// the first column reaching the minimum slack wins.
pub fn solve(costs: &[f64], rows: usize, cols: usize) -> Assignment {
    assert_eq!(costs.len(), rows * cols, "cost table has wrong size");
    if rows == 0 || cols == 0 {
        return Assignment {
            row_to_col: vec![None; rows],
            iterations: 0,
        };
    }
    if rows <= cols {
        let (col_of_row, iterations) = solve_wide(|i, j| costs[i * cols + j], rows, cols);
        Assignment {
            row_to_col: col_of_row.into_iter().map(Some).collect(),
            iterations,
        }
    } else {
        let (row_of_col, iterations) = solve_wide(|j, i| costs[i * cols + j], cols, rows);
        let mut row_to_col = vec![None; rows];
        for (col, row) in row_of_col.into_iter().enumerate() {
            row_to_col[row] = Some(col);
        }
        Assignment {
            row_to_col,
            iterations,
        }
    }
}

/// Core routine for `n <= m`; returns the column of every row.
fn solve_wide(cost: impl Fn(usize, usize) -> f64, n: usize, m: usize) -> (Vec<usize>, u64) {
    // 1-based with a virtual row/column 0, as is conventional for this method.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut min_slack = vec![f64::INFINITY; m + 1];
    let mut used = vec![false; m + 1];
    let mut iterations = 0u64;

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                iterations += 1;
                let reduced = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        // Flip the augmenting path.
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            col_of_row[owner[j] - 1] = j - 1;
        }
    }
    (col_of_row, iterations)
}
