//! Minimum-cost bipartite assignment with a deterministic tie-break.
//!
//! Rectangular problems are padded to square with zero-cost dummies and
//! solved with the shortest-augmenting-path Hungarian method. Among all
//! optimal assignments the one whose (row key, column key) pair list is
//! lexicographically smallest is returned: rows are fixed greedily in key
//! order, each to the smallest-key column that still admits an optimal
//! completion. Only edges tight under the optimal duals can appear in an
//! optimal assignment, which prunes almost every candidate check.

/// `None` marks a forbidden pair.
pub type CostMatrix = Vec<Vec<Option<f64>>>;

#[derive(Debug, Clone)]
struct Solution {
    /// Column assigned to each padded row.
    row_to_col: Vec<usize>,
    row_dual: Vec<f64>,
    col_dual: Vec<f64>,
    total: f64,
}

/// Hungarian method on a dense square matrix.
fn hungarian(cost: &[Vec<f64>]) -> Solution {
    let n = cost.len();
    // 1-indexed potentials, e-maxx formulation
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
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    let total = (0..n).map(|i| cost[i][row_to_col[i]]).sum();
    Solution {
        row_to_col,
        row_dual: u[1..].to_vec(),
        col_dual: v[1..].to_vec(),
        total,
    }
}

/// Dense padded problem over a subset of rows and columns.
struct Padded<'a> {
    dense: &'a [Vec<f64>],
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl Padded<'_> {
    fn size(&self) -> usize {
        self.rows.len().max(self.cols.len())
    }

    fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| match (self.rows.get(i), self.cols.get(j)) {
                        (Some(&r), Some(&c)) => self.dense[r][c],
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect()
    }

    fn solve(&self) -> Solution {
        if self.size() == 0 {
            return Solution {
                row_to_col: vec![],
                row_dual: vec![],
                col_dual: vec![],
                total: 0.0,
            };
        }
        hungarian(&self.matrix())
    }
}

/// Solves the assignment and returns `(row, column)` pairs sorted by row key.
///
/// Exactly `min(rows, cols)` pairs are chosen when no pair is forbidden;
/// forbidden pairs never appear in the result, so fewer pairs may come back
/// when the allowed edges cannot cover that many.
pub fn solve_assignment(cost: &CostMatrix, row_keys: &[u64], col_keys: &[u64]) -> Vec<(usize, usize)> {
    let n_rows = cost.len();
    let n_cols = col_keys.len();
    assert_eq!(row_keys.len(), n_rows);
    if n_rows == 0 || n_cols == 0 {
        return Vec::new();
    }
    // A forbidden pair costs more than any combination of allowed ones, so
    // the optimum maximizes allowed pairs first.
    let finite_sum: f64 = cost.iter().flatten().flatten().map(|c| c.abs()).sum();
    let forbidden = 2.0 * finite_sum + 1.0;
    let dense: Vec<Vec<f64>> = cost
        .iter()
        .map(|row| {
            assert_eq!(row.len(), n_cols);
            row.iter().map(|c| c.unwrap_or(forbidden)).collect()
        })
        .collect();
    let scale = dense.iter().flatten().fold(1.0f64, |m, c| m.max(c.abs()));
    let tol = 1e-9 * scale * (n_rows.max(n_cols) as f64);

    let mut row_order: Vec<usize> = (0..n_rows).collect();
    row_order.sort_by_key(|&r| row_keys[r]);
    let mut col_order: Vec<usize> = (0..n_cols).collect();
    col_order.sort_by_key(|&c| col_keys[c]);

    let full = Padded {
        dense: &dense,
        rows: row_order.clone(),
        cols: col_order.clone(),
    };
    let optimum = full.solve();
    let target = optimum.total;
    let k = n_rows.min(n_cols);

    // incumbent: column (or None) per original row, known to be optimal
    let mut incumbent: Vec<Option<usize>> = vec![None; n_rows];
    for (i, &r) in full.rows.iter().enumerate() {
        let j = optimum.row_to_col[i];
        incumbent[r] = full.cols.get(j).copied();
    }
    let tight = |r_pos: usize, c_pos: Option<usize>| -> bool {
        let c = match c_pos {
            Some(j) => dense[full.rows[r_pos]][full.cols[j]],
            None => 0.0,
        };
        let dual_col = match c_pos {
            Some(j) => optimum.col_dual[j],
            None => return true,
        };
        (c - optimum.row_dual[r_pos] - dual_col).abs() <= tol
    };

    let mut fixed: Vec<(usize, usize)> = Vec::with_capacity(k);
    let mut fixed_cost = 0.0;
    let mut used_cols = vec![false; n_cols];
    for (pos, &r) in row_order.iter().enumerate() {
        if fixed.len() == k {
            break;
        }
        let mut chosen = None;
        for (c_pos, &c) in col_order.iter().enumerate() {
            if used_cols[c] {
                continue;
            }
            if incumbent[r] == Some(c) {
                chosen = Some(c);
                break;
            }
            if !tight(pos, Some(c_pos)) {
                continue;
            }
            let rest = Padded {
                dense: &dense,
                rows: row_order[pos + 1..].to_vec(),
                cols: col_order.iter().copied().filter(|&x| !used_cols[x] && x != c).collect(),
            };
            let needed = k - fixed.len() - 1;
            if rest.rows.len() < needed {
                continue;
            }
            let sub = rest.solve();
            if fixed_cost + dense[r][c] + sub.total <= target + tol {
                for (i, &rr) in rest.rows.iter().enumerate() {
                    incumbent[rr] = rest.cols.get(sub.row_to_col[i]).copied();
                }
                chosen = Some(c);
                break;
            }
        }
        if let Some(c) = chosen {
            used_cols[c] = true;
            fixed_cost += dense[r][c];
            fixed.push((r, c));
        }
    }
    fixed.retain(|&(r, c)| cost[r][c].is_some());
    fixed
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(n: usize) -> Vec<u64> {
        (0..n as u64).collect()
    }

    fn wrap(rows: &[&[f64]]) -> CostMatrix {
        rows.iter().map(|r| r.iter().map(|&c| Some(c)).collect()).collect()
    }

    fn total(cost: &CostMatrix, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, c)| cost[r][c].unwrap()).sum()
    }

    #[test]
    fn two_by_two() {
        let cost = wrap(&[&[10.0, 20.0], &[20.0, 10.0]]);
        let pairs = solve_assignment(&cost, &keys(2), &keys(2));
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(total(&cost, &pairs), 20.0);
    }

    #[test]
    fn all_equal_costs_pick_identity() {
        let cost = wrap(&[&[5.0; 3], &[5.0; 3], &[5.0; 3]]);
        assert_eq!(
            solve_assignment(&cost, &keys(3), &keys(3)),
            vec![(0, 0), (1, 1), (2, 2)]
        );
    }

    #[test]
    fn keys_drive_tie_break() {
        let cost = wrap(&[&[5.0, 5.0], &[5.0, 5.0]]);
        // column 1 has the smaller key
        assert_eq!(solve_assignment(&cost, &[0, 1], &[9, 3]), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn more_rows_than_columns_prefers_low_rows_on_ties() {
        let cost = wrap(&[&[7.0], &[7.0], &[7.0]]);
        assert_eq!(solve_assignment(&cost, &keys(3), &keys(1)), vec![(0, 0)]);
        let cost = wrap(&[&[9.0], &[7.0], &[7.0]]);
        assert_eq!(solve_assignment(&cost, &keys(3), &keys(1)), vec![(1, 0)]);
    }

    #[test]
    fn single_row_is_argmin() {
        let cost = wrap(&[&[30.0, 10.0, 10.0, 40.0]]);
        assert_eq!(solve_assignment(&cost, &keys(1), &keys(4)), vec![(0, 1)]);
    }

    #[test]
    fn empty_sides() {
        assert!(solve_assignment(&vec![], &[], &keys(3)).is_empty());
        assert!(solve_assignment(&vec![vec![]; 2], &keys(2), &[]).is_empty());
    }

    #[test]
    fn forbidden_pairs_avoided() {
        let cost = vec![vec![None, Some(50.0)], vec![Some(1.0), Some(1.0)]];
        assert_eq!(solve_assignment(&cost, &keys(2), &keys(2)), vec![(0, 1), (1, 0)]);
        let cost = vec![vec![None, None], vec![Some(1.0), Some(2.0)]];
        assert_eq!(solve_assignment(&cost, &keys(2), &keys(2)), vec![(1, 0)]);
    }
}
