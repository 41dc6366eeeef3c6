//! Minimum-cost rectangular matching with forbidden entries.
//!
//! Matches every column to a distinct row (rows >= cols) minimizing total
//! cost, via shortest augmenting paths over reduced costs. Costs are exact
//! integers; forbidden entries are never matched.

use crate::error::{Error, Result};

/// Dense cost matrix; `None` marks a forbidden pairing.
#[derive(Clone, Debug)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Option<i64>>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        CostMatrix {
            rows,
            cols,
            data: vec![None; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, row: usize, col: usize, cost: Option<i64>) {
        self.data[row * self.cols + col] = cost;
    }

    pub fn get(&self, row: usize, col: usize) -> Option<i64> {
        self.data[row * self.cols + col]
    }
}

/// Result of a matching: `row_of_col[c]` is the row assigned to column `c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub row_of_col: Vec<usize>,
    pub total_cost: i64,
}

/// Solve the minimum-cost assignment of all columns to distinct rows.
///
/// Returns `InfeasibleColumns` listing every column for which no augmenting
/// path over finite entries exists.
pub fn solve_min_cost_matching(matrix: &CostMatrix) -> Result<Matching> {
    let slots = matrix.rows();
    let items = matrix.cols();
    if slots < items {
        return Err(Error::Shape(format!(
            "need rows >= cols, got {slots} x {items}"
        )));
    }
    if items == 0 {
        return Ok(Matching {
            row_of_col: Vec::new(),
            total_cost: 0,
        });
    }

    // Shortest augmenting path with dual potentials; items are columns of the
    // input, slots are rows. Indices are 1-based with 0 as the virtual root.
    let mut u = vec![0i64; items + 1];
    let mut v = vec![0i64; slots + 1];
    let mut item_of_slot = vec![0usize; slots + 1];
    let mut way = vec![0usize; slots + 1];
    let mut infeasible = Vec::new();

    for item in 1..=items {
        item_of_slot[0] = item;
        let mut j0 = 0usize;
        let mut min_reduced: Vec<Option<i64>> = vec![None; slots + 1];
        let mut used = vec![false; slots + 1];
        let mut reachable = true;
        loop {
            used[j0] = true;
            let i0 = item_of_slot[j0];
            let mut delta: Option<i64> = None;
            let mut j1 = 0usize;
            for j in 1..=slots {
                if used[j] {
                    continue;
                }
                if let Some(cost) = matrix.get(j - 1, i0 - 1) {
                    let reduced = cost - u[i0] - v[j];
                    if min_reduced[j].is_none_or(|m| reduced < m) {
                        min_reduced[j] = Some(reduced);
                        way[j] = j0;
                    }
                }
                if let Some(m) = min_reduced[j] {
                    if delta.is_none_or(|d| m < d) {
                        delta = Some(m);
                        j1 = j;
                    }
                }
            }
            let Some(delta) = delta else {
                reachable = false;
                break;
            };
            for j in 0..=slots {
                if used[j] {
                    u[item_of_slot[j]] += delta;
                    v[j] -= delta;
                } else if let Some(m) = min_reduced[j] {
                    min_reduced[j] = Some(m - delta);
                }
            }
            j0 = j1;
            if item_of_slot[j0] == 0 {
                break;
            }
        }
        if !reachable {
            infeasible.push(item - 1);
            continue;
        }
        loop {
            let j1 = way[j0];
            item_of_slot[j0] = item_of_slot[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    if !infeasible.is_empty() {
        return Err(Error::InfeasibleColumns(infeasible));
    }

    let mut row_of_col = vec![usize::MAX; items];
    let mut total_cost = 0i64;
    for j in 1..=slots {
        let item = item_of_slot[j];
        if item != 0 {
            row_of_col[item - 1] = j - 1;
            total_cost += matrix
                .get(j - 1, item - 1)
                .expect("matched entry is finite");
        }
    }
    Ok(Matching {
        row_of_col,
        total_cost,
    })
}
