//! Dense tableau simplex for small linear programs of the form
//! `max c·x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! Uses Bland's rule, so it terminates on degenerate problems.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

const PIVOT_EPS: f64 = 1e-12;

pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = b.len();
    if a.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::Numerical("constraint matrix has the wrong shape".into()));
    }
    if b.iter().any(|&v| v < 0.0) {
        return Err(Error::Numerical("right-hand side must be nonnegative".into()));
    }
    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_iter = 50 * (n + m).pow(2) + 1000;
    for _ in 0..max_iter {
        let Some(enter) = (0..n + m).find(|&j| t[m][j] < -PIVOT_EPS) else {
            let mut x = vec![0.0; n];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = t[i][width - 1];
                }
            }
            return Ok(LpSolution { value: t[m][width - 1], x });
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > PIVOT_EPS {
                let ratio = t[i][width - 1] / t[i][enter];
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(row) = leave else {
            return Err(Error::Numerical("linear program is unbounded".into()));
        };
        pivot(&mut t, row, enter);
        basis[row] = enter;
    }
    Err(Error::Numerical("simplex iteration limit reached".into()))
}

fn pivot(t: &mut [Vec<f64>], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let factor = r[col];
        if factor != 0.0 {
            for (v, pv) in r.iter_mut().zip(&pivot_row) {
                *v -= factor * pv;
            }
        }
    }
}
