//! Dense two-phase simplex for `min cᵀw  s.t.  Aw = b, w >= 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible index enters, lowest basic
//! index leaves among ratio ties), so the result is deterministic and the
//! method cannot cycle. The optimum returned is a basic solution: at most
//! `rank(A)` entries of `w` are nonzero.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

const PIVOT_EPS: f64 = 1e-11;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Column indices of the final basis, one per non-redundant row.
    pub basis: Vec<usize>,
}

impl LpSolution {
    pub fn support(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&j| self.x[j] > 0.0).collect()
    }
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    /// Number of columns that may enter the basis.
    enterable: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, col: usize) {
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        self.rhs[r] /= p;
        let pivot_row = self.rows[r].clone();
        let pivot_rhs = self.rhs[r];
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let f = self.rows[i][col];
            if f != 0.0 {
                for (v, pv) in self.rows[i].iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                self.rhs[i] -= f * pivot_rhs;
                if math::abs(self.rhs[i]) < PIVOT_EPS * 1e-3 {
                    self.rhs[i] = 0.0;
                }
            }
        }
        self.basis[r] = col;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut red = cost[..self.enterable].to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (r, a) in red.iter_mut().zip(row) {
                    *r -= cb * a;
                }
            }
        }
        red
    }

    fn run(&mut self, cost: &[f64]) -> Result<()> {
        // Bland's rule terminates; the bound only guards numerical trouble.
        let limit = 50 * (self.enterable + self.rows.len() + 10);
        for _ in 0..limit {
            let red = self.reduced_costs(cost);
            let scale = 1.0 + cost.iter().fold(0.0f64, |a, c| a.max(math::abs(*c)));
            let entering = (0..self.enterable).find(|&j| red[j] < -PIVOT_EPS * scale && !self.basis.contains(&j));
            let Some(col) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_EPS {
                    let ratio = self.rhs[i] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = math::abs(ratio - br) <= PIVOT_EPS * (1.0 + math::abs(br));
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, col),
                None => return Err(Error::Internal("linear program is unbounded")),
            }
        }
        Err(Error::Internal("simplex iteration limit reached"))
    }
}

/// Solves `min cᵀw  s.t.  Aw = b, w >= 0` with `A` given row-major.
///
/// Rows that are linear combinations of others are detected and dropped.
/// Returns `Error::Infeasible` when no nonnegative solution exists.
pub fn solve(a: &[Vec<f64>], b: &[f64], c: &[f64]) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::Shape("constraint matrix does not match b and c".into()));
    }
    if a.iter().flatten().chain(b).chain(c).any(|v| !v.is_finite()) {
        return Err(Error::NumericIntegrity {
            what: "linear program data",
            value: f64::NAN,
        });
    }

    // columns: 0..n originals, n..n+m artificials
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (i, (row, &bi)) in a.iter().zip(b).enumerate() {
        let sign = if bi < 0.0 { -1.0 } else { 1.0 };
        let mut r: Vec<f64> = row.iter().map(|v| sign * v).collect();
        r.extend((0..m).map(|j| if j == i { 1.0 } else { 0.0 }));
        rows.push(r);
        rhs.push(sign * bi);
    }
    let mut t = Tableau {
        rows,
        rhs,
        basis: (n..n + m).collect(),
        enterable: n,
    };

    let mut phase1 = vec![0.0; n + m];
    for v in &mut phase1[n..] {
        *v = 1.0;
    }
    t.run(&phase1)?;
    let infeasibility: f64 = t
        .basis
        .iter()
        .zip(&t.rhs)
        .filter(|(&bv, _)| bv >= n)
        .map(|(_, &v)| v)
        .sum();
    let b_scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(math::abs(*v)));
    if infeasibility > FEASIBILITY_TOL * b_scale {
        return Err(Error::Infeasible);
    }

    // drive remaining (zero-level) artificials out, dropping redundant rows
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] < n {
            i += 1;
            continue;
        }
        let row_scale = t.rows[i][..n].iter().fold(0.0f64, |acc, v| acc.max(math::abs(*v)));
        let col = (0..n).find(|&j| math::abs(t.rows[i][j]) > PIVOT_EPS * (1.0 + row_scale) && !t.basis.contains(&j));
        match col {
            Some(j) if row_scale > PIVOT_EPS => {
                t.pivot(i, j);
                i += 1;
            }
            _ => {
                t.rows.remove(i);
                t.rhs.remove(i);
                t.basis.remove(i);
            }
        }
    }

    let mut phase2 = c.to_vec();
    phase2.extend(core::iter::repeat_n(0.0, m));
    t.run(&phase2)?;

    let mut x = vec![0.0; n];
    for (&bv, &v) in t.basis.iter().zip(&t.rhs) {
        if bv < n {
            x[bv] = v.max(0.0);
        }
    }
    let objective = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Ok(LpSolution {
        x,
        objective,
        basis: t.basis,
    })
}
