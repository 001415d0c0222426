//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Solves `min c·x  s.t.  A_eq x = b_eq,  A_le x <= b_le,  x >= 0`.
//! The final basis is re-factorized on the original data so that reported
//! primal values and duals do not carry tableau round-off.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StandardLp {
    pub cost: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub le_rows: Vec<Vec<f64>>,
    pub le_rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Duals of the equality rows (free sign).
    pub eq_duals: Vec<f64>,
    /// Duals of the inequality rows (non-positive for a minimization).
    pub le_duals: Vec<f64>,
    pub pivots: usize,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
    pivots: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[row].clone();
        for (i, r) in self.rows.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
    }

    /// Loads a cost vector and prices out the current basis.
    fn set_objective(&mut self, cost: &[f64]) {
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = self.obj[b];
            if cb != 0.0 {
                for (v, tv) in self.obj.iter_mut().zip(&self.rows[i]) {
                    *v -= cb * tv;
                }
            }
        }
    }

    /// Runs Bland-rule pivots over columns `allowed` until optimal.
    fn optimize(&mut self, allowed: usize) -> Result<()> {
        loop {
            let Some(col) = (0..allowed).find(|&j| self.obj[j] < -COST_TOL) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return Err(Error::Unbounded),
            }
        }
    }
}

pub fn solve(lp: &StandardLp) -> Result<SimplexSolution> {
    let n = lp.cost.len();
    let m_eq = lp.eq_rows.len();
    let m_le = lp.le_rows.len();
    let m = m_eq + m_le;
    // columns: structural | slacks (one per <= row) | artificials (one per row)
    let n_slack = m_le;
    let art0 = n + n_slack;
    let width = art0 + m;

    let mut sign = vec![1.0; m];
    let mut full_rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    for (row, &b) in lp.eq_rows.iter().zip(&lp.eq_rhs) {
        assert_eq!(row.len(), n, "equality row has wrong width");
        let mut r = row.clone();
        r.resize(width, 0.0);
        full_rows.push(r);
        rhs.push(b);
    }
    for (k, (row, &b)) in lp.le_rows.iter().zip(&lp.le_rhs).enumerate() {
        assert_eq!(row.len(), n, "inequality row has wrong width");
        let mut r = row.clone();
        r.resize(width, 0.0);
        r[n + k] = 1.0;
        full_rows.push(r);
        rhs.push(b);
    }
    for i in 0..m {
        if rhs[i] < 0.0 {
            sign[i] = -1.0;
            rhs[i] = -rhs[i];
            for v in full_rows[i].iter_mut() {
                *v = -*v;
            }
        }
        full_rows[i][art0 + i] = 1.0;
    }

    let mut tab = Tableau {
        rows: full_rows
            .iter()
            .zip(&rhs)
            .map(|(r, &b)| {
                let mut t = r.clone();
                t.push(b);
                t
            })
            .collect(),
        obj: Vec::new(),
        basis: (art0..width).collect(),
        width,
        pivots: 0,
    };

    // Phase 1: minimise the sum of artificials.
    let mut phase1 = vec![0.0; width];
    for c in phase1.iter_mut().skip(art0) {
        *c = 1.0;
    }
    tab.set_objective(&phase1);
    tab.optimize(width)?;
    let infeasibility: f64 = (0..m).filter(|&i| tab.basis[i] >= art0).map(|i| tab.rhs(i)).sum();
    if infeasibility > FEAS_TOL * (1.0 + rhs.iter().map(|v| v.abs()).sum::<f64>()) {
        return Err(Error::Infeasible);
    }
    // Drive zero-level artificials out of the basis where possible.
    for i in 0..m {
        if tab.basis[i] >= art0 {
            if let Some(j) = (0..art0).find(|&j| tab.rows[i][j].abs() > 1e-9) {
                tab.pivot(i, j);
            }
        }
    }

    // Phase 2 over structural and slack columns.
    let mut phase2 = lp.cost.clone();
    phase2.resize(width, 0.0);
    tab.set_objective(&phase2);
    tab.optimize(art0)?;

    // Re-factorize the final basis on the original data.
    let basis_matrix = DMatrix::from_fn(m, m, |i, k| full_rows[i][tab.basis[k]]);
    let lu = basis_matrix.clone().lu();
    let xb = lu
        .solve(&DVector::from_vec(rhs.clone()))
        .ok_or(Error::Infeasible)?;
    let cb = DVector::from_iterator(m, tab.basis.iter().map(|&b| phase2[b]));
    let y = basis_matrix
        .transpose()
        .lu()
        .solve(&cb)
        .ok_or(Error::Infeasible)?;

    let mut x = vec![0.0; n];
    for (k, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = xb[k].max(0.0);
        }
    }
    let duals: Vec<f64> = (0..m).map(|i| y[i] * sign[i]).collect();
    let objective = lp.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(SimplexSolution {
        x,
        objective,
        eq_duals: duals[..m_eq].to_vec(),
        le_duals: duals[m_eq..].to_vec(),
        pivots: tab.pivots,
    })
}

impl StandardLp {
    /// Largest absolute violation of the row constraints and bounds at `x`.
    pub fn primal_residual(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let eq = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .map(|(r, b)| (dot(r) - b).abs());
        let le = self
            .le_rows
            .iter()
            .zip(&self.le_rhs)
            .map(|(r, b)| (dot(r) - b).max(0.0));
        let bounds = x.iter().map(|v| (-v).max(0.0));
        eq.chain(le).chain(bounds).fold(0.0, f64::max)
    }

    /// Reduced costs `c - A_eqᵀ y_eq - A_leᵀ y_le`.
    pub fn reduced_costs(&self, eq_duals: &[f64], le_duals: &[f64]) -> Vec<f64> {
        let mut d = self.cost.clone();
        for (row, y) in self.eq_rows.iter().zip(eq_duals) {
            for (dj, a) in d.iter_mut().zip(row) {
                *dj -= a * y;
            }
        }
        for (row, y) in self.le_rows.iter().zip(le_duals) {
            for (dj, a) in d.iter_mut().zip(row) {
                *dj -= a * y;
            }
        }
        d
    }

    /// Largest complementary-slackness product over variables and
    /// inequality rows.
    pub fn complementarity(&self, sol: &SimplexSolution) -> f64 {
        let d = self.reduced_costs(&sol.eq_duals, &sol.le_duals);
        let var = d.iter().zip(&sol.x).map(|(dj, xj)| (dj * xj).abs());
        let rows = self.le_rows.iter().zip(&self.le_rhs).zip(&sol.le_duals).map(|((r, b), y)| {
            let slack = b - r.iter().zip(&sol.x).map(|(a, v)| a * v).sum::<f64>();
            (slack * y).abs()
        });
        var.chain(rows).fold(0.0, f64::max)
    }
}
