//! Two-phase dense-tableau simplex with Bland's rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Minimize `objective . x` subject to the constraints and
/// `bounds[j].0 <= x[j] <= bounds[j].1`. Lower bounds must be finite;
/// upper bounds may be `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    /// Program over `n` non-negative variables with no constraints yet.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n {
            return Err(Error::Param("bounds length differs from variable count".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Param("non-finite objective coefficient".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::Param(format!("constraint {i} has wrong length")));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|a| !a.is_finite()) {
                return Err(Error::Param(format!("constraint {i} is not finite")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if !lo.is_finite() || hi.is_nan() || lo > hi {
                return Err(Error::Param(format!("bad bounds [{lo}, {hi}] on variable {j}")));
            }
        }
        Ok(())
    }

    /// Whether `x` satisfies all rows and bounds within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        let bounds_ok = self
            .bounds
            .iter()
            .zip(x)
            .all(|(&(lo, hi), &v)| v >= lo - tol && v <= hi + tol);
        bounds_ok
            && self.constraints.iter().all(|c| {
                let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
                let scale = tol * c.rhs.abs().max(1.0);
                match c.relation {
                    Relation::Le => lhs <= c.rhs + scale,
                    Relation::Ge => lhs >= c.rhs - scale,
                    Relation::Eq => (lhs - c.rhs).abs() <= scale,
                }
            })
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LpOutcome {
    Optimal { values: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    /// Row-major, `rows x (cols + 1)`; the last column is the right-hand side.
    a: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    /// Reduced costs; `obj[cols]` holds minus the objective value.
    obj: Vec<f64>,
    /// Reduced costs above `-cost_tol` count as non-negative; scaled to the
    /// cost vector so round-off cannot pick an improving column.
    cost_tol: f64,
    allowed: Vec<bool>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.a[r * (self.cols + 1) + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.cols)
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let p = self.a[pr * w + pc];
        for c in 0..w {
            self.a[pr * w + c] /= p;
        }
        self.a[pr * w + pc] = 1.0;
        let (before, rest) = self.a.split_at_mut(pr * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[pc];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
                row[pc] = 0.0;
            }
        }
        let f = self.obj[pc];
        if f != 0.0 {
            for (x, &y) in self.obj.iter_mut().zip(prow.iter()) {
                *x -= f * y;
            }
            self.obj[pc] = 0.0;
        }
        self.basis[pr] = pc;
        // Round-off can leave a degenerate right-hand side just below zero.
        for r in 0..self.rows {
            let v = &mut self.a[r * w + self.cols];
            if *v < 0.0 && *v > -PIVOT_EPS {
                *v = 0.0;
            }
        }
    }

    /// Bland's rule iterations until optimal. Returns `Ok(false)` if unbounded.
    fn optimize(&mut self) -> Result<bool> {
        let limit = 10_000 + 50 * (self.rows + self.cols);
        for _ in 0..limit {
            let entering = (0..self.cols).find(|&j| self.allowed[j] && self.obj[j] < -self.cost_tol);
            let Some(pc) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let coef = self.at(r, pc);
                if coef > PIVOT_EPS {
                    let ratio = self.rhs(r) / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            let tie = (ratio - bratio).abs() <= 1e-12 * bratio.abs().max(1.0);
                            if ratio < bratio && !tie
                                || tie && self.basis[r] < self.basis[br]
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((pr, _)) => self.pivot(pr, pc),
            }
        }
        Err(Error::Param(format!("simplex did not converge within {limit} pivots")))
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        self.obj = vec![0.0; w];
        self.obj[..cost.len()].copy_from_slice(cost);
        self.cost_tol = PIVOT_EPS * cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        for r in 0..self.rows {
            let cb = cost.get(self.basis[r]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for c in 0..w {
                    self.obj[c] -= cb * self.a[r * w + c];
                }
            }
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.cols + 1;
        self.a.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }
}

/// Optimal basic solution of the LP, or its infeasible/unbounded status.
pub fn simplex_solve(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let n = lp.num_vars();

    // Shift x = lo + y so every variable is y >= 0; finite upper bounds
    // become explicit rows.
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &lp.constraints {
        let shift: f64 = c.coeffs.iter().zip(&lp.bounds).map(|(a, b)| a * b.0).sum();
        rows.push((c.coeffs.clone(), c.relation, c.rhs - shift));
    }
    for (j, &(lo, hi)) in lp.bounds.iter().enumerate() {
        if hi.is_finite() {
            let mut coeffs = vec![0.0; n];
            coeffs[j] = 1.0;
            rows.push((coeffs, Relation::Le, hi - lo));
        }
    }
    for row in &mut rows {
        // Equilibrate so that tolerances mean the same thing on every row.
        let scale = row.0.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        if scale > 0.0 {
            row.0.iter_mut().for_each(|a| *a /= scale);
            row.2 /= scale;
        }
        if row.2 < 0.0 {
            row.0.iter_mut().for_each(|a| *a = -*a);
            row.2 = -row.2;
            row.1 = match row.1 {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Relation::Le).count();
    let cols = n + n_slack + n_art;
    let w = cols + 1;
    let mut t = Tableau {
        a: vec![0.0; m * w],
        rows: m,
        cols,
        basis: vec![0; m],
        obj: Vec::new(),
        cost_tol: PIVOT_EPS,
        allowed: vec![true; cols],
    };
    let (mut slack, mut art) = (n, n + n_slack);
    let mut rhs_scale = 1.0f64;
    for (r, (coeffs, rel, rhs)) in rows.iter().enumerate() {
        t.a[r * w..r * w + n].copy_from_slice(coeffs);
        t.a[r * w + cols] = *rhs;
        rhs_scale = rhs_scale.max(rhs.abs());
        match rel {
            Relation::Le => {
                t.a[r * w + slack] = 1.0;
                t.basis[r] = slack;
                slack += 1;
            }
            Relation::Ge => {
                t.a[r * w + slack] = -1.0;
                slack += 1;
                t.a[r * w + art] = 1.0;
                t.basis[r] = art;
                art += 1;
            }
            Relation::Eq => {
                t.a[r * w + art] = 1.0;
                t.basis[r] = art;
                art += 1;
            }
        }
    }

    let first_art = n + n_slack;
    if n_art > 0 {
        let mut phase1 = vec![0.0; cols];
        phase1[first_art..].iter_mut().for_each(|c| *c = 1.0);
        t.set_objective(&phase1);
        t.optimize()?;
        let infeasibility = -t.obj[cols];
        if infeasibility > 1e-7 * rhs_scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive remaining artificials out of the basis, dropping redundant rows.
        let mut r = 0;
        while r < t.rows {
            if t.basis[r] >= first_art {
                let best = (0..first_art)
                    .map(|c| (c, t.at(r, c).abs()))
                    .filter(|&(_, a)| a > PIVOT_EPS)
                    .max_by(|a, b| a.1.total_cmp(&b.1));
                match best.map(|(c, _)| c) {
                    Some(c) => {
                        t.pivot(r, c);
                        r += 1;
                    }
                    None => t.remove_row(r),
                }
            } else {
                r += 1;
            }
        }
        for c in first_art..cols {
            t.allowed[c] = false;
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    t.set_objective(&cost);
    if !t.optimize()? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut values: Vec<f64> = lp.bounds.iter().map(|b| b.0).collect();
    for r in 0..t.rows {
        let b = t.basis[r];
        if b < n {
            values[b] += t.rhs(r);
        }
    }
    let objective = lp.evaluate(&values);
    Ok(LpOutcome::Optimal { values, objective })
}
