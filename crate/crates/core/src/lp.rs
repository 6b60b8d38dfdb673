//! Dense two-phase simplex for the small linear programs behind the membership
//! oracles.
//!
//! Problems are `min c'x` subject to rows `a'x {<=,=,>=} b`, with each variable
//! either nonnegative or free. Alongside the primal optimum the solver returns
//! row duals, so optimal values can be certified by weak duality, and a Farkas
//! vector when the system is infeasible. Dantzig pricing is used until a run of
//! degenerate pivots is seen, after which Bland's rule takes over.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
const PHASE1_TOL: f64 = 1e-10;
const MAX_PIVOTS: usize = 200_000;
const DEGENERATE_STREAK: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    cost: Vec<f64>,
    free: Vec<bool>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row; `b'y` equals the optimum.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    /// Farkas vector `y` with `y'A <= 0` (sign-adjusted per row) and `y'b > 0`.
    Infeasible(Vec<f64>),
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Some(s),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, cost: f64) -> usize {
        self.cost.push(cost);
        self.free.push(false);
        self.cost.len() - 1
    }

    pub fn add_free_var(&mut self, cost: f64) -> usize {
        self.cost.push(cost);
        self.free.push(true);
        self.cost.len() - 1
    }

    pub fn set_cost(&mut self, j: usize, c: f64) {
        self.cost[j] = c;
    }

    pub fn costs_mut(&mut self) -> &mut [f64] {
        &mut self.cost
    }

    pub fn n_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn is_free(&self, j: usize) -> bool {
        self.free[j]
    }

    pub fn cost(&self) -> &[f64] {
        &self.cost
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rel: Relation, rhs: f64) {
        debug_assert!(coeffs.iter().all(|(j, v)| *j < self.cost.len() && v.is_finite()));
        self.rows.push(Row { coeffs, rel, rhs });
    }

    /// Fix a nonnegative variable at zero.
    pub fn fix_zero(&mut self, j: usize) {
        self.add_row(vec![(j, 1.0)], Relation::Le, 0.0);
    }

    pub fn objective_at(&self, x: &[f64]) -> f64 {
        self.cost.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint or sign violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            if !self.free[j] {
                v = v.max(-xj);
            }
        }
        for r in &self.rows {
            let lhs: f64 = r.coeffs.iter().map(|(j, a)| a * x[*j]).sum();
            let d = lhs - r.rhs;
            v = v.max(match r.rel {
                Relation::Le => d,
                Relation::Ge => -d,
                Relation::Eq => d.abs(),
            });
        }
        v
    }

    fn column_products(&self, y: &[f64]) -> Vec<f64> {
        let mut aty = vec![0.0; self.cost.len()];
        for (r, &yi) in self.rows.iter().zip(y) {
            for &(j, a) in &r.coeffs {
                aty[j] += a * yi;
            }
        }
        aty
    }

    /// Lower bound `b'y` on the optimum if `y` is dual feasible within `tol`.
    pub fn dual_lower_bound(&self, y: &[f64], tol: f64) -> Option<f64> {
        if y.len() != self.rows.len() {
            return None;
        }
        for (r, &yi) in self.rows.iter().zip(y) {
            let ok = match r.rel {
                Relation::Le => yi <= tol,
                Relation::Ge => yi >= -tol,
                Relation::Eq => true,
            };
            if !ok {
                return None;
            }
        }
        let aty = self.column_products(y);
        for (j, (&c, &a)) in self.cost.iter().zip(&aty).enumerate() {
            let red = c - a;
            if (self.free[j] && red.abs() > tol) || red < -tol {
                return None;
            }
        }
        Some(self.rows.iter().zip(y).map(|(r, yi)| r.rhs * yi).sum())
    }

    /// Check a Farkas infeasibility certificate; returns `b'y` when valid.
    pub fn verify_farkas(&self, y: &[f64], tol: f64) -> Option<f64> {
        if y.len() != self.rows.len() {
            return None;
        }
        for (r, &yi) in self.rows.iter().zip(y) {
            let ok = match r.rel {
                Relation::Le => yi <= tol,
                Relation::Ge => yi >= -tol,
                Relation::Eq => true,
            };
            if !ok {
                return None;
            }
        }
        let aty = self.column_products(y);
        for (j, &a) in aty.iter().enumerate() {
            if (self.free[j] && a.abs() > tol) || a > tol {
                return None;
            }
        }
        let by: f64 = self.rows.iter().zip(y).map(|(r, yi)| r.rhs * yi).sum();
        (by > tol).then_some(by)
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    m: usize,
    ncols: usize,
    /// `m` rows of `ncols + 1` (last entry is the right-hand side).
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Column -> (user variable, sign) for structural columns.
    structural: Vec<(usize, f64)>,
    art_start: usize,
    row_sign: Vec<f64>,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let mut structural = Vec::new();
        let mut col_of = vec![(0usize, None::<usize>); lp.cost.len()];
        for j in 0..lp.cost.len() {
            let pos = structural.len();
            structural.push((j, 1.0));
            let neg = if lp.free[j] {
                structural.push((j, -1.0));
                Some(pos + 1)
            } else {
                None
            };
            col_of[j] = (pos, neg);
        }
        let n_struct = structural.len();
        let n_slack = lp.rows.iter().filter(|r| r.rel != Relation::Eq).count();
        let art_start = n_struct + n_slack;
        let ncols = art_start + m;
        let mut t = vec![vec![0.0; ncols + 1]; m];
        let mut row_sign = vec![1.0; m];
        let mut slack = n_struct;
        for (i, r) in lp.rows.iter().enumerate() {
            let row = &mut t[i];
            for &(j, a) in &r.coeffs {
                let (p, n) = col_of[j];
                row[p] += a;
                if let Some(n) = n {
                    row[n] -= a;
                }
            }
            match r.rel {
                Relation::Le => {
                    row[slack] = 1.0;
                    slack += 1;
                }
                Relation::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                }
                Relation::Eq => {}
            }
            row[ncols] = r.rhs;
            if r.rhs < 0.0 {
                row_sign[i] = -1.0;
                row.iter_mut().for_each(|v| *v = -*v);
            }
            row[art_start + i] = 1.0;
        }
        let basis = (0..m).map(|i| art_start + i).collect();
        Self { m, ncols, t, basis, structural, art_start, row_sign }
    }

    fn pivot(&mut self, r: usize, c: usize, d: &mut [f64]) {
        let pv = self.t[r][c];
        self.t[r].iter_mut().for_each(|v| *v /= pv);
        let prow = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(&prow).for_each(|(v, p)| *v -= f * p);
                row[c] = 0.0;
            }
        }
        let f = d[c];
        if f != 0.0 {
            d.iter_mut().zip(&prow).for_each(|(v, p)| *v -= f * p);
            d[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced costs (and negative objective in the last slot) for column costs `c`.
    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut d = c.to_vec();
        d.push(0.0);
        for (i, row) in self.t.iter().enumerate() {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                d.iter_mut().zip(row).for_each(|(v, a)| *v -= cb * a);
            }
        }
        d
    }

    /// Primal simplex iterations; `allow` filters entering columns.
    fn iterate(&mut self, d: &mut [f64], allow: impl Fn(usize) -> bool) -> Result<bool> {
        let mut degenerate = 0usize;
        for _ in 0..MAX_PIVOTS {
            let bland = degenerate >= DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = -COST_TOL;
            for j in 0..self.ncols {
                if d[j] < best && allow(j) {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d[j];
                }
            }
            let Some(c) = enter else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.t[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.t[i][self.ncols].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((l, r)) => ratio < r - 1e-14 || (ratio <= r + 1e-14 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else { return Ok(false) };
            degenerate = if ratio <= 1e-14 { degenerate + 1 } else { 0 };
            self.pivot(r, c, d);
        }
        Err(Error::Lp("pivot limit reached".into()))
    }

    fn run(mut self, lp: &LinearProgram) -> Result<LpOutcome> {
        let mut c1 = vec![0.0; self.ncols];
        c1[self.art_start..].iter_mut().for_each(|v| *v = 1.0);
        let mut d = self.reduced_costs(&c1);
        self.iterate(&mut d, |_| true)?;
        let infeas: f64 = (0..self.m).filter(|&i| self.basis[i] >= self.art_start).map(|i| self.t[i][self.ncols]).sum();
        if infeas > PHASE1_TOL {
            let y: Vec<f64> = (0..self.m).map(|i| self.row_sign[i] * (1.0 - d[self.art_start + i])).collect();
            return Ok(LpOutcome::Infeasible(y));
        }

        // Drive remaining artificials out of the basis where possible.
        for i in 0..self.m {
            if self.basis[i] < self.art_start {
                continue;
            }
            if let Some(c) = (0..self.art_start).find(|&j| self.t[i][j].abs() > 1e-9) {
                self.pivot(i, c, &mut d);
            }
        }

        let mut c2 = vec![0.0; self.ncols];
        for (col, &(j, s)) in self.structural.iter().enumerate() {
            c2[col] = s * lp.cost[j];
        }
        let mut d = self.reduced_costs(&c2);
        let art = self.art_start;
        if !self.iterate(&mut d, |j| j < art)? {
            return Ok(LpOutcome::Unbounded);
        }

        let mut x = vec![0.0; lp.cost.len()];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.structural.len() {
                let (j, s) = self.structural[b];
                x[j] += s * self.t[i][self.ncols];
            }
        }
        let duals = (0..self.m).map(|i| -self.row_sign[i] * d[self.art_start + i]).collect();
        Ok(LpOutcome::Optimal(LpSolution { objective: lp.objective_at(&x), x, duals }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-3.0);
        let y = lp.add_var(-5.0);
        lp.add_row(vec![(x, 1.0)], Relation::Le, 4.0);
        lp.add_row(vec![(y, 2.0)], Relation::Le, 12.0);
        lp.add_row(vec![(x, 3.0), (y, 2.0)], Relation::Le, 18.0);
        let s = lp.solve().unwrap().optimal().unwrap();
        assert_abs_diff_eq!(s.objective, -36.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[0], 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(s.x[1], 6.0, epsilon = 1e-9);
        let lb = lp.dual_lower_bound(&s.duals, 1e-9).unwrap();
        assert_abs_diff_eq!(lb, -36.0, epsilon = 1e-9);
    }

    #[test]
    fn equality_and_free_variables() {
        // min x - y, x + y = 1, y - z = 0.25, z free, x,y >= 0 ; min at x=0? y=1,z=.75 -> -1
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0);
        let y = lp.add_var(-1.0);
        let z = lp.add_free_var(0.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 1.0);
        lp.add_row(vec![(y, 1.0), (z, -1.0)], Relation::Eq, 0.25);
        let s = lp.solve().unwrap().optimal().unwrap();
        assert_abs_diff_eq!(s.objective, -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.x[z], 0.75, epsilon = 1e-12);
        assert!(lp.max_violation(&s.x) < 1e-12);
        assert_abs_diff_eq!(lp.dual_lower_bound(&s.duals, 1e-9).unwrap(), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn negative_rhs_and_ge_rows() {
        // min x + y, -x - y <= -2 (x + y >= 2), x >= 0.5
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0);
        let y = lp.add_var(1.0);
        lp.add_row(vec![(x, -1.0), (y, -1.0)], Relation::Le, -2.0);
        lp.add_row(vec![(x, 1.0)], Relation::Ge, 0.5);
        let s = lp.solve().unwrap().optimal().unwrap();
        assert_abs_diff_eq!(s.objective, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lp.dual_lower_bound(&s.duals, 1e-9).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_with_farkas_certificate() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(0.0);
        let y = lp.add_var(0.0);
        lp.add_row(vec![(x, 1.0), (y, 1.0)], Relation::Eq, 1.0);
        lp.add_row(vec![(x, 1.0)], Relation::Ge, 0.7);
        lp.add_row(vec![(y, 1.0)], Relation::Ge, 0.7);
        match lp.solve().unwrap() {
            LpOutcome::Infeasible(y) => assert!(lp.verify_farkas(&y, 1e-9).is_some(), "{y:?}"),
            o => panic!("expected infeasible, got {o:?}"),
        }
    }

    #[test]
    fn unbounded_detected() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0);
        lp.add_row(vec![(x, 1.0)], Relation::Ge, 1.0);
        assert_eq!(lp.solve().unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(2.0);
        let b = lp.add_var(1.0);
        lp.add_row(vec![(a, 1.0), (b, 1.0)], Relation::Eq, 1.0);
        lp.add_row(vec![(a, 2.0), (b, 2.0)], Relation::Eq, 2.0);
        let s = lp.solve().unwrap().optimal().unwrap();
        assert_abs_diff_eq!(s.objective, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lp.dual_lower_bound(&s.duals, 1e-9).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_assignment_polytope() {
        // 4x4 assignment problem; many degenerate vertices
        let cost = [[4.0, 1.0, 3.0, 2.0], [2.0, 0.0, 5.0, 3.0], [3.0, 2.0, 2.0, 1.0], [1.0, 3.0, 4.0, 2.0]];
        let mut lp = LinearProgram::new();
        let v: Vec<Vec<usize>> = (0..4).map(|i| (0..4).map(|j| lp.add_var(cost[i][j])).collect()).collect();
        for i in 0..4 {
            lp.add_row((0..4).map(|j| (v[i][j], 1.0)).collect(), Relation::Eq, 1.0);
            lp.add_row((0..4).map(|j| (v[j][i], 1.0)).collect(), Relation::Eq, 1.0);
        }
        let s = lp.solve().unwrap().optimal().unwrap();
        // brute force over permutations
        let mut best = f64::INFINITY;
        let perms = permutations(4);
        for p in perms {
            best = best.min((0..4).map(|i| cost[i][p[i]]).sum());
        }
        assert_abs_diff_eq!(s.objective, best, epsilon = 1e-9);
        assert_abs_diff_eq!(lp.dual_lower_bound(&s.duals, 1e-9).unwrap(), best, epsilon = 1e-9);
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..n {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }
}
