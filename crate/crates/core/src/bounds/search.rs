//! Machinery shared by the channel searches.
//!
//! Channels are handled as kernels `J(x,y,z) = P(y,z|x)`, flat index
//! `(x * |Y| + y) * |Z| + z`. For a fixed `P_{Z|X}` every membership condition
//! used here is linear in `J`, which gives exact restoration programs; the
//! descent phase uses a smooth penalty on the scaled entries
//! `D_z(i,j) P(z|i) P(z|j)`.

use crate::channel::TwoOutputChannel;
use crate::error::Result;
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::metric::Metric;
use crate::optim::golden_section;

use super::Variant;

/// `P_{Z|X}` entries below this are treated as zero before restoration.
pub(crate) const PZX_FLOOR: f64 = 1e-9;
/// Logarithms of probabilities are clamped at this value in gradients.
const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Rows {
    /// `D_z(i, j) >= 0` on supported pairs.
    Elementwise,
    /// `D_z(i, j) = 0` on supported pairs.
    Zero,
    /// Nonnegative optimal transport cost between `P_{X|Z}` and itself.
    Transport,
}

impl Rows {
    pub fn of(v: Variant) -> Rows {
        match v {
            Variant::Psd => Rows::Zero,
            Variant::KspF => Rows::Transport,
            _ => Rows::Elementwise,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Shape {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Shape {
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.ny + y) * self.nz + z
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn pzx(&self, j: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.nx * self.nz];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    p[x * self.nz + z] += j[self.idx(x, y, z)];
                }
            }
        }
        p
    }

    /// `sum_z J(x, y, z)`, index `x * |Y| + y`.
    pub fn pyx(&self, j: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.nx * self.ny];
        for x in 0..self.nx {
            for y in 0..self.ny {
                p[x * self.ny + y] = (0..self.nz).map(|z| j[self.idx(x, y, z)]).sum();
            }
        }
        p
    }

    pub fn kernel_of(&self, ch: &TwoOutputChannel) -> Option<Vec<f64>> {
        (ch.nx() == self.nx && ch.ny() == self.ny && ch.nz() == self.nz).then(|| ch.joint_kernel())
    }
}

/// `I(P, P_{Z|X})` and, optionally, its gradient `P(x) ln(P(z|x) / r(z))`.
pub(crate) fn mi_grad(px: &[f64], pzx: &[f64], nz: usize, grad: Option<&mut [f64]>) -> f64 {
    let nx = px.len();
    let mut r = vec![0.0; nz];
    for x in 0..nx {
        for z in 0..nz {
            r[z] += px[x] * pzx[x * nz + z];
        }
    }
    let mut i = 0.0;
    for x in 0..nx {
        for z in 0..nz {
            let v = pzx[x * nz + z];
            if px[x] > 0.0 && v > 0.0 {
                i += px[x] * v * (v / r[z]).ln();
            }
        }
    }
    if let Some(g) = grad {
        for x in 0..nx {
            for z in 0..nz {
                let v = pzx[x * nz + z].max(LOG_FLOOR);
                g[x * nz + z] = px[x] * (v / r[z].max(LOG_FLOOR)).ln();
            }
        }
    }
    i.max(0.0)
}

/// Membership rows for one metric, with finite stand-ins for forbidden scores
/// in the smooth phase.
pub(crate) struct Rowset<'a> {
    pub shape: Shape,
    pub q: &'a Metric,
    qs: Vec<f64>,
    pub rows: Rows,
    /// Inputs whose kernel rows enter the conditions.
    pub active: Vec<bool>,
    /// The smooth phase aims for `D^ >= margin` so that its output is itself feasible.
    pub margin: f64,
}

impl<'a> Rowset<'a> {
    pub fn new(shape: Shape, q: &'a Metric, rows: Rows, active: Vec<bool>) -> Self {
        let finite: Vec<f64> = q.rows().into_iter().flatten().filter(|v| v.is_finite()).collect();
        let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let floor = if lo.is_finite() { lo - 10.0 * (hi - lo + 1.0) } else { -10.0 };
        let mut qs = vec![0.0; shape.nx * shape.ny];
        for x in 0..shape.nx {
            for y in 0..shape.ny {
                let v = q.get(x, y);
                qs[x * shape.ny + y] = if v.is_finite() { v } else { floor };
            }
        }
        Self { shape, q, qs, rows, active, margin: 1e-7 }
    }

    fn qs(&self, x: usize, y: usize) -> f64 {
        self.qs[x * self.shape.ny + y]
    }

    /// `sum min(0, D^ - margin)^2` (or `sum D^2` for [`Rows::Zero`]) over active pairs,
    /// with `D^ = P(z|j) A(i,j,z) + P(z|i) A(j,i,z)` and
    /// `A(i,j,z) = sum_y J(i,y,z) [q(j,y) - q(i,y)]`. Adds `scale * gradient` to `grad`.
    pub fn penalty(&self, j: &[f64], scale: f64, mut grad: Option<&mut [f64]>) -> f64 {
        let s = self.shape;
        let pzx = s.pzx(j);
        let mut total = 0.0;
        for z in 0..s.nz {
            for a in 0..s.nx {
                if !self.active[a] {
                    continue;
                }
                for b in (a + 1)..s.nx {
                    if !self.active[b] {
                        continue;
                    }
                    let aab = self.cross(j, a, b, z);
                    let aba = self.cross(j, b, a, z);
                    let (pa, pb) = (pzx[a * s.nz + z], pzx[b * s.nz + z]);
                    let d = pb * aab + pa * aba;
                    let t = match self.rows {
                        Rows::Zero => d,
                        _ => (d - self.margin).min(0.0),
                    };
                    if t == 0.0 {
                        continue;
                    }
                    total += t * t;
                    if let Some(g) = grad.as_deref_mut() {
                        let c = scale * 2.0 * t;
                        for y in 0..s.ny {
                            let dq = self.qs(b, y) - self.qs(a, y);
                            g[s.idx(a, y, z)] += c * (pb * dq + aba);
                            g[s.idx(b, y, z)] += c * (-pa * dq + aab);
                        }
                    }
                }
            }
        }
        total
    }

    fn cross(&self, j: &[f64], i: usize, k: usize, z: usize) -> f64 {
        (0..self.shape.ny).map(|y| j[self.shape.idx(i, y, z)] * (self.qs(k, y) - self.qs(i, y))).sum()
    }

    /// The polytope of kernels with the given `P_{Z|X}` (on active inputs)
    /// satisfying the membership rows. `w` adds the constraint `sum_z J = W`;
    /// `allowed` masks cells that must stay empty; `px` weights the transport dual.
    pub fn polytope(&self, pzx: &[f64], allowed: &[bool], w: Option<&[f64]>, px: &[f64]) -> Polytope {
        let s = self.shape;
        let on = |x: usize, z: usize| self.active[x] && pzx[x * s.nz + z] > 0.0;
        let mut lp = LinearProgram::new();
        let mut var = vec![None; s.len()];
        for x in 0..s.nx {
            for z in 0..s.nz {
                if !on(x, z) {
                    continue;
                }
                for y in 0..s.ny {
                    let blocked = (0..s.nx).any(|o| o != x && on(o, z) && self.q.is_forbidden(o, y));
                    if allowed[s.idx(x, y, z)] && !blocked && !self.q.is_forbidden(x, y) {
                        var[s.idx(x, y, z)] = Some(lp.add_var(0.0));
                    }
                }
            }
        }
        let cell_row = |x: usize, ys: &mut dyn Iterator<Item = usize>, z: usize| -> Vec<(usize, f64)> {
            ys.filter_map(|y| var[s.idx(x, y, z)].map(|v| (v, 1.0))).collect()
        };
        for x in 0..s.nx {
            for z in 0..s.nz {
                if on(x, z) {
                    lp.add_row(cell_row(x, &mut (0..s.ny), z), Relation::Eq, pzx[x * s.nz + z]);
                }
            }
        }
        if let Some(w) = w {
            for x in (0..s.nx).filter(|&x| self.active[x]) {
                for y in 0..s.ny {
                    let row: Vec<(usize, f64)> = (0..s.nz).filter_map(|z| var[s.idx(x, y, z)].map(|v| (v, 1.0))).collect();
                    if w[x * s.ny + y] > 0.0 || !row.is_empty() {
                        lp.add_row(row, Relation::Eq, w[x * s.ny + y]);
                    }
                }
            }
        }
        let q = |x: usize, y: usize| self.q.get(x, y);
        match self.rows {
            Rows::Elementwise | Rows::Zero => {
                let rel = if self.rows == Rows::Zero { Relation::Eq } else { Relation::Ge };
                for z in 0..s.nz {
                    for a in 0..s.nx {
                        for b in (a + 1)..s.nx {
                            if !(on(a, z) && on(b, z)) {
                                continue;
                            }
                            let (pa, pb) = (pzx[a * s.nz + z], pzx[b * s.nz + z]);
                            let mut row = Vec::new();
                            for y in 0..s.ny {
                                if let Some(v) = var[s.idx(a, y, z)] {
                                    row.push((v, (q(b, y) - q(a, y)) / pa));
                                }
                                if let Some(v) = var[s.idx(b, y, z)] {
                                    row.push((v, (q(a, y) - q(b, y)) / pb));
                                }
                            }
                            row.retain(|e| e.1 != 0.0);
                            lp.add_row(row, rel, 0.0);
                        }
                    }
                }
            }
            Rows::Transport => {
                let mut pot = vec![None; s.nx * s.nz];
                for x in 0..s.nx {
                    for z in 0..s.nz {
                        if on(x, z) {
                            pot[x * s.nz + z] = Some((lp.add_free_var(0.0), lp.add_free_var(0.0)));
                        }
                    }
                }
                let mut total = Vec::new();
                for z in 0..s.nz {
                    for x in 0..s.nx {
                        let Some((ax, bx)) = pot[x * s.nz + z] else { continue };
                        let mu = px[x] * pzx[x * s.nz + z];
                        total.push((ax, mu));
                        total.push((bx, mu));
                        for xt in 0..s.nx {
                            let Some((_, bt)) = pot[xt * s.nz + z] else { continue };
                            let mut row = vec![(ax, 1.0), (bt, 1.0)];
                            if xt != x {
                                for y in 0..s.ny {
                                    if let Some(v) = var[s.idx(x, y, z)] {
                                        let c = (q(xt, y) - q(x, y)) / pzx[x * s.nz + z];
                                        if c != 0.0 {
                                            row.push((v, -c));
                                        }
                                    }
                                }
                            }
                            lp.add_row(row, Relation::Le, 0.0);
                        }
                    }
                }
                lp.add_row(total, Relation::Ge, 0.0);
            }
        }
        Polytope { lp, var }
    }
}

pub(crate) struct Polytope {
    pub lp: LinearProgram,
    /// LP column of each kernel cell, `None` when the cell is forced to zero.
    pub var: Vec<Option<usize>>,
}

impl Polytope {
    fn kernel_from(&self, x: &[f64], len: usize) -> Vec<f64> {
        let mut j = vec![0.0; len];
        for (cell, v) in self.var.iter().enumerate() {
            if let Some(v) = v {
                j[cell] = x[*v].max(0.0);
            }
        }
        j
    }

    /// Minimize `<c, J>` over the polytope; `None` when it is empty.
    pub fn argmin(&mut self, c: &[f64]) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        for j in 0..self.lp.n_vars() {
            self.lp.set_cost(j, 0.0);
        }
        for (cell, v) in self.var.iter().enumerate() {
            if let Some(v) = v {
                self.lp.set_cost(*v, c[cell]);
            }
        }
        Ok(match self.lp.solve()? {
            LpOutcome::Optimal(s) => Some((self.kernel_from(&s.x, self.var.len()), s.x)),
            _ => None,
        })
    }

    pub fn feasible(&mut self) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        let zero = vec![0.0; self.var.len()];
        self.argmin(&zero)
    }

    /// Whether `j` (together with some auxiliary columns `aux`) satisfies every row.
    pub fn contains(&self, j: &[f64], aux: Option<&[f64]>, tol: f64) -> bool {
        if self.var.iter().enumerate().any(|(cell, v)| v.is_none() && j[cell] > 0.0) {
            return false;
        }
        let mut x = aux.map(|a| a.to_vec()).unwrap_or_else(|| vec![0.0; self.lp.n_vars()]);
        if x.len() != self.lp.n_vars() {
            return false;
        }
        for (cell, v) in self.var.iter().enumerate() {
            if let Some(v) = v {
                x[*v] = j[cell];
            }
        }
        self.lp.max_violation(&x) <= tol
    }
}

/// Frank-Wolfe over a polytope for a smooth convex `f`, from a feasible `j`.
/// `aux` are the matching auxiliary LP columns (potentials) of `j`.
pub(crate) fn frank_wolfe<F>(poly: &mut Polytope, mut j: Vec<f64>, f: F, iterations: usize) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64], Option<&mut [f64]>) -> f64,
{
    let mut g = vec![0.0; j.len()];
    let mut fj = f(&j, Some(&mut g));
    for _ in 0..iterations {
        let Some((s, _)) = poly.argmin(&g)? else { break };
        let gap: f64 = g.iter().zip(j.iter().zip(&s)).map(|(gi, (a, b))| gi * (a - b)).sum();
        if gap <= 1e-12 * (1.0 + fj.abs()) {
            break;
        }
        let mix = |t: f64| -> Vec<f64> { j.iter().zip(&s).map(|(a, b)| (1.0 - t) * a + t * b).collect() };
        let (t, ft) = golden_section(|t| f(&mix(t), None), 0.0, 1.0, 1e-10);
        let (t, ft) = if f(&s, None) < ft { (1.0, f(&s, None)) } else { (t, ft) };
        if ft >= fj {
            break;
        }
        j = mix(t);
        fj = f(&j, Some(&mut g));
    }
    Ok((j, fj))
}

/// Multi-stage projected gradient with Armijo backtracking on `f + mu * pen`.
pub(crate) fn penalized_descent<F, P>(x: &mut Vec<f64>, iterations: usize, mus: &[f64], f: F, project: P)
where
    F: Fn(&[f64], f64, Option<&mut [f64]>) -> f64,
    P: Fn(&mut [f64]),
{
    let per_stage = (iterations / mus.len().max(1)).max(1);
    for &mu in mus {
        let mut grad = vec![0.0; x.len()];
        let mut fx = f(x, mu, Some(&mut grad));
        let mut step = 1.0 / (1.0 + mu.sqrt());
        for _ in 0..per_stage {
            let mut moved = false;
            for _ in 0..40 {
                let mut cand: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
                project(&mut cand);
                let dec: f64 = cand.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
                if dec <= 1e-30 {
                    break;
                }
                let fc = f(&cand, mu, None);
                if fc <= fx - 1e-4 * dec / step {
                    *x = cand;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    fx = f(x, mu, Some(&mut grad));
                    step *= 1.5;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }
}

/// Zero tiny entries of each `P(.|x)` row and renormalize.
pub(crate) fn clean_pzx(pzx: &mut [f64], nz: usize) {
    for row in pzx.chunks_mut(nz) {
        row.iter_mut().for_each(|v| {
            if *v < PZX_FLOOR {
                *v = 0.0
            }
        });
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

pub(crate) fn mix(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::membership::build_dq;

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        let ch = example_candidate();
        let q = example_metric();
        let shape = Shape { nx: 2, ny: 3, nz: 3 };
        let mut j = ch.joint_kernel();
        // perturb away from the feasible point so the penalty is active
        j[shape.idx(0, 1, 1)] += 0.2;
        j[shape.idx(0, 0, 1)] -= 0.1;
        for rows in [Rows::Elementwise, Rows::Zero] {
            let rs = Rowset::new(shape, &q, rows, vec![true, true]);
            let mut g = vec![0.0; j.len()];
            let p0 = rs.penalty(&j, 1.0, Some(&mut g));
            assert!(p0 > 0.0);
            for i in 0..j.len() {
                let mut jp = j.clone();
                jp[i] += 1e-7;
                let fd = (rs.penalty(&jp, 1.0, None) - p0) / 1e-7;
                assert!((fd - g[i]).abs() < 1e-5, "{rows:?} {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn scaled_entry_matches_dq() {
        let ch = example_candidate();
        let q = example_metric();
        let shape = Shape { nx: 2, ny: 3, nz: 3 };
        let j = ch.joint_kernel();
        let pzx = shape.pzx(&j);
        let d = build_dq(&ch, &q);
        let rs = Rowset::new(shape, &q, Rows::Elementwise, vec![true, true]);
        for z in 0..3 {
            let scaled = pzx[3 + z] * rs.cross(&j, 0, 1, z) + pzx[z] * rs.cross(&j, 1, 0, z);
            assert!((scaled - pzx[z] * pzx[3 + z] * d.get(z, 0, 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn mi_gradient_matches_finite_differences() {
        let px = [0.3, 0.7];
        let pzx = [0.2, 0.5, 0.3, 0.6, 0.1, 0.3];
        let mut g = vec![0.0; 6];
        let i0 = mi_grad(&px, &pzx, 3, Some(&mut g));
        for k in 0..6 {
            let mut p = pzx;
            p[k] += 1e-7;
            let fd = (mi_grad(&px, &p, 3, None) - i0) / 1e-7;
            // the gradient is taken on the unnormalized extension, so rows agree up to a constant
            let x = k / 3;
            let mut p2 = pzx;
            p2[x * 3] += 1e-7;
            let fd0 = (mi_grad(&px, &p2, 3, None) - i0) / 1e-7;
            assert!(((fd - fd0) - (g[k] - g[x * 3])).abs() < 1e-5);
        }
    }

    #[test]
    fn polytope_contains_candidate() {
        let ch = example_candidate();
        let q = example_metric();
        let shape = Shape { nx: 2, ny: 3, nz: 3 };
        let j = ch.joint_kernel();
        let pzx = shape.pzx(&j);
        let w: Vec<f64> = ch.marginal_y().as_flat().to_vec();
        let rs = Rowset::new(shape, &q, Rows::Elementwise, vec![true, true]);
        let poly = rs.polytope(&pzx, &[true; 18], Some(&w), &[0.5, 0.5]);
        assert!(poly.contains(&j, None, 1e-12));
        let rz = Rowset::new(shape, &q, Rows::Zero, vec![true, true]);
        let poly = rz.polytope(&pzx, &[true; 18], Some(&w), &[0.5, 0.5]);
        assert!(!poly.contains(&j, None, 1e-9));
    }
}
