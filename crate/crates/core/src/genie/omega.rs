//! The pairwise-error exponent `Omega(P_{X Z X~}, W_{Y|XZ})`: the smallest
//! `D(V_{Y|XZX~} || W_{Y|XZ} | P)` over channels that make the competitor `x~`
//! score at least as well as the transmitted `x` on average, and its
//! restriction `Omega_n` to joint types of order `n`.

use serde::{Deserialize, Serialize};

use super::types::order_n_counts;
use crate::error::{Error, Result};
use crate::ext;
use crate::metric::Metric;
use crate::optim::compositions;
use crate::prob::{kl_divergence, Axis, CondDist, JointDist};

/// Enumeration cap for `omega_n`.
pub const OMEGA_N_CAP: f64 = 1e8;
/// Slack on the score constraint in the type enumeration.
const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Omega {
    /// Divergence of the returned feasible channel (`+inf` when none exists).
    #[serde(with = "ext")]
    pub value: f64,
    /// Dual lower bound; equals `value` up to the bisection tolerance.
    #[serde(with = "ext")]
    pub dual: f64,
    #[serde(with = "ext")]
    pub lambda: f64,
    /// `V(y | x, z, x~)`, row `(x * nz + z) * nx + x~`; cells with zero mass keep `W`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Vec<f64>>>,
}

/// Cells `(x, z, x~)` with positive mass and, for each, the allowed outputs
/// and their score gaps `q(x~, y) - q(x, y)`.
struct Cells {
    nx: usize,
    nz: usize,
    ny: usize,
    mass: Vec<f64>,
    /// Outputs with `W(y|x,z) > 0` and `q(x~, y) > -inf`.
    support: Vec<Vec<usize>>,
    gap: Vec<Vec<f64>>,
    w: Vec<Vec<f64>>,
}

impl Cells {
    fn new(p: &JointDist, w: &CondDist, q: &Metric) -> Result<Self> {
        let p = p.permuted(&[Axis::X, Axis::Z, Axis::Xt])?;
        let (nx, nz, nxt) = (p.shape()[0], p.shape()[1], p.shape()[2]);
        if nxt != nx {
            return Err(Error::DimensionMismatch(format!("X has {nx} symbols but X~ has {nxt}")));
        }
        if w.n_in() != nx * nz {
            return Err(Error::DimensionMismatch(format!("W(y|x,z) has {} rows, expected {}", w.n_in(), nx * nz)));
        }
        let ny = w.n_out();
        if q.nx() != nx || q.ny() != ny {
            return Err(Error::DimensionMismatch(format!("metric is {}x{}, expected {nx}x{ny}", q.nx(), q.ny())));
        }
        let pxz = p.marginal(&[Axis::X, Axis::Z])?;
        let pxtz = p.marginal(&[Axis::Xt, Axis::Z])?;
        let diff = pxz.probs().iter().zip(pxtz.probs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff > 1e-9 {
            return Err(Error::MarginalMismatch(format!("P(x~, z) differs from P(x, z) by {diff:.3e}")));
        }
        let cells = nx * nz * nx;
        let (mut mass, mut support, mut gap, mut wrows) = (vec![0.0; cells], vec![], vec![], vec![]);
        for x in 0..nx {
            for z in 0..nz {
                let row = w.row(x * nz + z);
                for xt in 0..nx {
                    let c = (x * nz + z) * nx + xt;
                    mass[c] = p.probs()[c];
                    let (mut s, mut g) = (vec![], vec![]);
                    if mass[c] > 0.0 {
                        for y in 0..ny {
                            if row[y] == 0.0 {
                                continue;
                            }
                            if q.is_forbidden(x, y) {
                                return Err(Error::InvalidMetric(format!(
                                    "q({x},{y}) = -inf although W({y}|{x},{z}) > 0"
                                )));
                            }
                            if !q.is_forbidden(xt, y) {
                                s.push(y);
                                g.push(q.get(xt, y) - q.get(x, y));
                            }
                        }
                    }
                    support.push(s);
                    gap.push(g);
                    wrows.push(row.to_vec());
                }
            }
        }
        Ok(Self { nx, nz, ny, mass, support, gap, w: wrows })
    }

    fn active(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.mass.len()).filter(|&c| self.mass[c] > 0.0)
    }

    /// `ln sum_{y in S_c} W(y|c) e^{lambda g}` and the tilted row.
    fn tilt(&self, c: usize, lambda: f64) -> (f64, Vec<f64>) {
        let e: Vec<f64> = self.gap[c].iter().map(|g| lambda * g).collect();
        let top = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let terms: Vec<f64> =
            self.support[c].iter().zip(&e).map(|(&y, &v)| self.w[c][y] * (v - top).exp()).collect();
        let s: f64 = terms.iter().sum();
        let mut row = vec![0.0; self.ny];
        self.support[c].iter().zip(&terms).for_each(|(&y, &t)| row[y] = t / s);
        (top + s.ln(), row)
    }

    /// Dual value `-sum_c P(c) ln Z_c(lambda)` and the mean gap under the tilted channel.
    fn dual(&self, lambda: f64) -> (f64, f64) {
        let (mut phi, mut mean) = (0.0, 0.0);
        for c in self.active() {
            let (lz, row) = self.tilt(c, lambda);
            phi -= self.mass[c] * lz;
            mean += self.mass[c] * self.support[c].iter().zip(&self.gap[c]).map(|(&y, g)| row[y] * g).sum::<f64>();
        }
        (phi, mean)
    }

    fn divergence(&self, v: &[Vec<f64>]) -> f64 {
        self.active().map(|c| self.mass[c] * kl_divergence(&v[c], &self.w[c])).sum()
    }

    fn witness_from(&self, f: impl Fn(usize) -> Vec<f64>) -> Vec<Vec<f64>> {
        (0..self.mass.len()).map(|c| if self.mass[c] > 0.0 { f(c) } else { self.w[c].clone() }).collect()
    }
}

/// `Omega` by the one-dimensional exponential-tilt dual
/// `max_{lambda >= 0} -sum_c P(c) ln sum_y W(y|c) e^{lambda g(c,y)}`.
pub fn omega(p_xzx: &JointDist, w_yxz: &CondDist, q: &Metric) -> Result<Omega> {
    omega_relaxed(p_xzx, w_yxz, q, 0.0)
}

/// `Omega` with the score constraint lowered to `mean gap >= -slack`.
pub fn omega_relaxed(p_xzx: &JointDist, w_yxz: &CondDist, q: &Metric, slack: f64) -> Result<Omega> {
    if !(slack >= 0.0 && slack.is_finite()) {
        return Err(Error::InvalidArgument(format!("slack must be finite and nonnegative, got {slack}")));
    }
    let cells = Cells::new(p_xzx, w_yxz, q)?;
    let infeasible = Omega { value: f64::INFINITY, dual: f64::INFINITY, lambda: f64::INFINITY, witness: None };
    if cells.active().any(|c| cells.support[c].is_empty()) {
        return Ok(infeasible);
    }
    let dual = |lambda: f64| {
        let (phi, mean) = cells.dual(lambda);
        (phi - lambda * slack, mean + slack)
    };
    let (phi0, mean0) = dual(0.0);
    if mean0 >= 0.0 {
        let v = cells.witness_from(|c| cells.tilt(c, 0.0).1);
        return Ok(Omega { value: cells.divergence(&v), dual: phi0, lambda: 0.0, witness: Some(v) });
    }
    let best: Vec<f64> = cells.gap.iter().map(|g| g.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let scale = cells.active().flat_map(|c| cells.gap[c].iter().map(|g| g.abs())).fold(0.0, f64::max);
    let reach: f64 = cells.active().map(|c| cells.mass[c] * best[c]).sum::<f64>() + slack;
    let tol = 1e-12 * scale.max(1.0);
    if reach < -tol {
        return Ok(infeasible);
    }
    if reach <= tol {
        // Only the maximizing outputs of every cell can be used.
        let v = cells.witness_from(|c| {
            let mut row = vec![0.0; cells.ny];
            let top: Vec<usize> =
                cells.support[c].iter().zip(&cells.gap[c]).filter(|(_, &g)| g >= best[c] - tol).map(|(&y, _)| y).collect();
            let s: f64 = top.iter().map(|&y| cells.w[c][y]).sum();
            top.iter().for_each(|&y| row[y] = cells.w[c][y] / s);
            row
        });
        let value = cells.divergence(&v);
        return Ok(Omega { value, dual: value, lambda: f64::INFINITY, witness: Some(v) });
    }
    let mut lo = 0.0;
    let mut hi = 1.0 / scale;
    while dual(hi).1 < 0.0 {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::InvalidArgument("tilt parameter diverged".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if dual(mid).1 < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v = cells.witness_from(|c| cells.tilt(c, hi).1);
    let value = cells.divergence(&v);
    let dual = dual(lo).0.max(dual(hi).0);
    Ok(Omega { value, dual, lambda: hi, witness: Some(v) })
}

/// Mean score gap `sum_c P(c) sum_y V(y|c) g(c, y)` of a channel; `-inf` if
/// `V` uses an output the competitor can never score on.
pub fn score_gap(p_xzx: &JointDist, v: &[Vec<f64>], w_yxz: &CondDist, q: &Metric) -> Result<f64> {
    let cells = Cells::new(p_xzx, w_yxz, q)?;
    let (nx, nz) = (cells.nx, cells.nz);
    let mut total = 0.0;
    for c in cells.active() {
        let (x, xt) = (c / (nz * nx), c % nx);
        for y in 0..cells.ny {
            if v[c][y] > 0.0 {
                if q.is_forbidden(xt, y) {
                    return Ok(f64::NEG_INFINITY);
                }
                total += cells.mass[c] * v[c][y] * (q.get(xt, y) - q.get(x, y));
            }
        }
    }
    Ok(total)
}

/// `Omega_n`: the same minimum over channels `V` for which `P x V` is a joint
/// type of order `n`. Cells whose score gap vanishes on every allowed output
/// are optimized independently; the rest are enumerated jointly with pruning.
pub fn omega_n(p_xzx: &JointDist, w_yxz: &CondDist, q: &Metric, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let cells = Cells::new(p_xzx, w_yxz, q)?;
    let p = p_xzx.permuted(&[Axis::X, Axis::Z, Axis::Xt])?;
    let counts = order_n_counts(p.probs(), n)?;
    let nf = n as f64;
    if cells.active().any(|c| cells.support[c].is_empty()) {
        return Ok(f64::INFINITY);
    }
    // Per-cell candidate rows: (divergence contribution, gap contribution).
    let mut free_total = 0.0;
    let mut coupled: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut size = 1.0f64;
    for c in cells.active() {
        let nc = counts[c];
        let s = &cells.support[c];
        let options: Vec<(f64, f64)> = compositions(nc, s.len())
            .into_iter()
            .map(|k| {
                let mut row = vec![0.0; cells.ny];
                let mut g = 0.0;
                for (i, &y) in s.iter().enumerate() {
                    row[y] = k[i] as f64 / nc as f64;
                    g += k[i] as f64 * cells.gap[c][i];
                }
                (nc as f64 / nf * kl_divergence(&row, &cells.w[c]), g / nf)
            })
            .collect();
        if cells.gap[c].iter().all(|&g| g == 0.0) {
            free_total += options.iter().map(|o| o.0).fold(f64::INFINITY, f64::min);
        } else {
            size *= options.len() as f64;
            coupled.push(options);
        }
    }
    if size > OMEGA_N_CAP {
        return Err(Error::BudgetExceeded { needed: size, cap: OMEGA_N_CAP });
    }
    // Best achievable gap from cells k.. onward, for feasibility pruning.
    let mut reach = vec![0.0; coupled.len() + 1];
    for k in (0..coupled.len()).rev() {
        reach[k] = reach[k + 1] + coupled[k].iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
    }
    let mut best = f64::INFINITY;
    search(&coupled, &reach, 0, 0.0, 0.0, &mut best);
    Ok(free_total + best)
}

fn search(cells: &[Vec<(f64, f64)>], reach: &[f64], k: usize, d: f64, g: f64, best: &mut f64) {
    if d >= *best || g + reach[k] < -CONSTRAINT_TOL {
        return;
    }
    if k == cells.len() {
        *best = d;
        return;
    }
    for &(dc, gc) in &cells[k] {
        search(cells, reach, k + 1, d + dc, g + gc, best);
    }
}
