//! Max-min capacity estimates over sampled input distributions.
//!
//! For a full-support `P_X` the elementwise and zero-matrix conditions do not
//! depend on `P_X`, so every verified channel is feasible at every sampled
//! input. The search therefore keeps a shared pool of verified channels: each
//! restart minimizes `I(X;Z)` at one input by penalized projected gradient,
//! restores exact membership by a linear program at the resulting `P_{Z|X}`,
//! and the pool is then scanned at every grid point.

use super::search::{clean_pzx, mi_grad, mix, penalized_descent, Rows, Rowset, Shape};
use super::{variant_membership, BoundKind, BoundReport, Validity, Variant};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::membership::{member_psd, member_tilde};
use crate::metric::{Dmc, Metric};
use crate::optim::{dirichlet, project_simplex, rng, simplex_grid, SearchBudget};
use crate::par::Exec;
use crate::prob::FinDist;

const MUS: [f64; 8] = [1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6, 1e8];
const REFINE_ROUNDS: usize = 3;

/// Mesh `0.01` for binary inputs, 1024 Dirichlet(1) draws otherwise.
pub fn default_px_grid(nx: usize, seed: u64) -> Vec<FinDist> {
    match nx {
        0 => Vec::new(),
        1 => vec![FinDist::point(1, 0)],
        2 => simplex_grid(2, 100).into_iter().map(|p| FinDist::renormalized(p).unwrap()).collect(),
        _ => {
            let mut g = rng(seed, 0xd1_5c);
            (0..1024).map(|_| FinDist::renormalized(dirichlet(&mut g, nx, 1.0)).unwrap()).collect()
        }
    }
}

struct Member {
    pzx: Vec<f64>,
    ch: TwoOutputChannel,
    j: Vec<f64>,
}

struct Ctx<'a> {
    w: &'a Dmc,
    q: &'a Metric,
    variant: Variant,
    shape: Shape,
    rs: Rowset<'a>,
    wflat: Vec<f64>,
    allowed: Vec<bool>,
    uniform: Vec<f64>,
}

impl Ctx<'_> {
    fn project(&self, j: &mut [f64]) {
        let s = self.shape;
        for x in 0..s.nx {
            for y in 0..s.ny {
                let wv = self.wflat[x * s.ny + y];
                let base = s.idx(x, y, 0);
                let row = &mut j[base..base + s.nz];
                if wv > 0.0 {
                    row.iter_mut().for_each(|v| *v /= wv);
                    project_simplex(row);
                    row.iter_mut().for_each(|v| *v *= wv);
                } else {
                    row.iter_mut().for_each(|v| *v = 0.0);
                }
            }
        }
    }

    fn restore(&self, pzx: &[f64]) -> Option<Vec<f64>> {
        let mut poly = self.rs.polytope(pzx, &self.allowed, Some(&self.wflat), &self.uniform);
        poly.feasible().ok().flatten().map(|(j, _)| j)
    }

    /// Input-independent verification of a kernel.
    fn accept(&self, j: &[f64]) -> Option<Member> {
        let s = self.shape;
        let ch = TwoOutputChannel::from_joint_kernel(s.nx, s.ny, s.nz, j).ok()?;
        ch.check_marginal(self.w, 1e-9).ok()?;
        let v = match self.variant {
            Variant::Psd => member_psd(&ch, self.q).ok()?,
            _ => member_tilde(&ch, self.q, None).ok()?,
        };
        v.is_in().then(|| Member { pzx: ch.pzx().as_flat().to_vec(), j: ch.joint_kernel(), ch })
    }

    fn kernel_from_map(&self, f: impl Fn(usize, usize) -> usize) -> Vec<f64> {
        let s = self.shape;
        let mut j = vec![0.0; s.len()];
        for x in 0..s.nx {
            for y in 0..s.ny {
                j[s.idx(x, y, f(x, y))] = self.wflat[x * s.ny + y];
            }
        }
        j
    }

    fn anchors(&self) -> Vec<Member> {
        let s = self.shape;
        let mut cands = vec![self.kernel_from_map(|_, _| 0)];
        if s.nz >= s.ny {
            cands.push(self.kernel_from_map(|_, y| y));
        }
        if s.nz >= s.nx {
            cands.push(self.kernel_from_map(|x, _| x));
        }
        cands.iter().filter_map(|j| self.accept(j)).collect()
    }

    /// One restart: descend at `px` from `start`, restore, verify.
    fn run(&self, px: &[f64], start: Vec<f64>, iterations: usize, anchors: &[Member]) -> Option<Member> {
        let s = self.shape;
        let mut j = start;
        self.project(&mut j);
        let f = |j: &[f64], mu: f64, grad: Option<&mut [f64]>| -> f64 {
            let pzx = s.pzx(j);
            match grad {
                Some(g) => {
                    let mut gp = vec![0.0; s.nx * s.nz];
                    let i = mi_grad(px, &pzx, s.nz, Some(&mut gp));
                    for x in 0..s.nx {
                        for y in 0..s.ny {
                            for z in 0..s.nz {
                                g[s.idx(x, y, z)] = gp[x * s.nz + z];
                            }
                        }
                    }
                    i + mu * self.rs.penalty(j, mu, Some(g))
                }
                None => mi_grad(px, &pzx, s.nz, None) + mu * self.rs.penalty(j, 1.0, None),
            }
        };
        penalized_descent(&mut j, iterations, &MUS, f, |v| self.project(v));
        let mut pzx = s.pzx(&j);
        clean_pzx(&mut pzx, s.nz);
        if let Some(m) = self.accept(&j) {
            return Some(m);
        }
        if let Some(m) = self.restore(&pzx).and_then(|j| self.accept(&j)) {
            return Some(m);
        }
        // Bisect toward the anchor with the smallest I at this input.
        let anchor = anchors
            .iter()
            .min_by(|a, b| mi_grad(px, &a.pzx, s.nz, None).total_cmp(&mi_grad(px, &b.pzx, s.nz, None)))?;
        let (mut lo, mut hi) = (0.0, 1.0);
        let mut best: Option<Member> = None;
        for _ in 0..16 {
            let t = 0.5 * (lo + hi);
            let mut p = mix(&pzx, &anchor.pzx, t);
            clean_pzx(&mut p, s.nz);
            match self.restore(&p).and_then(|j| self.accept(&j)) {
                Some(m) => {
                    best = Some(m);
                    hi = t;
                }
                None => lo = t,
            }
        }
        best
    }
}

fn value_at(px: &[f64], pool: &[Member], nz: usize) -> Option<(f64, usize)> {
    pool.iter()
        .enumerate()
        .map(|(k, m)| (mi_grad(px, &m.pzx, nz, None), k))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
}

/// Estimate `max_{P_X} min I(X;Z)` over channels with `|Z| = nz` in the
/// variant's set and `P_{Y|X} = W`. Grid points where no channel is known
/// contribute `+inf`.
#[allow(clippy::too_many_arguments)]
pub fn exploratory_capacity_bound(
    w: &Dmc,
    q: &Metric,
    variant: Variant,
    nz: usize,
    px_grid: Option<&[FinDist]>,
    budget: SearchBudget,
    exec: Exec,
    starts: &[TwoOutputChannel],
) -> Result<BoundReport> {
    match variant {
        Variant::Psd | Variant::Tilde | Variant::Sym | Variant::TildeSym | Variant::WqHeuristic => {}
        Variant::Gamma => return Err(Error::InvalidArgument("use the gamma bound for the zero-pattern set".into())),
        _ => return Err(Error::InvalidArgument(format!("{} is not a capacity variant", variant.name()))),
    }
    let (nx, ny) = (w.nx(), w.ny());
    if q.nx() != nx || q.ny() != ny {
        return Err(Error::DimensionMismatch("metric and channel disagree in shape".into()));
    }
    if nz == 0 {
        return Err(Error::InvalidArgument("|Z| must be positive".into()));
    }
    for x in 0..nx {
        for y in 0..ny {
            if w.get(x, y) > 0.0 && q.is_forbidden(x, y) {
                return Err(Error::InvalidMetric(format!(
                    "q(x={x}, y={y}) = -inf where W(y|x) > 0; E q(X,Y) is -inf for every input"
                )));
            }
        }
    }
    let owned;
    let grid = match px_grid {
        Some(g) => g,
        None => {
            owned = default_px_grid(nx, budget.seed);
            &owned
        }
    };
    if grid.iter().any(|p| p.len() != nx) {
        return Err(Error::DimensionMismatch("grid distributions must have |X| entries".into()));
    }
    let shape = Shape { nx, ny, nz };
    let ctx = Ctx {
        w,
        q,
        variant,
        shape,
        rs: Rowset::new(shape, q, Rows::of(variant), vec![true; nx]),
        wflat: w.cond().as_flat().to_vec(),
        allowed: w.cond().as_flat().iter().flat_map(|&v| std::iter::repeat_n(v > 0.0, nz)).collect(),
        uniform: vec![1.0 / nx as f64; nx],
    };
    let anchors = ctx.anchors();
    let injected: Vec<Vec<f64>> = starts.iter().filter_map(|c| shape.kernel_of(c)).collect();
    let mut pool: Vec<Member> = ctx.anchors();
    pool.extend(injected.iter().filter_map(|j| ctx.accept(j)));

    let restarts = budget.restarts.max(1);
    let seeds: Vec<usize> = (0..restarts).map(|r| (2 * r + 1) * grid.len() / (2 * restarts)).collect();
    let found = exec.map(restarts, |r| {
        let px = grid[seeds[r].min(grid.len() - 1)].probs();
        let start = match injected.get(r) {
            Some(j) => j.clone(),
            None => random_kernel(&ctx, budget.seed, r as u64),
        };
        ctx.run(px, start, budget.iterations, &anchors)
    });
    pool.extend(found.into_iter().flatten());

    for round in 0..REFINE_ROUNDS {
        let Some((k, _)) = worst_point(grid, &pool, nz) else { break };
        let px = grid[k].probs();
        let best = value_at(px, &pool, nz).map(|(_, i)| pool[i].j.clone());
        let n = (restarts / 8).max(2);
        let found = exec.map(n, |r| {
            let stream = ((round + 1) * restarts + r) as u64;
            let start = match (&best, r) {
                (Some(j), 0) => j.clone(),
                _ => random_kernel(&ctx, budget.seed, stream),
            };
            ctx.run(px, start, budget.iterations, &anchors)
        });
        pool.extend(found.into_iter().flatten());
    }

    loop {
        let Some((k, value)) = worst_point(grid, &pool, nz) else {
            let mut r = BoundReport::new(BoundKind::Capacity, variant, Validity::Exploratory, f64::INFINITY)
                .note("no feasible channel found; the minimum over an empty set is +inf");
            r.budget = Some(budget);
            return Ok(r);
        };
        if value == f64::INFINITY {
            unreachable!("nonempty pool gives finite values");
        }
        let px = &grid[k];
        let (_, i) = value_at(px.probs(), &pool, nz).expect("nonempty pool");
        let verdict = variant_membership(variant, &pool[i].ch, q, Some(px), None)?;
        if !verdict.is_in() {
            pool.remove(i);
            continue;
        }
        let mut r = BoundReport::new(BoundKind::Capacity, variant, Validity::Exploratory, value).note(format!(
            "max over {} sampled input distributions of the smallest I(X;Z) among {} verified channels; \
             an estimate of the max-min, not a certificate",
            grid.len(),
            pool.len()
        ));
        r.input_distribution = Some(px.clone());
        r.witness = Some(pool[i].ch.clone());
        r.membership = Some(verdict);
        r.budget = Some(budget);
        return Ok(r);
    }
}

fn worst_point(grid: &[FinDist], pool: &[Member], nz: usize) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, p) in grid.iter().enumerate() {
        let (v, _) = value_at(p.probs(), pool, nz)?;
        if best.is_none_or(|b| v > b.1) {
            best = Some((k, v));
        }
    }
    best
}

fn random_kernel(ctx: &Ctx, seed: u64, stream: u64) -> Vec<f64> {
    let s = ctx.shape;
    let mut g = rng(seed, 0x5eed_0000 + stream);
    let mut j = vec![0.0; s.len()];
    // Alternate between diffuse draws and near-deterministic ones.
    let alpha = if stream.is_multiple_of(2) { 1.0 } else { 0.1 };
    for x in 0..s.nx {
        for y in 0..s.ny {
            let k = dirichlet(&mut g, s.nz, alpha);
            for z in 0..s.nz {
                j[s.idx(x, y, z)] = ctx.wflat[x * s.ny + y] * k[z];
            }
        }
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{blahut_arimoto, BA_TOL};
    use crate::fixtures::*;
    use crate::metric::ml_metric;
    use crate::prob::nats_to_bits;

    #[test]
    fn matched_metric_stays_below_capacity() {
        let w = example_dmc();
        let q = ml_metric(&w);
        let grid = default_px_grid(2, 0);
        let r = exploratory_capacity_bound(&w, &q, Variant::Tilde, 3, Some(&grid[..]), SearchBudget::new(4, 200, 1), Exec::Sequential, &[])
            .unwrap();
        let c = blahut_arimoto(w.cond(), BA_TOL).upper;
        assert!(r.value <= c + 1e-6, "{} vs {c}", r.value);
        assert_eq!(r.validity, Validity::Exploratory);
        assert!(r.revalidate(&w, &q).unwrap().ok);
    }

    #[test]
    fn example_sym_below_prior_bound() {
        let w = example_dmc();
        let q = example_metric();
        let grid = default_px_grid(2, 0);
        let r = exploratory_capacity_bound(&w, &q, Variant::Sym, 3, Some(&grid[..]), SearchBudget::new(8, 400, 3), Exec::Sequential, &[])
            .unwrap();
        assert!(nats_to_bits(r.value) <= 0.4999, "{}", nats_to_bits(r.value));
    }

    #[test]
    fn injected_candidate_caps_the_estimate() {
        let w = example_dmc();
        let q = example_metric();
        let grid = default_px_grid(2, 0);
        let r = exploratory_capacity_bound(&w, &q, Variant::Tilde, 3, Some(&grid[..]), SearchBudget::new(1, 10, 0), Exec::Sequential, &[example_candidate()])
            .unwrap();
        assert!(nats_to_bits(r.value) <= 0.4081 + 5e-4, "{}", nats_to_bits(r.value));
    }
}
