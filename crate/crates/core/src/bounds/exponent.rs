//! Sphere-packing-style exponent bounds at a fixed composition.
//!
//! The program is `min D(P_{Y|X} || W | P)` over two-output channels in the
//! variant's set with `I(P, P_{Z|X}) <= R`. Each restart runs a penalized
//! projected gradient over kernels `P(y,z|x)`; the resulting `P_{Z|X}` is then
//! frozen (mixed toward a rate-feasible anchor when needed) and the divergence
//! is minimized exactly over the membership polytope by Frank-Wolfe. Every
//! reported point is re-verified by the set's own oracle, so the value is a
//! feasible objective and hence an upper bound on the program.

use super::search::{clean_pzx, frank_wolfe, mi_grad, mix, penalized_descent, Rows, Rowset, Shape};
use super::{classical_sp_with_witness, variant_membership, BoundKind, BoundReport, Validity, Variant};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::metric::{Dmc, Metric};
use crate::optim::{dirichlet, project_simplex_masked, rng, SearchBudget};
use crate::par::Exec;
use crate::prob::{channel_mi, conditional_divergence, FinDist};

const MUS: [f64; 5] = [10.0, 1e2, 1e3, 1e4, 1e5];
const FW_ITERATIONS: usize = 60;
const LOG_FLOOR: f64 = 1e-12;

struct Ctx<'a> {
    q: &'a Metric,
    variant: Variant,
    shape: Shape,
    rs: Rowset<'a>,
    w: &'a Dmc,
    p: &'a FinDist,
    rate: f64,
    allowed: Vec<bool>,
}

struct Point {
    value: f64,
    ch: TwoOutputChannel,
}

impl Ctx<'_> {
    fn divergence(&self, j: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let s = self.shape;
        let v = s.pyx(j);
        let mut d = 0.0;
        for x in 0..s.nx {
            let px = self.p[x];
            if px == 0.0 {
                continue;
            }
            for y in 0..s.ny {
                let a = v[x * s.ny + y];
                if a > 0.0 {
                    d += px * a * (a / self.w.get(x, y)).ln();
                }
            }
        }
        if let Some(g) = grad {
            for x in 0..s.nx {
                for y in 0..s.ny {
                    let wv = self.w.get(x, y);
                    let gv = if wv > 0.0 { self.p[x] * ((v[x * s.ny + y].max(LOG_FLOOR) / wv).ln() + 1.0) } else { 0.0 };
                    for z in 0..s.nz {
                        g[s.idx(x, y, z)] = gv;
                    }
                }
            }
        }
        d
    }

    fn project(&self, j: &mut [f64]) {
        let s = self.shape;
        let block = s.ny * s.nz;
        for x in 0..s.nx {
            project_simplex_masked(&mut j[x * block..(x + 1) * block], &self.allowed[x * block..(x + 1) * block]);
        }
    }

    /// Exact minimization over the polytope at a frozen `P_{Z|X}`, from `start` when it is inside.
    fn restore(&self, pzx: &[f64], start: Option<&[f64]>) -> Option<Vec<f64>> {
        if mi_grad(self.p.probs(), pzx, self.shape.nz, None) > self.rate {
            return None;
        }
        let mut poly = self.rs.polytope(pzx, &self.allowed, None, self.p.probs());
        let mut g = vec![0.0; self.shape.len()];
        let j0 = match start {
            Some(j) if self.rs.rows != Rows::Transport && poly.contains(j, None, 1e-12) => j.to_vec(),
            Some(j) => {
                self.divergence(j, Some(&mut g));
                poly.argmin(&g).ok()??.0
            }
            None => poly.feasible().ok()??.0,
        };
        frank_wolfe(&mut poly, j0, |j, g| self.divergence(j, g), FW_ITERATIONS).ok().map(|r| r.0)
    }

    /// Complete the kernel on inputs outside the composition's support and verify.
    fn accept(&self, j: &[f64]) -> Option<Point> {
        let s = self.shape;
        let mut full = j.to_vec();
        for x in (0..s.nx).filter(|&x| self.p[x] == 0.0) {
            for y in 0..s.ny {
                for z in 0..s.nz {
                    full[s.idx(x, y, z)] = self.w.get(x, y) / s.nz as f64;
                }
            }
        }
        let ch = TwoOutputChannel::from_joint_kernel(s.nx, s.ny, s.nz, &full).ok()?;
        if channel_mi(self.p, ch.pzx()) > self.rate {
            return None;
        }
        let v = variant_membership(self.variant, &ch, self.q, Some(self.p), None).ok()?;
        if !v.is_in() {
            return None;
        }
        let value = conditional_divergence(&ch.marginal_y(), self.w.cond(), self.p).ok()?;
        value.is_finite().then_some(Point { value, ch })
    }

    fn run(&self, start: Vec<f64>, iterations: usize, anchors: &[Vec<f64>]) -> Option<Point> {
        let s = self.shape;
        let mut j = start;
        self.project(&mut j);
        let f = |j: &[f64], mu: f64, grad: Option<&mut [f64]>| -> f64 {
            let pzx = s.pzx(j);
            match grad {
                Some(g) => {
                    let d = self.divergence(j, Some(g));
                    let mut gp = vec![0.0; s.nx * s.nz];
                    let i = mi_grad(self.p.probs(), &pzx, s.nz, Some(&mut gp));
                    let excess = (i - self.rate).max(0.0);
                    if excess > 0.0 {
                        for x in 0..s.nx {
                            for y in 0..s.ny {
                                for z in 0..s.nz {
                                    g[s.idx(x, y, z)] += mu * 2.0 * excess * gp[x * s.nz + z];
                                }
                            }
                        }
                    }
                    d + mu * (excess * excess + self.rs.penalty(j, mu, Some(g)))
                }
                None => {
                    let excess = (mi_grad(self.p.probs(), &pzx, s.nz, None) - self.rate).max(0.0);
                    self.divergence(j, None) + mu * (excess * excess + self.rs.penalty(j, 1.0, None))
                }
            }
        };
        penalized_descent(&mut j, iterations, &MUS, f, |v| self.project(v));
        self.finish(&j, anchors)
    }

    /// Restore at the kernel's own `P_{Z|X}`, else bisect toward each anchor.
    fn finish(&self, j: &[f64], anchors: &[Vec<f64>]) -> Option<Point> {
        let s = self.shape;
        let mut pzx = s.pzx(j);
        clean_pzx(&mut pzx, s.nz);
        let direct = self.restore(&pzx, Some(j)).and_then(|k| self.accept(&k));
        let mut best = direct;
        for a in anchors {
            if best.is_some() {
                break;
            }
            let apzx = s.pzx(a);
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..14 {
                let t = 0.5 * (lo + hi);
                let mut p = mix(&pzx, &apzx, t);
                clean_pzx(&mut p, s.nz);
                let start = mix(j, a, t);
                match self.restore(&p, Some(&start)).and_then(|k| self.accept(&k)) {
                    Some(pt) => {
                        if best.as_ref().is_none_or(|b| pt.value < b.value) {
                            best = Some(pt);
                        }
                        hi = t;
                    }
                    None => lo = t,
                }
            }
        }
        best
    }
}

/// Best feasible value found for the exponent program; `+inf` when the search
/// finds no feasible channel.
#[allow(clippy::too_many_arguments)]
pub fn exponent_bound(
    w: &Dmc,
    q: &Metric,
    p: &FinDist,
    rate: f64,
    variant: Variant,
    nz: usize,
    budget: SearchBudget,
    exec: Exec,
) -> Result<BoundReport> {
    exponent_bound_with_starts(w, q, p, rate, variant, nz, budget, exec, &[])
}

/// As [`exponent_bound`], with extra starting channels. Starts that are
/// already feasible are kept as candidates, so a point feasible for a
/// smaller set or a smaller rate can only improve the result.
#[allow(clippy::too_many_arguments)]
pub fn exponent_bound_with_starts(
    w: &Dmc,
    q: &Metric,
    p: &FinDist,
    rate: f64,
    variant: Variant,
    nz: usize,
    budget: SearchBudget,
    exec: Exec,
    starts: &[TwoOutputChannel],
) -> Result<BoundReport> {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidArgument(format!("rate must be finite and nonnegative, got {rate}")));
    }
    let (nx, ny) = (w.nx(), w.ny());
    if p.len() != nx || q.nx() != nx || q.ny() != ny {
        return Err(Error::DimensionMismatch("composition, metric and channel disagree in shape".into()));
    }
    match variant {
        Variant::Psd | Variant::Tilde | Variant::Sym | Variant::TildeSym | Variant::KspF => {}
        Variant::ClassicalSp => {
            let (v, _) = classical_sp_with_witness(w.cond(), p, rate)?;
            let mut r = BoundReport::new(BoundKind::Exponent, variant, Validity::Certified, v)
                .note("convex program solved by the tilted alternating minimization");
            r.rate = Some(rate);
            r.input_distribution = Some(p.clone());
            return Ok(r);
        }
        _ => return Err(Error::InvalidArgument(format!("{} is not an exponent variant here", variant.name()))),
    }
    if nz == 0 {
        return Err(Error::InvalidArgument("|Z| must be positive".into()));
    }
    let shape = Shape { nx, ny, nz };
    let active: Vec<bool> = (0..nx).map(|x| p[x] > 0.0).collect();
    let mut allowed = vec![false; shape.len()];
    for x in 0..nx {
        for y in 0..ny {
            if active[x] && w.get(x, y) > 0.0 && !q.is_forbidden(x, y) {
                for z in 0..nz {
                    allowed[shape.idx(x, y, z)] = true;
                }
            }
        }
    }
    let ctx = Ctx {
        q,
        variant,
        shape,
        rs: Rowset::new(shape, q, Rows::of(variant), active.clone()),
        w,
        p,
        rate,
        allowed,
    };

    // Anchors: copies (Z = Y) of W and of the sphere-packing minimizer, both
    // rate-feasible by construction; a constant Z as a fallback.
    let (_, vstar) = classical_sp_with_witness(w.cond(), p, rate)?;
    let copy_of = |v: &[f64], zmap: &dyn Fn(usize) -> usize| -> Vec<f64> {
        let mut j = vec![0.0; shape.len()];
        for x in 0..nx {
            for y in 0..ny {
                if active[x] {
                    j[shape.idx(x, y, zmap(y))] = v[x * ny + y];
                }
            }
        }
        j
    };
    let mut anchors = Vec::new();
    if nz >= ny {
        anchors.push(copy_of(vstar.as_flat(), &|y| y));
        if channel_mi(p, w.cond()) <= rate {
            anchors.push(copy_of(w.cond().as_flat(), &|y| y));
        }
    }
    anchors.push(copy_of(vstar.as_flat(), &|_| 0));
    let injected: Vec<Vec<f64>> = starts.iter().filter_map(|c| shape.kernel_of(c)).collect();

    let mut points: Vec<Point> = Vec::new();
    for j in anchors.iter().chain(&injected) {
        let mut k = j.clone();
        for x in (0..nx).filter(|&x| !active[x]) {
            for y in 0..ny {
                for z in 0..nz {
                    k[shape.idx(x, y, z)] = 0.0;
                }
            }
        }
        if let Some(pt) = ctx.accept(&k) {
            points.push(pt);
        }
        if let Some(pt) = ctx.finish(&k, &[]) {
            points.push(pt);
        }
    }
    let feasible_anchors: Vec<Vec<f64>> = anchors.iter().filter(|a| ctx.accept(a).is_some()).cloned().collect();

    let restarts = budget.restarts.max(1);
    let found = exec.map(restarts, |r| {
        let start = match injected.get(r) {
            Some(j) => j.clone(),
            None => {
                let mut g = rng(budget.seed, 0xe_0000 + r as u64);
                let alpha = if r % 2 == 0 { 1.0 } else { 0.2 };
                let block = ny * nz;
                let mut j = vec![0.0; shape.len()];
                for x in 0..nx {
                    let d = dirichlet(&mut g, block, alpha);
                    j[x * block..(x + 1) * block].copy_from_slice(&d);
                }
                j
            }
        };
        ctx.run(start, budget.iterations, &feasible_anchors)
    });
    points.extend(found.into_iter().flatten());

    let best = points.into_iter().min_by(|a, b| a.value.total_cmp(&b.value));
    let mut r = match best {
        Some(pt) => {
            let verdict = variant_membership(variant, &pt.ch, q, Some(p), None)?;
            let mut r = BoundReport::new(BoundKind::Exponent, variant, Validity::Certified, pt.value)
                .note("feasible point: membership re-checked at the pinned composition and I(P, P_Z|X) <= R");
            r.witness = Some(pt.ch);
            r.membership = Some(verdict);
            r
        }
        None => BoundReport::new(BoundKind::Exponent, variant, Validity::Exploratory, f64::INFINITY)
            .note("no feasible channel found within the search budget"),
    };
    r.rate = Some(rate);
    r.input_distribution = Some(p.clone());
    r.budget = Some(budget);
    Ok(r)
}
