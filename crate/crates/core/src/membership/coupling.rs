//! LP-based sets: the symmetric-coupling sets and the two comparison sets.

use serde::{Deserialize, Serialize};

use super::dq::pair_cost;
use super::{check_dims, expected_true_metric, Certificate, MembershipVerdict, SetName, Status, Support, LP_MARGIN_TOL};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::metric::{metric_diff, Metric, TypeDependentMetric};
use crate::optim::golden_section;
use crate::prob::{Axis, FinDist, JointDist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymVariant {
    /// Symmetric couplings only.
    TildeSym,
    /// Symmetric couplings with `V(x|x,z) >= P(x|z)`.
    Sym,
}

impl SymVariant {
    fn set_name(self) -> SetName {
        match self {
            SymVariant::TildeSym => SetName::WtildeSym,
            SymVariant::Sym => SetName::Wsym,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonSet {
    ThetaStar,
    MMax,
}

/// An LP over couplings, with the flat joint index of each variable and its
/// (extended-real) objective coefficient.
struct CouplingLp {
    lp: LinearProgram,
    cells: Vec<usize>,
    costs: Vec<f64>,
    axes: Vec<Axis>,
    shape: Vec<usize>,
}

impl CouplingLp {
    fn joint(&self, x: &[f64]) -> JointDist {
        let mut probs = vec![0.0; self.shape.iter().product()];
        for (&cell, &v) in self.cells.iter().zip(x) {
            probs[cell] += v.max(0.0);
        }
        JointDist::new_unchecked(self.axes.clone(), self.shape.clone(), probs)
    }
}

/// The polytope of symmetric couplings `V(xt, x, z)` with `V_{XZ} = P_{XZ}`.
fn sym_polytope(ch: &TwoOutputChannel, s: &Support, variant: SymVariant) -> (LinearProgram, Vec<(usize, usize, usize)>) {
    let (nx, nz) = (ch.nx(), ch.nz());
    let mut lp = LinearProgram::new();
    let mut cols = Vec::new();
    let mut index = vec![usize::MAX; nx * nx * nz];
    for xt in 0..nx {
        for x in 0..nx {
            for z in 0..nz {
                if s.on(xt, z) && s.on(x, z) {
                    index[(xt * nx + x) * nz + z] = lp.add_var(0.0);
                    cols.push((xt, x, z));
                }
            }
        }
    }
    for x in 0..nx {
        for z in 0..nz {
            if !s.on(x, z) {
                continue;
            }
            let row = (0..nx).filter(|&xt| s.on(xt, z)).map(|xt| (index[(xt * nx + x) * nz + z], 1.0)).collect();
            lp.add_row(row, Relation::Eq, s.mass(x, z));
            for xt in 0..x {
                if s.on(xt, z) {
                    lp.add_row(
                        vec![(index[(xt * nx + x) * nz + z], 1.0), (index[(x * nx + xt) * nz + z], -1.0)],
                        Relation::Eq,
                        0.0,
                    );
                }
            }
            if variant == SymVariant::Sym {
                let m = s.mass(x, z);
                lp.add_row(vec![(index[(x * nx + x) * nz + z], 1.0)], Relation::Ge, m * m / s.pz(z));
            }
        }
    }
    (lp, cols)
}

fn sym_lp(ch: &TwoOutputChannel, q: &Metric, s: &Support, variant: SymVariant) -> CouplingLp {
    let (nx, nz) = (ch.nx(), ch.nz());
    let (lp, cols) = sym_polytope(ch, s, variant);
    let costs = cols.iter().map(|&(xt, x, z)| if xt == x { 0.0 } else { pair_cost(ch, q, xt, x, z) }).collect();
    let cells = cols.iter().map(|&(xt, x, z)| (xt * nx + x) * nz + z).collect();
    CouplingLp { lp, cells, costs, axes: vec![Axis::Xt, Axis::X, Axis::Z], shape: vec![nx, nx, nz] }
}

fn solve_coupling(mut c: CouplingLp, set: SetName, tol: f64) -> Result<MembershipVerdict> {
    let forbidden: Vec<usize> = (0..c.costs.len()).filter(|&j| c.costs[j] == f64::NEG_INFINITY).collect();
    if !forbidden.is_empty() {
        // Can any feasible coupling load a column with objective -inf?
        let mut probe = c.lp.clone();
        probe.costs_mut().iter_mut().for_each(|v| *v = 0.0);
        for &j in &forbidden {
            probe.set_cost(j, -1.0);
        }
        match probe.solve()? {
            LpOutcome::Optimal(sol) if sol.objective < -1e-12 => {
                return Ok(MembershipVerdict::new(set, Status::Out, f64::NEG_INFINITY)
                    .with_cert(Certificate::Coupling { joint: c.joint(&sol.x) })
                    .with_note("a feasible coupling puts mass on a forbidden (-inf) score"));
            }
            LpOutcome::Optimal(_) => {}
            other => return Err(Error::Lp(format!("coupling polytope not solvable: {other:?}"))),
        }
        for &j in &forbidden {
            c.lp.fix_zero(j);
            c.costs[j] = 0.0;
        }
    }
    for (j, &v) in c.costs.iter().enumerate() {
        c.lp.set_cost(j, v);
    }
    let sol = match c.lp.solve()? {
        LpOutcome::Optimal(sol) => sol,
        other => return Err(Error::Lp(format!("coupling LP should always be feasible and bounded: {other:?}"))),
    };
    let opt = sol.objective;
    if opt >= -tol {
        let v = MembershipVerdict::new(set, Status::In, opt.min(0.0));
        Ok(match c.lp.dual_lower_bound(&sol.duals, 1e-9) {
            Some(lb) => v.with_cert(Certificate::DualBound { lower_bound: lb, duals: sol.duals }),
            None => v.with_note("dual multipliers not feasible within 1e-9; IN rests on the primal optimum"),
        })
    } else {
        Ok(MembershipVerdict::new(set, Status::Out, opt).with_cert(Certificate::Coupling { joint: c.joint(&sol.x) }))
    }
}

/// Minimize `E q(Xt,Y) - E q(X,Y)` over symmetric couplings; IN when the minimum is `>= -1e-8`.
pub fn member_sym(ch: &TwoOutputChannel, q: &Metric, px: &FinDist, variant: SymVariant) -> Result<MembershipVerdict> {
    member_sym_tol(ch, q, px, variant, LP_MARGIN_TOL)
}

pub(crate) fn member_sym_tol(
    ch: &TwoOutputChannel,
    q: &Metric,
    px: &FinDist,
    variant: SymVariant,
    tol: f64,
) -> Result<MembershipVerdict> {
    check_dims(ch, q)?;
    let s = Support::new(ch, Some(px))?;
    if expected_true_metric(ch, q, &s) == f64::NEG_INFINITY {
        return Ok(MembershipVerdict::unknown_indeterminate(variant.set_name()));
    }
    solve_coupling(sym_lp(ch, q, &s, variant), variant.set_name(), tol)
}

/// The comparison sets: `ThetaStar` couples the full `(X, Y, Z)` with a
/// competing input; `MMax` additionally imposes `Xt - (X, Z) - Y`.
pub fn member_comparison_sets(
    ch: &TwoOutputChannel,
    q: &Metric,
    px: &FinDist,
    set: ComparisonSet,
) -> Result<MembershipVerdict> {
    check_dims(ch, q)?;
    let s = Support::new(ch, Some(px))?;
    let name = match set {
        ComparisonSet::ThetaStar => SetName::ThetaStar,
        ComparisonSet::MMax => SetName::Mmax,
    };
    if expected_true_metric(ch, q, &s) == f64::NEG_INFINITY {
        return Ok(MembershipVerdict::unknown_indeterminate(name));
    }
    let c = match set {
        ComparisonSet::MMax => mmax_lp(ch, q, &s),
        ComparisonSet::ThetaStar => theta_lp(ch, q, &s),
    };
    solve_coupling(c, name, LP_MARGIN_TOL)
}

fn mmax_lp(ch: &TwoOutputChannel, q: &Metric, s: &Support) -> CouplingLp {
    let (nx, nz) = (ch.nx(), ch.nz());
    let mut lp = LinearProgram::new();
    let mut cols = Vec::new();
    let mut index = vec![usize::MAX; nx * nx * nz];
    for xt in 0..nx {
        for x in 0..nx {
            for z in 0..nz {
                if s.on(xt, z) && s.on(x, z) {
                    index[(xt * nx + x) * nz + z] = lp.add_var(0.0);
                    cols.push((xt, x, z));
                }
            }
        }
    }
    for a in 0..nx {
        for z in 0..nz {
            if !s.on(a, z) {
                continue;
            }
            let on: Vec<usize> = (0..nx).filter(|&b| s.on(b, z)).collect();
            lp.add_row(on.iter().map(|&xt| (index[(xt * nx + a) * nz + z], 1.0)).collect(), Relation::Eq, s.mass(a, z));
            lp.add_row(on.iter().map(|&x| (index[(a * nx + x) * nz + z], 1.0)).collect(), Relation::Eq, s.mass(a, z));
        }
    }
    let costs = cols.iter().map(|&(xt, x, z)| if xt == x { 0.0 } else { pair_cost(ch, q, xt, x, z) }).collect();
    let cells = cols.iter().map(|&(xt, x, z)| (xt * nx + x) * nz + z).collect();
    CouplingLp { lp, cells, costs, axes: vec![Axis::Xt, Axis::X, Axis::Z], shape: vec![nx, nx, nz] }
}

fn theta_lp(ch: &TwoOutputChannel, q: &Metric, s: &Support) -> CouplingLp {
    let (nx, ny, nz) = (ch.nx(), ch.ny(), ch.nz());
    let pxyz = |x: usize, y: usize, z: usize| s.mass(x, z) * ch.py(x, z)[y];
    let cell = |xt: usize, x: usize, y: usize, z: usize| ((xt * nx + x) * ny + y) * nz + z;
    let mut lp = LinearProgram::new();
    let mut cells = Vec::new();
    let mut costs = Vec::new();
    let mut index = vec![usize::MAX; nx * nx * ny * nz];
    for xt in 0..nx {
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    if pxyz(x, y, z) > 0.0 && s.on(xt, z) {
                        index[cell(xt, x, y, z)] = lp.add_var(0.0);
                        cells.push(cell(xt, x, y, z));
                        let a = q.get(xt, y);
                        costs.push(if xt == x {
                            0.0
                        } else if a == f64::NEG_INFINITY {
                            f64::NEG_INFINITY
                        } else {
                            a - q.get(x, y)
                        });
                    }
                }
            }
        }
    }
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                if pxyz(x, y, z) > 0.0 {
                    let row = (0..nx).filter(|&xt| s.on(xt, z)).map(|xt| (index[cell(xt, x, y, z)], 1.0)).collect();
                    lp.add_row(row, Relation::Eq, pxyz(x, y, z));
                }
            }
        }
    }
    for xt in 0..nx {
        for z in 0..nz {
            if !s.on(xt, z) {
                continue;
            }
            let mut row = Vec::new();
            for x in 0..nx {
                for y in 0..ny {
                    if pxyz(x, y, z) > 0.0 {
                        row.push((index[cell(xt, x, y, z)], 1.0));
                    }
                }
            }
            lp.add_row(row, Relation::Eq, s.mass(xt, z));
        }
    }
    CouplingLp { lp, cells, costs, axes: vec![Axis::Xt, Axis::X, Axis::Y, Axis::Z], shape: vec![nx, nx, ny, nz] }
}

/// Re-evaluate `E q(Xt,Y) - E q(X,Y)` for a coupling certificate.
pub(crate) fn recheck_coupling(ch: &TwoOutputChannel, q: &Metric, joint: &JointDist) -> Result<f64> {
    if joint.axis_position(Axis::Y).is_some() {
        return metric_diff(q, joint);
    }
    let j = joint.marginal(&[Axis::Xt, Axis::X, Axis::Z])?;
    let (nx, nz, ny) = (ch.nx(), ch.nz(), ch.ny());
    let mut probs = vec![0.0; nx * nx * nz * ny];
    for xt in 0..nx {
        for x in 0..nx {
            for z in 0..nz {
                let v = j.probs()[(xt * nx + x) * nz + z];
                if v > 0.0 {
                    for (y, &p) in ch.py(x, z).iter().enumerate() {
                        probs[((xt * nx + x) * nz + z) * ny + y] = v * p;
                    }
                }
            }
        }
    }
    let full = JointDist::new_unchecked(vec![Axis::Xt, Axis::X, Axis::Z, Axis::Y], vec![nx, nx, nz, ny], probs);
    metric_diff(q, &full)
}

/// Symmetric-set test for a type-dependent metric declared convex: minimize
/// `q(V_{Xt Y}) - q(P_{XY})` over the same coupling polytope by Frank-Wolfe.
/// IN is certified by the duality gap, OUT by the iterate itself.
pub fn member_sym_type_dependent(
    ch: &TwoOutputChannel,
    tq: &TypeDependentMetric,
    px: &FinDist,
    variant: SymVariant,
    iterations: usize,
) -> Result<MembershipVerdict> {
    if !tq.declared_convex() {
        return Err(Error::InvalidArgument(
            "the Frank-Wolfe certificate needs a metric declared convex in P_{Y|X}".into(),
        ));
    }
    if tq.nx() != ch.nx() || tq.ny() != ch.ny() {
        return Err(Error::DimensionMismatch("type-dependent metric and channel disagree in shape".into()));
    }
    let s = Support::new(ch, Some(px))?;
    let (nx, ny, nz) = (ch.nx(), ch.ny(), ch.nz());
    let (mut lp, cols) = sym_polytope(ch, &s, variant);
    let to_xty = |v: &[f64]| {
        let mut m = vec![vec![0.0; ny]; nx];
        for (k, &(xt, x, z)) in cols.iter().enumerate() {
            if v[k] > 0.0 {
                for (y, &p) in ch.py(x, z).iter().enumerate() {
                    m[xt][y] += v[k] * p;
                }
            }
        }
        m
    };
    let diag: Vec<f64> = cols.iter().map(|&(xt, x, z)| if xt == x { s.mass(x, z) } else { 0.0 }).collect();
    let base = tq.eval_matrix(&to_xty(&diag));
    let f = |v: &[f64]| tq.eval_matrix(&to_xty(v)) - base;
    // The diagonal coupling is not feasible for `Sym` in general; start from an LP vertex instead.
    let mut v = match lp.solve()? {
        LpOutcome::Optimal(sol) => sol.x,
        other => return Err(Error::Lp(format!("symmetric polytope empty: {other:?}"))),
    };
    let set = variant.set_name();
    let mut best_lower = f64::NEG_INFINITY;
    let h = 1e-7;
    for _ in 0..iterations.max(1) {
        let fv = f(&v);
        if fv < -LP_MARGIN_TOL {
            let mut probs = vec![0.0; nx * nx * nz];
            for (k, &(xt, x, z)) in cols.iter().enumerate() {
                probs[(xt * nx + x) * nz + z] = v[k].max(0.0);
            }
            let joint = JointDist::new_unchecked(vec![Axis::Xt, Axis::X, Axis::Z], vec![nx, nx, nz], probs);
            return Ok(MembershipVerdict::new(set, Status::Out, fv).with_cert(Certificate::Coupling { joint }));
        }
        let m = to_xty(&v);
        let f0 = tq.eval_matrix(&m);
        let mut gm = vec![vec![0.0; ny]; nx];
        for xt in 0..nx {
            for y in 0..ny {
                let mut mp = m.clone();
                mp[xt][y] += h;
                gm[xt][y] = (tq.eval_matrix(&mp) - f0) / h;
            }
        }
        let g: Vec<f64> =
            cols.iter().map(|&(xt, x, z)| ch.py(x, z).iter().enumerate().map(|(y, p)| p * gm[xt][y]).sum()).collect();
        for (k, &gk) in g.iter().enumerate() {
            lp.set_cost(k, gk);
        }
        let sv = match lp.solve()? {
            LpOutcome::Optimal(sol) => sol.x,
            other => return Err(Error::Lp(format!("linear oracle failed: {other:?}"))),
        };
        let gap: f64 = g.iter().zip(v.iter().zip(&sv)).map(|(gk, (a, b))| gk * (a - b)).sum();
        best_lower = best_lower.max(fv - gap.max(0.0));
        if best_lower >= -LP_MARGIN_TOL {
            return Ok(MembershipVerdict::new(set, Status::In, fv.min(0.0))
                .with_cert(Certificate::GapBound { lower_bound: best_lower }));
        }
        let dir: Vec<f64> = sv.iter().zip(&v).map(|(a, b)| a - b).collect();
        let (gamma, _) = golden_section(
            |t| f(&v.iter().zip(&dir).map(|(a, d)| a + t * d).collect::<Vec<_>>()),
            0.0,
            1.0,
            1e-9,
        );
        v.iter_mut().zip(&dir).for_each(|(a, d)| *a += gamma * d);
    }
    Ok(MembershipVerdict::new(set, Status::Unknown, f(&v))
        .with_cert(Certificate::GapBound { lower_bound: best_lower })
        .with_note("Frank-Wolfe budget exhausted before the gap closed"))
}
