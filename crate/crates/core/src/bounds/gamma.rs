//! Bounds through the zero-pattern set `Gamma(q, rho)`, and the
//! superiority/isomorphism relation between channel-metric pairs.
//!
//! Membership in `Gamma(q, rho)` only forbids kernel cells, so with
//! `P_{Y|X} = W` the feasible kernels form a transportation-like polytope and
//! both objectives below are convex on it.

use serde::{Deserialize, Serialize};

use super::search::Shape;
use super::{blahut_arimoto, certified_capacity_bound, classical_sp_with_witness, BoundKind, BoundReport, Validity, Variant};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::membership::{gamma_allowed, member_gamma};
use crate::metric::{Dmc, Metric};
use crate::optim::{golden_section, rng, SearchBudget};
use crate::prob::{CondDist, FinDist};
use rand::Rng;

const LOG_FLOOR: f64 = 1e-300;

/// Kernels on the allowed cells with `sum_z J(x,y,z) = W(y|x)` and, optionally, `sum_y J(x,y,z) = T(z|x)`.
struct GammaPolytope {
    lp: LinearProgram,
    var: Vec<Option<usize>>,
    shape: Shape,
}

impl GammaPolytope {
    fn new(w: &CondDist, allowed: &[bool], nz: usize, target: Option<&CondDist>) -> Self {
        let shape = Shape { nx: w.n_in(), ny: w.n_out(), nz };
        let mut lp = LinearProgram::new();
        let mut var = vec![None; shape.len()];
        for x in 0..shape.nx {
            for y in 0..shape.ny {
                for z in 0..nz {
                    let tz = target.is_none_or(|t| t.get(x, z) > 0.0);
                    if allowed[shape.idx(x, y, z)] && w.get(x, y) > 0.0 && tz {
                        var[shape.idx(x, y, z)] = Some(lp.add_var(0.0));
                    }
                }
            }
        }
        for x in 0..shape.nx {
            for y in 0..shape.ny {
                let row: Vec<(usize, f64)> = (0..nz).filter_map(|z| var[shape.idx(x, y, z)].map(|v| (v, 1.0))).collect();
                lp.add_row(row, Relation::Eq, w.get(x, y));
            }
        }
        if let Some(t) = target {
            for x in 0..shape.nx {
                for z in 0..nz {
                    let row: Vec<(usize, f64)> =
                        (0..shape.ny).filter_map(|y| var[shape.idx(x, y, z)].map(|v| (v, 1.0))).collect();
                    lp.add_row(row, Relation::Eq, t.get(x, z));
                }
            }
        }
        Self { lp, var, shape }
    }

    fn solve(&mut self, c: &[f64]) -> Result<LpOutcome> {
        for (cell, v) in self.var.iter().enumerate() {
            if let Some(v) = v {
                self.lp.set_cost(*v, c[cell]);
            }
        }
        self.lp.solve()
    }

    fn argmin(&mut self, c: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(match self.solve(c)? {
            LpOutcome::Optimal(s) => {
                let mut j = vec![0.0; self.shape.len()];
                for (cell, v) in self.var.iter().enumerate() {
                    if let Some(v) = v {
                        j[cell] = s.x[*v].max(0.0);
                    }
                }
                Some(j)
            }
            _ => None,
        })
    }

    fn channel(&self, j: &[f64]) -> Result<TwoOutputChannel> {
        TwoOutputChannel::from_joint_kernel(self.shape.nx, self.shape.ny, self.shape.nz, j)
    }

    /// A relative-interior point: the average of vertices for random costs.
    fn spread_point(&mut self, seed: u64) -> Result<Option<Vec<f64>>> {
        let n = self.shape.len();
        let Some(mut acc) = self.argmin(&vec![0.0; n])? else { return Ok(None) };
        let mut g = rng(seed, 0x6a_44a);
        let k = 2 * self.var.iter().flatten().count() + 1;
        for _ in 0..k {
            let c: Vec<f64> = (0..n).map(|_| g.random::<f64>() - 0.5).collect();
            if let Some(v) = self.argmin(&c)? {
                acc.iter_mut().zip(&v).for_each(|(a, b)| *a += b);
            }
        }
        acc.iter_mut().for_each(|a| *a /= (k + 1) as f64);
        Ok(Some(acc))
    }
}

fn check_shapes(w: &Dmc, q: &Metric, rho: &Metric) -> Result<()> {
    if q.nx() != w.nx() || q.ny() != w.ny() || rho.nx() != w.nx() {
        return Err(Error::DimensionMismatch("W, q (X x Y) and rho (X x Z) disagree".into()));
    }
    Ok(())
}

fn empty_report(kind: BoundKind, rho: &Metric) -> BoundReport {
    let mut r = BoundReport::new(kind, Variant::Gamma, Validity::Exploratory, f64::INFINITY)
        .note("no channel in Gamma(q, rho) has Y-marginal W; the minimum over an empty set is +inf");
    r.rho = Some(rho.clone());
    r
}

/// `min C(P_{Z|X})` over `Gamma(q, rho)` with `P_{Y|X} = W`, by Frank-Wolfe on
/// the convex map `J -> C(P_{Z|X}(J))` (gradient from the capacity-achieving
/// input). The minimizer is certified through [`certified_capacity_bound`].
pub fn gamma_capacity_bound(w: &Dmc, q: &Metric, rho: &Metric, budget: SearchBudget) -> Result<BoundReport> {
    check_shapes(w, q, rho)?;
    let nz = rho.ny();
    let allowed = gamma_allowed(q, rho)?;
    let mut poly = GammaPolytope::new(w.cond(), &allowed, nz, None);
    let Some(mut j) = poly.spread_point(budget.seed)? else {
        return Ok(empty_report(BoundKind::Capacity, rho));
    };
    let shape = poly.shape;
    let cap_of = |j: &[f64]| -> f64 {
        let pzx = CondDist::from_flat_unchecked(shape.nx, nz, shape.pzx(j));
        blahut_arimoto(&pzx, 1e-11).upper
    };
    let mut fj = cap_of(&j);
    for _ in 0..budget.iterations.min(300) {
        let pzx = shape.pzx(&j);
        let cap = blahut_arimoto(&CondDist::from_flat_unchecked(shape.nx, nz, pzx.clone()), 1e-11);
        let px = cap.px.probs();
        let mut r = vec![0.0; nz];
        for x in 0..shape.nx {
            for z in 0..nz {
                r[z] += px[x] * pzx[x * nz + z];
            }
        }
        let mut g = vec![0.0; shape.len()];
        for x in 0..shape.nx {
            for y in 0..shape.ny {
                for z in 0..nz {
                    let v = pzx[x * nz + z];
                    g[shape.idx(x, y, z)] = if v > 0.0 { px[x] * (v / r[z].max(LOG_FLOOR)).ln() } else { 0.0 };
                }
            }
        }
        let Some(s) = poly.argmin(&g)? else { break };
        let gap: f64 = g.iter().zip(j.iter().zip(&s)).map(|(gi, (a, b))| gi * (a - b)).sum();
        if gap <= 1e-12 {
            break;
        }
        let mixed = |t: f64| -> Vec<f64> { j.iter().zip(&s).map(|(a, b)| (1.0 - t) * a + t * b).collect() };
        let (t, ft) = golden_section(|t| cap_of(&mixed(t)), 0.0, 1.0, 1e-9);
        if ft >= fj - 1e-15 {
            break;
        }
        j = mixed(t);
        fj = ft;
    }
    let ch = poly.channel(&j)?;
    let mut r = certified_capacity_bound(w, q, &ch, Variant::Gamma, Some(rho))?;
    r.budget = Some(budget);
    Ok(r)
}

/// `min E_sp(R, P, P_{Z|X})` over `Gamma(q, rho)` with `P_{Y|X} = W`.
///
/// The sphere-packing exponent of the Z-channel stands in for the reliability
/// function in the underlying argument, so the report is exploratory.
pub fn gamma_exponent_bound(
    w: &Dmc,
    q: &Metric,
    rho: &Metric,
    p: &FinDist,
    rate: f64,
    budget: SearchBudget,
) -> Result<BoundReport> {
    check_shapes(w, q, rho)?;
    if p.len() != w.nx() {
        return Err(Error::DimensionMismatch("composition must have |X| entries".into()));
    }
    let nz = rho.ny();
    let allowed = gamma_allowed(q, rho)?;
    let mut poly = GammaPolytope::new(w.cond(), &allowed, nz, None);
    let Some(mut j) = poly.spread_point(budget.seed)? else {
        let mut r = empty_report(BoundKind::Exponent, rho);
        r.rate = Some(rate);
        r.input_distribution = Some(p.clone());
        return Ok(r);
    };
    let shape = poly.shape;
    let esp = |j: &[f64]| -> Result<(f64, CondDist)> {
        classical_sp_with_witness(&CondDist::from_flat_unchecked(shape.nx, nz, shape.pzx(j)), p, rate)
    };
    let (mut fj, mut v) = esp(&j)?;
    for _ in 0..budget.iterations.min(200) {
        if fj == 0.0 {
            break;
        }
        // Danskin: the gradient of D(V || C | P) in C at the optimal V.
        let pzx = shape.pzx(&j);
        let mut g = vec![0.0; shape.len()];
        for x in 0..shape.nx {
            for y in 0..shape.ny {
                for z in 0..nz {
                    let c = pzx[x * nz + z];
                    let vv = v.get(x, z);
                    g[shape.idx(x, y, z)] = if vv > 0.0 { -p[x] * vv / c.max(LOG_FLOOR) } else { 0.0 };
                }
            }
        }
        let Some(s) = poly.argmin(&g)? else { break };
        let gap: f64 = g.iter().zip(j.iter().zip(&s)).map(|(gi, (a, b))| gi * (a - b)).sum();
        if gap <= 1e-12 {
            break;
        }
        let mixed = |t: f64| -> Vec<f64> { j.iter().zip(&s).map(|(a, b)| (1.0 - t) * a + t * b).collect() };
        let (t, _) = golden_section(|t| esp(&mixed(t)).map_or(f64::INFINITY, |r| r.0), 0.0, 1.0, 1e-9);
        let cand = mixed(t);
        let (fc, vc) = esp(&cand)?;
        if fc >= fj - 1e-15 {
            break;
        }
        j = cand;
        fj = fc;
        v = vc;
    }
    let ch = poly.channel(&j)?;
    let verdict = member_gamma(&ch, q, rho)?;
    let mut r = BoundReport::new(BoundKind::Exponent, Variant::Gamma, Validity::Exploratory, fj)
        .note("objective is the sphere-packing exponent of the Z-channel, a surrogate for its reliability function")
        .note("exact equality with the reliability function is only expected at R -> 0 and above the critical rate; not computed");
    r.rate = Some(rate);
    r.input_distribution = Some(p.clone());
    r.witness = Some(ch);
    r.membership = Some(verdict);
    r.rho = Some(rho.clone());
    r.budget = Some(budget);
    Ok(r)
}

/// Capacity bound and, when a composition and rate are given, the exponent bound.
pub fn gamma_bounds(
    w: &Dmc,
    q: &Metric,
    rho: &Metric,
    exponent_at: Option<(&FinDist, f64)>,
    budget: SearchBudget,
) -> Result<(BoundReport, Option<BoundReport>)> {
    let cap = gamma_capacity_bound(w, q, rho, budget)?;
    let exp = exponent_at.map(|(p, r)| gamma_exponent_bound(w, q, rho, p, r, budget)).transpose()?;
    Ok((cap, exp))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Superiority {
    pub holds: bool,
    /// A coupling in `Gamma(q, rho)` with the two prescribed marginals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<TwoOutputChannel>,
    /// Farkas multipliers proving that no such coupling exists (one per LP row:
    /// the `|X||Y|` Y-marginal rows, then the `|X||Z|` Z-marginal rows).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub farkas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub farkas_value: Option<f64>,
}

/// Whether `(W, q)` is superior to `(target, rho)`: some `P_{YZ|X}` in
/// `Gamma(q, rho)` has Y-marginal `W` and Z-marginal `target`.
pub fn superiority_check(w: &Dmc, q: &Metric, target: &CondDist, rho: &Metric) -> Result<Superiority> {
    check_shapes(w, q, rho)?;
    if target.n_in() != w.nx() || target.n_out() != rho.ny() {
        return Err(Error::DimensionMismatch("target channel must be |X| x |Z| like rho".into()));
    }
    let allowed = gamma_allowed(q, rho)?;
    let mut poly = GammaPolytope::new(w.cond(), &allowed, rho.ny(), Some(target));
    let zero = vec![0.0; poly.shape.len()];
    Ok(match poly.solve(&zero)? {
        LpOutcome::Optimal(_) => {
            let j = poly.argmin(&zero)?.expect("feasible");
            Superiority { holds: true, coupling: Some(poly.channel(&j)?), farkas: None, farkas_value: None }
        }
        LpOutcome::Infeasible(y) => {
            let value = poly.lp.verify_farkas(&y, 1e-9);
            Superiority { holds: false, coupling: None, farkas: Some(y), farkas_value: value }
        }
        LpOutcome::Unbounded => unreachable!("zero objective"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isomorphism {
    pub forward: Superiority,
    pub backward: Superiority,
    pub isomorphic: bool,
    /// `rho = log target` (with `-inf` exactly on its zeros).
    pub target_matched: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Superiority in both directions. When the target pair is matched, an
/// isomorphism transfers its converse bounds with equality.
pub fn isomorphism_check(w: &Dmc, q: &Metric, target: &CondDist, rho: &Metric) -> Result<Isomorphism> {
    let forward = superiority_check(w, q, target, rho)?;
    let backward = superiority_check(&Dmc::new(target.clone()), rho, w.cond(), q)?;
    let target_matched = (0..target.n_in()).all(|x| {
        (0..target.n_out()).all(|z| {
            let t = target.get(x, z);
            let r = rho.get(x, z);
            if t == 0.0 {
                r == f64::NEG_INFINITY
            } else {
                (r - t.ln()).abs() <= 1e-9
            }
        })
    });
    let isomorphic = forward.holds && backward.holds;
    let note = (isomorphic && target_matched)
        .then(|| "isomorphic to a matched pair: mismatch capacity and reliability equal those of the target channel".to_string());
    Ok(Isomorphism { forward, backward, isomorphic, target_matched, note })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::ml_metric;

    fn dmc(rows: Vec<Vec<f64>>) -> Dmc {
        Dmc::new(CondDist::new(rows).unwrap())
    }

    #[test]
    fn self_isomorphic() {
        let w = dmc(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]]);
        let q = Metric::new(vec![vec![0.3, -0.2, 0.1], vec![-0.5, 0.4, 0.9]]).unwrap();
        let iso = isomorphism_check(&w, &q, w.cond(), &q).unwrap();
        assert!(iso.isomorphic);
        assert!(!iso.target_matched);
    }

    #[test]
    fn unreachable_marginal_has_farkas_certificate() {
        let w = dmc(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let q = Metric::constant(2, 2, 0.0);
        // rho forbids z = 1 for x = 0 entirely, but the target wants it
        let rho = Metric::new(vec![vec![0.0, -5.0], vec![0.0, 0.0]]).unwrap();
        let target = CondDist::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let s = superiority_check(&w, &q, &target, &rho).unwrap();
        assert!(!s.holds);
        assert!(s.farkas_value.unwrap() > 0.0);
    }

    #[test]
    fn matched_gamma_capacity_equals_capacity() {
        let w = dmc(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]]);
        let q = ml_metric(&w);
        let r = gamma_capacity_bound(&w, &q, &q, SearchBudget::default()).unwrap();
        let c = blahut_arimoto(w.cond(), 1e-12).upper;
        assert!((r.value - c).abs() <= 1e-6, "{} vs {c}", r.value);
        assert!(r.revalidate(&w, &q).unwrap().ok);
    }
}
