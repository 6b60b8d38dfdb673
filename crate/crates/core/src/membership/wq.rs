//! Heuristic search for a kernel `P(u|x,z)` making the quadratic functional negative.

use serde::{Deserialize, Serialize};

use super::dq::{build_dq, delta_q, elementwise, supported_entries, DqMatrix};
use super::{check_dims, expected_true_metric, Certificate, MembershipVerdict, SetName, Status, Support};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::optim::{dirichlet, project_simplex, rng, SearchBudget};
use crate::par::Exec;
use crate::prob::{Axis, FinDist, JointDist};

/// A violation below this is reported as OUT.
pub const WQ_OUT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WqSearch {
    #[serde(with = "crate::ext")]
    pub best_delta: f64,
    pub n_u: usize,
    /// Flat kernel, index `(x * |Z| + z) * n_u + u`.
    pub kernel: Vec<f64>,
    pub budget: SearchBudget,
}

/// Joint over `(X, Z, U)` from `P_X`, the channel's `P_{Z|X}` and a kernel.
pub(crate) fn kernel_joint(ch: &TwoOutputChannel, px: &FinDist, n_u: usize, k: &[f64]) -> Result<JointDist> {
    let (nx, nz) = (ch.nx(), ch.nz());
    if k.len() != nx * nz * n_u {
        return Err(Error::DimensionMismatch("kernel length is not |X||Z||U|".into()));
    }
    let mut probs = vec![0.0; nx * nz * n_u];
    for x in 0..nx {
        for z in 0..nz {
            let m = px[x] * ch.pzx().get(x, z);
            for u in 0..n_u {
                probs[(x * nz + z) * n_u + u] = m * k[(x * nz + z) * n_u + u];
            }
        }
    }
    Ok(JointDist::new_unchecked(vec![Axis::X, Axis::Z, Axis::U], vec![nx, nz, n_u], probs))
}

/// Lift a negative pair `(a, b)` at output `z`: send matching amounts of `a`
/// and `b` to a shared `u = 0` and every other mass to `u = 1 + x`.
pub fn lifted_witness(s_pxz: &[f64], nx: usize, nz: usize, n_u: usize, z0: usize, a: usize, b: usize) -> Vec<f64> {
    let mut k = vec![0.0; nx * nz * n_u];
    let (ma, mb) = (s_pxz[a * nz + z0], s_pxz[b * nz + z0]);
    let ta = if ma > 0.0 { (mb / ma).min(1.0) } else { 0.0 };
    let tb = if mb > 0.0 { (ma / mb).min(1.0) } else { 0.0 };
    for x in 0..nx {
        for z in 0..nz {
            let base = (x * nz + z) * n_u;
            let share = match (z == z0, x) {
                (true, x) if x == a => ta,
                (true, x) if x == b => tb,
                _ => 0.0,
            };
            k[base] = share;
            k[base + 1 + x] += 1.0 - share;
        }
    }
    k
}

struct Objective<'a> {
    d: &'a DqMatrix,
    pxz: &'a [f64],
    nx: usize,
    nz: usize,
    n_u: usize,
}

impl Objective<'_> {
    /// Value and gradient of `sum_{u,z} a' D_z a / (2 m)` with `a_x = P(x,z) k(u|x,z)`.
    fn eval(&self, k: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (nx, nz, nu) = (self.nx, self.nz, self.n_u);
        let mut f = 0.0;
        let mut g = grad;
        let mut a = vec![0.0; nx];
        let mut da = vec![0.0; nx];
        for z in 0..nz {
            let m = &self.d.per_z[z];
            for u in 0..nu {
                let mut mass = 0.0;
                for x in 0..nx {
                    a[x] = self.pxz[x * nz + z] * k[(x * nz + z) * nu + u];
                    mass += a[x];
                }
                if mass <= 1e-300 {
                    continue;
                }
                let mut quad = 0.0;
                for i in 0..nx {
                    da[i] = 0.0;
                    if self.pxz[i * nz + z] <= 0.0 {
                        continue;
                    }
                    for j in 0..nx {
                        if j != i && self.pxz[j * nz + z] > 0.0 {
                            da[i] += m[i * nx + j] * a[j];
                        }
                    }
                    quad += a[i] * da[i];
                }
                f += quad / (2.0 * mass);
                if let Some(g) = g.as_deref_mut() {
                    for x in 0..nx {
                        let dfa = da[x] / mass - quad / (2.0 * mass * mass);
                        g[(x * nz + z) * nu + u] = self.pxz[x * nz + z] * dfa;
                    }
                }
            }
        }
        f
    }
}

fn project_kernel(k: &mut [f64], n_u: usize) {
    for row in k.chunks_mut(n_u) {
        project_simplex(row);
    }
}

/// Multi-start projected gradient with Armijo backtracking over kernels with
/// `|U| = |X|^2 |Z|`. Restarts run through `exec` and are reduced in order.
pub fn wq_search(
    ch: &TwoOutputChannel,
    q: &Metric,
    px: &FinDist,
    budget: SearchBudget,
    exec: Exec,
) -> Result<WqSearch> {
    check_dims(ch, q)?;
    let s = Support::new(ch, Some(px))?;
    let (nx, nz) = (ch.nx(), ch.nz());
    let n_u = (nx * nx * nz).max(nx + 1);
    let d = build_dq(ch, q);
    let entries = supported_entries(&d, &s);
    if let Some(&(z, a, b, e)) = entries.first() {
        if e == f64::NEG_INFINITY {
            let kernel = lifted_witness(&s.pxz, nx, nz, n_u, z, a, b);
            return Ok(WqSearch { best_delta: f64::NEG_INFINITY, n_u, kernel, budget });
        }
    }
    let obj = Objective { d: &d, pxz: &s.pxz, nx, nz, n_u };
    let witnesses: Vec<Vec<f64>> = entries
        .iter()
        .filter(|e| e.3 < 0.0)
        .take(budget.restarts / 2)
        .map(|&(z, a, b, _)| lifted_witness(&s.pxz, nx, nz, n_u, z, a, b))
        .collect();
    let runs = exec.map(budget.restarts.max(1), |r| {
        let mut k = match witnesses.get(r) {
            Some(w) => w.clone(),
            None => {
                let mut g = rng(budget.seed, r as u64);
                (0..nx * nz).flat_map(|_| dirichlet(&mut g, n_u, 0.5)).collect()
            }
        };
        let mut grad = vec![0.0; k.len()];
        let mut f = obj.eval(&k, Some(&mut grad));
        let mut step = 1.0;
        for _ in 0..budget.iterations {
            let mut accepted = false;
            for _ in 0..30 {
                let mut cand: Vec<f64> = k.iter().zip(&grad).map(|(a, g)| a - step * g).collect();
                project_kernel(&mut cand, n_u);
                let dec: f64 = cand.iter().zip(&k).map(|(a, b)| (a - b) * (a - b)).sum();
                let fc = obj.eval(&cand, None);
                if fc <= f - 1e-4 * dec / step {
                    k = cand;
                    f = obj.eval(&k, Some(&mut grad));
                    step *= 1.5;
                    accepted = dec > 1e-30;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        (f, k)
    });
    let (best_delta, kernel) =
        runs.into_iter().fold((f64::INFINITY, Vec::new()), |acc, r| if r.0 < acc.0 { r } else { acc });
    Ok(WqSearch { best_delta, n_u, kernel, budget })
}

/// IN when the elementwise set already contains the channel; otherwise OUT on
/// a found counterexample and UNKNOWN ("no counterexample found") when the
/// search fails, since the inner problem is nonconvex.
pub fn member_wq(
    ch: &TwoOutputChannel,
    q: &Metric,
    px: &FinDist,
    budget: SearchBudget,
    exec: Exec,
) -> Result<MembershipVerdict> {
    let s = Support::new(ch, Some(px))?;
    if expected_true_metric(ch, q, &s) == f64::NEG_INFINITY {
        return Ok(MembershipVerdict::unknown_indeterminate(SetName::Wq));
    }
    let tilde = elementwise(ch, q, Some(px), SetName::Wtilde)?;
    if tilde.is_in() {
        return Ok(MembershipVerdict::new(SetName::Wq, Status::In, tilde.numeric_margin)
            .with_note("contained in the elementwise set, which is a subset"));
    }
    let r = wq_search(ch, q, px, budget, exec)?;
    let mut v = if r.best_delta < -WQ_OUT_TOL {
        let j = kernel_joint(ch, px, r.n_u, &r.kernel)?;
        let exact = delta_q(&j, ch.pyxz(), q)?;
        MembershipVerdict::new(SetName::Wq, Status::Out, exact)
            .with_cert(Certificate::Kernel { n_u: r.n_u, probs: r.kernel })
    } else {
        MembershipVerdict::new(SetName::Wq, Status::Unknown, r.best_delta).with_note("no counterexample found")
    };
    v.budget = Some(budget);
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let ch = example_candidate();
        let q = example_metric();
        let px = FinDist::new(vec![0.3, 0.7]).unwrap();
        let s = Support::new(&ch, Some(&px)).unwrap();
        let d = build_dq(&ch, &q);
        let n_u = 4;
        let obj = Objective { d: &d, pxz: &s.pxz, nx: 2, nz: 3, n_u };
        let mut g = rng(1, 0);
        let k: Vec<f64> = (0..6).flat_map(|_| dirichlet(&mut g, n_u, 1.0)).collect();
        let mut grad = vec![0.0; k.len()];
        obj.eval(&k, Some(&mut grad));
        for i in 0..k.len() {
            let mut kp = k.clone();
            kp[i] += 1e-6;
            let fd = (obj.eval(&kp, None) - obj.eval(&k, None)) / 1e-6;
            assert!((fd - grad[i]).abs() < 1e-5, "{i}: {fd} vs {}", grad[i]);
        }
        // the closed form agrees with the direct five-fold sum
        let j = kernel_joint(&ch, &px, n_u, &k).unwrap();
        assert!((obj.eval(&k, None) - delta_q(&j, ch.pyxz(), &q).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn lifted_edge_witness_is_negative() {
        let ch = example_candidate();
        let q = example_metric().shifted(0.0);
        // flip the sign of the metric's second row to create a negative pair
        let q2 = Metric::new(q.rows().iter().enumerate().map(|(x, r)| r.iter().map(|v| if x == 1 { -v } else { *v }).collect()).collect()).unwrap();
        let px = FinDist::uniform(2);
        let v = member_wq(&ch, &q2, &px, SearchBudget::new(4, 50, 0), Exec::Sequential).unwrap();
        assert!(v.is_out(), "{v:?}");
        assert!(v.recheck(&ch, &q2, Some(&px)).unwrap().unwrap() < 0.0);
    }
}
