use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{check_dims, expected_true_metric, Certificate, MembershipVerdict, SetName, Status, Support, ENTRY_TOL};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::metric::{extended_sub, Metric};
use crate::prob::{CondDist, FinDist, JointDist, Axis};

/// Per-output symmetric `|X| x |X|` matrices with
/// `D_z(i, j) = sum_y [P(y|i,z) - P(y|j,z)] [q(j,y) - q(i,y)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqMatrix {
    pub nx: usize,
    /// Row-major `nx * nx` blocks, one per output symbol `z`.
    pub per_z: Vec<Vec<f64>>,
}

impl DqMatrix {
    pub fn get(&self, z: usize, i: usize, j: usize) -> f64 {
        self.per_z[z][i * self.nx + j]
    }

    pub fn nz(&self) -> usize {
        self.per_z.len()
    }
}

/// One term `a * d` of the `D` sum in extended arithmetic. A forbidden score
/// on a term with nonzero weight yields `-inf` unless the sign makes it `+inf`;
/// both scores forbidden is recorded as `-inf`.
fn weighted_diff(a: f64, qj: f64, qi: f64) -> f64 {
    if a == 0.0 {
        return 0.0;
    }
    match (qj == f64::NEG_INFINITY, qi == f64::NEG_INFINITY) {
        (false, false) => a * (qj - qi),
        (true, true) => f64::NEG_INFINITY,
        (true, false) => -a.signum() * f64::INFINITY,
        (false, true) => a.signum() * f64::INFINITY,
    }
}

pub fn build_dq(ch: &TwoOutputChannel, q: &Metric) -> DqMatrix {
    let (nx, nz) = (ch.nx(), ch.nz());
    let mut per_z = Vec::with_capacity(nz);
    for z in 0..nz {
        let mut m = vec![0.0; nx * nx];
        for i in 0..nx {
            for j in (i + 1)..nx {
                let (pi, pj) = (ch.py(i, z), ch.py(j, z));
                let mut s = 0.0;
                let (mut pos, mut neg) = (false, false);
                for y in 0..ch.ny() {
                    let t = weighted_diff(pi[y] - pj[y], q.get(j, y), q.get(i, y));
                    if t == f64::INFINITY {
                        pos = true;
                    } else if t == f64::NEG_INFINITY {
                        neg = true;
                    } else {
                        s += t;
                    }
                }
                let v = if neg {
                    f64::NEG_INFINITY
                } else if pos {
                    f64::INFINITY
                } else {
                    s
                };
                m[i * nx + j] = v;
                m[j * nx + i] = v;
            }
        }
        per_z.push(m);
    }
    DqMatrix { nx, per_z }
}

/// `d_q(z)` for binary inputs: the off-diagonal entry of `D_z`.
pub fn dq_binary(ch: &TwoOutputChannel, q: &Metric, z: usize) -> Result<f64> {
    if ch.nx() != 2 {
        return Err(Error::InvalidArgument("d_q is defined for binary inputs".into()));
    }
    Ok(build_dq(ch, q).get(z, 0, 1))
}

/// `c(xt, x, z) = sum_y P(y|x,z) [q(xt,y) - q(x,y)]`, assuming `q(x, .)` is
/// finite wherever `P(.|x,z)` is positive; `-inf` when `q(xt, y) = -inf` there.
pub fn pair_cost(ch: &TwoOutputChannel, q: &Metric, xt: usize, x: usize, z: usize) -> f64 {
    let mut s = 0.0;
    for (y, &p) in ch.py(x, z).iter().enumerate() {
        if p > 0.0 {
            let a = q.get(xt, y);
            if a == f64::NEG_INFINITY {
                return f64::NEG_INFINITY;
            }
            s += p * (a - q.get(x, y));
        }
    }
    s
}

/// The quadratic functional
/// `sum P(u,z) P(x|u,z) P(xt|u,z) P(y|x,z) [q(xt,y) - q(x,y)]` for a joint over `X, Z, U`.
pub fn delta_q(pxzu: &JointDist, pyxz: &CondDist, q: &Metric) -> Result<f64> {
    let j = pxzu.marginal(&[Axis::X, Axis::Z, Axis::U])?;
    let (nx, nz, nu) = (j.shape()[0], j.shape()[1], j.shape()[2]);
    if pyxz.n_in() != nx * nz || pyxz.n_out() != q.ny() || q.nx() != nx {
        return Err(Error::DimensionMismatch("delta_q operands disagree in shape".into()));
    }
    let p = |x: usize, z: usize, u: usize| j.probs()[(x * nz + z) * nu + u];
    let mut true_part = 0.0;
    let mut cross = 0.0;
    let mut true_inf = false;
    let mut cross_inf = false;
    for z in 0..nz {
        for x in 0..nx {
            let pxz: f64 = (0..nu).map(|u| p(x, z, u)).sum();
            if pxz <= 0.0 {
                continue;
            }
            for (y, &w) in pyxz.row(x * nz + z).iter().enumerate() {
                if w > 0.0 {
                    if q.get(x, y) == f64::NEG_INFINITY {
                        true_inf = true;
                    } else {
                        true_part += pxz * w * q.get(x, y);
                    }
                }
            }
        }
        for u in 0..nu {
            let puz: f64 = (0..nx).map(|x| p(x, z, u)).sum();
            if puz <= 0.0 {
                continue;
            }
            for x in 0..nx {
                let a = p(x, z, u);
                if a <= 0.0 {
                    continue;
                }
                for xt in 0..nx {
                    let b = p(xt, z, u);
                    if b <= 0.0 {
                        continue;
                    }
                    for (y, &w) in pyxz.row(x * nz + z).iter().enumerate() {
                        if w > 0.0 {
                            if q.get(xt, y) == f64::NEG_INFINITY {
                                cross_inf = true;
                            } else {
                                cross += a * b / puz * w * q.get(xt, y);
                            }
                        }
                    }
                }
            }
        }
    }
    let e_true = if true_inf { f64::NEG_INFINITY } else { true_part };
    let e_cross = if cross_inf { f64::NEG_INFINITY } else { cross };
    extended_sub(e_cross, e_true, "delta_q")
}

/// Supported `(z, i, j)` triples (with `i < j`) whose `D` entry is most negative first.
pub(crate) fn supported_entries(d: &DqMatrix, s: &Support) -> Vec<(usize, usize, usize, f64)> {
    let mut out = Vec::new();
    for z in 0..d.nz() {
        for i in 0..d.nx {
            for j in (i + 1)..d.nx {
                if s.on(i, z) && s.on(j, z) {
                    out.push((z, i, j, d.get(z, i, j)));
                }
            }
        }
    }
    out.sort_by(|a, b| a.3.total_cmp(&b.3));
    out
}

/// PSD test of every `D_z` restricted to inputs with `P(z|x) > 0`.
///
/// With a zero diagonal, PSD is the same as the restricted matrix vanishing;
/// both the eigenvalue test and the zero test are run. Should they ever
/// disagree the verdict is UNKNOWN.
pub fn member_psd(ch: &TwoOutputChannel, q: &Metric) -> Result<MembershipVerdict> {
    check_dims(ch, q)?;
    let s = Support::new(ch, None)?;
    if expected_true_metric(ch, q, &s) == f64::NEG_INFINITY {
        return Ok(MembershipVerdict::unknown_indeterminate(SetName::Wpsd));
    }
    let d = build_dq(ch, q);
    let mut worst: Option<(usize, f64, Vec<f64>)> = None;
    let mut max_abs: f64 = 0.0;
    for z in 0..ch.nz() {
        let idx: Vec<usize> = (0..ch.nx()).filter(|&x| s.on(x, z)).collect();
        if idx.len() < 2 {
            continue;
        }
        let k = idx.len();
        let mut has_inf = None;
        for a in 0..k {
            for b in 0..k {
                let v = d.get(z, idx[a], idx[b]);
                max_abs = max_abs.max(v.abs());
                if !v.is_finite() && has_inf.is_none() {
                    has_inf = Some((a, b));
                }
            }
        }
        let (eig, vec) = if let Some((a, b)) = has_inf {
            let mut v = vec![0.0; k];
            let sgn = if d.get(z, idx[a], idx[b]) < 0.0 { 1.0 } else { -1.0 };
            v[a] = std::f64::consts::FRAC_1_SQRT_2;
            v[b] = sgn * std::f64::consts::FRAC_1_SQRT_2;
            (f64::NEG_INFINITY, v)
        } else {
            let m = DMatrix::from_fn(k, k, |a, b| d.get(z, idx[a], idx[b]));
            let e = SymmetricEigen::new(m);
            let (arg, &lam) = e.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
            (lam, e.eigenvectors.column(arg).iter().copied().collect())
        };
        if worst.as_ref().is_none_or(|w| eig < w.1) {
            let mut full = vec![0.0; ch.nx()];
            for (a, &x) in idx.iter().enumerate() {
                full[x] = vec[a];
            }
            worst = Some((z, eig, full));
        }
    }
    let zero_ok = max_abs <= ENTRY_TOL;
    let eig_ok = worst.as_ref().is_none_or(|w| w.1 >= -ENTRY_TOL);
    let margin = worst.as_ref().map_or(0.0, |w| w.1.min(0.0));
    Ok(match (zero_ok, eig_ok) {
        (true, true) => MembershipVerdict::new(SetName::Wpsd, Status::In, margin),
        (false, false) => {
            let (z, eigenvalue, vector) = worst.unwrap();
            MembershipVerdict::new(SetName::Wpsd, Status::Out, eigenvalue)
                .with_cert(Certificate::Eigen { z, eigenvalue, vector })
        }
        _ => MembershipVerdict::new(SetName::Wpsd, Status::Unknown, margin).with_note(format!(
            "eigenvalue test and zero-matrix test disagree (max |entry| = {max_abs:.3e})"
        )),
    })
}

/// Elementwise test: `D_z(x, xt) >= 0` on every pair supported under `P_{XZ}`.
///
/// `px = None` checks every pair with `P(z|x) > 0`, which implies membership
/// for every input distribution.
pub fn member_tilde(ch: &TwoOutputChannel, q: &Metric, px: Option<&FinDist>) -> Result<MembershipVerdict> {
    elementwise(ch, q, px, SetName::Wtilde)
}

pub(crate) fn elementwise(
    ch: &TwoOutputChannel,
    q: &Metric,
    px: Option<&FinDist>,
    set: SetName,
) -> Result<MembershipVerdict> {
    check_dims(ch, q)?;
    let s = Support::new(ch, px)?;
    if expected_true_metric(ch, q, &s) == f64::NEG_INFINITY {
        return Ok(MembershipVerdict::unknown_indeterminate(set));
    }
    let d = build_dq(ch, q);
    let entries = supported_entries(&d, &s);
    match entries.first() {
        None => Ok(MembershipVerdict::new(set, Status::In, 0.0).with_note("no supported pair of distinct inputs")),
        Some(&(z, a, b, e)) if e < -ENTRY_TOL => Ok(MembershipVerdict::new(set, Status::Out, e / 2.0)
            .with_cert(Certificate::EdgePair { z, a, b, entry: e })),
        Some(&(_, _, _, e)) => Ok(MembershipVerdict::new(set, Status::In, (e / 2.0).min(0.0))),
    }
}
