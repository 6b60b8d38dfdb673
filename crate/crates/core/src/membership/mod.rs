//! Membership oracles for the two-output channel sets behind the bounds.
//!
//! Every oracle returns a [`MembershipVerdict`]. OUT verdicts always carry a
//! certificate that [`MembershipVerdict::recheck`] can re-evaluate; IN
//! verdicts of the LP-based sets carry a dual bound where one is available.

mod coupling;
mod dq;
mod gamma;
mod wq;

pub use coupling::{member_comparison_sets, member_sym, member_sym_type_dependent, ComparisonSet, SymVariant};
pub use dq::{build_dq, delta_q, dq_binary, member_psd, member_tilde, pair_cost, DqMatrix};
pub use gamma::{gamma_allowed, member_gamma};
pub use wq::{lifted_witness, member_wq, wq_search, WqSearch};

use serde::{Deserialize, Serialize};

use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::metric::{expect_matrix, Metric};
use crate::optim::SearchBudget;
use crate::prob::{FinDist, JointDist};

/// Default tolerance for "optimum is nonnegative" in the LP-based sets.
pub const LP_MARGIN_TOL: f64 = 1e-8;
/// Tolerance on the elementwise `D` conditions.
pub const ENTRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SetName {
    #[serde(rename = "W_q")]
    Wq,
    #[serde(rename = "Wtilde")]
    Wtilde,
    #[serde(rename = "Wsym")]
    Wsym,
    #[serde(rename = "WtildeSym")]
    WtildeSym,
    #[serde(rename = "Wpsd")]
    Wpsd,
    Gamma,
    ThetaStar,
    Mmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    In,
    Out,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// A per-output matrix with a negative eigenvalue; `vector` is indexed by `X`.
    Eigen {
        z: usize,
        #[serde(with = "crate::ext")]
        eigenvalue: f64,
        vector: Vec<f64>,
    },
    /// A supported pair whose `D` entry is negative; the edge distribution
    /// uniform on `{a, b}` makes the quadratic form equal `entry / 2`.
    EdgePair {
        z: usize,
        a: usize,
        b: usize,
        #[serde(with = "crate::ext")]
        entry: f64,
    },
    /// A feasible joint of the set's inner program with negative objective.
    Coupling { joint: JointDist },
    /// An auxiliary kernel `P(u|x,z)`, flat index `(x * |Z| + z) * n_u + u`.
    Kernel { n_u: usize, probs: Vec<f64> },
    /// A triple with positive mass that the zero pattern forbids.
    ZeroPattern { x: usize, y: usize, z: usize, mass: f64 },
    /// Dual-feasible multipliers proving the inner minimum is at least `lower_bound`.
    DualBound {
        #[serde(with = "crate::ext")]
        lower_bound: f64,
        duals: Vec<f64>,
    },
    /// Frank-Wolfe gap bound on a convex inner minimum.
    GapBound {
        #[serde(with = "crate::ext")]
        lower_bound: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipVerdict {
    pub set_name: SetName,
    pub status: Status,
    pub certificate: Option<Certificate>,
    /// Inner minimum (or the scaled quantity the oracle checks); negative means a violation.
    #[serde(with = "crate::ext")]
    pub numeric_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<SearchBudget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl MembershipVerdict {
    pub(crate) fn new(set_name: SetName, status: Status, margin: f64) -> Self {
        Self { set_name, status, certificate: None, numeric_margin: margin, budget: None, note: None }
    }

    pub(crate) fn with_cert(mut self, c: Certificate) -> Self {
        self.certificate = Some(c);
        self
    }

    pub(crate) fn with_note(mut self, n: impl Into<String>) -> Self {
        self.note = Some(n.into());
        self
    }

    pub(crate) fn unknown_indeterminate(set_name: SetName) -> Self {
        Self::new(set_name, Status::Unknown, f64::NAN)
            .with_note("E q(X,Y) is -inf under P_XY; the membership condition is indeterminate")
    }

    pub fn is_in(&self) -> bool {
        self.status == Status::In
    }

    pub fn is_out(&self) -> bool {
        self.status == Status::Out
    }

    /// Re-evaluate the certificate from scratch. For violation certificates this
    /// returns the recomputed (negative) objective; for dual/gap bounds the bound.
    pub fn recheck(&self, ch: &TwoOutputChannel, q: &Metric, px: Option<&FinDist>) -> Result<Option<f64>> {
        let Some(c) = &self.certificate else { return Ok(None) };
        let v = match c {
            Certificate::Eigen { z, vector, .. } => {
                let d = build_dq(ch, q);
                let m = &d.per_z[*z];
                let n = d.nx;
                let mut s = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if vector[i] != 0.0 && vector[j] != 0.0 {
                            s += vector[i] * vector[j] * m[i * n + j];
                        }
                    }
                }
                s
            }
            Certificate::EdgePair { z, a, b, .. } => build_dq(ch, q).get(*z, *a, *b) / 2.0,
            Certificate::Coupling { joint } => coupling::recheck_coupling(ch, q, joint)?,
            Certificate::Kernel { n_u, probs } => {
                let px = px.cloned().unwrap_or_else(|| FinDist::uniform(ch.nx()));
                let j = wq::kernel_joint(ch, &px, *n_u, probs)?;
                delta_q(&j, ch.pyxz(), q)?
            }
            Certificate::ZeroPattern { x, y, z, .. } => -ch.kernel(*x, *y, *z),
            Certificate::DualBound { lower_bound, .. } | Certificate::GapBound { lower_bound } => *lower_bound,
        };
        Ok(Some(v))
    }
}

/// `P_{XZ}` mass and support used by the membership sums.
#[derive(Debug, Clone)]
pub(crate) struct Support {
    pub nx: usize,
    pub nz: usize,
    /// `P_{XZ}(x, z)`, index `x * nz + z`.
    pub pxz: Vec<f64>,
}

impl Support {
    /// With `px = None` every input is treated as supported.
    pub fn new(ch: &TwoOutputChannel, px: Option<&FinDist>) -> Result<Self> {
        let (nx, nz) = (ch.nx(), ch.nz());
        let px = match px {
            Some(p) if p.len() != nx => {
                return Err(Error::DimensionMismatch(format!("P_X has {} entries, |X| = {nx}", p.len())))
            }
            Some(p) => p.clone(),
            None => FinDist::uniform(nx),
        };
        let mut pxz = vec![0.0; nx * nz];
        for x in 0..nx {
            for z in 0..nz {
                pxz[x * nz + z] = px[x] * ch.pzx().get(x, z);
            }
        }
        Ok(Self { nx, nz, pxz })
    }

    pub fn on(&self, x: usize, z: usize) -> bool {
        self.pxz[x * self.nz + z] > 0.0
    }

    pub fn mass(&self, x: usize, z: usize) -> f64 {
        self.pxz[x * self.nz + z]
    }

    pub fn pz(&self, z: usize) -> f64 {
        (0..self.nx).map(|x| self.mass(x, z)).sum()
    }
}

/// `E q(X, Y)` under `P_X x P_{Y|X}` of the channel.
pub(crate) fn expected_true_metric(ch: &TwoOutputChannel, q: &Metric, s: &Support) -> f64 {
    let mut pxy = vec![vec![0.0; ch.ny()]; ch.nx()];
    for x in 0..ch.nx() {
        for z in 0..ch.nz() {
            let m = s.mass(x, z);
            if m > 0.0 {
                for (y, &p) in ch.py(x, z).iter().enumerate() {
                    pxy[x][y] += m * p;
                }
            }
        }
    }
    expect_matrix(q, &pxy)
}

pub(crate) fn check_dims(ch: &TwoOutputChannel, q: &Metric) -> Result<()> {
    if ch.nx() != q.nx() || ch.ny() != q.ny() {
        return Err(Error::DimensionMismatch(format!(
            "channel is |X|={} |Y|={}, metric is {}x{}",
            ch.nx(),
            ch.ny(),
            q.nx(),
            q.ny()
        )));
    }
    Ok(())
}
