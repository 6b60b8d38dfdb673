//! Checks on the genie's list: the pairwise lower bound on the conditional
//! error probability, the posterior over list members, and the list-size
//! sampling experiment.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::decode::{Scorer, EXACT_POINT_CAP};
use super::types::{sample_conditional, sequence_of, Codebook, JointType, TypeIndex};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::optim::rng;
use crate::par::Exec;
use crate::prob::CondDist;

const CHUNK: u64 = 4096;

/// Both sides of the pairwise bound
/// `Pr(error | z, t) >= 1/(|L|(|L|-1)) sum_{i != j} Pr(q(x_j, Y) >= q(x_i, Y) | x_i, z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub list: Vec<usize>,
    /// Error probability counting every tie as an error, the reading under
    /// which the bound is a union bound.
    pub lhs: f64,
    /// Error probability under uniform tie breaking.
    pub lhs_uniform_ties: f64,
    pub rhs: f64,
    /// `pairwise[a][b] = Pr(E_ab | x_a, z)` for list positions `a != b`.
    pub pairwise: Vec<Vec<f64>>,
    pub holds: bool,
}

/// Evaluate both sides of the pairwise bound by enumerating `y`. Messages in
/// the list are equally likely given `(z, t)`, so the conditional error
/// probability is the plain average over list members.
pub fn pairwise_lower_bound_check(
    cb: &Codebook,
    w2: &TwoOutputChannel,
    q: &Metric,
    z: &[usize],
    t: &JointType,
) -> Result<PairwiseReport> {
    let n = cb.n();
    let (ny, nz) = (w2.ny(), w2.nz());
    if w2.nx() != cb.nx() || q.nx() != cb.nx() || q.ny() != ny {
        return Err(Error::DimensionMismatch("codebook, channel and metric alphabets differ".into()));
    }
    let list = TypeIndex::new(cb, z, nz)?.list(t);
    if list.is_empty() {
        return Err(Error::InvalidArgument("no codeword has the given joint type with z".into()));
    }
    let l = list.len();
    let points = (ny as f64).powi(n as i32);
    if points > EXACT_POINT_CAP {
        return Err(Error::BudgetExceeded { needed: points, cap: EXACT_POINT_CAP });
    }
    let scorer = Scorer::new(q, n);
    let mut pairwise = vec![vec![0.0; l]; l];
    let (mut strict, mut uniform) = (0.0, 0.0);
    let mut y = vec![0; n];
    for idx in 0..points as u64 {
        sequence_of(idx, ny, n, &mut y);
        let s: Vec<f64> = list.iter().map(|&i| scorer.score(cb.codeword(i), &y)).collect();
        let top = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties = s.iter().filter(|&&v| v == top).count() as f64;
        for (a, &i) in list.iter().enumerate() {
            let x = cb.codeword(i);
            let p: f64 = (0..n).map(|k| w2.py(x[k], z[k])[y[k]]).product();
            if p == 0.0 {
                continue;
            }
            let mut beaten = false;
            for b in 0..l {
                if b != a && s[b] >= s[a] {
                    pairwise[a][b] += p;
                    beaten = true;
                }
            }
            if beaten {
                strict += p / l as f64;
            }
            uniform += p / l as f64 * if s[a] == top { 1.0 - 1.0 / ties } else { 1.0 };
        }
    }
    let rhs = if l < 2 {
        0.0
    } else {
        pairwise.iter().flatten().sum::<f64>() / (l * (l - 1)) as f64
    };
    Ok(PairwiseReport { list, lhs: strict, lhs_uniform_ties: uniform, rhs, holds: strict >= rhs - 1e-12, pairwise })
}

/// `P(X = x_i | Z = z, joint type = t)` over all messages, by Bayes' rule
/// with a uniform message.
pub fn list_posterior(cb: &Codebook, w2: &TwoOutputChannel, z: &[usize], t: &JointType) -> Result<Vec<f64>> {
    let index = TypeIndex::new(cb, z, w2.nz())?;
    let mut post: Vec<f64> = (0..cb.len())
        .map(|i| {
            if index.joint_type(i) != t {
                return 0.0;
            }
            let x = cb.codeword(i);
            (0..cb.n()).map(|k| w2.pzx().get(x[k], z[k])).product()
        })
        .collect();
    let s: f64 = post.iter().sum();
    if s == 0.0 {
        return Err(Error::InvalidArgument("the event (z, joint type) has probability zero".into()));
    }
    post.iter_mut().for_each(|p| *p /= s);
    Ok(post)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListSizeReport {
    pub trials: u64,
    pub seed: u64,
    pub tau: f64,
    /// Fraction of trials with `|L| >= e^{n tau}`.
    pub empirical: f64,
    pub std_err: f64,
    /// `1 - (n+1)^{|X||Z|-1} e^{-n (R - I(t) - tau)}`.
    pub analytic_bound: f64,
    pub rate: f64,
    pub type_information: f64,
    pub mean_list_size: f64,
    /// `empirical >= analytic_bound - 4 std_err`, or the bound is vacuous.
    pub holds: bool,
}

/// Sample a uniform message and a `z` uniform on the conditional type class
/// of `t` given the codeword, then record whether the list reaches `e^{n tau}`.
pub fn list_size_experiment(
    cb: &Codebook,
    w_zx: &CondDist,
    t: &JointType,
    tau: f64,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<ListSizeReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    if tau.is_nan() || tau < 0.0 {
        return Err(Error::InvalidArgument(format!("tau must be nonnegative, got {tau}")));
    }
    if t.nx() != cb.nx() || w_zx.n_in() != cb.nx() || w_zx.n_out() != t.nz() {
        return Err(Error::DimensionMismatch("codebook, Z-channel and joint type alphabets differ".into()));
    }
    if t.x_counts() != cb.counts() {
        return Err(Error::InvalidArgument(format!(
            "joint type has X counts {:?} but the codebook composition is {:?}",
            t.x_counts(),
            cb.counts()
        )));
    }
    for x in 0..t.nx() {
        for z in 0..t.nz() {
            if t.count(x, z) > 0 && w_zx.get(x, z) == 0.0 {
                return Err(Error::InvalidArgument(format!("joint type uses (x={x}, z={z}), which the channel never produces")));
            }
        }
    }
    let n = cb.n();
    let nf = n as f64;
    let threshold = (nf * tau).exp() * (1.0 - 1e-12);
    let chunks = trials.div_ceil(CHUNK);
    let partial = exec.map(chunks as usize, |c| {
        let mut r = rng(seed, c as u64);
        let (mut hits, mut total) = (0u64, 0u64);
        for _ in c as u64 * CHUNK..((c as u64 + 1) * CHUNK).min(trials) {
            let m = r.random_range(0..cb.len());
            let z = sample_conditional(cb.codeword(m), t, &mut r);
            let size = cb.codewords().iter().filter(|x| JointType::of(x, &z, t.nx(), t.nz()) == *t).count();
            total += size as u64;
            if size as f64 >= threshold {
                hits += 1;
            }
        }
        (hits, total)
    });
    let hits: u64 = partial.iter().map(|p| p.0).sum();
    let total: u64 = partial.iter().map(|p| p.1).sum();
    let p = hits as f64 / trials as f64;
    let std_err = (p * (1.0 - p) / trials as f64).sqrt();
    let rate = cb.rate();
    let info = t.mutual_information();
    let k = (t.nx() * t.nz()) as f64 - 1.0;
    let analytic = 1.0 - (k * (nf + 1.0).ln() - nf * (rate - info - tau)).exp();
    Ok(ListSizeReport {
        trials,
        seed,
        tau,
        empirical: p,
        std_err,
        analytic_bound: analytic,
        rate,
        type_information: info,
        mean_list_size: total as f64 / trials as f64,
        holds: analytic <= 0.0 || p >= analytic - 4.0 * std_err,
    })
}
