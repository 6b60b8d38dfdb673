//! Metric-argmax decoding, plain and restricted to the genie's list, and the
//! resulting block error probability by exhaustive enumeration or sampling.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::types::{sequence_of, Codebook, JointType, TypeIndex};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::optim::rng;
use crate::par::Exec;

/// Hard cap on evaluated `y` (plain) or `(y, z)` (genie) points in exact mode.
pub const EXACT_POINT_CAP: f64 = 1e8;
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    Plain,
    Genie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimMode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub p_error: f64,
    pub mode: SimMode,
    pub decoder: Decoder,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Outcome points enumerated in exact mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<u64>,
}

/// Scores `q(x_i, y) = sum_t q(x_{i,t}, y_t)` snapped to a grid so that ties
/// form a consistent equivalence. Scores are summed from the `(x, y)` joint
/// type, so codewords with the same type against `y` always tie exactly.
#[derive(Debug, Clone)]
pub(crate) struct Scorer<'a> {
    q: &'a Metric,
    quantum: f64,
}

impl<'a> Scorer<'a> {
    pub(crate) fn new(q: &'a Metric, n: usize) -> Self {
        let mut big: f64 = 0.0;
        for x in 0..q.nx() {
            for y in 0..q.ny() {
                if !q.is_forbidden(x, y) {
                    big = big.max(q.get(x, y).abs());
                }
            }
        }
        Self { q, quantum: 1e-10 * (1.0 + n as f64 * big) }
    }

    pub(crate) fn score(&self, x: &[usize], y: &[usize]) -> f64 {
        let ny = self.q.ny();
        let mut counts = vec![0u32; self.q.nx() * ny];
        x.iter().zip(y).for_each(|(&a, &b)| counts[a * ny + b] += 1);
        let mut s = 0.0;
        for (i, &k) in counts.iter().enumerate() {
            if k > 0 {
                s += k as f64 * self.q.get(i / ny, i % ny);
            }
        }
        if s == f64::NEG_INFINITY {
            s
        } else {
            (s / self.quantum).round()
        }
    }
}

/// Uniform distribution over the highest-scoring members of `among`, as a
/// vector over all `M` messages.
fn argmax_among(cb: &Codebook, scorer: &Scorer, y: &[usize], among: &[usize]) -> Vec<f64> {
    let mut d = vec![0.0; cb.len()];
    let scores: Vec<f64> = among.iter().map(|&i| scorer.score(cb.codeword(i), y)).collect();
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let winners: Vec<usize> = among.iter().zip(&scores).filter(|(_, &s)| s == best).map(|(&i, _)| i).collect();
    let w = 1.0 / winners.len() as f64;
    winners.into_iter().for_each(|i| d[i] += w);
    d
}

fn check(cb: &Codebook, q: &Metric, ny: usize) -> Result<()> {
    if q.nx() != cb.nx() || q.ny() != ny {
        return Err(Error::DimensionMismatch(format!(
            "metric is {}x{}, codebook alphabet {} and |Y| = {ny}",
            q.nx(),
            q.ny(),
            cb.nx()
        )));
    }
    Ok(())
}

fn check_seq(y: &[usize], n: usize, k: usize, what: &str) -> Result<()> {
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{what} has length {}, expected {n}", y.len())));
    }
    if let Some(&s) = y.iter().find(|&&s| s >= k) {
        return Err(Error::DimensionMismatch(format!("{what} uses symbol {s}, alphabet has {k}")));
    }
    Ok(())
}

/// Decoded message distribution: uniform over `argmax_i q(x_i, y)`.
/// `-inf` scores rank below every finite score; if all are `-inf` every
/// message ties.
pub fn plain_decode(cb: &Codebook, y: &[usize], q: &Metric) -> Result<Vec<f64>> {
    check(cb, q, q.ny())?;
    check_seq(y, cb.n(), q.ny(), "y")?;
    let all: Vec<usize> = (0..cb.len()).collect();
    Ok(argmax_among(cb, &Scorer::new(q, cb.n()), y, &all))
}

/// Indices of codewords whose joint type with `z` equals `t`.
pub fn build_list(cb: &Codebook, z: &[usize], t: &JointType) -> Result<Vec<usize>> {
    if t.nx() != cb.nx() || t.n() != cb.n() {
        return Err(Error::DimensionMismatch(format!(
            "joint type is over |X| = {} with n = {}, codebook has {} and {}",
            t.nx(),
            t.n(),
            cb.nx(),
            cb.n()
        )));
    }
    Ok(TypeIndex::new(cb, z, t.nz())?.list(t))
}

/// Argmax restricted to the list `L(z, t)`.
pub fn genie_decode(cb: &Codebook, y: &[usize], z: &[usize], t: &JointType, q: &Metric) -> Result<Vec<f64>> {
    check(cb, q, q.ny())?;
    check_seq(y, cb.n(), q.ny(), "y")?;
    let list = build_list(cb, z, t)?;
    if list.is_empty() {
        return Err(Error::InvalidArgument("no codeword has the given joint type with z; the list is empty".into()));
    }
    Ok(argmax_among(cb, &Scorer::new(q, cb.n()), y, &list))
}

fn check_channel(cb: &Codebook, w2: &TwoOutputChannel, q: &Metric) -> Result<()> {
    if w2.nx() != cb.nx() {
        return Err(Error::DimensionMismatch(format!("channel has |X| = {}, codebook {}", w2.nx(), cb.nx())));
    }
    check(cb, q, w2.ny())
}

/// Exact block error probability under the uniform tie rule: a transmitted
/// message in a tie set `T` contributes `(|T|-1)/|T|`.
pub fn exact_error(cb: &Codebook, w2: &TwoOutputChannel, q: &Metric, decoder: Decoder, exec: Exec) -> Result<SimResult> {
    check_channel(cb, w2, q)?;
    let (n, ny, nz) = (cb.n(), w2.ny(), w2.nz());
    let base = match decoder {
        Decoder::Plain => ny,
        Decoder::Genie => ny * nz,
    };
    let points = (base as f64).powi(n as i32);
    if points > EXACT_POINT_CAP {
        return Err(Error::BudgetExceeded { needed: points, cap: EXACT_POINT_CAP });
    }
    let points = points as u64;
    let scorer = Scorer::new(q, n);
    let wy = w2.marginal_y();
    let all: Vec<usize> = (0..cb.len()).collect();
    let chunks = points.div_ceil(CHUNK);
    let partial = exec.map(chunks as usize, |c| {
        let mut y = vec![0; n];
        let mut z = vec![0; n];
        let mut yz = vec![0; n];
        let mut acc = 0.0;
        for idx in c as u64 * CHUNK..((c as u64 + 1) * CHUNK).min(points) {
            match decoder {
                Decoder::Plain => {
                    sequence_of(idx, ny, n, &mut y);
                    let d = argmax_among(cb, &scorer, &y, &all);
                    for (m, x) in cb.codewords().iter().enumerate() {
                        let p: f64 = (0..n).map(|t| wy.get(x[t], y[t])).product();
                        acc += p * (1.0 - d[m]);
                    }
                }
                Decoder::Genie => {
                    sequence_of(idx, ny * nz, n, &mut yz);
                    for t in 0..n {
                        y[t] = yz[t] / nz;
                        z[t] = yz[t] % nz;
                    }
                    let index = TypeIndex::new(cb, &z, nz).expect("sequence is in range");
                    for (m, x) in cb.codewords().iter().enumerate() {
                        let p: f64 = (0..n).map(|t| w2.kernel(x[t], y[t], z[t])).product();
                        if p == 0.0 {
                            continue;
                        }
                        let list = index.list(index.joint_type(m));
                        let d = argmax_among(cb, &scorer, &y, &list);
                        acc += p * (1.0 - d[m]);
                    }
                }
            }
        }
        acc
    });
    let p_error = (partial.iter().sum::<f64>() / cb.len() as f64).clamp(0.0, 1.0);
    Ok(SimResult {
        p_error,
        mode: SimMode::Exact,
        decoder,
        std_err: None,
        samples: None,
        seed: None,
        points: Some(points),
    })
}

/// Monte Carlo estimate. Each sample draws a message, then `z` and `y`
/// letter by letter, and records the analytic tie weight `1 - P(decode = m)`.
/// Samples are split into fixed chunks with their own seeded stream, so the
/// estimate does not depend on the worker count. Plain and genie runs with the
/// same seed see the same draws.
pub fn monte_carlo_error(
    cb: &Codebook,
    w2: &TwoOutputChannel,
    q: &Metric,
    decoder: Decoder,
    samples: u64,
    seed: u64,
    exec: Exec,
) -> Result<SimResult> {
    check_channel(cb, w2, q)?;
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    let (n, nx, nz) = (cb.n(), cb.nx(), w2.nz());
    let scorer = Scorer::new(q, n);
    let zdist: Vec<WeightedIndex<f64>> =
        (0..nx).map(|x| WeightedIndex::new(w2.pzx().row(x)).expect("rows are distributions")).collect();
    let ydist: Vec<Option<WeightedIndex<f64>>> =
        (0..nx * nz).map(|r| WeightedIndex::new(w2.pyxz().row(r)).ok()).collect();
    let all: Vec<usize> = (0..cb.len()).collect();
    let chunks = samples.div_ceil(CHUNK);
    let partial = exec.map(chunks as usize, |c| {
        let mut r = rng(seed, c as u64);
        let mut y = vec![0; n];
        let mut z = vec![0; n];
        let mut acc = 0.0;
        for _ in c as u64 * CHUNK..((c as u64 + 1) * CHUNK).min(samples) {
            let m = r.random_range(0..cb.len());
            let x = cb.codeword(m);
            for t in 0..n {
                z[t] = zdist[x[t]].sample(&mut r);
                y[t] = ydist[x[t] * nz + z[t]].as_ref().expect("reachable rows are distributions").sample(&mut r);
            }
            let d = match decoder {
                Decoder::Plain => argmax_among(cb, &scorer, &y, &all),
                Decoder::Genie => {
                    let index = TypeIndex::new(cb, &z, nz).expect("sampled in range");
                    argmax_among(cb, &scorer, &y, &index.list(index.joint_type(m)))
                }
            };
            acc += 1.0 - d[m];
        }
        acc
    });
    let p = partial.iter().sum::<f64>() / samples as f64;
    Ok(SimResult {
        p_error: p,
        mode: SimMode::MonteCarlo,
        decoder,
        std_err: Some((p * (1.0 - p) / samples as f64).sqrt()),
        samples: Some(samples),
        seed: Some(seed),
        points: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::CondDist;

    fn noiseless(k: usize) -> TwoOutputChannel {
        let w = crate::metric::Dmc::new(CondDist::identity(k));
        TwoOutputChannel::copy(&w)
    }

    fn bsc(p: f64) -> TwoOutputChannel {
        let w = crate::metric::Dmc::new(CondDist::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]]).unwrap());
        TwoOutputChannel::copy(&w)
    }

    fn ml(p: f64) -> Metric {
        Metric::new(vec![vec![(1.0 - p).ln(), p.ln()], vec![p.ln(), (1.0 - p).ln()]]).unwrap()
    }

    #[test]
    fn single_codeword_and_ties() {
        let q = ml(0.1);
        let one = Codebook::new(2, 2, vec![vec![0, 1]]).unwrap();
        assert_eq!(plain_decode(&one, &[1, 1], &q).unwrap(), vec![1.0]);
        let two = Codebook::new(2, 2, vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(plain_decode(&two, &[0, 0], &q).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn three_codewords_against_direct_sums() {
        let q = Metric::new(vec![vec![0.3, -1.2, 0.0], vec![-0.4, 0.9, 0.1], vec![0.2, 0.2, -2.0]]).unwrap();
        let cb = Codebook::new(3, 3, vec![vec![0, 1, 2], vec![2, 0, 1], vec![1, 2, 0]]).unwrap();
        for idx in 0..27 {
            let mut y = [0; 3];
            sequence_of(idx, 3, 3, &mut y);
            let direct: Vec<f64> =
                cb.codewords().iter().map(|x| (0..3).map(|t| q.get(x[t], y[t])).sum::<f64>()).collect();
            let best = (0..3).max_by(|&a, &b| direct[a].total_cmp(&direct[b])).unwrap();
            let d = plain_decode(&cb, &y, &q).unwrap();
            assert!(d[best] > 0.0, "y = {y:?}");
        }
    }

    #[test]
    fn forbidden_scores_rank_last() {
        let q = Metric::with_mask(vec![vec![0.0, 0.0], vec![-5.0, -5.0]], &[vec![false, true], vec![false, false]]).unwrap();
        let cb = Codebook::new(2, 2, vec![vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(plain_decode(&cb, &[1, 0], &q).unwrap(), vec![0.0, 1.0]);
        assert_eq!(plain_decode(&cb, &[1, 1], &q).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn genie_list_examples() {
        let cb = Codebook::new(2, 2, vec![vec![0, 1], vec![1, 0]]).unwrap();
        let t = JointType::of(&[0, 1], &[0, 1], 2, 2);
        assert_eq!(build_list(&cb, &[0, 1], &t).unwrap(), vec![0]);
        let d = genie_decode(&cb, &[1, 0], &[0, 1], &t, &ml(0.1)).unwrap();
        assert_eq!(d, vec![1.0, 0.0]);
        let bad = JointType::new(2, 2, vec![2, 0, 0, 0]).unwrap();
        assert!(genie_decode(&cb, &[1, 0], &[0, 1], &bad, &ml(0.1)).is_err());
    }

    #[test]
    fn noiseless_and_duplicate_codebooks() {
        let cb = Codebook::new(2, 2, vec![vec![0, 1], vec![1, 0]]).unwrap();
        let q = Metric::new(vec![vec![0.0, -1.0], vec![-1.0, 0.0]]).unwrap();
        for dec in [Decoder::Plain, Decoder::Genie] {
            assert_eq!(exact_error(&cb, &noiseless(2), &q, dec, Exec::Sequential).unwrap().p_error, 0.0);
        }
        let dup = Codebook::new(2, 2, vec![vec![0, 1], vec![0, 1]]).unwrap();
        for dec in [Decoder::Plain, Decoder::Genie] {
            let r = exact_error(&dup, &bsc(0.2), &ml(0.2), dec, Exec::Sequential).unwrap();
            assert!((r.p_error - 0.5).abs() < 1e-15, "{r:?}");
            let mc = monte_carlo_error(&dup, &bsc(0.2), &ml(0.2), dec, 1000, 3, Exec::Sequential).unwrap();
            assert_eq!(mc.p_error, 0.5);
            let mc0 = monte_carlo_error(&cb, &noiseless(2), &q, dec, 1000, 3, Exec::Sequential).unwrap();
            assert_eq!(mc0.p_error, 0.0);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let cb = Codebook::new(30, 2, vec![vec![0; 30]]).unwrap();
        let e = exact_error(&cb, &bsc(0.1), &ml(0.1), Decoder::Plain, Exec::Sequential).unwrap_err();
        assert!(matches!(e, Error::BudgetExceeded { .. }));
    }

    #[test]
    fn exact_and_monte_carlo_agree() {
        let cb = Codebook::new(3, 2, vec![vec![0, 0, 1], vec![0, 1, 0], vec![1, 0, 0]]).unwrap();
        let ch = crate::fixtures::example_candidate();
        let cb3 = cb.with_alphabet(2).unwrap();
        let q = crate::fixtures::example_metric();
        for dec in [Decoder::Plain, Decoder::Genie] {
            let ex = exact_error(&cb3, &ch, &q, dec, Exec::Parallel).unwrap();
            let mc = monte_carlo_error(&cb3, &ch, &q, dec, 200_000, 11, Exec::Parallel).unwrap();
            assert!((ex.p_error - mc.p_error).abs() <= 4.0 * mc.std_err.unwrap(), "{ex:?} {mc:?}");
            let seq = monte_carlo_error(&cb3, &ch, &q, dec, 200_000, 11, Exec::Sequential).unwrap();
            assert_eq!(seq, mc);
        }
    }
}
