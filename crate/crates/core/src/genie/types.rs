//! Constant-composition codebooks, joint types of sequence pairs and
//! type-class sizes.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{entropy_of, Axis, FinDist, JointDist};

/// A list of length-`n` codewords over an alphabet of size `nx`, all of the
/// same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CodebookRepr", into = "CodebookRepr")]
pub struct Codebook {
    n: usize,
    nx: usize,
    codewords: Vec<Vec<usize>>,
    counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CodebookRepr {
    pub n: usize,
    /// Input alphabet size; inferred from the largest symbol when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    pub codewords: Vec<Vec<usize>>,
}

impl TryFrom<CodebookRepr> for Codebook {
    type Error = Error;
    fn try_from(r: CodebookRepr) -> Result<Self> {
        let nx = r.nx.unwrap_or_else(|| r.codewords.iter().flatten().max().map_or(1, |m| m + 1));
        Codebook::new(r.n, nx, r.codewords)
    }
}

impl From<Codebook> for CodebookRepr {
    fn from(c: Codebook) -> Self {
        CodebookRepr { n: c.n, nx: Some(c.nx), codewords: c.codewords }
    }
}

impl Codebook {
    pub fn new(n: usize, nx: usize, codewords: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("blocklength must be positive".into()));
        }
        if codewords.is_empty() {
            return Err(Error::InvalidArgument("codebook is empty".into()));
        }
        let mut counts: Option<Vec<usize>> = None;
        for (i, c) in codewords.iter().enumerate() {
            if c.len() != n {
                return Err(Error::DimensionMismatch(format!("codeword {i} has length {}, expected {n}", c.len())));
            }
            if let Some(&s) = c.iter().find(|&&s| s >= nx) {
                return Err(Error::DimensionMismatch(format!("codeword {i} uses symbol {s} outside |X| = {nx}")));
            }
            let k = symbol_counts(c, nx);
            match &counts {
                None => counts = Some(k),
                Some(first) if *first != k => {
                    return Err(Error::InvalidArgument(format!(
                        "codeword {i} has type {k:?}, codeword 0 has {first:?}; the code must be constant composition"
                    )))
                }
                _ => {}
            }
        }
        Ok(Self { n, nx, codewords, counts: counts.unwrap() })
    }

    /// `m` codewords drawn independently and uniformly from the type class of `counts`.
    pub fn random<R: Rng>(counts: &[usize], m: usize, rng: &mut R) -> Result<Self> {
        let n: usize = counts.iter().sum();
        let template: Vec<usize> = counts.iter().enumerate().flat_map(|(a, &k)| std::iter::repeat_n(a, k)).collect();
        let codewords = (0..m)
            .map(|_| {
                let mut c = template.clone();
                c.shuffle(rng);
                c
            })
            .collect();
        Self::new(n, counts.len(), codewords)
    }

    /// The same codewords over a larger input alphabet.
    pub fn with_alphabet(&self, nx: usize) -> Result<Self> {
        if nx < self.nx && self.counts[nx..].iter().any(|&k| k > 0) {
            return Err(Error::DimensionMismatch(format!("codebook uses symbols outside |X| = {nx}")));
        }
        Self::new(self.n, nx, self.codewords.clone())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn codewords(&self) -> &[Vec<usize>] {
        &self.codewords
    }

    pub fn codeword(&self, i: usize) -> &[usize] {
        &self.codewords[i]
    }

    /// Symbol counts shared by every codeword.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn composition(&self) -> FinDist {
        FinDist::new(self.counts.iter().map(|&k| k as f64 / self.n as f64).collect()).expect("counts sum to n")
    }

    /// `ln M / n` in nats.
    pub fn rate(&self) -> f64 {
        (self.len() as f64).ln() / self.n as f64
    }
}

fn symbol_counts(s: &[usize], k: usize) -> Vec<usize> {
    let mut c = vec![0; k];
    s.iter().for_each(|&a| c[a] += 1);
    c
}

/// Joint empirical distribution of an `X`-sequence and a `Z`-sequence, kept as
/// integer counts `N(x, z)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointType {
    n: usize,
    nx: usize,
    nz: usize,
    counts: Vec<usize>,
}

impl JointType {
    pub fn new(nx: usize, nz: usize, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != nx * nz {
            return Err(Error::DimensionMismatch(format!("joint type needs {} counts, got {}", nx * nz, counts.len())));
        }
        let n = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidArgument("joint type of empty sequences".into()));
        }
        Ok(Self { n, nx, nz, counts })
    }

    pub fn of(x: &[usize], z: &[usize], nx: usize, nz: usize) -> Self {
        debug_assert_eq!(x.len(), z.len());
        let mut counts = vec![0; nx * nz];
        x.iter().zip(z).for_each(|(&a, &b)| counts[a * nz + b] += 1);
        Self { n: x.len(), nx, nz, counts }
    }

    /// Recover counts from a two-axis joint over `(X, Z)` whose entries are multiples of `1/n`.
    pub fn from_joint(j: &JointDist, n: usize) -> Result<Self> {
        let m = j.marginal(&[Axis::X, Axis::Z])?;
        let (nx, nz) = (m.shape()[0], m.shape()[1]);
        let counts = order_n_counts(m.probs(), n)?;
        Self::new(nx, nz, counts)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn count(&self, x: usize, z: usize) -> usize {
        self.counts[x * self.nz + z]
    }

    pub fn x_counts(&self) -> Vec<usize> {
        (0..self.nx).map(|x| (0..self.nz).map(|z| self.count(x, z)).sum()).collect()
    }

    pub fn z_counts(&self) -> Vec<usize> {
        (0..self.nz).map(|z| (0..self.nx).map(|x| self.count(x, z)).sum()).collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.counts.iter().map(|&k| k as f64 / self.n as f64).collect()
    }

    pub fn to_joint(&self) -> JointDist {
        JointDist::new(vec![Axis::X, Axis::Z], vec![self.nx, self.nz], self.probs()).expect("a type is a distribution")
    }

    /// `I(X;Z)` of the type, in nats.
    pub fn mutual_information(&self) -> f64 {
        let to_p = |c: Vec<usize>| c.into_iter().map(|k| k as f64 / self.n as f64).collect::<Vec<_>>();
        entropy_of(&to_p(self.x_counts())) + entropy_of(&to_p(self.z_counts())) - entropy_of(&self.probs())
    }
}

/// Integer counts `n * p`, provided every entry is within `1e-9` of a multiple of `1/n`.
pub fn order_n_counts(p: &[f64], n: usize) -> Result<Vec<usize>> {
    let nf = n as f64;
    let counts: Vec<usize> = p.iter().map(|&v| (v * nf).round().max(0.0) as usize).collect();
    for (i, (&v, &k)) in p.iter().zip(&counts).enumerate() {
        if (v * nf - k as f64).abs() > 1e-9 * nf.max(1.0) {
            return Err(Error::InvalidArgument(format!("entry {i} = {v} is not a multiple of 1/{n}")));
        }
    }
    if counts.iter().sum::<usize>() != n {
        return Err(Error::InvalidArgument(format!("counts do not add up to {n}")));
    }
    Ok(counts)
}

/// Joint types of every codeword against one `Z`-sequence.
#[derive(Debug, Clone)]
pub struct TypeIndex {
    z: Vec<usize>,
    types: Vec<JointType>,
}

impl TypeIndex {
    pub fn new(cb: &Codebook, z: &[usize], nz: usize) -> Result<Self> {
        if z.len() != cb.n() {
            return Err(Error::DimensionMismatch(format!("z has length {}, codebook has n = {}", z.len(), cb.n())));
        }
        if let Some(&s) = z.iter().find(|&&s| s >= nz) {
            return Err(Error::DimensionMismatch(format!("z uses symbol {s} outside |Z| = {nz}")));
        }
        let types = cb.codewords().iter().map(|c| JointType::of(c, z, cb.nx(), nz)).collect();
        Ok(Self { z: z.to_vec(), types })
    }

    pub fn z(&self) -> &[usize] {
        &self.z
    }

    pub fn joint_type(&self, i: usize) -> &JointType {
        &self.types[i]
    }

    /// Codewords whose joint type with `z` is exactly `t`.
    pub fn list(&self, t: &JointType) -> Vec<usize> {
        self.types.iter().enumerate().filter(|(_, u)| *u == t).map(|(i, _)| i).collect()
    }
}

fn ln_factorial(k: usize) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// `ln |T_n(P)|` for a type given by its counts.
pub fn ln_type_class_size(counts: &[usize]) -> f64 {
    ln_factorial(counts.iter().sum()) - counts.iter().map(|&k| ln_factorial(k)).sum::<f64>()
}

/// `|T_n(P)|` exactly, or `None` on overflow.
pub fn type_class_size(counts: &[usize]) -> Option<u128> {
    // Product of binomials C(k_1 + .. + k_i, k_i), each computed incrementally.
    let mut total: u128 = 1;
    let mut seen = 0u128;
    for &k in counts {
        for j in 1..=k as u128 {
            seen += 1;
            total = total.checked_mul(seen)? / j;
        }
    }
    Some(total)
}

/// `ln |T_n(P_{Z|X} | x)|`: the number of `z` with the given joint type against a fixed `x`.
pub fn ln_conditional_class_size(t: &JointType) -> f64 {
    (0..t.nx()).map(|x| ln_type_class_size(&t.counts()[x * t.nz()..(x + 1) * t.nz()])).sum()
}

/// A uniform draw from the sequences `z` whose joint type with `x` is `t`.
pub fn sample_conditional<R: Rng>(x: &[usize], t: &JointType, rng: &mut R) -> Vec<usize> {
    let mut z = vec![0; x.len()];
    for a in 0..t.nx() {
        let mut template: Vec<usize> = (0..t.nz()).flat_map(|b| std::iter::repeat_n(b, t.count(a, b))).collect();
        template.shuffle(rng);
        let mut it = template.into_iter();
        for (zi, _) in z.iter_mut().zip(x).filter(|(_, &xi)| xi == a) {
            *zi = it.next().expect("joint type matches the x composition");
        }
    }
    z
}

/// Decode a mixed-radix index into a sequence over `0..k`, first symbol most significant.
pub(crate) fn sequence_of(mut idx: u64, k: usize, n: usize, out: &mut [usize]) {
    for t in (0..n).rev() {
        out[t] = (idx % k as u64) as usize;
        idx /= k as u64;
    }
}
