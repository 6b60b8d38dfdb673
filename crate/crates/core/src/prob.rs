//! Finite-alphabet distributions and the information measures built on them.
//!
//! All quantities are in nats. Conventions: `0 log 0 = 0` and `0 log(0/0) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|sum - 1|` for a vector to count as a distribution.
pub const SIMPLEX_TOL: f64 = 1e-9;

pub fn nats_to_bits(x: f64) -> f64 {
    x / std::f64::consts::LN_2
}

pub fn bits_to_nats(x: f64) -> f64 {
    x * std::f64::consts::LN_2
}

fn check_simplex(probs: &[f64], row: Option<usize>) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution { row, reason: "empty alphabet".into() });
    }
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution {
                row,
                reason: format!("entry {i} = {p} is not a nonnegative finite number"),
            });
        }
    }
    let s: f64 = probs.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidDistribution { row, reason: format!("entries sum to {s}, not 1") });
    }
    Ok(())
}

fn renormalize(mut probs: Vec<f64>, row: Option<usize>) -> Result<Vec<f64>> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDistribution { row, reason: "negative or non-finite entry".into() });
    }
    let s: f64 = probs.iter().sum();
    if s <= 0.0 {
        return Err(Error::InvalidDistribution { row, reason: "all entries are zero".into() });
    }
    probs.iter_mut().for_each(|p| *p /= s);
    Ok(probs)
}

/// A probability vector over `{0, .., len-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FinDist {
    probs: Vec<f64>,
}

impl TryFrom<Vec<f64>> for FinDist {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        FinDist::new(v)
    }
}

impl From<FinDist> for Vec<f64> {
    fn from(d: FinDist) -> Self {
        d.probs
    }
}

impl FinDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_simplex(&probs, None)?;
        Ok(Self { probs })
    }

    /// Scale a nonnegative vector to sum to one.
    pub fn renormalized(probs: Vec<f64>) -> Result<Self> {
        Ok(Self { probs: renormalize(probs, None)? })
    }

    pub fn uniform(k: usize) -> Self {
        Self { probs: vec![1.0 / k as f64; k] }
    }

    pub fn point(k: usize, i: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[i] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(i, _)| i)
    }
}

impl std::ops::Index<usize> for FinDist {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.probs[i]
    }
}

/// A row-stochastic matrix: one distribution over the output alphabet per input symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CondDist {
    n_in: usize,
    n_out: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for CondDist {
    type Error = Error;
    fn try_from(v: Vec<Vec<f64>>) -> Result<Self> {
        CondDist::new(v)
    }
}

impl From<CondDist> for Vec<Vec<f64>> {
    fn from(c: CondDist) -> Self {
        c.rows().map(|r| r.to_vec()).collect()
    }
}

impl CondDist {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(rows, false)
    }

    /// Like [`CondDist::new`] but rescales every row to sum to one.
    pub fn renormalized(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(rows, true)
    }

    fn build(rows: Vec<Vec<f64>>, renorm: bool) -> Result<Self> {
        let n_in = rows.len();
        if n_in == 0 {
            return Err(Error::InvalidDistribution { row: None, reason: "no rows".into() });
        }
        let n_out = rows[0].len();
        let mut data = Vec::with_capacity(n_in * n_out);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != n_out {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {n_out}",
                    r.len()
                )));
            }
            let r = if renorm { renormalize(r, Some(i))? } else { r };
            check_simplex(&r, Some(i))?;
            data.extend_from_slice(&r);
        }
        Ok(Self { n_in, n_out, data })
    }

    /// Build from a flat row-major buffer without validation. Callers guarantee stochasticity.
    pub(crate) fn from_flat_unchecked(n_in: usize, n_out: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n_in * n_out);
        Self { n_in, n_out, data }
    }

    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        (0..k).for_each(|i| data[i * k + i] = 1.0);
        Self { n_in: k, n_out: k, data }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_out..(i + 1) * self.n_out]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_out)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_out + j]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Output distribution `sum_x p(x) C(.|x)`.
    pub fn output_dist(&self, p: &FinDist) -> FinDist {
        let mut out = vec![0.0; self.n_out];
        for (x, row) in self.rows().enumerate() {
            for (o, v) in out.iter_mut().zip(row) {
                *o += p[x] * v;
            }
        }
        FinDist { probs: out }
    }

    /// Serial concatenation `self` followed by `next`.
    pub fn then(&self, next: &CondDist) -> Result<CondDist> {
        if self.n_out != next.n_in {
            return Err(Error::DimensionMismatch(format!(
                "cannot chain {}x{} with {}x{}",
                self.n_in, self.n_out, next.n_in, next.n_out
            )));
        }
        let mut data = vec![0.0; self.n_in * next.n_out];
        for i in 0..self.n_in {
            for k in 0..self.n_out {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..next.n_out {
                    data[i * next.n_out + j] += a * next.get(k, j);
                }
            }
        }
        Ok(CondDist { n_in: self.n_in, n_out: next.n_out, data })
    }

    pub fn max_abs_diff(&self, other: &CondDist) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn same_shape(&self, other: &CondDist) -> bool {
        self.n_in == other.n_in && self.n_out == other.n_out
    }
}

/// Coordinate labels for joint arrays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    /// The competing input symbol.
    Xt,
    Y,
    Z,
    U,
}

/// Dense joint distribution over a labelled product alphabet (row-major, last axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDist {
    axes: Vec<Axis>,
    shape: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDist {
    pub fn new(axes: Vec<Axis>, shape: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if axes.len() != shape.len() {
            return Err(Error::DimensionMismatch("axes and shape lengths differ".into()));
        }
        for (i, a) in axes.iter().enumerate() {
            if axes[..i].contains(a) {
                return Err(Error::DimensionMismatch(format!("axis {a:?} repeated")));
            }
        }
        let n: usize = shape.iter().product();
        if n != probs.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} needs {n} entries, got {}",
                probs.len()
            )));
        }
        check_simplex(&probs, None)?;
        Ok(Self { axes, shape, probs })
    }

    pub(crate) fn new_unchecked(axes: Vec<Axis>, shape: Vec<usize>, probs: Vec<f64>) -> Self {
        Self { axes, shape, probs }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn axis_position(&self, a: Axis) -> Option<usize> {
        self.axes.iter().position(|b| *b == a)
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.shape.len()];
        for i in (0..self.shape.len().saturating_sub(1)).rev() {
            s[i] = s[i + 1] * self.shape[i + 1];
        }
        s
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        let st = self.strides();
        self.probs[idx.iter().zip(&st).map(|(i, s)| i * s).sum::<usize>()]
    }

    /// Marginal on `keep`, with axes in the order given.
    pub fn marginal(&self, keep: &[Axis]) -> Result<JointDist> {
        let pos: Vec<usize> = keep
            .iter()
            .map(|a| self.axis_position(*a).ok_or_else(|| Error::DimensionMismatch(format!("no axis {a:?}"))))
            .collect::<Result<_>>()?;
        let shape: Vec<usize> = pos.iter().map(|&p| self.shape[p]).collect();
        let mut out_st = vec![1; shape.len()];
        for i in (0..shape.len().saturating_sub(1)).rev() {
            out_st[i] = out_st[i + 1] * shape[i + 1];
        }
        let mut out = vec![0.0; shape.iter().product()];
        let mut idx = vec![0usize; self.shape.len()];
        for &p in &self.probs {
            let o: usize = pos.iter().zip(&out_st).map(|(&q, s)| idx[q] * s).sum();
            out[o] += p;
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < self.shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(JointDist { axes: keep.to_vec(), shape, probs: out })
    }

    /// Drop one axis.
    pub fn marginalize_out(&self, drop: Axis) -> Result<JointDist> {
        let keep: Vec<Axis> = self.axes.iter().copied().filter(|a| *a != drop).collect();
        if keep.len() == self.axes.len() {
            return Err(Error::DimensionMismatch(format!("no axis {drop:?}")));
        }
        self.marginal(&keep)
    }

    /// One-axis marginal as a distribution.
    pub fn marginal_dist(&self, a: Axis) -> Result<FinDist> {
        Ok(FinDist { probs: self.marginal(&[a])?.probs })
    }

    /// Reorder axes to `order`, which must be a permutation of the current axes.
    pub fn permuted(&self, order: &[Axis]) -> Result<JointDist> {
        if order.len() != self.axes.len() {
            return Err(Error::DimensionMismatch("permutation must list every axis".into()));
        }
        self.marginal(order)
    }

    /// For a two-axis joint, the matrix `p[a][b]`.
    pub fn as_matrix(&self) -> Result<Vec<Vec<f64>>> {
        if self.shape.len() != 2 {
            return Err(Error::DimensionMismatch("expected a two-axis joint".into()));
        }
        Ok(self.probs.chunks(self.shape[1]).map(|r| r.to_vec()).collect())
    }

    pub fn max_abs_diff(&self, other: &JointDist) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// Joint of input `p` and channel `c`, axes `[a_in, a_out]`.
pub fn compose(p: &FinDist, c: &CondDist, a_in: Axis, a_out: Axis) -> Result<JointDist> {
    if p.len() != c.n_in() {
        return Err(Error::DimensionMismatch(format!(
            "input distribution has {} symbols, channel expects {}",
            p.len(),
            c.n_in()
        )));
    }
    let mut probs = Vec::with_capacity(c.n_in() * c.n_out());
    for (x, row) in c.rows().enumerate() {
        probs.extend(row.iter().map(|v| p[x] * v));
    }
    JointDist::new(vec![a_in, a_out], vec![c.n_in(), c.n_out()], probs)
}

/// Posterior `P(x|z)` of a channel. Rows for output symbols of zero probability are undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct ReverseChannel {
    rows: Vec<Option<Vec<f64>>>,
}

impl ReverseChannel {
    pub fn row(&self, z: usize) -> Result<&[f64]> {
        self.rows
            .get(z)
            .ok_or_else(|| Error::DimensionMismatch(format!("no output symbol {z}")))?
            .as_deref()
            .ok_or(Error::UndefinedRow(z))
    }

    pub fn is_defined(&self, z: usize) -> bool {
        matches!(self.rows.get(z), Some(Some(_)))
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Convert to a [`CondDist`] if every row is defined.
    pub fn to_cond(&self) -> Result<CondDist> {
        let rows = (0..self.rows.len()).map(|z| self.row(z).map(|r| r.to_vec())).collect::<Result<Vec<_>>>()?;
        CondDist::new(rows)
    }
}

pub fn bayes_reverse(p: &FinDist, c: &CondDist) -> Result<ReverseChannel> {
    if p.len() != c.n_in() {
        return Err(Error::DimensionMismatch("prior and channel input sizes differ".into()));
    }
    let pz = c.output_dist(p);
    let rows = (0..c.n_out())
        .map(|z| {
            (pz[z] > 0.0).then(|| (0..c.n_in()).map(|x| p[x] * c.get(x, z) / pz[z]).collect())
        })
        .collect();
    Ok(ReverseChannel { rows })
}

fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

pub fn entropy(p: &FinDist) -> f64 {
    entropy_of(p.probs())
}

/// Entropy of any nonnegative vector summing to one (e.g. a flattened joint).
pub fn entropy_of(probs: &[f64]) -> f64 {
    (-probs.iter().map(|&p| plogp(p)).sum::<f64>()).max(0.0)
}

/// `I(A;B)` of a two-axis joint.
pub fn mutual_information(joint: &JointDist) -> Result<f64> {
    let m = joint.as_matrix()?;
    let pa: Vec<f64> = m.iter().map(|r| r.iter().sum()).collect();
    let mut pb = vec![0.0; joint.shape()[1]];
    for r in &m {
        for (b, v) in pb.iter_mut().zip(r) {
            *b += v;
        }
    }
    let mut i = 0.0;
    for (a, r) in m.iter().enumerate() {
        for (b, &v) in r.iter().enumerate() {
            if v > 0.0 {
                i += v * (v / (pa[a] * pb[b])).ln();
            }
        }
    }
    Ok(i.max(0.0))
}

/// `I(P, C)`: mutual information between input and output of channel `c` driven by `p`.
pub fn channel_mi(p: &FinDist, c: &CondDist) -> f64 {
    let r = c.output_dist(p);
    let mut i = 0.0;
    for (x, row) in c.rows().enumerate() {
        if p[x] == 0.0 {
            continue;
        }
        for (z, &v) in row.iter().enumerate() {
            if v > 0.0 {
                i += p[x] * v * (v / r[z]).ln();
            }
        }
    }
    i.max(0.0)
}

/// `D(a||b)`; `+inf` when `a` is not absolutely continuous w.r.t. `b`.
pub fn kl_divergence(a: &[f64], b: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        if x > 0.0 {
            if y <= 0.0 {
                return f64::INFINITY;
            }
            d += x * (x / y).ln();
        }
    }
    d.max(0.0)
}

/// `D(V||Q|P) = sum_x P(x) D(V(.|x)||Q(.|x))`.
pub fn conditional_divergence(v: &CondDist, q: &CondDist, p: &FinDist) -> Result<f64> {
    if !v.same_shape(q) || p.len() != v.n_in() {
        return Err(Error::DimensionMismatch("conditional divergence operands disagree in shape".into()));
    }
    let mut d = 0.0;
    for x in 0..v.n_in() {
        if p[x] == 0.0 {
            continue;
        }
        let k = kl_divergence(v.row(x), q.row(x));
        if k.is_infinite() {
            return Ok(f64::INFINITY);
        }
        d += p[x] * k;
    }
    Ok(d)
}
