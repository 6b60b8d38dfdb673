//! Decoding metrics and the single-user channel.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{Axis, CondDist, JointDist};

/// Additive per-letter metric `q(x, y)` with values in `R ∪ {-inf}`.
///
/// Forbidden pairs are stored as `f64::NEG_INFINITY`, which orders below every
/// real and ties with itself, matching the argmax decoding rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricRepr", into = "MetricRepr")]
pub struct Metric {
    nx: usize,
    ny: usize,
    scores: Vec<f64>,
}

impl Metric {
    pub fn new(scores: Vec<Vec<f64>>) -> Result<Self> {
        let nx = scores.len();
        let ny = scores.first().map_or(0, Vec::len);
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidMetric("empty score table".into()));
        }
        let mut flat = Vec::with_capacity(nx * ny);
        for (x, row) in scores.into_iter().enumerate() {
            if row.len() != ny {
                return Err(Error::InvalidMetric(format!("row {x} has {} entries, expected {ny}", row.len())));
            }
            for (y, v) in row.into_iter().enumerate() {
                if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::InvalidMetric(format!("entry ({x},{y}) = {v} is not allowed")));
                }
                flat.push(v);
            }
        }
        Ok(Self { nx, ny, scores: flat })
    }

    /// Scores plus an explicit `-inf` mask; masked entries ignore their score value.
    pub fn with_mask(scores: Vec<Vec<f64>>, mask: &[Vec<bool>]) -> Result<Self> {
        if mask.len() != scores.len() {
            return Err(Error::InvalidMetric("mask and scores have different row counts".into()));
        }
        let mut scores = scores;
        for (x, (row, mrow)) in scores.iter_mut().zip(mask).enumerate() {
            if mrow.len() != row.len() {
                return Err(Error::InvalidMetric(format!("mask row {x} has wrong length")));
            }
            for (v, &m) in row.iter_mut().zip(mrow) {
                if m {
                    *v = f64::NEG_INFINITY;
                }
            }
        }
        Self::new(scores)
    }

    pub fn constant(nx: usize, ny: usize, c: f64) -> Self {
        Self { nx, ny, scores: vec![c; nx * ny] }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.scores[x * self.ny + y]
    }

    pub fn is_forbidden(&self, x: usize, y: usize) -> bool {
        self.get(x, y) == f64::NEG_INFINITY
    }

    pub fn neg_inf_mask(&self) -> Vec<Vec<bool>> {
        (0..self.nx).map(|x| (0..self.ny).map(|y| self.is_forbidden(x, y)).collect()).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.scores.chunks(self.ny).map(|r| r.to_vec()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.scores.iter().all(|v| v.is_finite())
    }

    /// Metric on a relabelled pair of alphabets, `q'(a, b) = q(a, b) + shift`.
    pub fn shifted(&self, shift: f64) -> Self {
        Self { nx: self.nx, ny: self.ny, scores: self.scores.iter().map(|v| v + shift).collect() }
    }

    pub fn max_abs_diff(&self, other: &Metric) -> f64 {
        self.scores
            .iter()
            .zip(&other.scores)
            .map(|(a, b)| if a == b { 0.0 } else { (a - b).abs() })
            .fold(0.0, f64::max)
    }
}

/// File layout: finite scores plus a mask marking the `-inf` entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_alphabet: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_alphabet: Option<Vec<String>>,
    pub scores: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neg_inf_mask: Option<Vec<Vec<bool>>>,
}

impl TryFrom<MetricRepr> for Metric {
    type Error = Error;
    fn try_from(r: MetricRepr) -> Result<Self> {
        let m = match &r.neg_inf_mask {
            Some(mask) => Metric::with_mask(r.scores, mask)?,
            None => Metric::new(r.scores)?,
        };
        check_alphabet("x_alphabet", &r.x_alphabet, m.nx)?;
        check_alphabet("y_alphabet", &r.y_alphabet, m.ny)?;
        Ok(m)
    }
}

impl From<Metric> for MetricRepr {
    fn from(m: Metric) -> Self {
        let mask = m.neg_inf_mask();
        let any = mask.iter().flatten().any(|b| *b);
        let scores = m.rows().into_iter().map(|r| r.into_iter().map(|v| if v.is_finite() { v } else { 0.0 }).collect()).collect();
        MetricRepr { x_alphabet: None, y_alphabet: None, scores, neg_inf_mask: any.then_some(mask) }
    }
}

pub(crate) fn check_alphabet(name: &str, a: &Option<Vec<String>>, n: usize) -> Result<()> {
    match a {
        Some(a) if a.len() != n => {
            Err(Error::DimensionMismatch(format!("{name} lists {} symbols but the data has {n}", a.len())))
        }
        _ => Ok(()),
    }
}

/// Maximum-likelihood metric `log W(y|x)`.
pub fn ml_metric(w: &Dmc) -> Metric {
    let c = w.cond();
    let scores = c.rows().map(|r| r.iter().map(|v| if *v > 0.0 { v.ln() } else { f64::NEG_INFINITY }).collect()).collect();
    Metric::new(scores).expect("log of a stochastic matrix is a valid metric")
}

/// Discrete memoryless channel `W(y|x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DmcRepr", into = "DmcRepr")]
pub struct Dmc {
    w: CondDist,
}

/// File layout of a channel: `{"x_alphabet", "y_alphabet", "rows"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DmcRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_alphabet: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_alphabet: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

impl DmcRepr {
    pub fn build(self, renormalize: bool) -> Result<Dmc> {
        let w = if renormalize { CondDist::renormalized(self.rows)? } else { CondDist::new(self.rows)? };
        check_alphabet("x_alphabet", &self.x_alphabet, w.n_in())?;
        check_alphabet("y_alphabet", &self.y_alphabet, w.n_out())?;
        Ok(Dmc::new(w))
    }
}

impl TryFrom<DmcRepr> for Dmc {
    type Error = Error;
    fn try_from(r: DmcRepr) -> Result<Self> {
        r.build(false)
    }
}

impl From<Dmc> for DmcRepr {
    fn from(d: Dmc) -> Self {
        DmcRepr { x_alphabet: None, y_alphabet: None, rows: d.w.rows().map(|r| r.to_vec()).collect() }
    }
}

impl Dmc {
    pub fn new(w: CondDist) -> Self {
        Self { w }
    }

    pub fn cond(&self) -> &CondDist {
        &self.w
    }

    pub fn nx(&self) -> usize {
        self.w.n_in()
    }

    pub fn ny(&self) -> usize {
        self.w.n_out()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.w.get(x, y)
    }

    /// Smallest positive transition probability.
    pub fn w_min(&self) -> f64 {
        self.w.as_flat().iter().copied().filter(|v| *v > 0.0).fold(1.0, f64::min)
    }
}

/// `sum p(a,b) q(a,b)` over a two-axis matrix, skipping zero-mass cells.
pub(crate) fn expect_matrix(q: &Metric, p: &[Vec<f64>]) -> f64 {
    let mut s = 0.0;
    for (x, row) in p.iter().enumerate() {
        for (y, &v) in row.iter().enumerate() {
            if v > 0.0 {
                let qv = q.get(x, y);
                if qv == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                s += v * qv;
            }
        }
    }
    s
}

fn check_dims(q: &Metric, j: &JointDist) -> Result<()> {
    if j.shape() != [q.nx(), q.ny()] {
        return Err(Error::DimensionMismatch(format!(
            "metric is {}x{}, joint has shape {:?}",
            q.nx(),
            q.ny(),
            j.shape()
        )));
    }
    Ok(())
}

/// `E q(X, Y)` under a joint with axes `X` and `Y` (other axes are marginalized).
pub fn metric_expectation(q: &Metric, joint: &JointDist) -> Result<f64> {
    expectation_on(q, joint, Axis::X, Axis::Y)
}

/// `E q(A, B)` with `A`, `B` the named axes of `joint`.
pub fn expectation_on(q: &Metric, joint: &JointDist, a: Axis, b: Axis) -> Result<f64> {
    let m = joint.marginal(&[a, b])?;
    check_dims(q, &m)?;
    Ok(expect_matrix(q, &m.as_matrix()?))
}

/// `E q(Xt, Y) - E q(X, Y)`.
pub fn metric_diff(q: &Metric, joint: &JointDist) -> Result<f64> {
    let competing = expectation_on(q, joint, Axis::Xt, Axis::Y)?;
    let true_ = expectation_on(q, joint, Axis::X, Axis::Y)?;
    extended_sub(competing, true_, "metric difference")
}

/// `a - b` on `R ∪ {-inf}`, refusing `-inf - -inf`.
pub(crate) fn extended_sub(a: f64, b: f64, ctx: &str) -> Result<f64> {
    if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY {
        return Err(Error::Indeterminate(ctx.to_string()));
    }
    Ok(a - b)
}

type Evaluator = dyn Fn(&[Vec<f64>]) -> f64 + Send + Sync;

/// Metric depending on `(x, y)` only through their joint empirical distribution.
#[derive(Clone)]
pub struct TypeDependentMetric {
    nx: usize,
    ny: usize,
    evaluator: Arc<Evaluator>,
    convex: bool,
}

impl fmt::Debug for TypeDependentMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TypeDependentMetric")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("convex", &self.convex)
            .finish_non_exhaustive()
    }
}

impl TypeDependentMetric {
    /// `evaluator` receives the joint as a `nx x ny` matrix. `convex` is the user's
    /// declaration that the map is convex in `P(y|x)` for fixed `P(x)`.
    pub fn new<F>(nx: usize, ny: usize, convex: bool, evaluator: F) -> Self
    where
        F: Fn(&[Vec<f64>]) -> f64 + Send + Sync + 'static,
    {
        Self { nx, ny, evaluator: Arc::new(evaluator), convex }
    }

    /// An additive metric viewed as a (linear, hence convex) type-dependent one.
    pub fn additive(q: Metric) -> Self {
        let (nx, ny) = (q.nx(), q.ny());
        Self::new(nx, ny, true, move |p| expect_matrix(&q, p))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn declared_convex(&self) -> bool {
        self.convex
    }

    pub fn eval_matrix(&self, p: &[Vec<f64>]) -> f64 {
        (self.evaluator)(p)
    }

    /// Evaluate on a joint with axes `X`, `Y`.
    pub fn evaluate(&self, joint: &JointDist) -> Result<f64> {
        let m = joint.marginal(&[Axis::X, Axis::Y])?;
        if m.shape() != [self.nx, self.ny] {
            return Err(Error::DimensionMismatch("type-dependent metric shape mismatch".into()));
        }
        Ok(self.eval_matrix(&m.as_matrix()?))
    }
}
