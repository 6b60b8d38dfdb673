//! Two-output channels `P(y, z | x)`, stored factored as `P(z|x) P(y|x,z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Dmc;
use crate::prob::{CondDist, FinDist, SIMPLEX_TOL};

/// `P_{YZ|X}` factored as `P_{Z|X} x P_{Y|XZ}`.
///
/// Rows of `P_{Y|XZ}` for pairs with `P(z|x) = 0` carry no information; they
/// are kept (filled uniformly when absent) but flagged unconstrained and
/// ignored by every membership sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelRepr", into = "ChannelRepr")]
pub struct TwoOutputChannel {
    nx: usize,
    ny: usize,
    nz: usize,
    pzx: CondDist,
    /// Row `x * nz + z` is `P(.|x, z)`.
    pyxz: CondDist,
}

/// Serialized layout: `pyxz[x][z]` is a row over `Y`, or `null` when unconstrained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_alphabet: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_alphabet: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_alphabet: Option<Vec<String>>,
    pub pzx: Vec<Vec<f64>>,
    pub pyxz: Vec<Vec<Option<Vec<f64>>>>,
}

impl TryFrom<ChannelRepr> for TwoOutputChannel {
    type Error = Error;
    fn try_from(r: ChannelRepr) -> Result<Self> {
        Self::from_repr(r, false)
    }
}

impl From<TwoOutputChannel> for ChannelRepr {
    fn from(c: TwoOutputChannel) -> Self {
        let pyxz = (0..c.nx)
            .map(|x| (0..c.nz).map(|z| c.is_constrained(x, z).then(|| c.py(x, z).to_vec())).collect())
            .collect();
        ChannelRepr {
            x_alphabet: None,
            y_alphabet: None,
            z_alphabet: None,
            pzx: c.pzx.rows().map(|r| r.to_vec()).collect(),
            pyxz,
        }
    }
}

impl TwoOutputChannel {
    pub fn new(pzx: CondDist, pyxz: CondDist) -> Result<Self> {
        let (nx, nz, ny) = (pzx.n_in(), pzx.n_out(), pyxz.n_out());
        if pyxz.n_in() != nx * nz {
            return Err(Error::DimensionMismatch(format!(
                "P(y|x,z) has {} rows, expected |X||Z| = {}",
                pyxz.n_in(),
                nx * nz
            )));
        }
        Ok(Self { nx, ny, nz, pzx, pyxz })
    }

    /// Build from the serialized layout; `renormalize` rescales rows instead of rejecting them.
    pub fn from_repr(r: ChannelRepr, renormalize: bool) -> Result<Self> {
        let build = |rows: Vec<Vec<f64>>| if renormalize { CondDist::renormalized(rows) } else { CondDist::new(rows) };
        let pzx = build(r.pzx).map_err(|e| prefix(e, "pzx"))?;
        let (nx, nz) = (pzx.n_in(), pzx.n_out());
        if r.pyxz.len() != nx || r.pyxz.iter().any(|v| v.len() != nz) {
            return Err(Error::DimensionMismatch(format!("pyxz must be indexed [x][z] with shape {nx}x{nz}")));
        }
        let ny = r
            .pyxz
            .iter()
            .flatten()
            .flatten()
            .map(|row| row.len())
            .next()
            .or(r.y_alphabet.as_ref().map(|a| a.len()))
            .ok_or_else(|| Error::DimensionMismatch("cannot infer |Y|: every pyxz row is null".into()))?;
        let mut rows = Vec::with_capacity(nx * nz);
        for (x, per_z) in r.pyxz.into_iter().enumerate() {
            for (z, row) in per_z.into_iter().enumerate() {
                match row {
                    Some(row) => {
                        if row.len() != ny {
                            return Err(Error::DimensionMismatch(format!("pyxz[{x}][{z}] has {} entries, expected {ny}", row.len())));
                        }
                        rows.push(row);
                    }
                    None if pzx.get(x, z) > 0.0 => {
                        return Err(Error::InvalidDistribution {
                            row: Some(x * nz + z),
                            reason: format!("pyxz[{x}][{z}] is null but P(z={z}|x={x}) > 0"),
                        })
                    }
                    None => rows.push(vec![1.0 / ny as f64; ny]),
                }
            }
        }
        let pyxz = build(rows).map_err(|e| prefix(e, "pyxz"))?;
        for (name, alpha, n) in [("x", &r.x_alphabet, nx), ("y", &r.y_alphabet, ny), ("z", &r.z_alphabet, nz)] {
            if let Some(a) = alpha {
                if a.len() != n {
                    return Err(Error::DimensionMismatch(format!("{name}_alphabet has {} symbols, data has {n}", a.len())));
                }
            }
        }
        Self::new(pzx, pyxz)
    }

    /// `Z = Y`: the second output is a copy of the first.
    pub fn copy(w: &Dmc) -> Self {
        let (nx, ny) = (w.nx(), w.ny());
        let mut rows = Vec::with_capacity(nx * ny);
        for _ in 0..nx {
            for z in 0..ny {
                rows.push((0..ny).map(|y| if y == z { 1.0 } else { 0.0 }).collect());
            }
        }
        Self::new(w.cond().clone(), CondDist::new(rows).expect("indicator rows")).expect("shapes agree")
    }

    /// `P(y,z|x) = W(y|x) K(z|x,y)` with `K` indexed by row `x * |Y| + y`.
    pub fn from_z_kernel(w: &Dmc, k: &CondDist) -> Result<Self> {
        let (nx, ny) = (w.nx(), w.ny());
        if k.n_in() != nx * ny {
            return Err(Error::DimensionMismatch("kernel rows must be indexed by (x, y)".into()));
        }
        let nz = k.n_out();
        let mut j = vec![0.0; nx * ny * nz];
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    j[(x * ny + y) * nz + z] = w.get(x, y) * k.get(x * ny + y, z);
                }
            }
        }
        Self::from_joint_kernel(nx, ny, nz, &j)
    }

    /// Factor a kernel `j[(x * |Y| + y) * |Z| + z] = P(y, z | x)`.
    pub fn from_joint_kernel(nx: usize, ny: usize, nz: usize, j: &[f64]) -> Result<Self> {
        if j.len() != nx * ny * nz {
            return Err(Error::DimensionMismatch("kernel length is not |X||Y||Z|".into()));
        }
        let mut pzx = vec![vec![0.0; nz]; nx];
        for x in 0..nx {
            for y in 0..ny {
                for z in 0..nz {
                    pzx[x][z] += j[(x * ny + y) * nz + z].max(0.0);
                }
            }
            let s: f64 = pzx[x].iter().sum();
            if (s - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidDistribution { row: Some(x), reason: format!("P(.,.|x={x}) sums to {s}") });
            }
            pzx[x].iter_mut().for_each(|v| *v /= s);
        }
        let mut rows = Vec::with_capacity(nx * nz);
        for x in 0..nx {
            for z in 0..nz {
                let m: f64 = (0..ny).map(|y| j[(x * ny + y) * nz + z].max(0.0)).sum();
                if m > 0.0 {
                    rows.push((0..ny).map(|y| j[(x * ny + y) * nz + z].max(0.0) / m).collect());
                } else {
                    pzx[x][z] = 0.0;
                    rows.push(vec![1.0 / ny as f64; ny]);
                }
            }
        }
        Self::new(CondDist::renormalized(pzx)?, CondDist::new(rows)?)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn pzx(&self) -> &CondDist {
        &self.pzx
    }

    pub fn pyxz(&self) -> &CondDist {
        &self.pyxz
    }

    /// `P(.|x, z)` over `Y`.
    pub fn py(&self, x: usize, z: usize) -> &[f64] {
        self.pyxz.row(x * self.nz + z)
    }

    pub fn is_constrained(&self, x: usize, z: usize) -> bool {
        self.pzx.get(x, z) > 0.0
    }

    /// `P(y, z | x)`.
    pub fn kernel(&self, x: usize, y: usize, z: usize) -> f64 {
        let a = self.pzx.get(x, z);
        if a > 0.0 {
            a * self.pyxz.get(x * self.nz + z, y)
        } else {
            0.0
        }
    }

    /// Flat kernel indexed `(x * |Y| + y) * |Z| + z`.
    pub fn joint_kernel(&self) -> Vec<f64> {
        let mut j = vec![0.0; self.nx * self.ny * self.nz];
        for x in 0..self.nx {
            for y in 0..self.ny {
                for z in 0..self.nz {
                    j[(x * self.ny + y) * self.nz + z] = self.kernel(x, y, z);
                }
            }
        }
        j
    }

    /// `P_{Y|X}(y|x) = sum_z P(z|x) P(y|x,z)`.
    pub fn marginal_y(&self) -> CondDist {
        let mut data = vec![0.0; self.nx * self.ny];
        for x in 0..self.nx {
            for z in 0..self.nz {
                for y in 0..self.ny {
                    data[x * self.ny + y] += self.kernel(x, y, z);
                }
            }
        }
        CondDist::from_flat_unchecked(self.nx, self.ny, data)
    }

    /// Fails with the first offending row when `P_{Y|X}` differs from `w` by more than `tol`.
    pub fn check_marginal(&self, w: &Dmc, tol: f64) -> Result<()> {
        if w.nx() != self.nx || w.ny() != self.ny {
            return Err(Error::DimensionMismatch(format!(
                "channel is {}x{}, candidate has |X|={} |Y|={}",
                w.nx(),
                w.ny(),
                self.nx,
                self.ny
            )));
        }
        let m = self.marginal_y();
        for x in 0..self.nx {
            for y in 0..self.ny {
                let d = (m.get(x, y) - w.get(x, y)).abs();
                if d > tol {
                    return Err(Error::MarginalMismatch(format!(
                        "row x={x}: candidate P(y={y}|x) = {} but W(y|x) = {} (difference {d:.3e})",
                        m.get(x, y),
                        w.get(x, y)
                    )));
                }
            }
        }
        Ok(())
    }

    /// `P_{XZ}(x, z)` as a dense `|X| x |Z|` matrix.
    pub fn pxz(&self, px: &FinDist) -> Vec<Vec<f64>> {
        (0..self.nx).map(|x| (0..self.nz).map(|z| px[x] * self.pzx.get(x, z)).collect()).collect()
    }

    /// Append `extra` output symbols that are never produced.
    pub fn pad_z(&self, extra: usize) -> Self {
        let nz = self.nz + extra;
        let pzx = self.pzx.rows().map(|r| r.iter().copied().chain(std::iter::repeat_n(0.0, extra)).collect()).collect();
        let mut rows = Vec::with_capacity(self.nx * nz);
        for x in 0..self.nx {
            for z in 0..nz {
                rows.push(if z < self.nz { self.py(x, z).to_vec() } else { vec![1.0 / self.ny as f64; self.ny] });
            }
        }
        Self::new(CondDist::new(pzx).unwrap(), CondDist::new(rows).unwrap()).unwrap()
    }

    /// Mix `P(z|x,y)` with the uniform distribution on `Z` using weight `eps`.
    pub fn smoothed(&self, eps: f64) -> Self {
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        let w = self.marginal_y();
        let mut j = vec![0.0; nx * ny * nz];
        for x in 0..nx {
            for y in 0..ny {
                let wy = w.get(x, y);
                for z in 0..nz {
                    let kz = if wy > 0.0 { self.kernel(x, y, z) / wy } else { 1.0 / nz as f64 };
                    j[(x * ny + y) * nz + z] = wy * ((1.0 - eps) * kz + eps / nz as f64);
                }
            }
        }
        Self::from_joint_kernel(nx, ny, nz, &j).expect("smoothing preserves stochasticity")
    }

    /// The largest entry-wise difference between the two kernels `P(y,z|x)`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if (self.nx, self.ny, self.nz) != (other.nx, other.ny, other.nz) {
            return f64::INFINITY;
        }
        self.joint_kernel().iter().zip(other.joint_kernel()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

fn prefix(e: Error, what: &str) -> Error {
    match e {
        Error::InvalidDistribution { row, reason } => Error::InvalidDistribution { row, reason: format!("{what}: {reason}") },
        Error::DimensionMismatch(m) => Error::DimensionMismatch(format!("{what}: {m}")),
        e => e,
    }
}
