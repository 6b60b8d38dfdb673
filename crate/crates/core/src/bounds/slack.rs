//! Closed-form finite-blocklength slack terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slack {
    /// Rate back-off.
    pub eps_a: f64,
    /// Exponent slack.
    pub eps_b: f64,
    /// Gap between the type-restricted and the continuous pairwise minimum.
    pub delta: f64,
}

pub fn finite_n_slack(n: u64, nx: usize, ny: usize, nz: usize, w_min: f64) -> Result<Slack> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    if !(w_min > 0.0 && w_min <= 1.0) {
        return Err(Error::InvalidArgument(format!("w_min must lie in (0, 1], got {w_min}")));
    }
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Error::InvalidArgument("alphabet sizes must be positive".into()));
    }
    let nf = n as f64;
    let (x, y, z) = (nx as f64, ny as f64, nz as f64);
    let ln = f64::ln;
    let delta = 2.0 * x * x * z * y / nf * ln(nf * nf * z / w_min);
    let eps_a = 2.0 * (x * z + 1.0) * ln(nf) / nf + (x * z - 1.0) * ln(nf + 1.0) / nf;
    let eps_b = 2.0 * x * y * z / nf * ln(nf)
        + x * y * z / nf * ln(nf * z / w_min)
        + delta
        + x * z * (x * y + 1.0) / nf * ln(nf + 1.0)
        + 2f64.ln() / nf
        - ln(1.0 - 1.0 / nf) / nf
        + 2.0 / (nf * z);
    Ok(Slack { eps_a, eps_b, delta })
}
