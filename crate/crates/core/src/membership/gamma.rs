//! The zero-pattern set `Gamma(q, rho)`.

use super::{Certificate, MembershipVerdict, SetName, Status};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::metric::Metric;

/// Strictness tolerance on the maximum in the zero-pattern condition.
pub const GAMMA_TOL: f64 = 1e-12;

fn score(rho: f64, q: f64) -> Result<f64> {
    match (rho == f64::NEG_INFINITY, q == f64::NEG_INFINITY) {
        (true, true) => Err(Error::Indeterminate("rho(x,z) - q(x,y)".into())),
        (false, true) => Ok(f64::INFINITY),
        (true, false) => Ok(f64::NEG_INFINITY),
        (false, false) => Ok(rho - q),
    }
}

/// `allowed[(x * |Y| + y) * |Z| + z]` is false exactly when
/// `rho(x,z) - q(x,y) < max_x' [rho(x',z) - q(x',y)]`, i.e. the triple must carry no mass.
pub fn gamma_allowed(q: &Metric, rho: &Metric) -> Result<Vec<bool>> {
    if q.nx() != rho.nx() {
        return Err(Error::DimensionMismatch("q and rho must share the input alphabet".into()));
    }
    let (nx, ny, nz) = (q.nx(), q.ny(), rho.ny());
    let mut allowed = vec![true; nx * ny * nz];
    for y in 0..ny {
        for z in 0..nz {
            let s: Vec<f64> = (0..nx).map(|x| score(rho.get(x, z), q.get(x, y))).collect::<Result<_>>()?;
            let best = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for x in 0..nx {
                let strictly_below = if best.is_infinite() || s[x].is_infinite() {
                    s[x] < best
                } else {
                    s[x] < best - GAMMA_TOL
                };
                allowed[(x * ny + y) * nz + z] = !strictly_below;
            }
        }
    }
    Ok(allowed)
}

pub fn member_gamma(ch: &TwoOutputChannel, q: &Metric, rho: &Metric) -> Result<MembershipVerdict> {
    if ch.nx() != q.nx() || ch.ny() != q.ny() || rho.nx() != ch.nx() || rho.ny() != ch.nz() {
        return Err(Error::DimensionMismatch("channel, q (X x Y) and rho (X x Z) disagree".into()));
    }
    let allowed = gamma_allowed(q, rho)?;
    let (ny, nz) = (ch.ny(), ch.nz());
    let mut worst: Option<(usize, usize, usize, f64)> = None;
    for x in 0..ch.nx() {
        for y in 0..ny {
            for z in 0..nz {
                let m = ch.kernel(x, y, z);
                if m > 0.0 && !allowed[(x * ny + y) * nz + z] && worst.is_none_or(|w| m > w.3) {
                    worst = Some((x, y, z, m));
                }
            }
        }
    }
    Ok(match worst {
        None => MembershipVerdict::new(SetName::Gamma, Status::In, 0.0),
        Some((x, y, z, mass)) => MembershipVerdict::new(SetName::Gamma, Status::Out, -mass)
            .with_cert(Certificate::ZeroPattern { x, y, z, mass }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;

    #[test]
    fn copy_channel_with_rho_equal_q() {
        let w = example_dmc();
        let q = example_metric();
        assert!(member_gamma(&TwoOutputChannel::copy(&w), &q, &q).unwrap().is_in());
    }

    #[test]
    fn indeterminate_scores_are_errors() {
        let q = Metric::with_mask(vec![vec![0.0, 0.0], vec![0.0, 0.0]], &[vec![true, false], vec![false, false]]).unwrap();
        assert!(matches!(gamma_allowed(&q, &q), Err(Error::Indeterminate(_))));
    }
}
