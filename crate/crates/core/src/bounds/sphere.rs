//! The classical sphere-packing exponent `E_sp(R, P, W)`.

use crate::error::{Error, Result};
use crate::prob::{channel_mi, conditional_divergence, CondDist, FinDist};

/// `min D(V || W | P)` over `V` with `I(P, V) <= R`, with the minimizer.
///
/// Solved through the Lagrangian: for `t` in `[0, 1]` the alternating
/// minimization `V(.|x) ∝ W(.|x)^(1-t) r^t`, `r = P V` reaches the minimizer of
/// `D(V||W|P) + t/(1-t) I(P, V)`, and `t` is bisected until the rate
/// constraint is tight.
pub fn classical_sp_with_witness(w: &CondDist, p: &FinDist, rate: f64) -> Result<(f64, CondDist)> {
    if rate < 0.0 || !rate.is_finite() {
        return Err(Error::InvalidArgument(format!("rate must be a finite nonnegative number, got {rate}")));
    }
    if p.len() != w.n_in() {
        return Err(Error::DimensionMismatch("P and W disagree on |X|".into()));
    }
    if channel_mi(p, w) <= rate {
        return Ok((0.0, w.clone()));
    }
    let mut lo = 0.0; // infeasible side (I > R)
    let mut hi = 1.0;
    let mut best: Option<(f64, CondDist)> = zero_rate(w, p).map(|v| (conditional_divergence(&v, w, p).unwrap(), v));
    let mut warm: Option<Vec<f64>> = None;
    for _ in 0..60 {
        let t = 0.5 * (lo + hi);
        let v = tilted(w, p, t, &mut warm);
        if channel_mi(p, &v) <= rate {
            let d = conditional_divergence(&v, w, p)?;
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, v));
            }
            hi = t;
        } else {
            lo = t;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(best.unwrap_or((f64::INFINITY, w.clone())))
}

pub fn classical_sp(w: &CondDist, p: &FinDist, rate: f64) -> Result<f64> {
    classical_sp_with_witness(w, p, rate).map(|r| r.0)
}

/// Rate-zero minimizer: every row equal to `r ∝ prod_x W(.|x)^P(x)`.
fn zero_rate(w: &CondDist, p: &FinDist) -> Option<CondDist> {
    let ny = w.n_out();
    let mut r = vec![0.0; ny];
    for (y, ry) in r.iter_mut().enumerate() {
        let mut l = 0.0;
        for x in p.support() {
            let v = w.get(x, y);
            if v <= 0.0 {
                l = f64::NEG_INFINITY;
                break;
            }
            l += p[x] * v.ln();
        }
        *ry = l.exp();
    }
    let s: f64 = r.iter().sum();
    if s <= 0.0 {
        return None;
    }
    r.iter_mut().for_each(|v| *v /= s);
    Some(CondDist::from_flat_unchecked(w.n_in(), ny, (0..w.n_in()).flat_map(|_| r.clone()).collect()))
}

fn tilted(w: &CondDist, p: &FinDist, t: f64, warm: &mut Option<Vec<f64>>) -> CondDist {
    let (nx, ny) = (w.n_in(), w.n_out());
    let mut r = warm.clone().unwrap_or_else(|| w.output_dist(p).probs().to_vec());
    let mut v = vec![0.0; nx * ny];
    for _ in 0..20_000 {
        for x in 0..nx {
            let mut s = 0.0;
            for y in 0..ny {
                let wv = w.get(x, y);
                let val = if wv > 0.0 && r[y] > 0.0 { (wv.ln() * (1.0 - t) + r[y].ln() * t).exp() } else { 0.0 };
                v[x * ny + y] = val;
                s += val;
            }
            if s > 0.0 {
                v[x * ny..(x + 1) * ny].iter_mut().for_each(|a| *a /= s);
            } else {
                v[x * ny..(x + 1) * ny].copy_from_slice(w.row(x));
            }
        }
        let mut nr = vec![0.0; ny];
        for x in 0..nx {
            for y in 0..ny {
                nr[y] += p[x] * v[x * ny + y];
            }
        }
        let change: f64 = nr.iter().zip(&r).map(|(a, b)| (a - b).abs()).sum();
        r = nr;
        if change < 1e-15 {
            break;
        }
    }
    *warm = Some(r);
    CondDist::from_flat_unchecked(nx, ny, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bin_kl(a: f64, b: f64) -> f64 {
        let t = |x: f64, y: f64| if x > 0.0 { x * (x / y).ln() } else { 0.0 };
        t(a, b) + t(1.0 - a, 1.0 - b)
    }

    fn bin_h(a: f64) -> f64 {
        -(if a > 0.0 { a * a.ln() } else { 0.0 }) - (if a < 1.0 { (1.0 - a) * (1.0 - a).ln() } else { 0.0 })
    }

    #[test]
    fn bsc_matches_closed_form() {
        // For a BSC with uniform input, E_sp(R) = D(a || 0.1) with h(a) = ln 2 - R.
        let w = CondDist::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let p = FinDist::uniform(2);
        let r = 0.2 * 2f64.ln();
        let (mut lo, mut hi) = (0.1, 0.5);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if bin_h(m) < 2f64.ln() - r {
                lo = m;
            } else {
                hi = m;
            }
        }
        let want = bin_kl(lo, 0.1);
        assert_abs_diff_eq!(classical_sp(&w, &p, r).unwrap(), want, epsilon = 1e-7);
    }

    #[test]
    fn above_mutual_information_is_zero() {
        let w = CondDist::new(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        assert_eq!(classical_sp(&w, &FinDist::uniform(2), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn zero_rate_closed_form() {
        let w = CondDist::new(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]]).unwrap();
        let p = FinDist::new(vec![0.3, 0.7]).unwrap();
        let s: f64 = (0..3).map(|y| w.get(0, y).powf(0.3) * w.get(1, y).powf(0.7)).sum();
        assert_abs_diff_eq!(classical_sp(&w, &p, 0.0).unwrap(), -s.ln(), epsilon = 1e-9);
    }
}
