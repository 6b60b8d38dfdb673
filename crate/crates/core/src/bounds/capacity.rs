//! Blahut-Arimoto channel capacity.

use serde::{Deserialize, Serialize};

use crate::prob::{kl_divergence, CondDist, FinDist};

pub const BA_TOL: f64 = 1e-9;
const BA_MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Capacity {
    /// `max_x D(C(.|x) || r)`, which upper-bounds the capacity for any output law `r`.
    pub upper: f64,
    /// `I(P, C)` at the returned input distribution.
    pub lower: f64,
    pub px: FinDist,
    pub iterations: usize,
}

impl Capacity {
    pub fn gap(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Alternating maximization of `I(X; Z)` over `P_X`, stopped once the
/// standard max-row-divergence gap is at most `tol` nats.
pub fn blahut_arimoto(c: &CondDist, tol: f64) -> Capacity {
    let (nx, nz) = (c.n_in(), c.n_out());
    let mut p = vec![1.0 / nx as f64; nx];
    let mut d = vec![0.0; nx];
    let mut r = vec![0.0; nz];
    let mut it = 0;
    loop {
        r.iter_mut().for_each(|v| *v = 0.0);
        for (x, row) in c.rows().enumerate() {
            for (z, &w) in row.iter().enumerate() {
                r[z] += p[x] * w;
            }
        }
        for (x, row) in c.rows().enumerate() {
            d[x] = kl_divergence(row, &r);
        }
        let lower: f64 = p.iter().zip(&d).map(|(a, b)| a * b).sum();
        let upper = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if upper - lower <= tol || it >= BA_MAX_ITER {
            let px = FinDist::renormalized(p).expect("positive weights");
            return Capacity { upper, lower: lower.max(0.0), px, iterations: it };
        }
        let dmax = upper;
        let mut s = 0.0;
        for x in 0..nx {
            p[x] *= (d[x] - dmax).exp();
            s += p[x];
        }
        p.iter_mut().for_each(|v| *v /= s);
        it += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{channel_mi, nats_to_bits};
    use approx::assert_abs_diff_eq;

    #[test]
    fn bsc_capacity() {
        let e: f64 = 0.11;
        let c = CondDist::new(vec![vec![1.0 - e, e], vec![e, 1.0 - e]]).unwrap();
        let h = -(e * e.ln() + (1.0 - e) * (1.0 - e).ln());
        let cap = blahut_arimoto(&c, 1e-12);
        assert_abs_diff_eq!(cap.upper, 2f64.ln() - h, epsilon = 1e-11);
        assert!(cap.gap() <= 1e-12);
    }

    #[test]
    fn example_z_channel() {
        let c = CondDist::new(vec![vec![0.2, 0.8, 0.0], vec![0.1, 0.3, 0.6]]).unwrap();
        let cap = blahut_arimoto(&c, BA_TOL);
        assert!((nats_to_bits(cap.upper) - 0.4081).abs() < 5e-4, "{}", nats_to_bits(cap.upper));
        assert!((cap.px[0] - 0.59).abs() < 0.01);
        // an independent grid over P_X
        let best = (0..=100_000)
            .map(|k| {
                let a = k as f64 / 100_000.0;
                channel_mi(&FinDist::new(vec![a, 1.0 - a]).unwrap(), &c)
            })
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(cap.upper, best, epsilon = 1e-8);
    }
}
