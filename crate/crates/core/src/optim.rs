//! Small numerical helpers shared by the optimizers: simplex projection,
//! seeded random streams, Dirichlet draws and simplex grids.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

/// Optimizer effort and seed, recorded in every verdict or report it produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBudget {
    pub restarts: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        Self { restarts: 64, iterations: 2000, seed: 0 }
    }
}

impl SearchBudget {
    pub fn new(restarts: usize, iterations: usize, seed: u64) -> Self {
        Self { restarts, iterations, seed }
    }
}

/// Independent stream `stream` derived from `seed`; used so that parallel tasks
/// draw the same numbers regardless of scheduling.
pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &uk) in u.iter().enumerate() {
        css += uk;
        let t = (css - 1.0) / (k as f64 + 1.0);
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Projection onto the face of the simplex where `allowed` is true.
pub fn project_simplex_masked(v: &mut [f64], allowed: &[bool]) {
    let mut sub: Vec<f64> = v.iter().zip(allowed).filter(|(_, a)| **a).map(|(x, _)| *x).collect();
    if sub.is_empty() {
        return;
    }
    project_simplex(&mut sub);
    let mut it = sub.into_iter();
    for (x, &a) in v.iter_mut().zip(allowed) {
        *x = if a { it.next().unwrap() } else { 0.0 };
    }
}

pub fn dirichlet<R: rand::Rng>(rng: &mut R, k: usize, alpha: f64) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).expect("positive shape");
    let mut v: Vec<f64> = (0..k).map(|_| g.sample(rng)).collect();
    let s: f64 = v.iter().sum();
    if s <= 0.0 {
        let i = rng.random_range(0..k);
        v.iter_mut().enumerate().for_each(|(j, x)| *x = if j == i { 1.0 } else { 0.0 });
    } else {
        v.iter_mut().for_each(|x| *x /= s);
    }
    v
}

/// All vectors of `parts` nonnegative integers summing to `total`, in lexicographic order.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; parts];
    fn rec(i: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i + 1 == cur.len() {
            cur[i] = left;
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[i] = k;
            rec(i + 1, left - k, cur, out);
        }
    }
    if parts > 0 {
        rec(0, total, &mut cur, &mut out);
    }
    out
}

/// Regular simplex mesh with spacing `1/steps`.
pub fn simplex_grid(k: usize, steps: usize) -> Vec<Vec<f64>> {
    compositions(steps, k).into_iter().map(|c| c.into_iter().map(|v| v as f64 / steps as f64).collect()).collect()
}

/// Minimize a unimodal function on `[lo, hi]` by golden-section search.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > tol {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    let mut best = (lo, f(lo));
    for t in [a, b, hi] {
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}
