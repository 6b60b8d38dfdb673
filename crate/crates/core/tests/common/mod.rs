#![allow(dead_code)]

use mismatch_core::channel::TwoOutputChannel;
use mismatch_core::metric::{Dmc, Metric};
use mismatch_core::optim::dirichlet;
use mismatch_core::prob::{CondDist, FinDist};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn dist<R: Rng>(g: &mut R, k: usize) -> FinDist {
    FinDist::renormalized(dirichlet(g, k, 1.0).into_iter().map(|v| v + 1e-3).collect()).unwrap()
}

pub fn cond<R: Rng>(g: &mut R, rows: usize, k: usize) -> CondDist {
    CondDist::new((0..rows).map(|_| dist(g, k).probs().to_vec()).collect()).unwrap()
}

pub fn dmc<R: Rng>(g: &mut R, nx: usize, ny: usize) -> Dmc {
    Dmc::new(cond(g, nx, ny))
}

pub fn metric<R: Rng>(g: &mut R, nx: usize, ny: usize) -> Metric {
    Metric::new((0..nx).map(|_| (0..ny).map(|_| g.random_range(-2.0..1.0)).collect()).collect()).unwrap()
}

/// A kernel `P(y, z | x)`, sometimes with a `z` the input never produces.
pub fn two_output(g: &mut ChaCha8Rng, nx: usize, ny: usize, nz: usize) -> TwoOutputChannel {
    let block = ny * nz;
    let mut j = Vec::with_capacity(nx * block);
    for _ in 0..nx {
        let mut d = dirichlet(g, block, 1.0);
        if nz > 1 && g.random_bool(0.2) {
            let z0 = g.random_range(0..nz);
            (0..ny).for_each(|y| d[y * nz + z0] = 0.0);
            let t: f64 = d.iter().sum();
            d.iter_mut().for_each(|v| *v /= t);
        }
        j.extend(d);
    }
    TwoOutputChannel::from_joint_kernel(nx, ny, nz, &j).unwrap()
}

/// A two-output channel in which `Y` does not depend on `X` given `Z`.
pub fn blind(g: &mut ChaCha8Rng, nx: usize, ny: usize, nz: usize) -> TwoOutputChannel {
    let pz = cond(g, nx, nz);
    let py = cond(g, nz, ny);
    let mut j = vec![0.0; nx * ny * nz];
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                j[(x * ny + y) * nz + z] = pz.get(x, z) * py.get(z, y);
            }
        }
    }
    TwoOutputChannel::from_joint_kernel(nx, ny, nz, &j).unwrap()
}
