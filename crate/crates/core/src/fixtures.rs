//! A worked binary-input, ternary-output instance used by tests, benches and docs.
//!
//! `W = [[0.97, 0.03, 0], [0.1, 0.1, 0.8]]`, metric rows `(0, 0, 0)` and
//! `(0, ln 0.5, ln 1.36)`, together with a two-output candidate whose `Z|X`
//! marginal is `[[0.2, 0.8, 0], [0.1, 0.3, 0.6]]`.

use crate::channel::TwoOutputChannel;
use crate::metric::{Dmc, Metric};
use crate::prob::CondDist;

pub fn example_dmc() -> Dmc {
    Dmc::new(CondDist::new(vec![vec![0.97, 0.03, 0.0], vec![0.1, 0.1, 0.8]]).unwrap())
}

pub fn example_metric() -> Metric {
    Metric::new(vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.5f64.ln(), 1.36f64.ln()]]).unwrap()
}

pub fn example_candidate() -> TwoOutputChannel {
    let (nx, ny, nz) = (2, 3, 3);
    let mut j = vec![0.0; nx * ny * nz];
    let mut set = |x: usize, y: usize, z: usize, v: f64| j[(x * ny + y) * nz + z] = v;
    set(0, 0, 1, 0.77);
    set(1, 2, 2, 0.6);
    set(0, 0, 0, 0.2);
    set(1, 2, 1, 0.2);
    set(1, 0, 0, 0.1);
    set(1, 1, 1, 0.1);
    set(0, 1, 1, 0.03);
    TwoOutputChannel::from_joint_kernel(nx, ny, nz, &j).unwrap()
}
