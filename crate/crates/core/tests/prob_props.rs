mod common;

use mismatch_core::optim::rng;
use mismatch_core::prob::{
    compose, conditional_divergence, entropy_of, mutual_information, Axis, CondDist, JointDist,
};
use proptest::prelude::*;

fn joint(seed: u64, shape: &[usize]) -> JointDist {
    let axes = [Axis::X, Axis::Y, Axis::Z][..shape.len()].to_vec();
    let total: usize = shape.iter().product();
    let p = common::dist(&mut rng(seed, 0), total);
    JointDist::new(axes, shape.to_vec(), p.probs().to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn marginals_sum_to_one(seed in any::<u64>(), a in 1usize..5, b in 1usize..5, c in 1usize..4) {
        let j = joint(seed, &[a, b, c]);
        for drop in [Axis::X, Axis::Y, Axis::Z] {
            let m = j.marginalize_out(drop).unwrap();
            prop_assert!((m.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn mutual_information_is_an_entropy_difference(seed in any::<u64>(), a in 1usize..6, b in 1usize..6) {
        let j = joint(seed, &[a, b]);
        let hx = entropy_of(j.marginal_dist(Axis::X).unwrap().probs());
        let hy = entropy_of(j.marginal_dist(Axis::Y).unwrap().probs());
        let i = mutual_information(&j).unwrap();
        prop_assert!((i - (hx + hy - entropy_of(j.probs()))).abs() <= 1e-9);
    }

    #[test]
    fn conditional_divergence_vanishes_only_at_equality(seed in any::<u64>(), a in 1usize..5, b in 2usize..5) {
        let mut g = rng(seed, 1);
        let p = common::dist(&mut g, a);
        let v = common::cond(&mut g, a, b);
        let w = common::cond(&mut g, a, b);
        let d = conditional_divergence(&v, &w, &p).unwrap();
        prop_assert!(d >= 0.0);
        prop_assert!(conditional_divergence(&v, &v, &p).unwrap().abs() <= 1e-9);
        if v.max_abs_diff(&w) > 1e-3 {
            prop_assert!(d > 1e-9);
        }
    }

    #[test]
    fn processing_never_adds_information(seed in any::<u64>(), a in 1usize..5, b in 1usize..5, c in 1usize..5) {
        let mut g = rng(seed, 2);
        let p = common::dist(&mut g, a);
        let c1 = common::cond(&mut g, a, b);
        let c2 = common::cond(&mut g, b, c);
        let direct = mutual_information(&compose(&p, &c1, Axis::X, Axis::Z).unwrap()).unwrap();
        let chained = mutual_information(&compose(&p, &c1.then(&c2).unwrap(), Axis::X, Axis::Z).unwrap()).unwrap();
        prop_assert!(chained <= direct + 1e-9);
    }
}

#[test]
fn unchanged_rows_off_the_support_do_not_count() {
    let p = mismatch_core::prob::FinDist::new(vec![1.0, 0.0]).unwrap();
    let v = CondDist::new(vec![vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
    let w = CondDist::new(vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap();
    assert_eq!(conditional_divergence(&v, &w, &p).unwrap(), 0.0);
}
