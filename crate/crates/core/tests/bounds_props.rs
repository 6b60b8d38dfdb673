mod common;

use mismatch_core::bounds::{certified_capacity_bound, exponent_bound_with_starts, Variant};
use mismatch_core::channel::TwoOutputChannel;
use mismatch_core::fixtures::{example_candidate, example_dmc, example_metric};
use mismatch_core::metric::Metric;
use mismatch_core::optim::{rng, SearchBudget};
use mismatch_core::prob::channel_mi;
use mismatch_core::Exec;
use proptest::prelude::*;

#[test]
fn padding_z_leaves_the_example_bound_unchanged() {
    let (w, q, c) = (example_dmc(), example_metric(), example_candidate());
    for v in [Variant::Sym, Variant::TildeSym] {
        let base = certified_capacity_bound(&w, &q, &c, v, None).unwrap();
        for extra in 1..4 {
            let padded = certified_capacity_bound(&w, &q, &c.pad_z(extra), v, None).unwrap();
            assert_eq!(padded.value, base.value, "{} with {extra} extra symbols", v.name());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn padding_z_never_increases_the_bound(seed in any::<u64>(), nx in 2usize..4, ny in 2usize..4, extra in 1usize..3) {
        let mut g = rng(seed, 0);
        let w = common::dmc(&mut g, nx, ny);
        let q = Metric::new((0..nx).map(|x| w.cond().row(x).iter().map(|v| v.ln()).collect()).collect()).unwrap();
        let c = TwoOutputChannel::copy(&w);
        for v in [Variant::Psd, Variant::Tilde, Variant::Sym] {
            let base = certified_capacity_bound(&w, &q, &c, v, None).unwrap();
            let padded = certified_capacity_bound(&w, &q, &c.pad_z(extra), v, None).unwrap();
            prop_assert_eq!(padded.value, base.value);
            let rv = padded.revalidate(&w, &q).unwrap();
            prop_assert!(rv.ok, "{}", rv.detail);
        }
    }

    #[test]
    fn exponent_is_nonincreasing_in_rate(seed in any::<u64>(), ny in 2usize..4, tilde in any::<bool>()) {
        let mut g = rng(seed, 1);
        let w = common::dmc(&mut g, 2, ny);
        let q = common::metric(&mut g, 2, ny);
        let p = common::dist(&mut g, 2);
        let rate = 0.5 * channel_mi(&p, w.cond());
        let variant = if tilde { Variant::Tilde } else { Variant::Sym };
        let budget = SearchBudget::new(3, 120, seed);
        let low = exponent_bound_with_starts(&w, &q, &p, rate, variant, ny, budget, Exec::Sequential, &[]).unwrap();
        let starts: Vec<TwoOutputChannel> = low.witness.iter().cloned().collect();
        let high = exponent_bound_with_starts(&w, &q, &p, rate + 0.1, variant, ny, budget, Exec::Sequential, &starts).unwrap();
        prop_assert!(high.value <= low.value + 1e-12, "E({}) = {} > E({}) = {}", rate + 0.1, high.value, rate, low.value);
        for r in [&low, &high] {
            if r.value.is_finite() {
                let rv = r.revalidate(&w, &q).unwrap();
                prop_assert!(rv.ok, "{}", rv.detail);
            }
        }
    }
}
