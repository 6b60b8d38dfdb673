mod common;

use mismatch_core::membership::{build_dq, member_psd, member_sym, member_tilde, member_wq, SymVariant};
use mismatch_core::optim::{rng, simplex_grid, SearchBudget};
use mismatch_core::Exec;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn inclusion_chain(seed in any::<u64>(), nx in 2usize..4, ny in 2usize..4, nz in 1usize..4, blind in any::<bool>()) {
        let mut g = rng(seed, 0);
        let ch = if blind { common::blind(&mut g, nx, ny, nz) } else { common::two_output(&mut g, nx, ny, nz) };
        let q = common::metric(&mut g, nx, ny);
        let px = common::dist(&mut g, nx);
        let budget = SearchBudget::new(3, 80, seed);

        let psd = member_psd(&ch, &q).unwrap();
        let tilde = member_tilde(&ch, &q, Some(&px)).unwrap();
        if psd.is_in() {
            prop_assert!(tilde.is_in(), "psd IN, tilde {:?}", tilde.status);
        }
        let tsym = member_sym(&ch, &q, &px, SymVariant::TildeSym).unwrap();
        let sym = member_sym(&ch, &q, &px, SymVariant::Sym).unwrap();
        if tsym.is_in() {
            prop_assert!(sym.is_in(), "tilde_sym IN, sym {:?}", sym.status);
        }
        if tilde.is_in() || sym.is_in() {
            let wq = member_wq(&ch, &q, &px, budget, Exec::Sequential).unwrap();
            prop_assert!(!wq.is_out(), "W_q counterexample inside a smaller set");
        }
    }

    #[test]
    fn dq_is_symmetric_with_zero_diagonal(seed in any::<u64>(), nx in 1usize..5, ny in 1usize..4, nz in 1usize..4) {
        let mut g = rng(seed, 1);
        let ch = common::two_output(&mut g, nx, ny, nz);
        let d = build_dq(&ch, &common::metric(&mut g, nx, ny));
        for z in 0..nz {
            for i in 0..nx {
                prop_assert_eq!(d.get(z, i, i), 0.0);
                for j in 0..nx {
                    prop_assert_eq!(d.get(z, i, j), d.get(z, j, i));
                }
            }
        }
    }

    #[test]
    fn psd_means_all_entries_vanish(seed in any::<u64>(), nx in 2usize..4, ny in 2usize..4, nz in 1usize..3, blind in any::<bool>()) {
        let mut g = rng(seed, 2);
        let ch = if blind { common::blind(&mut g, nx, ny, nz) } else { common::two_output(&mut g, nx, ny, nz) };
        let q = common::metric(&mut g, nx, ny);
        let d = build_dq(&ch, &q);
        let biggest = (0..nz)
            .filter(|&z| (0..nx).filter(|&x| ch.pzx().get(x, z) > 0.0).count() > 1)
            .flat_map(|z| {
                let on: Vec<usize> = (0..nx).filter(|&x| ch.pzx().get(x, z) > 0.0).collect();
                let d = &d;
                on.clone().into_iter().flat_map(move |i| on.clone().into_iter().map(move |j| d.get(z, i, j).abs()))
            })
            .fold(0.0, f64::max);
        let v = member_psd(&ch, &q).unwrap();
        prop_assert_eq!(v.is_in(), biggest <= 1e-9, "max entry {}", biggest);
    }

    #[test]
    fn tilde_matches_a_simplex_grid(seed in any::<u64>(), ny in 2usize..4, nz in 1usize..3) {
        // full-support 3-input instances, so every pair is supported
        let mut g = rng(seed, 3);
        let nx = 3;
        let block = ny * nz;
        let mut j = Vec::new();
        for _ in 0..nx {
            j.extend(common::dist(&mut g, block).probs().iter().copied());
        }
        let ch = mismatch_core::channel::TwoOutputChannel::from_joint_kernel(nx, ny, nz, &j).unwrap();
        let mut q = common::metric(&mut g, nx, ny);
        if g.random_bool(0.3) {
            q = mismatch_core::metric::Metric::constant(nx, ny, 0.5);
        }
        let d = build_dq(&ch, &q);
        let grid = simplex_grid(nx, 140);
        prop_assert!(grid.len() >= 10_000);
        let min_form = (0..nz)
            .map(|z| {
                grid.iter()
                    .map(|u| (0..nx).flat_map(|a| (0..nx).map(move |b| (a, b))).map(|(a, b)| u[a] * u[b] * d.get(z, a, b)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min);
        let v = member_tilde(&ch, &q, None).unwrap();
        prop_assert_eq!(v.is_in(), min_form >= -1e-12, "grid minimum {}", min_form);
    }
}
