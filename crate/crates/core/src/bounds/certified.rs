//! Capacity bounds certified by a single candidate channel.
//!
//! `max_P min_{channel} I` is at most `min_{channel} max_P I` as soon as the
//! candidate belongs to the set at every input distribution. That holds for the
//! zero-matrix set and the zero-pattern set outright, and for the elementwise
//! family whenever `D_z(i,j) >= 0` on every pair with `P(z|i) P(z|j) > 0`.

use super::{blahut_arimoto, BoundKind, BoundReport, Validity, Variant, BA_TOL};
use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::membership::{
    member_comparison_sets, member_gamma, member_psd, member_sym, member_tilde, member_wq, ComparisonSet,
    MembershipVerdict, Status, SymVariant,
};
use crate::metric::{Dmc, Metric};
use crate::optim::SearchBudget;
use crate::par::Exec;
use crate::prob::{FinDist, SIMPLEX_TOL};

/// The oracle a variant uses, at `px` when the set depends on it.
pub fn variant_membership(
    variant: Variant,
    ch: &TwoOutputChannel,
    q: &Metric,
    px: Option<&FinDist>,
    rho: Option<&Metric>,
) -> Result<MembershipVerdict> {
    let need_px = || px.ok_or_else(|| Error::InvalidArgument(format!("the {} set needs an input distribution", variant.name())));
    match variant {
        Variant::Psd => member_psd(ch, q),
        Variant::Tilde => member_tilde(ch, q, px),
        Variant::Sym => member_sym(ch, q, need_px()?, SymVariant::Sym),
        Variant::TildeSym => member_sym(ch, q, need_px()?, SymVariant::TildeSym),
        Variant::WqHeuristic => member_wq(ch, q, need_px()?, SearchBudget::new(16, 300, 0), Exec::default()),
        Variant::KspF => member_comparison_sets(ch, q, need_px()?, ComparisonSet::MMax),
        Variant::Gamma => {
            let rho = rho.ok_or_else(|| Error::InvalidArgument("the gamma set needs a Z-side metric rho".into()))?;
            member_gamma(ch, q, rho)
        }
        Variant::ClassicalSp => Err(Error::InvalidArgument("classical_sp has no membership set".into())),
    }
}

/// Input-independent membership, followed by the variant's own oracle at the
/// capacity-achieving input. Returns the deciding verdict and that input.
pub(crate) fn certify_witness(
    ch: &TwoOutputChannel,
    q: &Metric,
    variant: Variant,
    rho: Option<&Metric>,
) -> Result<(MembershipVerdict, Option<FinDist>)> {
    let free = match variant {
        Variant::Psd => member_psd(ch, q)?,
        Variant::Tilde | Variant::Sym | Variant::TildeSym | Variant::WqHeuristic => member_tilde(ch, q, None)?,
        Variant::Gamma => variant_membership(variant, ch, q, None, rho)?,
        Variant::KspF | Variant::ClassicalSp => {
            return Err(Error::InvalidArgument(format!("no capacity bound for variant {}", variant.name())))
        }
    };
    if !free.is_in() {
        return Ok((free, None));
    }
    let cap = blahut_arimoto(ch.pzx(), BA_TOL);
    let v = match variant {
        Variant::Psd | Variant::Gamma => free,
        _ => variant_membership(variant, ch, q, Some(&cap.px), rho)?,
    };
    Ok((v, Some(cap.px)))
}

/// `C(P_{Z|X})` of a candidate whose membership holds for every input
/// distribution. The value is the Blahut-Arimoto upper estimate
/// `max_x D(P_{Z|X}(.|x) || r)`, within `1e-9` nats of the capacity.
pub fn certified_capacity_bound(
    w: &Dmc,
    q: &Metric,
    candidate: &TwoOutputChannel,
    variant: Variant,
    rho: Option<&Metric>,
) -> Result<BoundReport> {
    if candidate.nx() != w.nx() || candidate.ny() != w.ny() {
        return Err(Error::DimensionMismatch(format!(
            "candidate is |X|={} |Y|={}, channel is {}x{}",
            candidate.nx(),
            candidate.ny(),
            w.nx(),
            w.ny()
        )));
    }
    candidate.check_marginal(w, SIMPLEX_TOL)?;
    let (verdict, px) = certify_witness(candidate, q, variant, rho)?;
    let Some(px) = px else {
        return Err(match verdict.status {
            Status::Out => Error::NotMember(format!(
                "candidate is not in the {} set ({}); try exploratory mode",
                variant.name(),
                describe(&verdict)
            )),
            _ => Error::CertificationRefused(format!(
                "membership in the {} set could not be established independently of P_X ({}); try exploratory mode",
                variant.name(),
                describe(&verdict)
            )),
        });
    };
    if !verdict.is_in() {
        return Err(Error::CertificationRefused(format!(
            "candidate passes the input-independent test but the {} oracle returned {:?} at the maximizing P_X",
            variant.name(),
            verdict.status
        )));
    }
    let cap = blahut_arimoto(candidate.pzx(), BA_TOL);
    let mut r = BoundReport::new(BoundKind::Capacity, variant, Validity::Certified, cap.upper)
        .note(format!("C(P_Z|X) by Blahut-Arimoto; I at the returned P_X is {:.12} nats (gap {:.1e})", cap.lower, cap.gap()));
    r.input_distribution = Some(px);
    r.witness = Some(candidate.clone());
    r.membership = Some(verdict);
    r.rho = rho.cloned();
    Ok(r)
}

fn describe(v: &MembershipVerdict) -> String {
    match &v.note {
        Some(n) => format!("{:?}, margin {:.3e}: {n}", v.status, v.numeric_margin),
        None => format!("{:?}, margin {:.3e}", v.status, v.numeric_margin),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::prob::{channel_mi, nats_to_bits, CondDist};

    #[test]
    fn example_sym_certified() {
        let r = certified_capacity_bound(&example_dmc(), &example_metric(), &example_candidate(), Variant::Sym, None)
            .unwrap();
        assert!((r.value_bits - 0.4081).abs() <= 5e-4, "{}", r.value_bits);
        let px = r.input_distribution.as_ref().unwrap();
        assert!((px[0] - 0.59).abs() <= 0.01);
        let rv = r.revalidate(&example_dmc(), &example_metric()).unwrap();
        assert!(rv.ok, "{rv:?}");
    }

    #[test]
    fn psd_refuses_example_candidate() {
        let e = certified_capacity_bound(&example_dmc(), &example_metric(), &example_candidate(), Variant::Psd, None)
            .unwrap_err();
        assert!(matches!(e, Error::NotMember(_)), "{e:?}");
    }

    #[test]
    fn marginal_mismatch_is_rejected() {
        let other = Dmc::new(CondDist::new(vec![vec![0.7, 0.3, 0.0], vec![0.1, 0.3, 0.6]]).unwrap());
        let e = certified_capacity_bound(&other, &example_metric(), &example_candidate(), Variant::Sym, None)
            .unwrap_err();
        assert!(matches!(e, Error::MarginalMismatch(_)), "{e:?}");
    }

    #[test]
    fn independent_candidate_gives_zero() {
        let w = example_dmc();
        // Z constant: every pair shares z = 0, so the condition is on W itself.
        let k = CondDist::new(vec![vec![1.0]; 6]).unwrap();
        let ch = TwoOutputChannel::from_z_kernel(&w, &k).unwrap();
        let q = Metric::constant(2, 3, 0.0);
        let r = certified_capacity_bound(&w, &q, &ch, Variant::Tilde, None).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(channel_mi(r.input_distribution.as_ref().unwrap(), ch.pzx()), 0.0);
        assert_eq!(nats_to_bits(r.value), r.value_bits);
    }
}
