//! Capacity and exponent upper bounds built on the membership oracles.
//!
//! Reports come in two validity classes. A certified report carries a witness
//! channel whose membership does not depend on the input distribution, so the
//! stated value upper-bounds the max-min program outright. An exploratory
//! report estimates the max-min by sampling input distributions.

mod capacity;
mod certified;
mod exploratory;
mod exponent;
mod gamma;
mod search;
mod slack;
mod sphere;

pub use capacity::{blahut_arimoto, Capacity, BA_TOL};
pub use certified::{certified_capacity_bound, variant_membership};
pub use exploratory::{default_px_grid, exploratory_capacity_bound};
pub use exponent::{exponent_bound, exponent_bound_with_starts};
pub use gamma::{gamma_bounds, gamma_capacity_bound, gamma_exponent_bound, isomorphism_check, superiority_check, Isomorphism, Superiority};
pub use slack::{finite_n_slack, Slack};
pub use sphere::{classical_sp, classical_sp_with_witness};

use serde::{Deserialize, Serialize};

use crate::channel::TwoOutputChannel;
use crate::error::{Error, Result};
use crate::membership::MembershipVerdict;
use crate::metric::{Dmc, Metric};
use crate::optim::SearchBudget;
use crate::prob::{channel_mi, conditional_divergence, nats_to_bits, FinDist, SIMPLEX_TOL};

/// Re-evaluated objectives must agree with the stated value to this many nats.
pub const REVALIDATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Capacity,
    Exponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Psd,
    Tilde,
    Sym,
    TildeSym,
    WqHeuristic,
    Gamma,
    ClassicalSp,
    KspF,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Psd => "psd",
            Variant::Tilde => "tilde",
            Variant::Sym => "sym",
            Variant::TildeSym => "tilde_sym",
            Variant::WqHeuristic => "wq_heuristic",
            Variant::Gamma => "gamma",
            Variant::ClassicalSp => "classical_sp",
            Variant::KspF => "ksp_f",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "psd" => Variant::Psd,
            "tilde" => Variant::Tilde,
            "sym" => Variant::Sym,
            "tilde_sym" => Variant::TildeSym,
            "wq" | "wq_heuristic" => Variant::WqHeuristic,
            "gamma" => Variant::Gamma,
            "classical_sp" | "sp" => Variant::ClassicalSp,
            "ksp_f" | "fsp" => Variant::KspF,
            other => return Err(Error::InvalidArgument(format!("unknown bound variant '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validity {
    Certified,
    Exploratory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub variant: Variant,
    pub validity: Validity,
    /// Nats; `+inf` when no feasible point was found.
    #[serde(with = "crate::ext")]
    pub value: f64,
    #[serde(with = "crate::ext")]
    pub value_bits: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    /// Maximizing input distribution (capacity) or the pinned composition (exponent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_distribution: Option<FinDist>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<TwoOutputChannel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub membership: Option<MembershipVerdict>,
    /// The Z-side metric of the `gamma` variant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Metric>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<SearchBudget>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl BoundReport {
    pub(crate) fn new(kind: BoundKind, variant: Variant, validity: Validity, value: f64) -> Self {
        Self {
            kind,
            variant,
            validity,
            value,
            value_bits: nats_to_bits(value),
            rate: None,
            input_distribution: None,
            witness: None,
            membership: None,
            rho: None,
            budget: None,
            notes: Vec::new(),
        }
    }

    pub(crate) fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }

    pub fn is_feasible(&self) -> bool {
        self.value.is_finite()
    }

    /// Re-run membership and the objective on the embedded witness.
    ///
    /// Capacity witnesses are checked independently of the input distribution
    /// (certified) or at the stored one (exploratory) and re-evaluated by
    /// Blahut-Arimoto or `I(P, P_{Z|X})` respectively. Exponent witnesses are
    /// checked at the pinned composition and re-evaluated as `D(P_{Y|X} || W | P)`.
    pub fn revalidate(&self, w: &Dmc, q: &Metric) -> Result<Revalidation> {
        if self.variant == Variant::ClassicalSp {
            let p = self.input_distribution.as_ref().ok_or_else(|| missing("input_distribution"))?;
            let rate = self.rate.ok_or_else(|| missing("rate"))?;
            let v = classical_sp(w.cond(), p, rate)?;
            return Ok(Revalidation::from_value(self.value, v, None, true));
        }
        if !self.value.is_finite() {
            return Ok(Revalidation {
                ok: self.witness.is_none(),
                membership: None,
                marginal_ok: true,
                recomputed: self.value,
                discrepancy: 0.0,
                detail: "infinite value; nothing to re-check".into(),
            });
        }
        let ch = self.witness.as_ref().ok_or_else(|| missing("witness"))?;
        let rho = self.rho.as_ref();
        match self.kind {
            BoundKind::Capacity => {
                let marginal_ok = ch.check_marginal(w, SIMPLEX_TOL).is_ok();
                match self.validity {
                    Validity::Certified => {
                        let (m, px) = certified::certify_witness(ch, q, self.variant, rho)?;
                        let cap = blahut_arimoto(ch.pzx(), BA_TOL);
                        let mut r = Revalidation::from_value(self.value, cap.upper, Some(m), marginal_ok);
                        if let (Some(a), Some(b)) = (&self.input_distribution, px) {
                            r.detail = format!("{}; maximizer moved by {:.2e}", r.detail, max_diff(a, &b));
                        }
                        Ok(r)
                    }
                    Validity::Exploratory => {
                        let p = self.input_distribution.as_ref().ok_or_else(|| missing("input_distribution"))?;
                        let m = variant_membership(self.variant, ch, q, Some(p), rho)?;
                        let v = channel_mi(p, ch.pzx());
                        Ok(Revalidation::from_value(self.value, v, Some(m), marginal_ok))
                    }
                }
            }
            BoundKind::Exponent => {
                let p = self.input_distribution.as_ref().ok_or_else(|| missing("input_distribution"))?;
                let rate = self.rate.ok_or_else(|| missing("rate"))?;
                let m = if self.variant == Variant::Gamma {
                    let rho = rho.ok_or_else(|| missing("rho"))?;
                    crate::membership::member_gamma(ch, q, rho)?
                } else {
                    variant_membership(self.variant, ch, q, Some(p), rho)?
                };
                let (v, rate_ok) = if self.variant == Variant::Gamma {
                    // the value is the sphere-packing exponent of the Z-channel
                    (classical_sp(ch.pzx(), p, rate)?, ch.check_marginal(w, SIMPLEX_TOL).is_ok())
                } else {
                    let v = conditional_divergence(&ch.marginal_y(), w.cond(), p)?;
                    (v, channel_mi(p, ch.pzx()) <= rate + 1e-12)
                };
                let mut r = Revalidation::from_value(self.value, v, Some(m), rate_ok);
                if !rate_ok {
                    r.detail = format!("rate constraint violated: I(P, P_Z|X) = {}", channel_mi(p, ch.pzx()));
                }
                Ok(r)
            }
        }
    }
}

fn missing(field: &str) -> Error {
    Error::InvalidArgument(format!("report has no {field}; cannot re-validate"))
}

fn max_diff(a: &FinDist, b: &FinDist) -> f64 {
    a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Revalidation {
    pub ok: bool,
    pub membership: Option<MembershipVerdict>,
    /// Marginal match for capacity witnesses, rate feasibility for exponent witnesses.
    pub marginal_ok: bool,
    #[serde(with = "crate::ext")]
    pub recomputed: f64,
    #[serde(with = "crate::ext")]
    pub discrepancy: f64,
    pub detail: String,
}

impl Revalidation {
    fn from_value(stated: f64, recomputed: f64, m: Option<MembershipVerdict>, marginal_ok: bool) -> Self {
        let discrepancy = if stated == recomputed { 0.0 } else { (stated - recomputed).abs() };
        let member_ok = m.as_ref().is_none_or(|m| m.is_in());
        let ok = member_ok && marginal_ok && discrepancy <= REVALIDATION_TOL;
        let detail = format!(
            "membership {}, constraint {}, |stated - recomputed| = {discrepancy:.3e}",
            m.as_ref().map_or("n/a".to_string(), |m| format!("{:?}", m.status)),
            if marginal_ok { "ok" } else { "violated" }
        );
        Self { ok, membership: m, marginal_ok, recomputed, discrepancy, detail }
    }
}
