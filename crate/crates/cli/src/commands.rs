//! One function per subcommand; each returns an [`Outcome`] for the emitter.

use std::path::Path;

use mismatch_core::bounds::{
    certified_capacity_bound, exploratory_capacity_bound, exponent_bound_with_starts, finite_n_slack,
    gamma_capacity_bound, gamma_exponent_bound, isomorphism_check, BoundReport, Variant,
};
use mismatch_core::channel::TwoOutputChannel;
use mismatch_core::genie::{exact_error, monte_carlo_error, Codebook, Decoder};
use mismatch_core::membership::{
    member_comparison_sets, member_gamma, member_psd, member_sym, member_tilde, member_wq, ComparisonSet,
    MembershipVerdict, SymVariant,
};
use mismatch_core::metric::{Dmc, Metric};
use mismatch_core::optim::{rng, simplex_grid};
use mismatch_core::prob::{FinDist, SIMPLEX_TOL};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, check_alphabets, check_shape, to_value, BoundInputs, Envelope, Outcome};
use crate::{CapacityVariant, Command, DecoderArg, ExponentVariant, Mode, SetArg, SimModeArg};

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cmd {
        Command::Bound { variant, channel, metric, candidate, zsize, mode, rho } => {
            bound(*variant, channel, metric, candidate.as_deref(), *zsize, *mode, rho.as_deref(), cfg)
        }
        Command::Membership { set, metric, candidate, copy_of, px, rho } => {
            membership(*set, metric, candidate.as_deref(), copy_of.as_deref(), px.as_deref(), rho.as_deref(), cfg)
        }
        Command::Exponent { variant, channel, metric, px, rate, zsize, rho, candidate } => {
            exponent(*variant, channel, metric, px, *rate, *zsize, rho.as_deref(), candidate.as_deref(), cfg)
        }
        Command::Simulate { channel, metric, codebook, n, messages, px, decoder, mode, samples, smooth } => simulate(
            channel,
            metric,
            codebook.as_deref(),
            *n,
            *messages,
            px.as_deref(),
            *decoder,
            *mode,
            *samples,
            *smooth,
            cfg,
        ),
        Command::Isomorphism { channel, metric, target, rho } => isomorphism(channel, metric, target, rho, cfg),
        Command::Slack { n, x, y, z, wmin } => slack(*n, *x, *y, *z, *wmin),
        Command::Verify { report } => verify(report, cfg),
    }
}

/// A JSON number, or the strings `inf` / `-inf` / `nan`.
fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn dist_value(p: &FinDist) -> Value {
    Value::Array(p.probs().iter().map(|&v| num(v)).collect())
}

fn channel_and_metric(channel: &Path, metric: &Path, cfg: &RunConfig) -> Result<(Dmc, Metric), CliError> {
    let (w, wa) = io::load_dmc(channel, cfg.renormalize)?;
    let (q, qa) = io::load_metric(metric)?;
    check_alphabets(&wa, &qa)?;
    check_shape("the metric", (q.nx(), q.ny()), (w.nx(), w.ny()))?;
    Ok((w, q))
}

fn load_rho(rho: Option<&Path>, what: &str) -> Result<Metric, CliError> {
    let p = rho.ok_or_else(|| CliError::Input(format!("{what} needs --rho")))?;
    Ok(io::load_metric(p)?.0)
}

fn report_summary(r: &BoundReport, cfg: &RunConfig) -> Map<String, Value> {
    let mut s = Map::new();
    s.insert("kind".into(), to_value(&r.kind));
    s.insert("variant".into(), json!(r.variant.name()));
    s.insert("validity".into(), to_value(&r.validity));
    s.insert("value".into(), num(cfg.units.from_nats(r.value)));
    s.insert("value_nats".into(), num(r.value));
    if let Some(rate) = r.rate {
        s.insert("rate".into(), num(cfg.units.from_nats(rate)));
    }
    if let Some(p) = &r.input_distribution {
        s.insert("input_distribution".into(), dist_value(p));
    }
    s
}

fn report_outcome(command: &str, r: BoundReport, w: Dmc, q: Metric, cfg: &RunConfig) -> Outcome {
    let u = cfg.units.name();
    let message = format!(
        "{} {} ({:?}): {} {u}",
        r.variant.name(),
        command,
        r.validity,
        fmt_value(cfg.units.from_nats(r.value))
    );
    Outcome {
        command: command.into(),
        inputs: Some(to_value(&BoundInputs { channel: w, metric: q })),
        summary: report_summary(&r, cfg),
        result: to_value(&r),
        message,
        exit: 0,
    }
}

fn fmt_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        format!("{v}")
    }
}

fn capacity_variant(v: CapacityVariant) -> Variant {
    match v {
        CapacityVariant::Psd => Variant::Psd,
        CapacityVariant::Sym => Variant::Sym,
        CapacityVariant::Tilde => Variant::Tilde,
        CapacityVariant::TildeSym => Variant::TildeSym,
        CapacityVariant::Wq => Variant::WqHeuristic,
        CapacityVariant::Gamma => Variant::Gamma,
    }
}

fn load_candidate(path: &Path, w: &Dmc, cfg: &RunConfig) -> Result<TwoOutputChannel, CliError> {
    let (c, _) = io::load_two_output(path, cfg.renormalize)?;
    check_shape("the candidate", (c.nx(), c.ny()), (w.nx(), w.ny()))?;
    Ok(c)
}

fn px_grid(nx: usize, cfg: &RunConfig) -> Option<Vec<FinDist>> {
    cfg.grid_mesh.map(|k| simplex_grid(nx, k).into_iter().map(|p| FinDist::new(p).expect("mesh points")).collect())
}

#[allow(clippy::too_many_arguments)]
fn bound(
    variant: CapacityVariant,
    channel: &Path,
    metric: &Path,
    candidate: Option<&Path>,
    zsize: Option<usize>,
    mode: Option<Mode>,
    rho: Option<&Path>,
    cfg: &RunConfig,
) -> Result<Outcome, CliError> {
    let (w, q) = channel_and_metric(channel, metric, cfg)?;
    let v = capacity_variant(variant);
    if v == Variant::Gamma {
        let rho = load_rho(rho, "the gamma bound")?;
        let r = gamma_capacity_bound(&w, &q, &rho, cfg.budget())?;
        return Ok(report_outcome("bound", r, w, q, cfg));
    }
    let cand = candidate.map(|p| load_candidate(p, &w, cfg)).transpose()?;
    let mode = mode.unwrap_or(if cand.is_some() { Mode::Certified } else { Mode::Exploratory });
    let r = match mode {
        Mode::Certified => {
            let c = cand.ok_or_else(|| CliError::Input("certified mode needs --candidate".into()))?;
            certified_capacity_bound(&w, &q, &c, v, None)?
        }
        Mode::Exploratory => {
            let nz = zsize.or(cand.as_ref().map(|c| c.nz())).unwrap_or(w.ny());
            let starts: Vec<TwoOutputChannel> = cand
                .into_iter()
                .filter(|c| c.nz() <= nz)
                .map(|c| if c.nz() < nz { c.pad_z(nz - c.nz()) } else { c })
                .collect();
            let grid = px_grid(w.nx(), cfg);
            exploratory_capacity_bound(&w, &q, v, nz, grid.as_deref(), cfg.budget(), cfg.exec(), &starts)?
        }
    };
    Ok(report_outcome("bound", r, w, q, cfg))
}

fn membership(
    set: SetArg,
    metric: &Path,
    candidate: Option<&Path>,
    copy_of: Option<&Path>,
    px: Option<&str>,
    rho: Option<&Path>,
    cfg: &RunConfig,
) -> Result<Outcome, CliError> {
    let (q, _) = io::load_metric(metric)?;
    let ch = match (candidate, copy_of) {
        (Some(p), _) => io::load_two_output(p, cfg.renormalize)?.0,
        (None, Some(p)) => TwoOutputChannel::copy(&io::load_dmc(p, cfg.renormalize)?.0),
        (None, None) => return Err(CliError::Input("membership needs --candidate or --copy-of".into())),
    };
    check_shape("the metric", (q.nx(), q.ny()), (ch.nx(), ch.ny()))?;
    let px = px.map(|s| io::parse_dist(s, cfg.renormalize)).transpose()?;
    if let Some(p) = &px {
        if p.len() != ch.nx() {
            return Err(CliError::Input(format!("--px has {} entries, |X| = {}", p.len(), ch.nx())));
        }
    }
    let need = |name: &str| px.as_ref().ok_or_else(|| CliError::Input(format!("the {name} set needs --px")));
    let v: MembershipVerdict = match set {
        SetArg::Psd => member_psd(&ch, &q)?,
        SetArg::Tilde => member_tilde(&ch, &q, px.as_ref())?,
        SetArg::Sym => member_sym(&ch, &q, need("sym")?, SymVariant::Sym)?,
        SetArg::TildeSym => member_sym(&ch, &q, need("tilde-sym")?, SymVariant::TildeSym)?,
        SetArg::Wq => member_wq(&ch, &q, need("wq")?, cfg.budget(), cfg.exec())?,
        SetArg::Gamma => member_gamma(&ch, &q, &load_rho(rho, "the gamma set")?)?,
        SetArg::ThetaStar => member_comparison_sets(&ch, &q, need("theta-star")?, ComparisonSet::ThetaStar)?,
        SetArg::Mmax => member_comparison_sets(&ch, &q, need("mmax")?, ComparisonSet::MMax)?,
    };
    let mut s = Map::new();
    s.insert("set".into(), to_value(&v.set_name));
    s.insert("status".into(), to_value(&v.status));
    s.insert("numeric_margin".into(), num(v.numeric_margin));
    Ok(Outcome {
        command: "membership".into(),
        inputs: Some(json!({ "candidate": to_value(&ch), "metric": to_value(&q), "px": px.as_ref().map(to_value) })),
        message: format!("{:?}: {:?} (margin {:.3e})", v.set_name, v.status, v.numeric_margin),
        summary: s,
        result: to_value(&v),
        exit: 0,
    })
}

#[allow(clippy::too_many_arguments)]
fn exponent(
    variant: ExponentVariant,
    channel: &Path,
    metric: &Path,
    px: &str,
    rate: f64,
    zsize: Option<usize>,
    rho: Option<&Path>,
    candidate: Option<&Path>,
    cfg: &RunConfig,
) -> Result<Outcome, CliError> {
    let (w, q) = channel_and_metric(channel, metric, cfg)?;
    let p = io::parse_dist(px, cfg.renormalize)?;
    if p.len() != w.nx() {
        return Err(CliError::Input(format!("--px has {} entries, |X| = {}", p.len(), w.nx())));
    }
    let rate = cfg.units.to_nats(rate);
    let v = match variant {
        ExponentVariant::Psd => Variant::Psd,
        ExponentVariant::Sym => Variant::Sym,
        ExponentVariant::Tilde => Variant::Tilde,
        ExponentVariant::TildeSym => Variant::TildeSym,
        ExponentVariant::KspF => Variant::KspF,
        ExponentVariant::ClassicalSp => Variant::ClassicalSp,
        ExponentVariant::Gamma => {
            let rho = load_rho(rho, "the gamma exponent")?;
            let r = gamma_exponent_bound(&w, &q, &rho, &p, rate, cfg.budget())?;
            return Ok(report_outcome("exponent", r, w, q, cfg));
        }
    };
    let starts: Vec<TwoOutputChannel> = candidate.map(|c| load_candidate(c, &w, cfg)).transpose()?.into_iter().collect();
    let nz = zsize.or(starts.first().map(|c| c.nz())).unwrap_or(w.ny());
    let starts: Vec<TwoOutputChannel> = starts
        .into_iter()
        .filter(|c| c.nz() <= nz)
        .map(|c| if c.nz() < nz { c.pad_z(nz - c.nz()) } else { c })
        .collect();
    let r = exponent_bound_with_starts(&w, &q, &p, rate, v, nz, cfg.budget(), cfg.exec(), &starts)?;
    Ok(report_outcome("exponent", r, w, q, cfg))
}

/// Integer counts closest to `n * p`, by largest remainder.
fn counts_for(p: &FinDist, n: usize) -> Vec<usize> {
    let raw: Vec<f64> = p.probs().iter().map(|v| v * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|v| v.floor() as usize).collect();
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    order.into_iter().take(short).for_each(|i| counts[i] += 1);
    counts
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    channel: &Path,
    metric: &Path,
    codebook: Option<&Path>,
    n: Option<usize>,
    messages: usize,
    px: Option<&str>,
    decoder: DecoderArg,
    mode: SimModeArg,
    samples: u64,
    smooth: bool,
    cfg: &RunConfig,
) -> Result<Outcome, CliError> {
    let (mut ch, ca) = io::load_two_output(channel, cfg.renormalize)?;
    let (q, qa) = io::load_metric(metric)?;
    check_alphabets(&ca, &qa)?;
    check_shape("the metric", (q.nx(), q.ny()), (ch.nx(), ch.ny()))?;
    let cb = match codebook {
        Some(p) => {
            let cb = io::load_codebook(p)?.with_alphabet(ch.nx())?;
            if let Some(n) = n {
                if n != cb.n() {
                    return Err(CliError::Input(format!("--n {n} disagrees with the codebook's n = {}", cb.n())));
                }
            }
            cb
        }
        None => {
            let n = n.ok_or_else(|| CliError::Input("simulate needs --codebook or --n".into()))?;
            if n == 0 || messages == 0 {
                return Err(CliError::Input("--n and --messages must be positive".into()));
            }
            let p = match px {
                Some(s) => io::parse_dist(s, cfg.renormalize)?,
                None => FinDist::uniform(ch.nx()),
            };
            if p.len() != ch.nx() {
                return Err(CliError::Input(format!("--px has {} entries, |X| = {}", p.len(), ch.nx())));
            }
            Codebook::random(&counts_for(&p, n), messages, &mut rng(cfg.seed, u64::MAX))?
        }
    };
    if smooth {
        ch = ch.smoothed(1.0 / cb.n() as f64);
    }
    let dec = match decoder {
        DecoderArg::Plain => Decoder::Plain,
        DecoderArg::Genie => Decoder::Genie,
    };
    let r = match mode {
        SimModeArg::Exact => exact_error(&cb, &ch, &q, dec, cfg.exec())?,
        SimModeArg::Mc => monte_carlo_error(&cb, &ch, &q, dec, samples, cfg.seed, cfg.exec())?,
    };
    let mut s = Map::new();
    s.insert("decoder".into(), to_value(&r.decoder));
    s.insert("mode".into(), to_value(&r.mode));
    s.insert("n".into(), json!(cb.n()));
    s.insert("messages".into(), json!(cb.len()));
    s.insert("rate".into(), num(cfg.units.from_nats(cb.rate())));
    s.insert("p_error".into(), num(r.p_error));
    s.insert("std_err".into(), r.std_err.map_or(Value::Null, num));
    let message = match r.std_err {
        Some(se) => format!("{:?} decoder: P_e = {:.6} +/- {:.2e}", r.decoder, r.p_error, se),
        None => format!("{:?} decoder: P_e = {:.9} (exact)", r.decoder, r.p_error),
    };
    Ok(Outcome {
        command: "simulate".into(),
        inputs: Some(json!({ "channel": to_value(&ch), "metric": to_value(&q), "codebook": to_value(&cb), "smoothed": smooth })),
        summary: s,
        result: to_value(&r),
        message,
        exit: 0,
    })
}

fn isomorphism(channel: &Path, metric: &Path, target: &Path, rho: &Path, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let (w, q) = channel_and_metric(channel, metric, cfg)?;
    let (t, ta) = io::load_dmc(target, cfg.renormalize)?;
    let (rho, ra) = io::load_metric(rho)?;
    check_alphabets(&ta, &ra)?;
    check_shape("rho", (rho.nx(), rho.ny()), (t.nx(), t.ny()))?;
    let r = isomorphism_check(&w, &q, t.cond(), &rho)?;
    let mut s = Map::new();
    s.insert("forward".into(), json!(r.forward.holds));
    s.insert("backward".into(), json!(r.backward.holds));
    s.insert("isomorphic".into(), json!(r.isomorphic));
    s.insert("target_matched".into(), json!(r.target_matched));
    Ok(Outcome {
        command: "isomorphism".into(),
        inputs: Some(json!({ "channel": to_value(&w), "metric": to_value(&q), "target": to_value(&t), "rho": to_value(&rho) })),
        message: format!(
            "superior: forward {}, backward {}; isomorphic: {}",
            r.forward.holds, r.backward.holds, r.isomorphic
        ),
        summary: s,
        result: to_value(&r),
        exit: 0,
    })
}

fn slack(n: u64, x: usize, y: usize, z: usize, wmin: f64) -> Result<Outcome, CliError> {
    let s = finite_n_slack(n, x, y, z, wmin)?;
    let mut m = Map::new();
    m.insert("eps_a".into(), num(s.eps_a));
    m.insert("eps_b".into(), num(s.eps_b));
    m.insert("delta".into(), num(s.delta));
    Ok(Outcome {
        command: "slack".into(),
        inputs: Some(json!({ "n": n, "x": x, "y": y, "z": z, "wmin": wmin })),
        message: format!("eps_a = {:.6e}, eps_b = {:.6e}, delta = {:.6e} (nats)", s.eps_a, s.eps_b, s.delta),
        summary: m,
        result: to_value(&s),
        exit: 0,
    })
}

fn verify(path: &Path, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read report {}: {e}", path.display())))?;
    let env: Envelope =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("report {}: {e}", path.display())))?;
    if env.command != "bound" && env.command != "exponent" {
        return Err(CliError::Input(format!("'{}' reports carry no witness to verify", env.command)));
    }
    let inputs: BoundInputs = serde_json::from_value(env.inputs.ok_or_else(|| CliError::Input("report has no inputs".into()))?)
        .map_err(|e| CliError::Input(format!("report inputs: {e}")))?;
    let report: BoundReport =
        serde_json::from_value(env.result).map_err(|e| CliError::Input(format!("report result: {e}")))?;
    let mut rv = report.revalidate(&inputs.channel, &inputs.metric)?;
    let tol = cfg.tolerances.revalidation;
    rv.ok = rv.membership.as_ref().is_none_or(|m| m.is_in())
        && rv.marginal_ok
        && (rv.discrepancy <= tol || (report.value.is_infinite() && report.witness.is_none()));
    if let Some(w) = &report.witness {
        // the witness must also describe the stated channel
        if report.variant != Variant::Gamma && report.kind == mismatch_core::bounds::BoundKind::Capacity {
            rv.ok &= w.check_marginal(&inputs.channel, SIMPLEX_TOL).is_ok();
        }
    }
    let mut s = Map::new();
    s.insert("ok".into(), json!(rv.ok));
    s.insert("stated".into(), num(cfg.units.from_nats(report.value)));
    s.insert("recomputed".into(), num(cfg.units.from_nats(rv.recomputed)));
    s.insert("discrepancy_nats".into(), num(rv.discrepancy));
    Ok(Outcome {
        command: "verify".into(),
        inputs: Some(json!({ "report": path.display().to_string() })),
        message: format!("{}: {}", if rv.ok { "verified" } else { "FAILED" }, rv.detail),
        summary: s,
        exit: if rv.ok { 0 } else { 2 },
        result: to_value(&rv),
    })
}
