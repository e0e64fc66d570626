//! Row producers for each subcommand.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use symrec::bounds::{
    bound_terms, dynamical_fluctuation_for, evaluate_formula, evaluate_matrix_bound,
    instance_errors, matrix_terms, BoundKind, BoundTerms, FluctuationStrategy, MatrixBoundKind, SOUNDNESS_SLACK,
};
use symrec::channel::Instance;
use symrec::hp::{
    build_hp_instance, concentration_sweep, foggy_mirror_experiment, mean_law, no_symmetry_control, HpConfig,
    PhiSelector, PsiSelector,
};
use symrec::instances::{random_small_instance, swap_instance, two_charge_instance, QubitShape, StateKind, ViolationFamily};
use symrec::linalg::{random_density, random_hermitian, random_pure_state, rng_from_seed};
use symrec::metrics::{minimal_variance_reference, mvd_tradeoff_check, qfi, qfi_finite_difference, variance};
use symrec::qec::{
    audit_code, dicke_code, dicke_family_parameters, four_qubit_erasure_code, repetition_code, trivial_code,
    CodeDescription, COVARIANCE_LIMIT,
};
use symrec::recovery::{decoupling_residuals, eigen_decomposition, optimize_recovery, CodeErrorOptions, RecoveryMode, SeesawOptions};
use symrec::showcase::verify_alleviation;

use crate::error::{Error, Result};
use crate::output::{hash_bytes, hash_matrices, instance_hash, Row};

/// Rows plus optional command-specific JSON details.
pub struct Outcome {
    pub rows: Vec<Row>,
    pub details: Option<Value>,
}

impl From<Vec<Row>> for Outcome {
    fn from(rows: Vec<Row>) -> Self {
        Outcome { rows, details: None }
    }
}

/// Run `f` for every trial on the current pool; rows come back in trial order.
fn trials<F>(count: usize, f: F) -> Result<Vec<Row>>
where
    F: Fn(usize) -> Result<Vec<Row>> + Sync + Send,
{
    let per: Vec<Vec<Row>> = (0..count).into_par_iter().map(f).collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

fn fill_terms(row: &mut Row, t: &BoundTerms) {
    let fl = &t.fluctuation;
    row.set("a_single", fl.a_single)
        .set("a_sum", fl.a_sum)
        .set("a_two", fl.a_two)
        .set("delta_plus", fl.delta_plus)
        .set("delta_max", fl.delta_max)
        .set("f", t.f)
        .set("f_f", t.f_f)
        .set("f_b", t.f_b)
        .set("d_z", t.d_z);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Metrics,
    Lemma1,
    Bounds,
    MatrixBounds,
    Violated,
}

pub fn verify(suite: Suite, count: usize, seed: u64, seesaw: &SeesawOptions) -> Result<Outcome> {
    let rows = match suite {
        Suite::Metrics => trials(count, |t| metrics_trial(seed + t as u64))?,
        Suite::Lemma1 => trials(count, |t| lemma1_trial(seed + t as u64, seesaw))?,
        Suite::Bounds => trials(count, |t| bounds_trial(seed + t as u64, seesaw))?,
        Suite::MatrixBounds => trials(count, |t| matrix_trial(seed + t as u64, seesaw))?,
        Suite::Violated => trials(count, |t| violated_trial(seed + t as u64, seesaw))?,
    };
    Ok(rows.into())
}

fn metrics_trial(seed: u64) -> Result<Vec<Row>> {
    let mut rng = rng_from_seed(seed);
    let d = rng.random_range(2..=4);
    let rank = rng.random_range(1..=d);
    let rho = random_density(&mut rng, d, rank);
    let sigma = random_density(&mut rng, d, d);
    let x = random_hermitian(&mut rng, d);
    let v = random_pure_state(&mut rng, d);
    let pure = &v * v.adjoint();
    let hash = hash_matrices("metrics", &[&rho, &sigma, &x, &pure]);
    let mut rows = Vec::new();
    let mut row = |label: &str, value: f64, limit: f64| {
        let mut r = Row::new("verify-metrics", seed, hash.clone(), label);
        r.set("param", d as f64).check_at_most(value, limit);
        rows.push(r);
    };
    let f = qfi(&rho, &x)?;
    row("qfi_finite_difference", (f - qfi_finite_difference(&rho, &x, 1e-4)?).abs(), 1e-4);
    let fp = qfi(&pure, &x)?;
    row("qfi_pure_state", (fp - 4.0 * variance(&pure, &x)).abs(), 1e-9 * (1.0 + fp));
    let t = mvd_tradeoff_check(&rho, &sigma, &x)?;
    row("tradeoff_rcr2", t.rcr2_lhs - t.rcr2_rhs, 1e-10);
    row("tradeoff_nrc", t.nrc_lhs - t.nrc_rhs, 1e-10);
    let r = minimal_variance_reference(&rho, &x)?;
    row("reference_variance", (4.0 * r.total_variance(&x) - f).abs(), 1e-8 * (1.0 + f));
    Ok(rows)
}

fn lemma1_trial(seed: u64, seesaw: &SeesawOptions) -> Result<Vec<Row>> {
    let inst = random_small_instance(seed)?;
    let terms = bound_terms(&inst, FluctuationStrategy::Exact)?;
    let up = optimize_recovery(&inst, RecoveryMode::WithRb, seesaw)?.achieved_error;
    let dec = eigen_decomposition(&inst.rho_a(), 1e-12)?;
    let rep = decoupling_residuals(&inst, &dec)?;
    let mut row = Row::new("verify-lemma1", seed, instance_hash(&inst), "eigen_decomposition");
    fill_terms(&mut row, &terms);
    row.set("delta_upper", up).check_at_most(rep.residual_to_average, 4.0 * up * up + SOUNDNESS_SLACK);
    Ok(vec![row])
}

fn bounds_trial(seed: u64, seesaw: &SeesawOptions) -> Result<Vec<Row>> {
    let inst = random_small_instance(seed)?;
    let terms = bound_terms(&inst, FluctuationStrategy::Exact)?;
    let errs = instance_errors(&inst, &terms, seesaw)?;
    let mut row = Row::new("verify-bounds", seed, instance_hash(&inst), "random_conserving");
    fill_terms(&mut row, &terms);
    row.set("delta_lower", errs.delta.lower)
        .set("delta_upper", errs.delta.upper)
        .set("delta_tilde_upper", errs.delta_tilde.upper);
    for kind in BoundKind::INSTANCE {
        let lhs = terms.lhs(kind)?;
        let up = if kind.targets_delta_tilde() { errs.delta_tilde.upper } else { errs.delta.upper };
        row.set_bound(kind, lhs).flag(lhs > up + SOUNDNESS_SLACK);
    }
    Ok(vec![row])
}

fn matrix_row(label: &str, seed: u64, inst: &Instance, seesaw: &SeesawOptions) -> Result<Row> {
    let up = optimize_recovery(inst, RecoveryMode::WithRb, seesaw)?.achieved_error;
    let mut decs = vec![eigen_decomposition(&inst.rho_a(), 1e-12)?];
    for ch in 0..inst.charges.len() {
        let fl = dynamical_fluctuation_for(inst, ch, FluctuationStrategy::Exact)?;
        decs.push(fl.witness);
        decs.push(fl.two_term_witness);
    }
    let mut worst = f64::NEG_INFINITY;
    for dec in &decs {
        let t = matrix_terms(inst, dec)?;
        for kind in [MatrixBoundKind::Msiq1, MatrixBoundKind::Msiq2] {
            let r = evaluate_matrix_bound(kind, &t, up);
            worst = worst.max(-r.min_eigenvalue / r.scale);
        }
    }
    let mut row = Row::new("verify-matrix-bounds", seed, instance_hash(inst), label);
    row.set("param", inst.charges.len() as f64).set("delta_upper", up).check_at_most(worst, 1e-8);
    Ok(row)
}

fn matrix_trial(seed: u64, seesaw: &SeesawOptions) -> Result<Vec<Row>> {
    Ok(vec![
        matrix_row("two_charge", seed, &two_charge_instance(seed, 1 + (seed % 3) as usize)?, seesaw)?,
        matrix_row("swap", seed, &swap_instance(seed)?, seesaw)?,
    ])
}

pub const VIOLATION_ANGLES: [f64; 5] = [0.0, 1e-3, 1e-2, 0.1, 0.3];

fn violated_trial(seed: u64, seesaw: &SeesawOptions) -> Result<Vec<Row>> {
    let shape = QubitShape { qa: 1 + (seed % 2) as usize, qb: 1 + (seed / 2 % 2) as usize, l: 1 };
    let fam = ViolationFamily::new(seed, shape, StateKind::Random)?;
    let mut rows = Vec::new();
    for theta in VIOLATION_ANGLES {
        let inst = fam.at(theta)?;
        let terms = bound_terms(&inst, FluctuationStrategy::Exact)?;
        let up = optimize_recovery(&inst, RecoveryMode::WithRb, seesaw)?.achieved_error;
        let mut row = Row::new("verify-violated", seed, instance_hash(&inst), "violation_family");
        fill_terms(&mut row, &terms);
        row.set("param", theta).set("delta_upper", up);
        for kind in BoundKind::VIOLATED {
            let lhs = terms.lhs(kind)?;
            row.set_bound(kind, lhs).flag(lhs > up + SOUNDNESS_SLACK);
        }
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum HpMode {
    /// Assembled lower bound against the seesaw error for each `l`.
    Foggy,
    /// Sample mean of the output charge against its prediction.
    Mean,
    /// Tail frequencies against the concentration bound.
    Tail,
    /// Recovery error under an unrestricted Haar unitary.
    Control,
}

/// `max` or `eigen:m=w,m=w,...`.
pub fn parse_probe(text: &str) -> Result<PsiSelector> {
    let t = text.trim();
    if t == "max" || t == "max-entangled" {
        return Ok(PsiSelector::MaxEntangled);
    }
    let body = t.strip_prefix("eigen:").ok_or_else(|| Error::Config(format!("unknown probe `{text}`")))?;
    let mut w = Vec::new();
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let (m, p) = part
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("probe entry `{part}` is not `charge=weight`")))?;
        let m: usize = m.trim().parse().map_err(|_| Error::Config(format!("bad charge `{m}`")))?;
        let p: f64 = p.trim().parse().map_err(|_| Error::Config(format!("bad weight `{p}`")))?;
        w.push((m, p));
    }
    Ok(PsiSelector::EigenMixture(w))
}

pub struct HpArgs {
    pub k: usize,
    pub n: usize,
    pub ls: Vec<usize>,
    pub samples: usize,
    pub s_window: usize,
    pub probe: PsiSelector,
    pub seed: u64,
    pub mode: HpMode,
}

pub fn hp(args: &HpArgs, seesaw: &SeesawOptions) -> Result<Outcome> {
    let base = HpConfig {
        s: args.s_window,
        seed: args.seed,
        samples: args.samples,
        psi: args.probe.clone(),
        phi: if args.s_window > 0 { PhiSelector::SectorTruncated } else { PhiSelector::MaxEntangled },
        ..HpConfig::new(args.k, args.n, args.ls.first().copied().unwrap_or(1))
    };
    if args.ls.is_empty() {
        return Err(Error::Config("at least one value of l is required".into()));
    }
    for &l in &args.ls {
        HpConfig { l, ..base.clone() }.validate()?;
    }
    let hash = |l: usize| hash_bytes(format!("hp:{:?}", HpConfig { l, ..base.clone() }).as_bytes());
    let command = "hp";
    let rows = match args.mode {
        HpMode::Foggy => {
            let per: Vec<Vec<Row>> = args
                .ls
                .par_iter()
                .map(|&l| -> Result<Vec<Row>> {
                    let mut row = Row::new(command, args.seed, hash(l), "foggy");
                    row.set("param", l as f64);
                    if l >= base.total() {
                        row.label = "trivial".into();
                        return Ok(vec![row]);
                    }
                    let r = foggy_mirror_experiment(&base, &[l], seesaw)?.remove(0);
                    row.set("a_sum", r.a_sum)
                        .set("delta_max", r.delta_max)
                        .set("f_f", r.sqrt_f_f * r.sqrt_f_f)
                        .set("error", r.delta_upper)
                        .set("delta_upper", r.delta_upper)
                        .set("delta_lower", r.hp.base.max(r.siq1).max(r.siq2).max(0.0))
                        .set_bound(BoundKind::Siq1, r.siq1)
                        .set_bound(BoundKind::Siq2, r.siq2)
                        .set_bound(BoundKind::HpBase, r.hp.base)
                        .set_bound(BoundKind::HpBaseRatio, r.hp.base_ratio)
                        .set_bound(BoundKind::HpOutput, r.hp.output)
                        .set_bound(BoundKind::HpOutputRatio, r.hp.output_ratio)
                        .check_at_most(r.hp.base, r.delta_upper + SOUNDNESS_SLACK)
                        .flag(!r.term_bounds_hold());
                    Ok(vec![row])
                })
                .collect::<Result<_>>()?;
            per.into_iter().flatten().collect()
        }
        HpMode::Mean | HpMode::Tail => {
            let mut rows = Vec::new();
            for &l in &args.ls {
                let cfg = HpConfig { l, ..base.clone() };
                let rho = build_hp_instance(&cfg, 0)?.rho_a();
                if args.mode == HpMode::Mean {
                    let m = mean_law(&cfg, &rho)?;
                    let mut row = Row::new(command, args.seed, hash(l), "mean_law");
                    row.set("param", l as f64).check_at_most((m.mean - m.predicted).abs(), m.tolerance(3.0));
                    rows.push(row);
                } else {
                    let grid: Vec<f64> = (1..=20).map(|i| i as f64 * 0.1).collect();
                    for t in concentration_sweep(&cfg, &rho, &grid)? {
                        let mut row = Row::new(command, args.seed, hash(l), format!("tail_l{l}"));
                        row.set("param", t.t).check_at_most(t.frequency, t.bound + 3.0 * t.std_err);
                        rows.push(row);
                    }
                }
            }
            rows
        }
        HpMode::Control => no_symmetry_control(&base, &args.ls, seesaw)?
            .into_iter()
            .map(|r| {
                let mut row = Row::new(command, args.seed, hash(r.l), "control");
                row.set("param", r.l as f64)
                    .set("error", r.delta_upper)
                    .set("delta_upper", r.delta_upper)
                    .set("check_value", r.reference);
                row
            })
            .collect(),
    };
    Ok(rows.into())
}

pub fn example(ms: &[u32], seesaw: Option<&SeesawOptions>) -> Result<Outcome> {
    let rows = ms
        .par_iter()
        .map(|&m| -> Result<Row> {
            let r = verify_alleviation(m, seesaw)?;
            let mut row = Row::new("example", m as u64, hash_bytes(format!("alleviation:{m}").as_bytes()), "alleviation");
            let upper = r.seesaw_error.map_or(r.recovery_error, |s| s.min(r.recovery_error));
            row.set("param", m as f64)
                .set("a_single", r.a_single)
                .set("a_sum", r.a_sum)
                .set("delta_plus", r.delta_plus)
                .set("f", r.f)
                .set("error", r.recovery_error)
                .set("delta_lower", r.siq1)
                .set("delta_upper", upper)
                .set_bound(BoundKind::Siq1, r.siq1)
                .check_at_most((r.recovery_error - r.expected_error).abs(), 1e-9)
                .flag(!r.siq1_holds());
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rows.into())
}

/// `dicke:ALPHA`, `dicke-family`, `four-qubit`, `repetition` or `trivial`.
pub fn builtin_codes(name: &str) -> Result<Vec<CodeDescription>> {
    Ok(match name {
        "dicke-family" => dicke_family_parameters().into_iter().map(dicke_code).collect::<symrec::Result<_>>()?,
        "four-qubit" => vec![four_qubit_erasure_code()?],
        "repetition" => vec![repetition_code()?],
        "trivial" => vec![trivial_code()?],
        other => match other.strip_prefix("dicke:") {
            Some(a) => {
                let alpha: f64 = a.parse().map_err(|_| Error::Config(format!("bad angle `{a}`")))?;
                vec![dicke_code(alpha)?]
            }
            None => return Err(Error::Config(format!("unknown builtin code `{name}`"))),
        },
    })
}

pub fn qec(codes: &[CodeDescription], opts: &CodeErrorOptions) -> Result<Outcome> {
    let audits = codes.par_iter().map(|c| audit_code(c, opts)).collect::<symrec::Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut details = Vec::new();
    for (code, a) in codes.iter().zip(&audits) {
        let mut row = Row::new("qec", opts.seed, hash_matrices(&format!("code:{}", code.name), &[&code.isometry]), &a.name);
        row.set("param", a.n as f64)
            .set("error", a.delta_c_estimate)
            .set("delta_upper", a.delta_c_estimate)
            .set_bound(BoundKind::Ek17, a.ek17)
            .set_bound(BoundKind::Ek17Half, a.ek17_half)
            .set("check_value", a.covariance_deviation)
            .set("check_limit", COVARIANCE_LIMIT)
            .flag(!a.consistent());
        if a.applicable {
            row.set("delta_lower", a.ek17);
        }
        rows.push(row);
        details.push(json!({
            "name": a.name,
            "covariance_deviation": a.covariance_deviation,
            "applicable": a.applicable,
            "d_xl": a.d_xl,
            "d_max": a.d_max,
            "n": a.n,
            "ek17": a.ek17,
            "ek17_half": a.ek17_half,
            "maximally_entangled_error": a.me_error,
            "delta_c_estimate": a.delta_c_estimate,
            "noise_covariance_deviation": a.noise_covariance_deviation,
            "consistent": a.consistent(),
        }));
    }
    Ok(Outcome { rows, details: Some(json!({ "audits": details })) })
}

/// Parses a JSON object of numbers, or the relaxed form `{k:v, k=v}`.
pub fn parse_inputs(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut m = BTreeMap::new();
    if let Ok(parsed) = serde_json::from_str::<BTreeMap<String, f64>>(text) {
        m = parsed;
    }
    let body = if m.is_empty() { text.trim().trim_start_matches('{').trim_end_matches('}') } else { "" };
    for part in body.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = part
            .split_once([':', '='])
            .ok_or_else(|| Error::Config(format!("input `{part}` is not `name:value`")))?;
        let k = k.trim().trim_matches('"').to_string();
        let v: f64 = v.trim().parse().map_err(|_| Error::Config(format!("input `{k}` has non-numeric value `{v}`")))?;
        m.insert(k, v);
    }
    if m.is_empty() {
        return Err(Error::Config("no bound inputs given".into()));
    }
    Ok(m)
}

pub fn bound(kind: BoundKind, inputs: &BTreeMap<String, f64>, delta: Option<f64>) -> Result<Outcome> {
    let value = evaluate_formula(kind, inputs)?;
    let desc: String = inputs.iter().map(|(k, v)| format!("{k}={v:e};")).collect();
    let mut row = Row::new("bound", 0, hash_bytes(format!("bound:{kind}:{desc}").as_bytes()), kind.name());
    row.set_bound(kind, value);
    if let Some(d) = delta {
        row.set("delta_upper", d).check_at_most(value, d + SOUNDNESS_SLACK);
    }
    let used: BTreeMap<&str, f64> =
        kind.inputs().iter().filter_map(|k| inputs.get(*k).map(|v| (*k, *v))).collect();
    Ok(Outcome { rows: vec![row], details: Some(json!({ "kind": kind.name(), "value": value, "inputs": used })) })
}
