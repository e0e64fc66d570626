//! Lower bounds on the optimal recovery error.
//!
//! For a decomposition `ρ_A = Σ_j p_j ρ_j` the charge imbalance
//! `Δ_j = (⟨X_A⟩_{ρ_j} − ⟨X_{A'}⟩_{ℰ(ρ_j)}) − (⟨X_A⟩_{ρ_A} − ⟨X_{A'}⟩_{ℰ(ρ_A)})`
//! is linear in `ρ_j`: `Δ_j = Tr[ρ_j G]` with
//! `G = X_A − ℰ†(X_{A'}) − ⟨X_A − ℰ†(X_{A'})⟩_{ρ_A}`. Every functional of the
//! `Δ_j` used below is computed from `G`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;

use crate::channel::{Charges, Instance, QuantumChannel};
use crate::error::{Error, Result};
use crate::linalg::{
    expectation, ginibre, hermitian_part, hermitian_spectrum, psd_inv_sqrt, random_hermitian,
    rng_from_seed, CMat,
};
use crate::metrics::{covariance, qfi, qfi_matrix, spectral_spread, variance};
use crate::recovery::{optimize_recovery, Decomposition, RecoveryMode, SeesawOptions};

/// Slack allowed when comparing a bound with an upper estimate of the error.
pub const SOUNDNESS_SLACK: f64 = 1e-6;
/// Conservation violations below this count as exact conservation.
pub const CONSERVATION_TOL: f64 = 1e-8;
const SUPPORT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundKind {
    Siq1,
    Siq2,
    Siq1Prime,
    Rsiq1,
    Rsiq2,
    Vsiq1,
    Vsiq2,
    Siqv1,
    Siqv2,
    Rsiqv1,
    Rsiqv2,
    Ek17,
    Ek17Half,
    HpBase,
    HpBaseRatio,
    HpOutput,
    HpOutputRatio,
}

impl BoundKind {
    pub const ALL: [BoundKind; 17] = [
        BoundKind::Siq1,
        BoundKind::Siq2,
        BoundKind::Siq1Prime,
        BoundKind::Rsiq1,
        BoundKind::Rsiq2,
        BoundKind::Vsiq1,
        BoundKind::Vsiq2,
        BoundKind::Siqv1,
        BoundKind::Siqv2,
        BoundKind::Rsiqv1,
        BoundKind::Rsiqv2,
        BoundKind::Ek17,
        BoundKind::Ek17Half,
        BoundKind::HpBase,
        BoundKind::HpBaseRatio,
        BoundKind::HpOutput,
        BoundKind::HpOutputRatio,
    ];

    /// Bounds evaluated on a conserving instance.
    pub const INSTANCE: [BoundKind; 7] = [
        BoundKind::Siq1,
        BoundKind::Siq2,
        BoundKind::Siq1Prime,
        BoundKind::Rsiq1,
        BoundKind::Rsiq2,
        BoundKind::Vsiq1,
        BoundKind::Vsiq2,
    ];

    /// Bounds that stay valid when the charge is only approximately conserved.
    pub const VIOLATED: [BoundKind; 4] =
        [BoundKind::Siqv1, BoundKind::Siqv2, BoundKind::Rsiqv1, BoundKind::Rsiqv2];

    pub fn name(self) -> &'static str {
        match self {
            BoundKind::Siq1 => "SIQ1",
            BoundKind::Siq2 => "SIQ2",
            BoundKind::Siq1Prime => "SIQ1P",
            BoundKind::Rsiq1 => "RSIQ1",
            BoundKind::Rsiq2 => "RSIQ2",
            BoundKind::Vsiq1 => "VSIQ1",
            BoundKind::Vsiq2 => "VSIQ2",
            BoundKind::Siqv1 => "SIQV1",
            BoundKind::Siqv2 => "SIQV2",
            BoundKind::Rsiqv1 => "RSIQV1",
            BoundKind::Rsiqv2 => "RSIQV2",
            BoundKind::Ek17 => "EK17",
            BoundKind::Ek17Half => "EK17HALF",
            BoundKind::HpBase => "HPBASE",
            BoundKind::HpBaseRatio => "HPBASERATIO",
            BoundKind::HpOutput => "HPOUTPUT",
            BoundKind::HpOutputRatio => "HPOUTPUTRATIO",
        }
    }

    /// Whether the bound constrains the error without access to `R_B`.
    pub fn targets_delta_tilde(self) -> bool {
        matches!(self, BoundKind::Siq1Prime)
    }

    /// Whether the bound assumes exact conservation.
    pub fn requires_conservation(self) -> bool {
        matches!(
            self,
            BoundKind::Siq1
                | BoundKind::Siq2
                | BoundKind::Siq1Prime
                | BoundKind::Rsiq1
                | BoundKind::Rsiq2
                | BoundKind::Vsiq1
                | BoundKind::Vsiq2
        )
    }

    /// Named inputs the formula reads.
    pub fn inputs(self) -> &'static [&'static str] {
        match self {
            BoundKind::Siq1 => &["a", "f", "delta_plus"],
            BoundKind::Siq2 => &["a", "f_f", "delta_max"],
            BoundKind::Siq1Prime => &["a", "f_b", "delta_plus"],
            BoundKind::Rsiq1 => &["a2", "f", "delta_plus"],
            BoundKind::Rsiq2 => &["a2", "f_f", "delta_max"],
            BoundKind::Vsiq1 => &["a_var", "sum_delta_sq", "f", "var_a", "var_a_out"],
            BoundKind::Vsiq2 => &["a_var", "sum_delta_sq", "f_f", "var_a", "var_a_out"],
            BoundKind::Siqv1 => &["a", "f", "delta_plus", "d_z"],
            BoundKind::Siqv2 => &["a", "f_f", "delta_max", "d_z"],
            BoundKind::Rsiqv1 => &["a2", "f", "delta_plus", "d_z"],
            BoundKind::Rsiqv2 => &["a2", "f_f", "delta_max", "d_z"],
            BoundKind::Ek17 | BoundKind::Ek17Half => &["dxl", "dmax", "n"],
            BoundKind::HpBase | BoundKind::HpBaseRatio => &["m", "eps", "n", "k"],
            BoundKind::HpOutput | BoundKind::HpOutputRatio => &["m", "eps", "n", "k", "l", "f"],
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_uppercase();
        let key = key.replace("PRIME", "P");
        BoundKind::ALL
            .iter()
            .copied()
            .find(|k| k.name() == key)
            .ok_or_else(|| Error::InvalidInput(format!("unknown bound kind `{s}`")))
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num <= 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Evaluate the left-hand side of a bound from named inputs.
pub fn evaluate_formula(kind: BoundKind, inputs: &BTreeMap<String, f64>) -> Result<f64> {
    let get = |k: &str| -> Result<f64> {
        let v = inputs
            .get(k)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("{} needs input `{k}`", kind.name())))?;
        if !v.is_finite() {
            return Err(Error::InvalidInput(format!("input `{k}` is not finite")));
        }
        Ok(v)
    };
    let nonneg = |k: &str| -> Result<f64> {
        let v = get(k)?;
        if v < 0.0 {
            return Err(Error::InvalidInput(format!("input `{k}` must be non-negative")));
        }
        Ok(v)
    };
    Ok(match kind {
        BoundKind::Siq1 => ratio(nonneg("a")?, 2.0 * (nonneg("f")?.sqrt() + 4.0 * nonneg("delta_plus")?)),
        BoundKind::Siq2 => ratio(nonneg("a")?, 2.0 * (nonneg("f_f")?.sqrt() + nonneg("delta_max")?)),
        BoundKind::Siq1Prime => ratio(nonneg("a")?, 2.0 * (nonneg("f_b")?.sqrt() + 4.0 * nonneg("delta_plus")?)),
        BoundKind::Rsiq1 => ratio(nonneg("a2")?, nonneg("f")?.sqrt() + 4.0 * nonneg("delta_plus")?),
        BoundKind::Rsiq2 => ratio(nonneg("a2")?, nonneg("f_f")?.sqrt() + nonneg("delta_max")?),
        BoundKind::Vsiq1 | BoundKind::Vsiq2 => {
            let f = if kind == BoundKind::Vsiq1 { nonneg("f")? } else { nonneg("f_f")? };
            let b = nonneg("sum_delta_sq")? / 2.0 + 8.0 * (nonneg("var_a")? + nonneg("var_a_out")?);
            ratio(nonneg("a_var")?, 8.0 * (f + b)).sqrt()
        }
        BoundKind::Siqv1 => {
            let dz = nonneg("d_z")?;
            ratio(nonneg("a")? - 2.0 * dz, 2.0 * (nonneg("f")?.sqrt() + 4.0 * nonneg("delta_plus")? + dz))
        }
        BoundKind::Siqv2 => {
            let dz = nonneg("d_z")?;
            ratio(nonneg("a")? - 2.0 * dz, 2.0 * (nonneg("f_f")?.sqrt() + nonneg("delta_max")?))
        }
        BoundKind::Rsiqv1 => {
            let dz = nonneg("d_z")?;
            ratio(nonneg("a2")? - 2.0 * dz, nonneg("f")?.sqrt() + 4.0 * nonneg("delta_plus")? + dz)
        }
        BoundKind::Rsiqv2 => {
            let dz = nonneg("d_z")?;
            ratio(nonneg("a2")? - 2.0 * dz, nonneg("f_f")?.sqrt() + nonneg("delta_max")?)
        }
        BoundKind::Ek17 | BoundKind::Ek17Half => {
            let c = if kind == BoundKind::Ek17 { 4.0 } else { 2.0 };
            let dxl = nonneg("dxl")?;
            let dmax = nonneg("dmax")?;
            let n = nonneg("n")?;
            if dmax <= 0.0 {
                return Err(Error::Undefined("dmax must be positive".into()));
            }
            let t = dxl / (c * dmax);
            ratio(t, n + t)
        }
        BoundKind::HpBase | BoundKind::HpBaseRatio | BoundKind::HpOutput | BoundKind::HpOutputRatio => {
            let p = HpBoundParams {
                k: nonneg("k")?,
                n: nonneg("n")?,
                l: if matches!(kind, BoundKind::HpOutput | BoundKind::HpOutputRatio) { nonneg("l")? } else { 0.0 },
                m: nonneg("m")?,
                eps: get("eps")?,
                f: if matches!(kind, BoundKind::HpOutput | BoundKind::HpOutputRatio) { nonneg("f")? } else { 0.0 },
            };
            let r = hp_bounds(&p)?;
            match kind {
                BoundKind::HpBase => r.base,
                BoundKind::HpBaseRatio => r.base_ratio,
                BoundKind::HpOutput => r.output,
                _ => r.output_ratio,
            }
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FluctuationStrategy {
    /// Spectral closed forms for `𝒜`, bisection on a Lagrange multiplier for `𝒜₂`.
    Exact,
    /// Eigen-decomposition of `ρ_A` only.
    Eigen,
    /// Random ensembles (random POVM splits of `ρ_A`).
    RandomEnsembles { count: usize, seed: u64 },
    /// Random two-term equal-weight splits.
    TwoTermSearch { restarts: usize, seed: u64 },
}

impl Default for FluctuationStrategy {
    fn default() -> Self {
        FluctuationStrategy::Exact
    }
}

/// Dynamical fluctuation of one charge. All `𝒜` values are evaluated on
/// explicit decompositions and are therefore lower estimates of the maxima.
#[derive(Clone, Debug)]
pub struct FluctuationReport {
    /// `max_j p_j |Δ_j|` on the witness decomposition.
    pub a_single: f64,
    /// `Σ_j p_j |Δ_j|` on the witness decomposition.
    pub a_sum: f64,
    /// `Σ_j |Δ_j| / 2` on the two-term witness `ρ_A = (ρ_0 + ρ_1)/2`.
    pub a_two: f64,
    /// Upper bound on the `𝒜₂` maximum (dual value; `Exact` only).
    pub a_two_upper: Option<f64>,
    /// `max |Δ_j|` over states supported on `supp ρ_A` (exact).
    pub delta_max: f64,
    /// `(𝒟_{X_A} + 𝒟_{X_{A'}})/2`.
    pub delta_plus: f64,
    pub witness: Decomposition,
    pub two_term_witness: Decomposition,
}

/// `G = X_A − ℰ†(X_{A'}) − ⟨X_A − ℰ†(X_{A'})⟩_{ρ_A}` for one charge.
pub fn imbalance_operator(inst: &Instance, charge: &Charges) -> Result<CMat> {
    channel_imbalance_operator(&inst.rho_a(), &inst.channel_e()?, &charge.x_a, &charge.x_a_out)
}

/// Imbalance operator for an explicit channel `ℰ : A → A'`.
pub fn channel_imbalance_operator(rho_a: &CMat, e: &QuantumChannel, x_a: &CMat, x_a_out: &CMat) -> Result<CMat> {
    let d = x_a - e.adjoint_apply(x_a_out)?;
    let d = hermitian_part(&d);
    let shift = expectation(&d, rho_a);
    let n = d.nrows();
    Ok(d - CMat::identity(n, n).scale(shift))
}

/// `Δ_j = Tr[ρ_j G]`.
pub fn imbalance(g: &CMat, rho_j: &CMat) -> f64 {
    expectation(g, rho_j)
}

/// `Δ_j` of a single state `ρ_j` on `A` for the first charge.
pub fn delta_j(inst: &Instance, rho_j: &CMat) -> Result<f64> {
    if rho_j.nrows() != inst.dims.a || rho_j.ncols() != inst.dims.a {
        return Err(Error::DimensionMismatch { expected: inst.dims.a, found: rho_j.nrows() });
    }
    Ok(imbalance(&imbalance_operator(inst, inst.charge())?, rho_j))
}

/// Support frame of `ρ_A`: columns `V_s`, eigenvalues `r_s > 0`.
struct Support {
    v: CMat,
    r: Vec<f64>,
}

impl Support {
    fn of(rho: &CMat) -> Result<Self> {
        let s = hermitian_spectrum(rho)?;
        let keep: Vec<usize> = (0..s.dim()).filter(|&i| s.values[i] > SUPPORT_TOL).collect();
        let v = CMat::from_fn(rho.nrows(), keep.len(), |i, j| s.vectors[(i, keep[j])]);
        Ok(Support { v, r: keep.iter().map(|&i| s.values[i]).collect() })
    }

    fn sqrt_r(&self) -> CMat {
        crate::linalg::diag_real(&self.r.iter().map(|x| x.sqrt()).collect::<Vec<_>>())
    }

    /// `√ρ T √ρ` lifted back to the full space.
    fn lift(&self, t: &CMat) -> CMat {
        let s = self.sqrt_r();
        let inner = &s * t * &s;
        hermitian_part(&(&self.v * inner * self.v.adjoint()))
    }
}

fn decomposition_from_parts(parts: Vec<CMat>) -> Decomposition {
    parts
        .into_iter()
        .filter_map(|tau| {
            let p = tau.trace().re;
            if p > 1e-14 {
                Some((p, tau.unscale(p)))
            } else {
                None
            }
        })
        .collect()
}

fn a_values(g: &CMat, dec: &[(f64, CMat)]) -> (f64, f64) {
    let mut single: f64 = 0.0;
    let mut sum = 0.0;
    for (p, r) in dec {
        let v = p * imbalance(g, r).abs();
        single = single.max(v);
        sum += v;
    }
    (single, sum)
}

fn a_two_value(g: &CMat, dec: &[(f64, CMat)]) -> f64 {
    dec.iter().map(|(_, r)| imbalance(g, r).abs()).sum::<f64>() / 2.0
}

/// Feasible `T` (`0 ≤ T ≤ 1`, `Tr[R T] = 1/2`) maximising `Tr[T K]`, found by
/// bisection on the multiplier of the trace constraint. Returns `T` and the
/// dual upper bound on the maximum.
fn half_split(k: &CMat, r: &[f64]) -> Result<(CMat, f64)> {
    let n = r.len();
    let rm = crate::linalg::diag_real(r);
    let rmin = r.iter().copied().fold(f64::INFINITY, f64::min).max(SUPPORT_TOL);
    let knorm = crate::linalg::operator_norm(k);
    let bound = knorm / rmin + 1.0;
    let positive_part = |mu: f64| -> Result<(CMat, f64, f64)> {
        let l = k - rm.scale(mu);
        let s = hermitian_spectrum(&hermitian_part(&l))?;
        let t = s.reconstruct(|x| if x > 0.0 { 1.0 } else { 0.0 });
        let tr = expectation(&t, &rm);
        let plus: f64 = s.values.iter().filter(|&&x| x > 0.0).sum();
        Ok((t, tr, plus))
    };
    let (mut lo, mut hi) = (-bound, bound);
    let (mut t_lo, mut tr_lo, _) = positive_part(lo)?;
    let (mut t_hi, mut tr_hi, _) = positive_part(hi)?;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let (t, tr, _) = positive_part(mid)?;
        if tr >= 0.5 {
            lo = mid;
            t_lo = t;
            tr_lo = tr;
        } else {
            hi = mid;
            t_hi = t;
            tr_hi = tr;
        }
        if hi - lo < 1e-15 * (1.0 + bound) {
            break;
        }
    }
    let alpha = if tr_lo - tr_hi > 1e-15 { (0.5 - tr_hi) / (tr_lo - tr_hi) } else { 1.0 };
    let t = t_lo.scale(alpha) + t_hi.scale(1.0 - alpha);
    let mu = 0.5 * (lo + hi);
    let (_, _, plus) = positive_part(mu)?;
    let dual = plus + mu / 2.0;
    let _ = n;
    Ok((t, dual))
}

fn two_term_from_t(sup: &Support, rho_a: &CMat, t: &CMat) -> Decomposition {
    let tau = sup.lift(t);
    let rho0 = tau.scale(2.0);
    let rho1 = (rho_a - tau).scale(2.0);
    vec![(0.5, hermitian_part(&rho0)), (0.5, hermitian_part(&rho1))]
}

pub fn dynamical_fluctuation(inst: &Instance, strategy: FluctuationStrategy) -> Result<FluctuationReport> {
    dynamical_fluctuation_for(inst, 0, strategy)
}

pub fn dynamical_fluctuation_for(inst: &Instance, charge: usize, strategy: FluctuationStrategy) -> Result<FluctuationReport> {
    let ch = inst
        .charges
        .get(charge)
        .ok_or_else(|| Error::InvalidInput(format!("no charge with index {charge}")))?;
    channel_fluctuation(&inst.rho_a(), &inst.channel_e()?, &ch.x_a, &ch.x_a_out, strategy)
}

/// Dynamical fluctuation of `ρ_A` under an explicit channel `ℰ : A → A'`.
pub fn channel_fluctuation(
    rho_a: &CMat,
    e: &QuantumChannel,
    x_a: &CMat,
    x_a_out: &CMat,
    strategy: FluctuationStrategy,
) -> Result<FluctuationReport> {
    let g = channel_imbalance_operator(rho_a, e, x_a, x_a_out)?;
    let rho_a = rho_a.clone();
    let sup = Support::of(&rho_a)?;
    let g_s = hermitian_part(&(sup.v.adjoint() * &g * &sup.v));
    let gs_spec = hermitian_spectrum(&g_s)?;
    let delta_max = gs_spec.max().abs().max(gs_spec.min().abs());
    let delta_plus = 0.5 * (spectral_spread(x_a)? + spectral_spread(x_a_out)?);
    let sr = sup.sqrt_r();
    let k = hermitian_part(&(&sr * &g_s * &sr));

    let (witness, two_term_witness, a_two_upper) = match strategy {
        FluctuationStrategy::Exact => {
            let ks = hermitian_spectrum(&k)?;
            let plus = ks.reconstruct(|x| if x > 0.0 { 1.0 } else { 0.0 });
            let rest = ks.reconstruct(|x| if x > 0.0 { 0.0 } else { 1.0 });
            let witness = decomposition_from_parts(vec![sup.lift(&plus), sup.lift(&rest)]);
            let (t1, d1) = half_split(&k, &sup.r)?;
            let neg = -k.clone();
            let (t2, d2) = half_split(&neg, &sup.r)?;
            let c1 = two_term_from_t(&sup, &rho_a, &t1);
            let c2 = two_term_from_t(&sup, &rho_a, &t2);
            let best = if a_two_value(&g, &c1) >= a_two_value(&g, &c2) { c1 } else { c2 };
            (witness, best, Some(2.0 * d1.max(d2)))
        }
        FluctuationStrategy::Eigen => {
            let comm = crate::linalg::max_abs(&(&rho_a * x_a - x_a * &rho_a));
            if comm > 1e-9 {
                return Err(Error::InvalidInput(format!(
                    "eigen decomposition needs [ρ_A, X_A] = 0 (commutator {comm:.3e})"
                )));
            }
            let dec = crate::recovery::eigen_decomposition(&rho_a, SUPPORT_TOL)?;
            (dec, vec![(1.0, rho_a.clone())], None)
        }
        FluctuationStrategy::RandomEnsembles { count, seed } => {
            let mut rng = rng_from_seed(seed);
            let mut best_single: (f64, Decomposition) = (-1.0, vec![]);
            let mut best_sum: (f64, Decomposition) = (-1.0, vec![]);
            let dim = sup.r.len();
            for _ in 0..count.max(1) {
                let parts = random_povm(&mut rng, dim, 8)?;
                let dec = decomposition_from_parts(parts.iter().map(|t| sup.lift(t)).collect());
                let (s1, s2) = a_values(&g, &dec);
                if s1 > best_single.0 {
                    best_single = (s1, dec.clone());
                }
                if s2 > best_sum.0 {
                    best_sum = (s2, dec);
                }
            }
            let _ = best_single;
            (best_sum.1, vec![(1.0, rho_a.clone())], None)
        }
        FluctuationStrategy::TwoTermSearch { restarts, seed } => {
            let mut rng = rng_from_seed(seed);
            let dim = sup.r.len();
            let mut best: (f64, Decomposition) = (-1.0, vec![(1.0, rho_a.clone())]);
            for _ in 0..restarts.max(1) {
                let h = random_hermitian(&mut rng, dim);
                let (t, _) = half_split(&h, &sup.r)?;
                let dec = two_term_from_t(&sup, &rho_a, &t);
                let v = a_two_value(&g, &dec);
                if v > best.0 {
                    best = (v, dec);
                }
            }
            (best.1.clone(), best.1, None)
        }
    };
    let (a_single, a_sum) = a_values(&g, &witness);
    let (s2, m2) = a_values(&g, &two_term_witness);
    let a_two = a_two_value(&g, &two_term_witness);
    Ok(FluctuationReport {
        a_single: a_single.max(s2),
        a_sum: a_sum.max(m2),
        a_two,
        a_two_upper,
        delta_max,
        delta_plus,
        witness,
        two_term_witness,
    })
}

/// `count` rank-one PSD operators summing to the identity on a `dim`-dimensional space.
fn random_povm<R: Rng>(rng: &mut R, dim: usize, count: usize) -> Result<Vec<CMat>> {
    let ws: Vec<CMat> = (0..count)
        .map(|_| {
            let g = ginibre(rng, dim, 1);
            &g * g.adjoint()
        })
        .collect();
    let mut s = CMat::zeros(dim, dim);
    for w in &ws {
        s += w;
    }
    let inv = psd_inv_sqrt(&s, 1e-14)?;
    Ok(ws.iter().map(|w| hermitian_part(&(&inv * w * &inv))).collect())
}

/// `𝒜_V = Σ_j p_j Δ_j²` and `Σ_j Δ_j²` on a decomposition.
pub fn variance_terms(g: &CMat, dec: &[(f64, CMat)]) -> (f64, f64) {
    let mut av = 0.0;
    let mut s = 0.0;
    for (p, r) in dec {
        let d = imbalance(g, r);
        av += p * d * d;
        s += d * d;
    }
    (av, s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum AChoice {
    /// `max_j p_j |Δ_j|`.
    #[default]
    Single,
    /// `Σ_j p_j |Δ_j|`.
    Sum,
}

/// Every instance-level quantity the bounds need.
#[derive(Clone, Debug)]
pub struct BoundTerms {
    pub fluctuation: FluctuationReport,
    /// `4 V_{ρ_B}(X_B)`, the QFI of `φ_{BR_B}` for `X_B ⊗ 1`.
    pub f: f64,
    /// `4 V_{ρ^f_{B'}}(X_{B'})`.
    pub f_f: f64,
    /// `F_Q(ρ_B, X_B)`.
    pub f_b: f64,
    /// Spread of the conservation violation `Z`.
    pub d_z: f64,
    pub var_a: f64,
    pub var_a_out: f64,
    /// `(𝒜_V, Σ_j Δ_j²)` for each candidate decomposition.
    pub variance_candidates: Vec<(f64, f64)>,
    pub a_choice: AChoice,
}

impl BoundTerms {
    pub fn a(&self) -> f64 {
        match self.a_choice {
            AChoice::Single => self.fluctuation.a_single,
            AChoice::Sum => self.fluctuation.a_sum,
        }
    }

    pub fn with_a_choice(&self, choice: AChoice) -> Self {
        BoundTerms { a_choice: choice, ..self.clone() }
    }

    fn base_inputs(&self) -> BTreeMap<String, f64> {
        let fl = &self.fluctuation;
        let mut m = BTreeMap::new();
        for (k, v) in [
            ("a", self.a()),
            ("a2", fl.a_two),
            ("f", self.f),
            ("f_f", self.f_f),
            ("f_b", self.f_b),
            ("delta_plus", fl.delta_plus),
            ("delta_max", fl.delta_max),
            ("d_z", self.d_z),
            ("var_a", self.var_a),
            ("var_a_out", self.var_a_out),
        ] {
            m.insert(k.to_string(), v);
        }
        m
    }

    /// Inputs for `kind`; for the variance bounds the decomposition giving the
    /// largest left-hand side is chosen.
    pub fn inputs(&self, kind: BoundKind) -> Result<BTreeMap<String, f64>> {
        let mut base = self.base_inputs();
        if matches!(kind, BoundKind::Vsiq1 | BoundKind::Vsiq2) {
            let mut best: Option<(f64, BTreeMap<String, f64>)> = None;
            for &(av, s) in &self.variance_candidates {
                let mut m = base.clone();
                m.insert("a_var".into(), av);
                m.insert("sum_delta_sq".into(), s);
                let v = evaluate_formula(kind, &m)?;
                if best.as_ref().map(|b| v > b.0).unwrap_or(true) {
                    best = Some((v, m));
                }
            }
            base = best.map(|b| b.1).unwrap_or(base);
        }
        let keys = kind.inputs();
        Ok(base.into_iter().filter(|(k, _)| keys.contains(&k.as_str())).collect())
    }

    pub fn lhs(&self, kind: BoundKind) -> Result<f64> {
        evaluate_formula(kind, &self.inputs(kind)?)
    }
}

pub fn bound_terms(inst: &Instance, strategy: FluctuationStrategy) -> Result<BoundTerms> {
    let ch = inst.charge();
    let fluctuation = dynamical_fluctuation(inst, strategy)?;
    let rho_a = inst.rho_a();
    let rho_b = inst.rho_b();
    let f = 4.0 * variance(&rho_b, &ch.x_b);
    let rho_bf = crate::recovery::final_b_out(inst)?;
    let f_f = 4.0 * variance(&rho_bf, &ch.x_b_out);
    let f_b = qfi(&rho_b, &ch.x_b)?;
    let d_z = crate::symmetry::conservation_check(&inst.u, ch)?.spread;
    let var_a = variance(&rho_a, &ch.x_a);
    let var_a_out = variance(&inst.apply_e(&rho_a)?, &ch.x_a_out);
    let g = imbalance_operator(inst, ch)?;
    let mut variance_candidates: Vec<(f64, f64)> = [&fluctuation.witness, &fluctuation.two_term_witness]
        .iter()
        .map(|d| variance_terms(&g, d))
        .collect();
    if let Ok(eigen) = dynamical_fluctuation(inst, FluctuationStrategy::Eigen) {
        variance_candidates.push(variance_terms(&g, &eigen.witness));
    }
    Ok(BoundTerms {
        fluctuation,
        f,
        f_f,
        f_b,
        d_z,
        var_a,
        var_a_out,
        variance_candidates,
        a_choice: AChoice::Single,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeltaInterval {
    /// Largest applicable lower bound (never negative).
    pub lower: f64,
    /// Error achieved by an explicit recovery.
    pub upper: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Satisfied,
    Violated,
    /// The bound assumes exact conservation, which the instance breaks.
    NotApplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Satisfied => "pass",
            Verdict::Violated => "violated",
            Verdict::NotApplicable => "n/a",
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub lhs: f64,
    pub components: BTreeMap<String, f64>,
    pub interval: DeltaInterval,
    pub verdict: Verdict,
}

/// Compare a bound value with the upper end of the error interval.
pub fn verdict(lhs: f64, upper: f64) -> Verdict {
    if lhs <= upper + SOUNDNESS_SLACK {
        Verdict::Satisfied
    } else {
        Verdict::Violated
    }
}

pub fn evaluate_bound(kind: BoundKind, terms: &BoundTerms, interval: DeltaInterval) -> Result<BoundReport> {
    let components = terms.inputs(kind)?;
    let lhs = evaluate_formula(kind, &components)?;
    let v = if kind.requires_conservation() && terms.d_z > CONSERVATION_TOL {
        Verdict::NotApplicable
    } else {
        verdict(lhs, interval.upper)
    };
    Ok(BoundReport { kind, lhs, components, interval, verdict: v })
}

/// Seesaw upper estimates of `δ` and `δ̃` with the best applicable lower bounds.
#[derive(Clone, Debug)]
pub struct InstanceErrors {
    pub delta: DeltaInterval,
    pub delta_tilde: DeltaInterval,
}

pub fn instance_errors(inst: &Instance, terms: &BoundTerms, opts: &SeesawOptions) -> Result<InstanceErrors> {
    let up = optimize_recovery(inst, RecoveryMode::WithRb, opts)?.achieved_error;
    let up_tilde = optimize_recovery(inst, RecoveryMode::WithoutRb, opts)?.achieved_error;
    let conserving = terms.d_z <= CONSERVATION_TOL;
    let mut lower: f64 = 0.0;
    let mut lower_tilde: f64 = 0.0;
    for kind in BoundKind::INSTANCE.iter().chain(BoundKind::VIOLATED.iter()) {
        if kind.requires_conservation() && !conserving {
            continue;
        }
        let v = terms.lhs(*kind)?;
        if !kind.targets_delta_tilde() {
            lower = lower.max(v);
        }
        lower_tilde = lower_tilde.max(v);
    }
    Ok(InstanceErrors {
        delta: DeltaInterval { lower, upper: up },
        delta_tilde: DeltaInterval { lower: lower_tilde, upper: up_tilde },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixBoundKind {
    Msiq1,
    Msiq2,
    Msiq1Prime,
}

impl MatrixBoundKind {
    pub fn name(self) -> &'static str {
        match self {
            MatrixBoundKind::Msiq1 => "MSIQ1",
            MatrixBoundKind::Msiq2 => "MSIQ2",
            MatrixBoundKind::Msiq1Prime => "MSIQ1P",
        }
    }
}

/// Matrix-valued terms for several conserved charges on one decomposition.
#[derive(Clone, Debug)]
pub struct MatrixTerms {
    pub a_var: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub f_f: DMatrix<f64>,
    pub f_b: DMatrix<f64>,
}

fn to_dmatrix(v: Vec<Vec<f64>>) -> DMatrix<f64> {
    let n = v.len();
    DMatrix::from_fn(n, n, |i, j| v[i][j])
}

pub fn matrix_terms(inst: &Instance, dec: &[(f64, CMat)]) -> Result<MatrixTerms> {
    let rho_a = inst.rho_a();
    crate::recovery::check_decomposition(&rho_a, dec)?;
    let n = inst.charges.len();
    for (i, c) in inst.charges.iter().enumerate() {
        let z = crate::symmetry::conservation_check(&inst.u, c)?.operator_norm;
        if z > 1e-9 {
            return Err(Error::InvalidInput(format!("charge {i} is not conserved (‖Z‖ = {z:.3e})")));
        }
    }
    let gs: Vec<CMat> = inst.charges.iter().map(|c| imbalance_operator(inst, c)).collect::<Result<_>>()?;
    let deltas: Vec<Vec<f64>> = gs.iter().map(|g| dec.iter().map(|(_, r)| imbalance(g, r)).collect()).collect();
    let out_a = inst.apply_e(&rho_a)?;
    let rho_bf = crate::recovery::final_b_out(inst)?;
    let phi = crate::linalg::outer(&inst.phi);
    let rb = inst.dims.rb;
    let xb_ext: Vec<CMat> = inst.charges.iter().map(|c| c.x_b.kronecker(&CMat::identity(rb, rb))).collect();
    let xb: Vec<CMat> = inst.charges.iter().map(|c| c.x_b.clone()).collect();
    let f = to_dmatrix(qfi_matrix(&phi, &xb_ext)?);
    let f_b = to_dmatrix(qfi_matrix(&inst.rho_b(), &xb)?);
    let mut a_var = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n);
    let mut f_f = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (ci, cj) = (&inst.charges[i], &inst.charges[j]);
            let mut av = 0.0;
            let mut s = 0.0;
            for (k, (p, _)) in dec.iter().enumerate() {
                av += p * deltas[i][k] * deltas[j][k];
                s += deltas[i][k] * deltas[j][k];
            }
            a_var[(i, j)] = av;
            b[(i, j)] = 8.0 * (covariance(&rho_a, &ci.x_a, &cj.x_a) + covariance(&out_a, &ci.x_a_out, &cj.x_a_out)) + s / 2.0;
            f_f[(i, j)] = 4.0 * covariance(&rho_bf, &ci.x_b_out, &cj.x_b_out);
        }
    }
    Ok(MatrixTerms { a_var, b, f, f_f, f_b })
}

#[derive(Clone, Debug)]
pub struct MatrixBoundReport {
    pub kind: MatrixBoundKind,
    /// Smallest eigenvalue of `F + B − 𝒜_V/(8δ²)`.
    pub min_eigenvalue: f64,
    /// Normalisation used for the tolerance.
    pub scale: f64,
    pub verdict: Verdict,
}

pub fn evaluate_matrix_bound(kind: MatrixBoundKind, terms: &MatrixTerms, delta_upper: f64) -> MatrixBoundReport {
    let f = match kind {
        MatrixBoundKind::Msiq1 => &terms.f,
        MatrixBoundKind::Msiq2 => &terms.f_f,
        MatrixBoundKind::Msiq1Prime => &terms.f_b,
    };
    let d2 = (delta_upper * delta_upper).max(1e-300);
    let m = f + &terms.b - &terms.a_var / (8.0 * d2);
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let scale = (f + &terms.b).abs().max().max(1.0);
    let v = if min >= -1e-8 * scale { Verdict::Satisfied } else { Verdict::Violated };
    MatrixBoundReport { kind, min_eigenvalue: min, scale, verdict: v }
}

/// Parameters of the Hayden-Preskill style bounds.
#[derive(Clone, Copy, Debug)]
pub struct HpBoundParams {
    pub k: f64,
    pub n: f64,
    pub l: f64,
    /// Mean deviation of `X_A` in `ρ_A`.
    pub m: f64,
    /// Equidistribution error.
    pub eps: f64,
    /// `4 V_{ρ_B}(X_B)`.
    pub f: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct HpBoundReport {
    pub gamma: f64,
    pub a_lower: f64,
    pub sqrt_f_f_upper: f64,
    pub delta_max_upper: f64,
    /// `((1−ε)/(1+ε)) M / (2(N + 2k))`
    pub base: f64,
    /// Same value written as `c/(1 + N/2k)` with `c = M(1−ε)/(4k(1+ε))`.
    pub base_ratio: f64,
    pub ratio_const: f64,
    /// `((1−ε)/(1+ε)) M γ / (2(√ℱ + 2(k + l)))`
    pub output: f64,
    /// Same value written as `c γ/(1 + (2l + √ℱ)/2k)`.
    pub output_ratio: f64,
}

pub fn hp_bounds(p: &HpBoundParams) -> Result<HpBoundReport> {
    let total = p.n + p.k;
    if p.k <= 0.0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    if p.l >= total {
        return Err(Error::TrivialRegime(format!("l = {} ≥ N + k = {}", p.l, total)));
    }
    let gamma = 1.0 - p.l / total;
    let q = (1.0 - p.eps) / (1.0 + p.eps);
    let base = q * p.m / (2.0 * (p.n + 2.0 * p.k));
    let c = p.m * (1.0 - p.eps) / (4.0 * p.k * (1.0 + p.eps));
    let base_ratio = c / (1.0 + p.n / (2.0 * p.k));
    let output = q * p.m * gamma / (2.0 * (p.f.sqrt() + 2.0 * (p.k + p.l)));
    let output_ratio = c * gamma / (1.0 + (2.0 * p.l + p.f.sqrt()) / (2.0 * p.k));
    Ok(HpBoundReport {
        gamma,
        a_lower: gamma * p.m * (1.0 - p.eps),
        sqrt_f_f_upper: gamma * total,
        delta_max_upper: gamma * p.k * (1.0 + p.eps),
        base,
        base_ratio,
        ratio_const: c,
        output,
        output_ratio,
    })
}

/// `D_{X_L} / (4 D_max (N + D_{X_L}/(4 D_max)))`.
pub fn ek17(dxl: f64, dmax: f64, n: f64) -> f64 {
    let t = dxl / (4.0 * dmax);
    t / (n + t)
}

/// Variant with coefficient one half.
pub fn ek17_half(dxl: f64, dmax: f64, n: f64) -> f64 {
    let t = dxl / (2.0 * dmax);
    t / (n + t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn ek17_reference_values() {
        assert!((ek17(1.0, 1.0, 3.0) - 1.0 / 13.0).abs() < 1e-15);
        assert!((ek17_half(1.0, 1.0, 3.0) - 1.0 / 7.0).abs() < 1e-15);
        let v = evaluate_formula(BoundKind::Ek17, &map(&[("dxl", 1.0), ("dmax", 1.0), ("n", 3.0)])).unwrap();
        assert!((v - 0.076923076923).abs() < 1e-12);
    }

    #[test]
    fn hp_reference_value() {
        let p = HpBoundParams { k: 1.0, n: 3.0, l: 2.0, m: 0.5, eps: 0.0, f: 0.0 };
        let r = hp_bounds(&p).unwrap();
        assert!((r.base - 0.05).abs() < 1e-15);
        assert!((r.base_ratio - r.base).abs() < 1e-15);
        assert!((r.output_ratio - r.output).abs() < 1e-15);
    }

    #[test]
    fn hp_trivial_regime_is_an_error() {
        let p = HpBoundParams { k: 1.0, n: 3.0, l: 4.0, m: 0.5, eps: 0.0, f: 0.0 };
        assert!(matches!(hp_bounds(&p), Err(Error::TrivialRegime(_))));
    }

    #[test]
    fn missing_input_is_reported() {
        let err = evaluate_formula(BoundKind::Siq1, &map(&[("a", 1.0)])).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in BoundKind::ALL {
            assert_eq!(k.name().parse::<BoundKind>().unwrap(), k);
        }
        assert_eq!("siq1'".replace('\'', "prime").parse::<BoundKind>().unwrap(), BoundKind::Siq1Prime);
    }

    #[test]
    fn siq1_formula() {
        let v = evaluate_formula(BoundKind::Siq1, &map(&[("a", 0.5), ("f", 8.0 / 3.0), ("delta_plus", 1.0)])).unwrap();
        assert!((v - 0.5 / (2.0 * ((8.0f64 / 3.0).sqrt() + 4.0))).abs() < 1e-15);
    }

    #[test]
    fn violated_forms_reduce_to_conserved_forms_at_zero_violation() {
        let m = map(&[("a", 0.7), ("a2", 0.9), ("f", 2.0), ("f_f", 1.5), ("delta_plus", 1.0), ("delta_max", 0.8), ("d_z", 0.0)]);
        for (v, c) in [
            (BoundKind::Siqv1, BoundKind::Siq1),
            (BoundKind::Siqv2, BoundKind::Siq2),
            (BoundKind::Rsiqv1, BoundKind::Rsiq1),
            (BoundKind::Rsiqv2, BoundKind::Rsiq2),
        ] {
            let a = evaluate_formula(v, &m).unwrap();
            let b = evaluate_formula(c, &m).unwrap();
            assert!((a - b).abs() < 1e-15);
        }
    }
}
