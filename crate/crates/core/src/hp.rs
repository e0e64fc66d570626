//! Hayden-Preskill style scrambling of `k` diary qubits into an `N`-qubit
//! black hole under a conserved qubit number.
//!
//! Every qubit carries the charge `|1⟩⟨1|`. The dynamics is block-Haar over
//! the sectors of the total number, `A'` is the first `l` output qubits and
//! `B'` the remaining `N + k − l`.


use crate::bounds::{
    bound_terms, dynamical_fluctuation, hp_bounds, BoundKind, FluctuationStrategy, HpBoundParams, HpBoundReport,
};
use crate::channel::{Dims, Instance};
use crate::error::{Error, Result};
use crate::instances::QubitCharge;
use crate::linalg::{c, check_dim_cap, haar_unitary, hermitian_part, hermitian_spectrum, rng_from_seed, CMat, CVec};
use crate::metrics::{mean, mean_deviation, variance};
use crate::recovery::{optimize_recovery, RecoveryMode, SeesawOptions};
use crate::symmetry::{charge_sectors, conservation_check, sample_block_haar};

/// Largest `k + N` accepted.
pub const MAX_QUBITS: usize = 12;

/// Initial state of `A R_A`.
#[derive(Clone, Debug, PartialEq)]
pub enum PsiSelector {
    MaxEntangled,
    /// `ρ_A = Σ_m w_m ρ^max_m` with `ρ^max_m` maximally mixed on the `X_A = m` eigenspace.
    EigenMixture(Vec<(usize, f64)>),
}

/// Initial state of `B R_B`.
#[derive(Clone, Debug, PartialEq)]
pub enum PhiSelector {
    MaxEntangled,
    /// Maximally entangled state projected onto `X_B ∈ [s, N − s]` and renormalised.
    SectorTruncated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HpConfig {
    pub k: usize,
    pub n: usize,
    pub l: usize,
    /// Sector window `s`: total charges `s..=N+k−s`.
    pub s: usize,
    pub seed: u64,
    pub samples: usize,
    pub psi: PsiSelector,
    pub phi: PhiSelector,
}

impl HpConfig {
    pub fn new(k: usize, n: usize, l: usize) -> Self {
        HpConfig { k, n, l, s: 0, seed: 0, samples: 1, psi: PsiSelector::MaxEntangled, phi: PhiSelector::MaxEntangled }
    }

    pub fn total(&self) -> usize {
        self.k + self.n
    }

    pub fn gamma(&self) -> f64 {
        1.0 - self.l as f64 / self.total() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::InvalidInput("k and N must be positive".into()));
        }
        if self.total() > MAX_QUBITS {
            return Err(Error::DimensionCap { dim: 1 << self.total(), cap: 1 << MAX_QUBITS });
        }
        check_dim_cap(1 << self.total())?;
        if self.l > self.total() {
            return Err(Error::InvalidInput(format!("l = {} exceeds N + k = {}", self.l, self.total())));
        }
        if let PsiSelector::EigenMixture(w) = &self.psi {
            if w.is_empty() || w.iter().any(|&(m, p)| m > self.k || p < 0.0) {
                return Err(Error::InvalidInput("eigen mixture needs charges ≤ k and non-negative weights".into()));
            }
        }
        if self.phi == PhiSelector::SectorTruncated && 2 * self.s > self.n {
            return Err(Error::InvalidInput(format!("empty sector window s = {} for N = {}", self.s, self.n)));
        }
        Ok(())
    }

    /// Charges per qubit for the `A`/`B` and `A'`/`B'` splits.
    pub fn charge(&self) -> QubitCharge {
        QubitCharge::uniform(self.total())
    }
}

fn popcount_diag(n: usize) -> Vec<usize> {
    (0..1usize << n).map(|i| i.count_ones() as usize).collect()
}

/// Purification `Σ_i √w_i |i⟩|i⟩` of a diagonal state.
fn diagonal_purification(w: &[f64]) -> CVec {
    let d = w.len();
    let total: f64 = w.iter().sum();
    let mut v = CVec::zeros(d * d);
    for (i, wi) in w.iter().enumerate() {
        v[i * d + i] = c((wi / total).sqrt(), 0.0);
    }
    v
}

pub fn psi_state(cfg: &HpConfig) -> Result<CVec> {
    let pc = popcount_diag(cfg.k);
    let w: Vec<f64> = match &cfg.psi {
        PsiSelector::MaxEntangled => vec![1.0; pc.len()],
        PsiSelector::EigenMixture(mix) => {
            let mut w = vec![0.0; pc.len()];
            for &(m, p) in mix {
                let dim = pc.iter().filter(|&&x| x == m).count() as f64;
                for (i, &x) in pc.iter().enumerate() {
                    if x == m {
                        w[i] += p / dim;
                    }
                }
            }
            w
        }
    };
    if w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidInput("eigen mixture has zero weight".into()));
    }
    Ok(diagonal_purification(&w))
}

pub fn phi_state(cfg: &HpConfig) -> Result<CVec> {
    let pc = popcount_diag(cfg.n);
    let w: Vec<f64> = match cfg.phi {
        PhiSelector::MaxEntangled => vec![1.0; pc.len()],
        PhiSelector::SectorTruncated => {
            pc.iter().map(|&x| if x >= cfg.s && x + cfg.s <= cfg.n { 1.0 } else { 0.0 }).collect()
        }
    };
    if w.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidInput("empty sector window".into()));
    }
    Ok(diagonal_purification(&w))
}

/// Instance for sample `index` of the configuration.
pub fn build_hp_instance(cfg: &HpConfig, index: usize) -> Result<Instance> {
    cfg.validate()?;
    let charge = cfg.charge();
    let mut rng = rng_from_seed(cfg.seed.wrapping_add(index as u64).wrapping_mul(0x2545_f491_4f6c_dd1d));
    let u = sample_block_haar(&charge_sectors(&charge.total())?, &mut rng)?;
    instance_with_unitary(cfg, u)
}

fn instance_with_unitary(cfg: &HpConfig, u: CMat) -> Result<Instance> {
    let (k, n, l) = (cfg.k, cfg.n, cfg.l);
    let dims = Dims { a: 1 << k, ra: 1 << k, b: 1 << n, rb: 1 << n, a_out: 1 << l, b_out: 1 << (n + k - l) };
    Instance::new(psi_state(cfg)?, phi_state(cfg)?, u, dims, vec![cfg.charge().split(k, l)])
}

/// `L` with `x_{A'}(ρ, ρ_B, U) = Tr[ρ L]`, i.e. `Tr_B[(1 ⊗ ρ_B) U†(X_{A'} ⊗ 1)U]`.
pub fn heisenberg_a_out(inst: &Instance) -> CMat {
    let ch = inst.charge();
    let db_out = inst.dims.b_out;
    let x_out = ch.x_a_out.kronecker(&CMat::identity(db_out, db_out));
    let h = inst.u.adjoint() * x_out * &inst.u;
    let rho_b = inst.rho_b();
    let (da, db) = (inst.dims.a, inst.dims.b);
    let mut l = CMat::zeros(da, da);
    for a in 0..da {
        for a2 in 0..da {
            let mut s = c(0.0, 0.0);
            for b in 0..db {
                for b2 in 0..db {
                    s += h[(a * db + b, a2 * db + b2)] * rho_b[(b2, b)];
                }
            }
            l[(a, a2)] = s;
        }
    }
    hermitian_part(&l)
}

/// Mean predicted by equidistribution: `(x_A + x_B) l / (N + k)`.
pub fn predicted_mean(cfg: &HpConfig, x_a: f64, x_b: f64) -> f64 {
    (x_a + x_b) * cfg.l as f64 / cfg.total() as f64
}

#[derive(Clone, Debug)]
pub struct ProbeRow {
    pub label: String,
    pub x_a: f64,
    pub predicted: f64,
    /// Mean of `x_{A'}` over the sampled unitaries.
    pub mean_x_a_out: f64,
    /// Largest `|x_{A'} − predicted|` over the sampled unitaries.
    pub max_abs_deviation: f64,
}

#[derive(Clone, Debug)]
pub struct EquidistributionReport {
    /// Mean deviation `M` of `X_A` in `ρ_A`.
    pub m: f64,
    pub gamma: f64,
    /// Largest deviation over probes and samples.
    pub probe_deviation: f64,
    /// Largest deviation over all states on `supp ρ_A`, per sample.
    pub support_deviation: Vec<f64>,
    /// `2 · max deviation / (Mγ)`, taken over the whole support and all
    /// samples; `None` when `Mγ = 0`.
    pub epsilon_hat: Option<f64>,
    /// Same normalisation averaged over samples.
    pub epsilon_hat_mean: Option<f64>,
    pub probes: Vec<ProbeRow>,
    /// Largest `|x_A + x_B − x_{A'} − x_{B'}|` over samples and probes.
    pub bookkeeping_error: f64,
    /// Largest conservation spread over samples.
    pub conservation_spread: f64,
}

fn support_basis(rho: &CMat) -> Result<CMat> {
    let s = hermitian_spectrum(rho)?;
    let keep: Vec<usize> = (0..s.dim()).filter(|&i| s.values[i] > 1e-12).collect();
    Ok(CMat::from_fn(rho.nrows(), keep.len(), |i, j| s.vectors[(i, keep[j])]))
}

fn probes(rho_a: &CMat, count: usize, seed: u64) -> Result<Vec<(String, CVec)>> {
    let v = support_basis(rho_a)?;
    let p = &v * v.adjoint();
    let d = rho_a.nrows();
    let mut out = Vec::new();
    for i in 0..d {
        let e = crate::linalg::basis_vector(d, i);
        if (&p * &e - &e).norm() < 1e-9 {
            out.push((format!("basis{i}"), e));
        }
    }
    let mut rng = rng_from_seed(seed ^ 0x7072_6f62);
    for j in 0..count {
        let g = crate::linalg::ginibre(&mut rng, v.ncols(), 1);
        let w = &v * g.column(0);
        let w = w.unscale(w.norm());
        out.push((format!("random{j}"), w));
    }
    Ok(out)
}

/// Measure how well `x_{A'}` follows `(x_A + x_B) l/(N+k)` over `cfg.samples`
/// block-Haar unitaries.
pub fn equidistribution_check(cfg: &HpConfig) -> Result<EquidistributionReport> {
    cfg.validate()?;
    let first = build_hp_instance(cfg, 0)?;
    let ch = first.charge().clone();
    let rho_a = first.rho_a();
    let rho_b = first.rho_b();
    let x_b = mean(&rho_b, &ch.x_b);
    let m = mean_deviation(&rho_a, &ch.x_a)?;
    let gamma = cfg.gamma();
    let probe_states = probes(&rho_a, 16, cfg.seed)?;
    let sup = support_basis(&rho_a)?;
    let target_op = {
        let da = ch.x_a.nrows();
        (&ch.x_a + CMat::identity(da, da).scale(x_b)).scale(cfg.l as f64 / cfg.total() as f64)
    };
    let samples = cfg.samples.max(1);
    let mut sums = vec![0.0; probe_states.len()];
    let mut maxdev = vec![0.0f64; probe_states.len()];
    let mut support_deviation = Vec::with_capacity(samples);
    let mut bookkeeping: f64 = 0.0;
    let mut spread: f64 = 0.0;
    let x_b_out_total = {
        let da_out = first.dims.a_out;
        CMat::identity(da_out, da_out).kronecker(&ch.x_b_out)
    };
    for idx in 0..samples {
        let inst = if idx == 0 { first.clone() } else { build_hp_instance(cfg, idx)? };
        spread = spread.max(conservation_check(&inst.u, &ch)?.spread);
        let l_op = heisenberg_a_out(&inst);
        let dev_op = &l_op - &target_op;
        let ds = hermitian_part(&(sup.adjoint() * &dev_op * &sup));
        let eig = hermitian_spectrum(&ds)?;
        support_deviation.push(eig.max().abs().max(eig.min().abs()));
        let h_b = inst.u.adjoint() * &x_b_out_total * &inst.u;
        for (j, (_, v)) in probe_states.iter().enumerate() {
            let rho = v * v.adjoint();
            let x = mean(&rho, &l_op);
            let xa = mean(&rho, &ch.x_a);
            let pred = predicted_mean(cfg, xa, x_b);
            sums[j] += x;
            maxdev[j] = maxdev[j].max((x - pred).abs());
            let joint = rho.kronecker(&rho_b);
            let xbo = mean(&joint, &h_b);
            bookkeeping = bookkeeping.max((xa + x_b - x - xbo).abs());
        }
    }
    let probes_out: Vec<ProbeRow> = probe_states
        .iter()
        .enumerate()
        .map(|(j, (label, v))| {
            let rho = v * v.adjoint();
            let xa = mean(&rho, &ch.x_a);
            ProbeRow {
                label: label.clone(),
                x_a: xa,
                predicted: predicted_mean(cfg, xa, x_b),
                mean_x_a_out: sums[j] / samples as f64,
                max_abs_deviation: maxdev[j],
            }
        })
        .collect();
    let probe_deviation = maxdev.iter().copied().fold(0.0, f64::max);
    let worst = support_deviation.iter().copied().fold(0.0, f64::max).max(probe_deviation);
    let norm = m * gamma;
    let (eps, eps_mean) = if norm > 1e-12 {
        let mean_sup = support_deviation.iter().sum::<f64>() / samples as f64;
        (Some(2.0 * worst / norm), Some(2.0 * mean_sup / norm))
    } else {
        (None, None)
    };
    Ok(EquidistributionReport {
        m,
        gamma,
        probe_deviation,
        support_deviation,
        epsilon_hat: eps,
        epsilon_hat_mean: eps_mean,
        probes: probes_out,
        bookkeeping_error: bookkeeping,
        conservation_spread: spread,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct MeanLawReport {
    pub mean: f64,
    pub std_err: f64,
    pub predicted: f64,
    pub samples: usize,
}

impl MeanLawReport {
    /// Whether the sample mean lies within `z` standard errors of the
    /// prediction, with an absolute floor of `1e-12` for degenerate samples.
    pub fn within(&self, z: f64) -> bool {
        (self.mean - self.predicted).abs() <= self.tolerance(z)
    }

    pub fn tolerance(&self, z: f64) -> f64 {
        z * self.std_err + 1e-12
    }
}

fn x_a_out_samples(cfg: &HpConfig, rho: &CMat) -> Result<(Vec<f64>, f64)> {
    cfg.validate()?;
    let first = build_hp_instance(cfg, 0)?;
    if rho.nrows() != first.dims.a {
        return Err(Error::DimensionMismatch { expected: first.dims.a, found: rho.nrows() });
    }
    let ch = first.charge().clone();
    let x_b = mean(&first.rho_b(), &ch.x_b);
    let pred = predicted_mean(cfg, mean(rho, &ch.x_a), x_b);
    let mut xs = Vec::with_capacity(cfg.samples);
    for idx in 0..cfg.samples.max(1) {
        let inst = if idx == 0 { first.clone() } else { build_hp_instance(cfg, idx)? };
        xs.push(mean(rho, &heisenberg_a_out(&inst)));
    }
    Ok((xs, pred))
}

/// Monte Carlo mean of `x_{A'}(ρ, ρ_B, U)` against `(x_A + x_B) l/(N+k)`.
pub fn mean_law(cfg: &HpConfig, rho: &CMat) -> Result<MeanLawReport> {
    let (xs, predicted) = x_a_out_samples(cfg, rho)?;
    let n = xs.len() as f64;
    let mu = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(MeanLawReport { mean: mu, std_err: (var / n).sqrt(), predicted, samples: xs.len() })
}

/// `2 exp(−(C(N+k, s) − 2) t² / (48 l²))`.
pub fn concentration_bound(cfg: &HpConfig, t: f64) -> f64 {
    let binom = binomial(cfg.total(), cfg.s);
    let l = cfg.l as f64;
    2.0 * (-(binom - 2.0) * t * t / (48.0 * l * l)).exp()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Clone, Copy, Debug)]
pub struct TailRow {
    pub t: f64,
    pub frequency: f64,
    pub bound: f64,
    /// Binomial standard error of the frequency at the bound.
    pub std_err: f64,
}

impl TailRow {
    pub fn consistent(&self, z: f64) -> bool {
        self.frequency <= self.bound + z * self.std_err
    }
}

/// Empirical tails `Prob[|x_{A'} − mean| > t]`. The joint input must lie in
/// the sectors `s..=N+k−s`.
pub fn concentration_sweep(cfg: &HpConfig, rho: &CMat, t_grid: &[f64]) -> Result<Vec<TailRow>> {
    cfg.validate()?;
    if 2 * cfg.s > cfg.total() {
        return Err(Error::InvalidInput("empty sector window".into()));
    }
    let inst = build_hp_instance(cfg, 0)?;
    let joint = rho.kronecker(&inst.rho_b());
    let total = cfg.charge().total();
    let lo = cfg.s as f64 - 1e-9;
    let hi = (cfg.total() - cfg.s) as f64 + 1e-9;
    let outside: f64 = (0..joint.nrows()).filter(|&i| total[(i, i)].re < lo || total[(i, i)].re > hi).map(|i| joint[(i, i)].re).sum();
    if outside > 1e-12 {
        return Err(Error::InvalidInput(format!("input has weight {outside:.3e} outside the sector window")));
    }
    let (xs, predicted) = x_a_out_samples(cfg, rho)?;
    let n = xs.len() as f64;
    Ok(t_grid
        .iter()
        .map(|&t| {
            let hits = xs.iter().filter(|x| (*x - predicted).abs() > t).count() as f64;
            let bound = concentration_bound(cfg, t);
            let p = bound.min(1.0);
            TailRow { t, frequency: hits / n, bound, std_err: (p * (1.0 - p) / n).sqrt() }
        })
        .collect())
}

#[derive(Clone, Debug)]
pub struct FoggyRow {
    pub l: usize,
    pub gamma: f64,
    pub epsilon_hat: f64,
    /// `M / (2(N + 2k))`, the ε = 0 value.
    pub base_bound: f64,
    pub hp: HpBoundReport,
    pub siq1: f64,
    pub siq2: f64,
    pub delta_upper: f64,
    /// Measured `𝒜` (sum form), `√ℱ_f` and `Δ_max` against their term bounds.
    pub a_sum: f64,
    pub sqrt_f_f: f64,
    pub delta_max: f64,
}

impl FoggyRow {
    pub fn bound_holds(&self) -> bool {
        self.hp.base <= self.delta_upper + crate::bounds::SOUNDNESS_SLACK
    }

    pub fn term_bounds_hold(&self) -> bool {
        self.a_sum + 1e-9 >= self.hp.a_lower
            && self.sqrt_f_f <= self.hp.sqrt_f_f_upper + 1e-9
            && self.delta_max <= self.hp.delta_max_upper + 1e-9
    }
}

/// Sweep `l` at fixed `(k, N)` and compare the assembled lower bound with the
/// seesaw recovery error. Rows with `l ≥ N + k` are reported as trivial.
pub fn foggy_mirror_experiment(cfg: &HpConfig, ls: &[usize], opts: &SeesawOptions) -> Result<Vec<FoggyRow>> {
    let mut rows = Vec::new();
    for &l in ls {
        let c = HpConfig { l, samples: 1, ..cfg.clone() };
        c.validate()?;
        let inst = build_hp_instance(&c, 0)?;
        let eq = equidistribution_check(&c)?;
        let eps = eq.epsilon_hat.ok_or_else(|| Error::Undefined("M γ = 0".into()))?;
        let params = HpBoundParams {
            k: c.k as f64,
            n: c.n as f64,
            l: l as f64,
            m: eq.m,
            eps,
            f: 4.0 * variance(&inst.rho_b(), &inst.charge().x_b),
        };
        let hp = hp_bounds(&params)?;
        let terms = bound_terms(&inst, FluctuationStrategy::Exact)?;
        let fl = dynamical_fluctuation(&inst, FluctuationStrategy::Exact)?;
        let up = optimize_recovery(&inst, RecoveryMode::WithRb, opts)?.achieved_error;
        rows.push(FoggyRow {
            l,
            gamma: hp.gamma,
            epsilon_hat: eps,
            base_bound: eq.m / (2.0 * (c.n as f64 + 2.0 * c.k as f64)),
            hp,
            siq1: terms.lhs(BoundKind::Siq1)?,
            siq2: terms.lhs(BoundKind::Siq2)?,
            delta_upper: up,
            a_sum: fl.a_sum,
            sqrt_f_f: terms.f_f.sqrt(),
            delta_max: fl.delta_max,
        });
    }
    Ok(rows)
}

#[derive(Clone, Copy, Debug)]
pub struct ControlRow {
    pub l: usize,
    pub delta_upper: f64,
    /// `2^{−(l−k)}`
    pub reference: f64,
}

/// Same sweep with an unrestricted Haar unitary.
pub fn no_symmetry_control(cfg: &HpConfig, ls: &[usize], opts: &SeesawOptions) -> Result<Vec<ControlRow>> {
    let mut rows = Vec::new();
    for &l in ls {
        let c = HpConfig { l, ..cfg.clone() };
        c.validate()?;
        let mut rng = rng_from_seed(c.seed ^ 0x6e6f_7379);
        let u = haar_unitary(&mut rng, 1 << c.total());
        let inst = instance_with_unitary(&c, u)?;
        let up = optimize_recovery(&inst, RecoveryMode::WithRb, opts)?.achieved_error;
        rows.push(ControlRow { l, delta_upper: up, reference: 2f64.powi(-(l as i32 - c.k as i32)) });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_qubit_sector_structure() {
        let cfg = HpConfig::new(1, 1, 1);
        let dims: Vec<usize> = charge_sectors(&cfg.charge().total()).unwrap().iter().map(|s| s.dim()).collect();
        assert_eq!(dims, vec![1, 2, 1]);
        build_hp_instance(&cfg, 0).unwrap();
    }

    #[test]
    fn maximally_entangled_inputs_give_maximally_mixed_marginals() {
        let inst = build_hp_instance(&HpConfig::new(1, 2, 1), 0).unwrap();
        assert!(crate::linalg::max_abs(&(inst.rho_a() - CMat::identity(2, 2).scale(0.5))) < 1e-12);
        assert!(crate::linalg::max_abs(&(inst.rho_b() - CMat::identity(4, 4).scale(0.25))) < 1e-12);
    }

    #[test]
    fn eigen_mixture_mean_deviation() {
        let cfg = HpConfig { psi: PsiSelector::EigenMixture(vec![(3, 0.5), (1, 0.5)]), ..HpConfig::new(4, 1, 1) };
        let inst = build_hp_instance(&cfg, 0).unwrap();
        let m = mean_deviation(&inst.rho_a(), &inst.charge().x_a).unwrap();
        assert!((m - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_output_has_no_charge() {
        let cfg = HpConfig { samples: 3, ..HpConfig::new(1, 2, 0) };
        let r = equidistribution_check(&cfg).unwrap();
        assert!(r.probe_deviation < 1e-12);
    }

    #[test]
    fn bookkeeping_and_conservation_hold() {
        let cfg = HpConfig { samples: 5, ..HpConfig::new(1, 3, 2) };
        let r = equidistribution_check(&cfg).unwrap();
        assert!(r.bookkeeping_error < 1e-10);
        assert!(r.conservation_spread < 1e-9);
    }

    #[test]
    fn concentration_bound_value() {
        let cfg = HpConfig { s: 1, ..HpConfig::new(1, 3, 2) };
        assert!((concentration_bound(&cfg, 0.5) - 2.0 * (-1.0f64 / 384.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn oversized_configurations_are_rejected() {
        assert!(HpConfig::new(6, 7, 1).validate().is_err());
        assert!(HpConfig::new(1, 3, 5).validate().is_err());
    }
}
