//! Recovery maps: Petz recovery, the seesaw fidelity optimizer, decoupling
//! residuals, implementation error of a target unitary and code error.

use rand::Rng;

use crate::channel::{compress_kraus, Instance, QuantumChannel, A, A_OUT, B_OUT, RB};
use crate::error::{Error, Result};
use crate::linalg::{
    check_square, ginibre, haar_isometry, hermitian_spectrum, max_abs, nearest_isometry,
    partial_trace, polar_isometry, psd_inv_sqrt, psd_spectrum, psd_sqrt, rng_from_seed,
    singular_values, CMat, CVec, Layout, C64,
};
use crate::metrics::purified_distance;

/// Weight of the maximally mixed state blended into a Petz prior.
pub const PETZ_REGULARIZATION: f64 = 1e-9;
const PETZ_CUTOFF: f64 = 1e-13;
const SUPPORT_CUTOFF: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct SeesawOptions {
    pub max_iters: usize,
    /// Stop when the error improves by less than this in one sweep.
    pub tol: f64,
    pub random_restarts: usize,
    pub seed: u64,
    /// Upper limit on the recovery's environment dimension.
    pub env_cap: usize,
}

impl Default for SeesawOptions {
    fn default() -> Self {
        SeesawOptions { max_iters: 500, tol: 1e-10, random_restarts: 3, seed: 0, env_cap: 256 }
    }
}

/// A reference state `Ψ[a, r]` on `A ⊗ R` together with the global pure state
/// `Ω[r, q, b]` whose `Q` part the recovery acts on.
#[derive(Clone, Debug)]
pub struct RecoveryTarget {
    pub psi: CMat,
    pub omega: CVec,
    pub dq: usize,
    pub db: usize,
    pub weight: f64,
}

impl RecoveryTarget {
    pub fn dr(&self) -> usize {
        self.psi.ncols()
    }

    pub fn da(&self) -> usize {
        self.psi.nrows()
    }

    /// `Ω_r` as a `dq × db` matrix.
    fn omega_block(&self, r: usize) -> CMat {
        let (dq, db) = (self.dq, self.db);
        CMat::from_fn(dq, db, |q, b| self.omega[(r * dq + q) * db + b])
    }
}

/// Purified distance between `Ψ` and the output of the recovery with
/// Stinespring isometry `w : Q → A ⊗ E` (`env` = dim E), evaluated from the
/// amplitudes of the purified output so that small errors keep full precision.
pub fn recovery_error(target: &RecoveryTarget, w: &CMat, env: usize) -> Result<f64> {
    let da = target.da();
    let dr = target.dr();
    let (dq, db) = (target.dq, target.db);
    if w.ncols() != dq || w.nrows() != da * env {
        return Err(Error::DimensionMismatch { expected: da * env * dq, found: w.len() });
    }
    // Ω_W[r] = W Ω_r : rows (a, e), cols b.
    let blocks: Vec<CMat> = (0..dr).map(|r| w * target.omega_block(r)).collect();
    let mut v = CMat::zeros(env, db);
    for (r, blk) in blocks.iter().enumerate() {
        for a in 0..da {
            let ca = target.psi[(a, r)].conj();
            if ca == C64::new(0.0, 0.0) {
                continue;
            }
            for e in 0..env {
                for b in 0..db {
                    v[(e, b)] += ca * blk[(a * env + e, b)];
                }
            }
        }
    }
    let mut res = 0.0;
    for (r, blk) in blocks.iter().enumerate() {
        for a in 0..da {
            let p = target.psi[(a, r)];
            for e in 0..env {
                for b in 0..db {
                    res += (blk[(a * env + e, b)] - p * v[(e, b)]).norm_sqr();
                }
            }
        }
    }
    Ok(res.sqrt().min(1.0))
}

/// Petz recovery of `channel` with respect to `prior`, regularised by
/// blending `PETZ_REGULARIZATION` of the maximally mixed state into the prior.
/// Outside the support of `channel(prior)` the map resets to `|0⟩`.
pub fn petz_recovery(channel: &QuantumChannel, prior: &CMat) -> Result<QuantumChannel> {
    let kraus = petz_kraus(channel, prior)?;
    QuantumChannel::from_kraus(&kraus, channel.output().clone(), channel.input().clone())
}

fn petz_kraus(channel: &QuantumChannel, prior: &CMat) -> Result<Vec<CMat>> {
    let din = channel.input_dim();
    check_square(prior, din)?;
    let eps = PETZ_REGULARIZATION;
    let sigma = prior.scale(1.0 - eps) + CMat::identity(din, din).scale(eps / din as f64);
    let out = channel.apply(&sigma)?;
    let out = crate::linalg::hermitian_part(&out);
    let inv = psd_inv_sqrt(&out, PETZ_CUTOFF)?;
    let sq = psd_sqrt(&sigma)?;
    let mut kraus: Vec<CMat> = channel.kraus().iter().map(|k| &sq * k.adjoint() * &inv).collect();
    let eig = psd_spectrum(&out)?;
    for (i, &lam) in eig.values.iter().enumerate() {
        if lam <= PETZ_CUTOFF {
            let kvec = eig.vector(i);
            let mut op = CMat::zeros(din, channel.output_dim());
            for j in 0..channel.output_dim() {
                op[(0, j)] = kvec[j].conj();
            }
            kraus.push(op);
        }
    }
    Ok(kraus)
}

#[derive(Clone, Debug)]
pub struct SeesawOutcome {
    /// Stinespring isometry on the full `Q` space, rows `(a, e)`.
    pub isometry: CMat,
    pub env_dim: usize,
    /// Re-evaluated error for each target.
    pub errors: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final internal error of every start (Petz/initial maps first).
    pub start_errors: Vec<f64>,
}

struct Compressed {
    basis: CMat,
    /// Per target, `T_a` blocks stacked as `s × (da·db)`.
    t: Vec<CMat>,
    dbs: Vec<usize>,
    weights: Vec<f64>,
}

fn compress(targets: &[RecoveryTarget]) -> Result<Compressed> {
    let dq = targets[0].dq;
    let mut rho_q = CMat::zeros(dq, dq);
    for t in targets {
        for r in 0..t.dr() {
            let o = t.omega_block(r);
            rho_q += (&o * o.adjoint()).scale(t.weight);
        }
    }
    let rho_q = crate::linalg::hermitian_part(&rho_q);
    let eig = hermitian_spectrum(&rho_q)?;
    let keep: Vec<usize> = (0..dq).filter(|&i| eig.values[i] > SUPPORT_CUTOFF).collect();
    let keep = if keep.is_empty() { vec![0] } else { keep };
    let basis = CMat::from_fn(dq, keep.len(), |i, j| eig.vectors[(i, keep[j])]);
    let s = basis.ncols();
    let mut ts = Vec::new();
    let mut dbs = Vec::new();
    for t in targets {
        let da = t.da();
        let db = t.db;
        let mut tm = CMat::zeros(s, da * db);
        for r in 0..t.dr() {
            let o = basis.adjoint() * t.omega_block(r);
            for a in 0..da {
                let ca = t.psi[(a, r)].conj();
                if ca == C64::new(0.0, 0.0) {
                    continue;
                }
                for i in 0..s {
                    for b in 0..db {
                        tm[(i, a * db + b)] += ca * o[(i, b)];
                    }
                }
            }
        }
        ts.push(tm);
        dbs.push(db);
    }
    let wsum: f64 = targets.iter().map(|t| t.weight).sum();
    Ok(Compressed { basis, t: ts, dbs, weights: targets.iter().map(|t| t.weight / wsum).collect() })
}

/// `(Σ_t w_t F_t, [v_t])` for isometry `w` on the compressed space.
fn objective(c: &Compressed, w: &CMat, da: usize, de: usize) -> (f64, Vec<CMat>) {
    let mut total = 0.0;
    let mut vs = Vec::with_capacity(c.t.len());
    for (k, t) in c.t.iter().enumerate() {
        let db = c.dbs[k];
        let mut v = CMat::zeros(de, db);
        for a in 0..da {
            let wa = w.rows(a * de, de);
            let ta = t.columns(a * db, db);
            v += wa * ta;
        }
        let f = v.norm();
        total += c.weights[k] * f;
        vs.push(v);
    }
    (total, vs)
}

fn error_of(obj: f64) -> f64 {
    (1.0 - obj * obj).max(0.0).sqrt()
}

fn seesaw_run(c: &Compressed, mut w: CMat, da: usize, de: usize, opts: &SeesawOptions) -> (CMat, f64, usize, bool) {
    let s = c.basis.ncols();
    let (mut obj, mut vs) = objective(c, &w, da, de);
    let mut err = error_of(obj);
    for it in 0..opts.max_iters {
        let mut g = CMat::zeros(s, da * de);
        for (k, t) in c.t.iter().enumerate() {
            let db = c.dbs[k];
            let f = vs[k].norm();
            if f <= 0.0 {
                continue;
            }
            let chi_adj = vs[k].adjoint().unscale(f);
            for a in 0..da {
                let ta = t.columns(a * db, db);
                let blk = ta * &chi_adj;
                let mut gcols = g.columns_mut(a * de, de);
                gcols += blk.scale(c.weights[k]);
            }
        }
        let w_new = polar_isometry(&g);
        let (obj_new, vs_new) = objective(c, &w_new, da, de);
        debug_assert!(obj_new >= obj - 1e-12, "seesaw objective decreased: {obj} -> {obj_new}");
        let err_new = error_of(obj_new);
        let improvement = err - err_new;
        if obj_new >= obj {
            w = w_new;
            obj = obj_new;
            vs = vs_new;
            err = err_new;
        }
        if improvement < opts.tol {
            return (w, obj, it + 1, true);
        }
    }
    (w, obj, opts.max_iters, false)
}

/// Isometry on the compressed space representing the given Kraus set.
fn kraus_to_compressed(kraus: &[CMat], basis: &CMat, da: usize, de: usize) -> CMat {
    let restricted: Vec<CMat> = kraus.iter().map(|k| k * basis).collect();
    let compact = compress_kraus(&restricted, de);
    let s = basis.ncols();
    let mut w = CMat::zeros(da * de, s);
    for (e, k) in compact.iter().enumerate() {
        for a in 0..da {
            for i in 0..s {
                w[(a * de + e, i)] = k[(a, i)];
            }
        }
    }
    nearest_isometry(&w)
}

/// Maximise the weighted average fidelity of recovering every target with one
/// channel. Starts from each Kraus set in `initial` and from
/// `opts.random_restarts` Haar-random isometries; keeps the best run.
pub fn seesaw(targets: &[RecoveryTarget], initial: &[Vec<CMat>], opts: &SeesawOptions) -> Result<SeesawOutcome> {
    if targets.is_empty() {
        return Err(Error::InvalidInput("no recovery targets".into()));
    }
    let da = targets[0].da();
    let dq = targets[0].dq;
    for t in targets {
        if t.da() != da || t.dq != dq {
            return Err(Error::DimensionMismatch { expected: da * dq, found: t.da() * t.dq });
        }
        if t.omega.len() != t.dr() * t.dq * t.db {
            return Err(Error::DimensionMismatch { expected: t.dr() * t.dq * t.db, found: t.omega.len() });
        }
    }
    let c = compress(targets)?;
    let s = c.basis.ncols();
    let de = (s * da).min(opts.env_cap).max(s.div_ceil(da)).max(1);
    let mut starts: Vec<CMat> = initial.iter().map(|k| kraus_to_compressed(k, &c.basis, da, de)).collect();
    let mut rng = rng_from_seed(opts.seed);
    for _ in 0..opts.random_restarts {
        starts.push(haar_isometry(&mut rng, da * de, s));
    }
    let mut best: Option<(CMat, f64, usize, bool)> = None;
    let mut start_errors = Vec::new();
    for w0 in starts {
        let run = seesaw_run(&c, w0, da, de, opts);
        start_errors.push(error_of(run.1));
        if best.as_ref().map(|b| run.1 > b.1).unwrap_or(true) {
            best = Some(run);
        }
    }
    let (w, _, iterations, converged) = best.expect("at least one start");
    // Extend to the full Q space; the complement of the support resets to |0⟩.
    let env = de + dq;
    let proj_c = CMat::identity(dq, dq) - &c.basis * c.basis.adjoint();
    let wb = &w * c.basis.adjoint();
    let mut full = CMat::zeros(da * env, dq);
    for a in 0..da {
        for e in 0..de {
            for q in 0..dq {
                full[(a * env + e, q)] = wb[(a * de + e, q)];
            }
        }
    }
    for e in 0..dq {
        for q in 0..dq {
            full[(de + e, q)] = proj_c[(e, q)];
        }
    }
    let errors = targets.iter().map(|t| recovery_error(t, &full, env)).collect::<Result<Vec<_>>>()?;
    Ok(SeesawOutcome { isometry: full, env_dim: env, errors, iterations, converged, start_errors })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecoveryMode {
    /// Recovery acts on `A'` and `R_B`.
    WithRb,
    /// Recovery acts on `A'` only.
    WithoutRb,
}

#[derive(Clone, Debug)]
pub struct RecoveryResult {
    pub channel: QuantumChannel,
    pub achieved_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start_errors: Vec<f64>,
}

/// Recovery target for an instance: reference `ψ_{AR_A}` against the
/// scrambled state with the recovery acting on `A'` (and `R_B`).
pub fn instance_target(inst: &Instance, mode: RecoveryMode) -> Result<RecoveryTarget> {
    let s = inst.scramble()?;
    let q: Vec<&str> = match mode {
        RecoveryMode::WithRb => vec![A_OUT, RB],
        RecoveryMode::WithoutRb => vec![A_OUT],
    };
    let (omega, _dr, dq, db) = s.arranged(&q)?;
    Ok(RecoveryTarget { psi: inst.psi_matrix(), omega, dq, db, weight: 1.0 })
}

/// Seesaw-optimised recovery. The error is an upper estimate of the optimal
/// recovery error (`δ` for `WithRb`, `δ̃` for `WithoutRb`).
pub fn optimize_recovery(inst: &Instance, mode: RecoveryMode, opts: &SeesawOptions) -> Result<RecoveryResult> {
    let target = instance_target(inst, mode)?;
    let forward = match mode {
        RecoveryMode::WithRb => inst.channel_to_a_out_rb()?,
        RecoveryMode::WithoutRb => inst.channel_e()?,
    };
    let petz = petz_kraus(&forward, &inst.rho_a())?;
    let out = seesaw(&[target], &[petz], opts)?;
    let channel = QuantumChannel::new(
        out.isometry,
        forward.output().clone(),
        Layout::single(A, inst.dims.a)?,
        out.env_dim,
    )?;
    Ok(RecoveryResult {
        channel,
        achieved_error: out.errors[0],
        iterations: out.iterations,
        converged: out.converged,
        start_errors: out.start_errors,
    })
}

/// Error of a given recovery channel on an instance (exact evaluation).
pub fn evaluate_recovery(inst: &Instance, mode: RecoveryMode, recovery: &QuantumChannel) -> Result<f64> {
    let target = instance_target(inst, mode)?;
    recovery_error(&target, recovery.isometry(), recovery.env_dim())
}

/// Ensemble `{(p_j, ρ_j)}`.
pub type Decomposition = Vec<(f64, CMat)>;

/// Spectral ensemble of `rho`, dropping eigenvalues at or below `cutoff`.
pub fn eigen_decomposition(rho: &CMat, cutoff: f64) -> Result<Decomposition> {
    let s = hermitian_spectrum(rho)?;
    Ok((0..s.dim())
        .filter(|&i| s.values[i] > cutoff)
        .map(|i| {
            let v = s.vector(i);
            (s.values[i], &v * v.adjoint())
        })
        .collect())
}

pub fn check_decomposition(rho: &CMat, dec: &[(f64, CMat)]) -> Result<()> {
    let d = rho.nrows();
    let mut acc = CMat::zeros(d, d);
    for (p, r) in dec {
        if *p < -1e-12 {
            return Err(Error::BadDecomposition(*p));
        }
        check_square(r, d)?;
        acc += r.scale(*p);
    }
    let dev = max_abs(&(acc - rho));
    if dev > 1e-8 {
        return Err(Error::BadDecomposition(dev));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DecouplingReport {
    /// `Σ_j p_j D_F(ρ^f_{j,B'}, ρ^f_{B'})²`
    pub residual_to_average: f64,
    /// `D_F(ρ^f_{j,B'}, ρ^f_{B'})²` per term.
    pub per_term: Vec<f64>,
    /// Upper estimate of `min_σ Σ_j p_j D_F(ρ^f_{j,B'}, σ)²`.
    pub residual_to_best: f64,
    pub best_sigma: CMat,
}

/// Decoupling residuals of `B'` over a decomposition of `ρ_A`.
pub fn decoupling_residuals(inst: &Instance, dec: &[(f64, CMat)]) -> Result<DecouplingReport> {
    let rho_a = inst.rho_a();
    check_decomposition(&rho_a, dec)?;
    let avg = inst.apply_complement(&rho_a)?;
    let outs: Vec<(f64, CMat)> = dec
        .iter()
        .filter(|(p, _)| *p > 0.0)
        .map(|(p, r)| Ok((*p, inst.apply_complement(r)?)))
        .collect::<Result<_>>()?;
    let mut to_avg = 0.0;
    let mut per_term = Vec::with_capacity(outs.len());
    for (p, r) in &outs {
        let d = purified_distance(r, &avg)?;
        to_avg += p * d * d;
        per_term.push(d * d);
    }
    let (sigma, best) = fidelity_barycenter(&outs, &avg, 200)?;
    Ok(DecouplingReport { residual_to_average: to_avg, per_term, residual_to_best: best.min(to_avg), best_sigma: sigma })
}

/// Alternating maximisation of `Σ_j p_j F(ρ_j, σ)²` over `σ` via
/// purifications. Returns `σ` and `Σ_j p_j D_F(ρ_j, σ)²`.
fn fidelity_barycenter(states: &[(f64, CMat)], start: &CMat, iters: usize) -> Result<(CMat, f64)> {
    let d = start.nrows();
    let sqrt_states: Vec<CMat> = states.iter().map(|(_, r)| psd_sqrt(r)).collect::<Result<_>>()?;
    let mut s_mat = psd_sqrt(start)?;
    let eval = |sigma: &CMat| -> Result<f64> {
        let mut acc = 0.0;
        for (p, r) in states {
            let dist = purified_distance(r, sigma)?;
            acc += p * dist * dist;
        }
        Ok(acc)
    };
    let mut best_sigma = start.clone();
    let mut best = eval(start)?;
    let mut prev = best;
    for _ in 0..iters {
        // Uhlmann step: purification √ρ_j Y_j aligned with the current one.
        let mut m = CMat::zeros(d * d, d * d);
        for (k, (p, _)) in states.iter().enumerate() {
            let g = &sqrt_states[k] * &s_mat;
            let aligned = &sqrt_states[k] * nearest_isometry(&g);
            let v = CVec::from_iterator(d * d, (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| aligned[(i, j)]));
            m += (&v * v.adjoint()).scale(*p);
        }
        let eig = hermitian_spectrum(&crate::linalg::hermitian_part(&m))?;
        let top = eig.vector(0);
        s_mat = CMat::from_fn(d, d, |i, j| top[i * d + j]);
        let sigma = &s_mat * s_mat.adjoint();
        let val = eval(&sigma)?;
        if val < best {
            best = val;
            best_sigma = sigma;
        }
        if (prev - val).abs() < 1e-13 {
            break;
        }
        prev = val;
    }
    Ok((best_sigma, best))
}

/// `Σ_κ |Tr(Ψ† L_κ Ψ)|²`, the squared fidelity of `Ψ` with `(id ⊗ Φ)(Ψ)`.
fn pure_fidelity_sq(kraus: &[CMat], psi: &CMat) -> f64 {
    kraus.iter().map(|l| crate::linalg::trace_product(&psi.adjoint(), &(l * psi)).norm_sqr()).sum()
}

/// Local search maximising `D_F(Ψ, (id ⊗ Φ)(Ψ))` over pure inputs.
fn worst_input(kraus: &[CMat], start: &CMat, iters: usize) -> (CMat, f64) {
    let mut psi = start.unscale(start.norm());
    let mut f = pure_fidelity_sq(kraus, &psi);
    let mut step = 0.5;
    for _ in 0..iters {
        let mut grad = CMat::zeros(psi.nrows(), psi.ncols());
        for l in kraus {
            let lp = l * &psi;
            let cval = crate::linalg::trace_product(&psi.adjoint(), &lp);
            grad += lp.scale(1.0) * cval.conj() + (l.adjoint() * &psi) * cval;
        }
        let overlap = crate::linalg::trace_product(&psi.adjoint(), &grad);
        let tangent = &grad - psi.scale(1.0) * overlap;
        if tangent.norm() < 1e-14 {
            break;
        }
        let mut improved = false;
        while step > 1e-12 {
            let cand = &psi - tangent.scale(step);
            let cand = cand.unscale(cand.norm());
            let fc = pure_fidelity_sq(kraus, &cand);
            if fc < f {
                let gain = f - fc;
                psi = cand;
                f = fc;
                step *= 1.5;
                improved = gain > 1e-15;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (psi, (1.0 - f).max(0.0).sqrt())
}

fn random_input<R: Rng>(rng: &mut R, d: usize, dr: usize) -> CMat {
    let g = ginibre(rng, d, dr);
    g.unscale(g.norm())
}

fn maximally_entangled(d: usize) -> CMat {
    CMat::identity(d, d).unscale((d as f64).sqrt())
}

#[derive(Clone, Debug)]
pub struct ImplementationReport {
    /// Lower estimate of `max_ψ D_F(ψ, (id ⊗ U†∘ℰ)(ψ))`.
    pub estimate: f64,
    pub worst_input: CMat,
    /// Error on the maximally entangled input.
    pub maximally_entangled_error: f64,
}

/// Implementation error of `target` by `channel` (same input and output
/// dimension). Searches from the maximally entangled input, `candidates`
/// (as `Ψ[a, r]` matrices) and 8 random inputs.
pub fn implementation_error(
    channel: &QuantumChannel,
    target: &CMat,
    candidates: &[CMat],
    seed: u64,
) -> Result<ImplementationReport> {
    let d = channel.input_dim();
    if channel.output_dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: channel.output_dim() });
    }
    check_square(target, d)?;
    let kraus: Vec<CMat> = channel.kraus().iter().map(|k| target.adjoint() * k).collect();
    let kraus = compress_kraus(&kraus, d * d);
    let me = maximally_entangled(d);
    let me_err = (1.0 - pure_fidelity_sq(&kraus, &me)).max(0.0).sqrt();
    let mut starts = vec![me.clone()];
    for cnd in candidates {
        if cnd.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, found: cnd.nrows() });
        }
        starts.push(cnd.clone());
    }
    let mut rng = rng_from_seed(seed);
    for _ in 0..8 {
        starts.push(random_input(&mut rng, d, d));
    }
    let mut best = (me, me_err);
    for s in starts {
        let base = (1.0 - pure_fidelity_sq(&kraus, &s.unscale(s.norm()))).max(0.0).sqrt();
        if base > best.1 {
            best = (s.unscale(s.norm()), base);
        }
        let (psi, e) = worst_input(&kraus, &s, 300);
        if e > best.1 {
            best = (psi, e);
        }
    }
    Ok(ImplementationReport { estimate: best.1, worst_input: best.0, maximally_entangled_error: me_err })
}

#[derive(Clone, Debug)]
pub struct CodeErrorOptions {
    pub outer_rounds: usize,
    pub random_inputs: usize,
    pub seed: u64,
    pub seesaw: SeesawOptions,
}

impl Default for CodeErrorOptions {
    fn default() -> Self {
        CodeErrorOptions { outer_rounds: 20, random_inputs: 32, seed: 0, seesaw: SeesawOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct CodeErrorReport {
    /// Seesaw recovery error on the maximally entangled logical input.
    pub maximally_entangled_error: f64,
    /// Worst-case error over the searched inputs for the best recovery found.
    pub worst_case_estimate: f64,
    pub recovery: QuantumChannel,
    /// Worst-case error after each outer round.
    pub rounds: Vec<f64>,
}

fn code_target(v_enc: &CMat, dq: usize, db: usize, psi: &CMat) -> RecoveryTarget {
    let dl = psi.nrows();
    let dr = psi.ncols();
    let mut omega = CVec::zeros(dr * dq * db);
    for r in 0..dr {
        for row in 0..dq * db {
            let mut s = C64::new(0.0, 0.0);
            for a in 0..dl {
                s += v_enc[(row, a)] * psi[(a, r)];
            }
            omega[r * dq * db + row] = s;
        }
    }
    RecoveryTarget { psi: psi.clone(), omega, dq, db, weight: 1.0 }
}

/// Code error `min_R max_ψ D_F(ψ, (id ⊗ R∘N∘C)(ψ))` of the encoding isometry
/// `code` (`d_P × d_L`) under `noise`. Alternates seesaw recovery against the
/// pool of worst inputs found so far with a worst-input search.
pub fn code_error(code: &CMat, noise: &QuantumChannel, opts: &CodeErrorOptions) -> Result<CodeErrorReport> {
    let dl = code.ncols();
    if code.nrows() != noise.input_dim() {
        return Err(Error::DimensionMismatch { expected: noise.input_dim(), found: code.nrows() });
    }
    let dev = crate::linalg::isometry_deviation(code);
    if dev > crate::channel::CHANNEL_TOL {
        return Err(Error::NotIsometry(dev));
    }
    let logical = Layout::single("L", dl)?;
    let enc = QuantumChannel::new(code.clone(), logical.clone(), noise.input().clone(), 1)?;
    let full = enc.then(noise)?;
    let dq = full.output_dim();
    let db = full.env_dim();
    let v_enc = full.isometry().clone();
    let petz = petz_kraus(&full, &CMat::identity(dl, dl).unscale(dl as f64))?;

    let me = maximally_entangled(dl);
    let mut pool = vec![me.clone()];
    let first = seesaw(&[code_target(&v_enc, dq, db, &me)], &[petz.clone()], &opts.seesaw)?;
    let me_error = first.errors[0];
    let mut current = first;
    let mut rng = rng_from_seed(opts.seed ^ 0x5eed);
    let random_starts: Vec<CMat> = (0..opts.random_inputs).map(|_| random_input(&mut rng, dl, dl)).collect();
    let mut rounds = Vec::new();
    let mut best: Option<(f64, CMat, usize)> = None;
    for round in 0..opts.outer_rounds.max(1) {
        let rec = QuantumChannel::new(current.isometry.clone(), full.output().clone(), logical.clone(), current.env_dim)?;
        let phi = full.then(&rec)?;
        let kraus = compress_kraus(&phi.kraus(), dl * dl);
        let mut worst = (me.clone(), (1.0 - pure_fidelity_sq(&kraus, &me)).max(0.0).sqrt());
        for s in random_starts.iter().chain(pool.iter()) {
            let (psi, e) = worst_input(&kraus, s, 200);
            if e > worst.1 {
                worst = (psi, e);
            }
        }
        rounds.push(worst.1);
        if best.as_ref().map(|b| worst.1 < b.0).unwrap_or(true) {
            best = Some((worst.1, current.isometry.clone(), current.env_dim));
        }
        if worst.1 - me_error < 1e-9 || round + 1 == opts.outer_rounds {
            break;
        }
        pool.push(worst.0);
        let targets: Vec<RecoveryTarget> = pool.iter().map(|p| code_target(&v_enc, dq, db, p)).collect();
        let init = vec![rec.kraus(), petz.clone()];
        let mut o = opts.seesaw.clone();
        o.seed = opts.seesaw.seed.wrapping_add(round as u64 + 1);
        o.random_restarts = 0;
        current = seesaw(&targets, &init, &o)?;
    }
    let (worst_case, iso, env) = best.expect("at least one round");
    let recovery = QuantumChannel::new(iso, full.output().clone(), logical, env)?;
    Ok(CodeErrorReport { maximally_entangled_error: me_error, worst_case_estimate: worst_case, recovery, rounds })
}

/// Marginal `ρ^f_{B'}` of the scrambled state.
pub fn final_b_out(inst: &Instance) -> Result<CMat> {
    let layout = Layout::new(&[(A_OUT, inst.dims.a_out), (B_OUT, inst.dims.b_out)])?;
    Ok(partial_trace(&inst.joint_output(&inst.rho_a())?, &layout, &[B_OUT])?.0)
}

/// Largest singular value gap helper used by diagnostics.
pub fn nuclear_norm(m: &CMat) -> f64 {
    singular_values(m).iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{Charges, Dims};
    use crate::linalg::{diag_real, haar_unitary, outer, random_density, random_pure_state};
    use crate::metrics::fidelity_pure;

    fn bell() -> CVec {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CVec::from_vec(vec![C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)])
    }

    fn n() -> CMat {
        diag_real(&[0.0, 1.0])
    }

    fn identity_instance() -> Instance {
        let dims = Dims { a: 2, ra: 2, b: 2, rb: 2, a_out: 2, b_out: 2 };
        let ch = Charges { x_a: n(), x_b: n(), x_a_out: n(), x_b_out: n() };
        Instance::new(bell(), bell(), CMat::identity(4, 4), dims, vec![ch]).unwrap()
    }

    #[test]
    fn identity_dynamics_is_recovered_exactly_without_rb() {
        let inst = identity_instance();
        let r = optimize_recovery(&inst, RecoveryMode::WithoutRb, &SeesawOptions::default()).unwrap();
        assert!(r.achieved_error <= 1e-8, "{}", r.achieved_error);
    }

    #[test]
    fn recovery_error_matches_density_matrix_route() {
        let mut rng = rng_from_seed(41);
        let u = haar_unitary(&mut rng, 4);
        let dims = Dims { a: 2, ra: 2, b: 2, rb: 2, a_out: 2, b_out: 2 };
        let ch = Charges { x_a: n(), x_b: n(), x_a_out: n(), x_b_out: n() };
        let inst = Instance::new(random_pure_state(&mut rng, 4), random_pure_state(&mut rng, 4), u, dims, vec![ch]).unwrap();
        let opts = SeesawOptions { max_iters: 20, ..Default::default() };
        let r = optimize_recovery(&inst, RecoveryMode::WithRb, &opts).unwrap();
        // Apply the recovery to the scrambled state directly.
        let s = inst.scramble().unwrap();
        let rho = s.reduced(&[A_OUT, RB, crate::channel::RA]).unwrap();
        let layout = Layout::new(&[(A_OUT, 2), (RB, 2), (crate::channel::RA, 2)]).unwrap();
        let (out, l) = r.channel.apply_on(&rho, &layout).unwrap();
        assert_eq!(l.labels(), vec!["A", "RA"]);
        let f = fidelity_pure(&inst.psi, &out).unwrap();
        let direct = (1.0 - f * f).max(0.0).sqrt();
        assert!((direct - r.achieved_error).abs() < 1e-7, "{direct} vs {}", r.achieved_error);
    }

    #[test]
    fn seesaw_beats_or_matches_petz_start() {
        let mut rng = rng_from_seed(42);
        let u = haar_unitary(&mut rng, 8);
        let dims = Dims { a: 2, ra: 2, b: 4, rb: 4, a_out: 2, b_out: 4 };
        let x4 = diag_real(&[0.0, 1.0, 1.0, 2.0]);
        let ch = Charges { x_a: n(), x_b: x4.clone(), x_a_out: n(), x_b_out: x4 };
        let inst = Instance::new(random_pure_state(&mut rng, 4), random_pure_state(&mut rng, 16), u, dims, vec![ch]).unwrap();
        let forward = inst.channel_to_a_out_rb().unwrap();
        let petz = petz_recovery(&forward, &inst.rho_a()).unwrap();
        let petz_err = evaluate_recovery(&inst, RecoveryMode::WithRb, &petz).unwrap();
        let r = optimize_recovery(&inst, RecoveryMode::WithRb, &SeesawOptions::default()).unwrap();
        assert!(r.achieved_error <= petz_err + 1e-9, "{} > {petz_err}", r.achieved_error);
    }

    #[test]
    fn petz_is_trace_preserving_and_inverts_unitaries() {
        let mut rng = rng_from_seed(43);
        let u = haar_unitary(&mut rng, 3);
        let l = Layout::single("X", 3).unwrap();
        let ch = QuantumChannel::from_unitary(u, l.clone(), l).unwrap();
        let prior = random_density(&mut rng, 3, 3);
        let p = petz_recovery(&ch, &prior).unwrap();
        assert!(p.trace_preservation_error() < 1e-8);
        let rho = random_density(&mut rng, 3, 3);
        let back = p.apply(&ch.apply(&rho).unwrap()).unwrap();
        assert!(max_abs(&(back - rho)) < 1e-8);
    }

    #[test]
    fn decoupling_residuals_for_identity_and_swap() {
        // Identity keeps B' = B, which is independent of ρ_j; swap moves A into B'.
        let inst = identity_instance();
        let dec = vec![(0.5, outer(&crate::linalg::basis_vector(2, 0))), (0.5, outer(&crate::linalg::basis_vector(2, 1)))];
        let rep = decoupling_residuals(&inst, &dec).unwrap();
        assert!(rep.residual_to_average < 1e-12);
        let mut u = CMat::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            u[(i, j)] = C64::new(1.0, 0.0);
        }
        let swapped = Instance { u, ..inst };
        let rep = decoupling_residuals(&swapped, &dec).unwrap();
        // D_F(|0⟩⟨0|, 1/2)² = 1/2 for each term.
        assert!((rep.residual_to_average - 0.5).abs() < 1e-10);
        assert!(rep.residual_to_best <= rep.residual_to_average + 1e-12);
    }

    #[test]
    fn bad_decomposition_is_rejected() {
        let inst = identity_instance();
        let dec = vec![(1.0, outer(&crate::linalg::basis_vector(2, 0)))];
        assert!(matches!(decoupling_residuals(&inst, &dec), Err(Error::BadDecomposition(_))));
    }

    #[test]
    fn implementation_error_of_dephasing_is_one_over_root_two() {
        let l = Layout::single("Q", 2).unwrap();
        let kraus = vec![diag_real(&[1.0, 0.0]), diag_real(&[0.0, 1.0])];
        let ch = QuantumChannel::from_kraus(&kraus, l.clone(), l).unwrap();
        let rep = implementation_error(&ch, &CMat::identity(2, 2), &[], 1).unwrap();
        assert!((rep.estimate - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn identity_noise_has_zero_code_error() {
        let code = CMat::identity(2, 2);
        let l = Layout::single("P0", 2).unwrap();
        let noise = QuantumChannel::identity(l);
        let opts = CodeErrorOptions { outer_rounds: 2, random_inputs: 4, ..Default::default() };
        let rep = code_error(&code, &noise, &opts).unwrap();
        assert!(rep.worst_case_estimate < 1e-6, "{}", rep.worst_case_estimate);
    }
}
