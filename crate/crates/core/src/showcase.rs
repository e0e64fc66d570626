//! Qubit `A` coupled to a `(6M+1)`-level `B` whose coherence lets a recovery
//! beat the incoherent limit `𝒜/8`.
//!
//! `X_A = |1⟩⟨1|`, `X_B = Σ_{k=-3M}^{3M} k|k⟩⟨k|`, `ψ` maximally entangled,
//! `φ` maximally entangled on the levels `-M..=M`. The dynamics `U` and the
//! recovery `V_{AR_B}` both permute basis states, so the evolution can also be
//! followed on the `O(M)` occupied basis vectors without dense matrices.

use std::collections::BTreeMap;

use crate::bounds::{channel_fluctuation, evaluate_formula, BoundKind, FluctuationStrategy};
use crate::channel::{Charges, Dims, Instance, QuantumChannel};
use crate::error::{Error, Result};
use crate::linalg::{c, diag_real, Layout, CMat, CVec};
use crate::metrics::variance;
use crate::recovery::{evaluate_recovery, optimize_recovery, RecoveryMode, SeesawOptions};
use crate::symmetry::conservation_check;

/// Largest `M` built with dense matrices.
pub const DENSE_LIMIT: u32 = 32;

fn levels(m: u32) -> i64 {
    3 * m as i64
}

fn b_index(m: u32, k: i64) -> usize {
    (k + levels(m)) as usize
}

/// Action of `U` on the basis state `|a⟩_A|k⟩_B`.
pub fn u_map(m: u32, a: u8, k: i64) -> (u8, i64) {
    let mm = m as i64;
    match a {
        0 if (-2 * mm..=2 * mm).contains(&k) => (1, k - 1),
        1 if (-2 * mm - 1..=2 * mm - 1).contains(&k) => (0, k + 1),
        _ => (a, k),
    }
}

/// Action of `V_{AR_B}` on the basis state `|a⟩_A|k⟩_{R_B}`.
pub fn v_map(m: u32, a: u8, k: i64) -> (u8, i64) {
    let top = levels(m);
    match a {
        1 if k == -top => (0, top),
        1 => (0, k - 1),
        0 if k == top => (1, -top),
        _ => (1, k + 1),
    }
}

fn permutation(m: u32, f: impl Fn(u8, i64) -> (u8, i64)) -> CMat {
    let db = 6 * m as usize + 1;
    let d = 2 * db;
    let mut p = CMat::zeros(d, d);
    for a in 0..2u8 {
        for k in -levels(m)..=levels(m) {
            let (a2, k2) = f(a, k);
            p[(a2 as usize * db + b_index(m, k2), a as usize * db + b_index(m, k))] = c(1.0, 0.0);
        }
    }
    p
}

fn check_m(m: u32) -> Result<()> {
    if m == 0 {
        return Err(Error::InvalidInput("M must be at least 1".into()));
    }
    Ok(())
}

/// Dense instance and the analytic recovery `R_V(·) = Tr_{R_B}[V(·)V†]` from `A'R_B` to `A`.
pub fn build_alleviation_instance(m: u32) -> Result<(Instance, QuantumChannel)> {
    check_m(m)?;
    if m > DENSE_LIMIT {
        return Err(Error::DimensionCap { dim: 6 * m as usize + 1, cap: 6 * DENSE_LIMIT as usize + 1 });
    }
    let db = 6 * m as usize + 1;
    let u = permutation(m, |a, k| u_map(m, a, k));
    let v = permutation(m, |a, k| v_map(m, a, k));
    let s2 = (0.5f64).sqrt();
    let psi = CVec::from_vec(vec![c(s2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s2, 0.0)]);
    let mut phi = CVec::zeros(db * db);
    let amp = 1.0 / ((2 * m + 1) as f64).sqrt();
    for k in -(m as i64)..=m as i64 {
        let i = b_index(m, k);
        phi[i * db + i] = c(amp, 0.0);
    }
    let x_a = diag_real(&[0.0, 1.0]);
    let x_b = diag_real(&(-levels(m)..=levels(m)).map(|k| k as f64).collect::<Vec<_>>());
    let charges = Charges { x_a: x_a.clone(), x_b: x_b.clone(), x_a_out: x_a, x_b_out: x_b };
    let dims = Dims { a: 2, ra: 2, b: db, rb: db, a_out: 2, b_out: db };
    let inst = Instance::new(psi, phi, u, dims, vec![charges])?;
    let input = Layout::new(&[("A'", 2), ("RB", db)])?;
    let recovery = QuantumChannel::new(v, input, Layout::single("A", 2)?, db)?;
    Ok((inst, recovery))
}

/// Amplitudes over `(a, r_A, b, r_B)` after `U` and then `V`.
fn sparse_final_state(m: u32) -> BTreeMap<(u8, u8, i64, i64), f64> {
    let amp = 1.0 / ((2 * (2 * m + 1)) as f64).sqrt();
    let mut out = BTreeMap::new();
    for a in 0..2u8 {
        for k in -(m as i64)..=m as i64 {
            let (a1, b1) = u_map(m, a, k);
            let (a2, rb) = v_map(m, a1, k);
            *out.entry((a2, a, b1, rb)).or_insert(0.0) += amp;
        }
    }
    out
}

/// `D_F(ψ^f, ψ)` of the analytic recovery from the sparse evolution.
pub fn sparse_recovery_error(m: u32) -> Result<f64> {
    check_m(m)?;
    let state = sparse_final_state(m);
    // ⟨ψ|ρ^f_{AR_A}|ψ⟩ = Σ_{b,r_B} |Σ_a ψ_{aa} amp(a,a,b,r_B)|²
    let s2 = (0.5f64).sqrt();
    let mut proj: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for (&(a, ra, b, rb), &amp) in &state {
        if a == ra {
            *proj.entry((b, rb)).or_insert(0.0) += s2 * amp;
        }
    }
    let f2: f64 = proj.values().map(|v| v * v).sum();
    Ok((1.0 - f2).max(0.0).sqrt())
}

/// Induced channel `ℰ` on `A` from the sparse evolution.
pub fn sparse_channel_e(m: u32) -> Result<QuantumChannel> {
    check_m(m)?;
    let p = 1.0 / (2 * m + 1) as f64;
    let mut kraus = Vec::new();
    for k in -(m as i64)..=m as i64 {
        let mut by_b: BTreeMap<i64, CMat> = BTreeMap::new();
        for a in 0..2u8 {
            let (a2, b2) = u_map(m, a, k);
            let op = by_b.entry(b2).or_insert_with(|| CMat::zeros(2, 2));
            op[(a2 as usize, a as usize)] = c(p.sqrt(), 0.0);
        }
        kraus.extend(by_b.into_values());
    }
    let a = Layout::single("A", 2)?;
    QuantumChannel::from_kraus(&kraus, a.clone(), Layout::single("A'", 2)?)
}

#[derive(Clone, Debug)]
pub struct AlleviationReport {
    pub m: u32,
    /// `D_F` of the analytic recovery.
    pub recovery_error: f64,
    /// `1/√(2M+1)`.
    pub expected_error: f64,
    /// Dense and sparse evaluations, when both were run.
    pub dense_sparse_gap: Option<f64>,
    pub a_single: f64,
    pub a_sum: f64,
    pub delta_plus: f64,
    /// `4 V_{ρ_B}(X_B)`.
    pub f: f64,
    pub siq1: f64,
    /// Spread of `Z` (dense path only).
    pub conservation_spread: Option<f64>,
    /// Largest deviation of `ℰ` from the flip-and-dephase map on matrix units.
    pub channel_deviation: f64,
    /// Seesaw upper estimate of `δ`, when requested.
    pub seesaw_error: Option<f64>,
}

impl AlleviationReport {
    pub fn siq1_holds(&self) -> bool {
        self.siq1 <= self.recovery_error + crate::bounds::SOUNDNESS_SLACK
    }

    /// Whether the error is below the incoherent limit `𝒜/8`.
    pub fn below_incoherent_limit(&self) -> bool {
        self.recovery_error < self.a_single / 8.0
    }
}

/// `|1⟩⟨0|ρ|0⟩⟨1| + |0⟩⟨1|ρ|1⟩⟨0|`.
fn flip_dephase(rho: &CMat) -> CMat {
    diag_real(&[rho[(1, 1)].re, rho[(0, 0)].re])
}

fn channel_deviation(e: &QuantumChannel) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let mut unit = CMat::zeros(2, 2);
            unit[(i, j)] = c(1.0, 0.0);
            let mut expected = CMat::zeros(2, 2);
            if i == j {
                expected = flip_dephase(&unit);
            }
            worst = worst.max(crate::linalg::max_abs(&(e.apply(&unit)? - expected)));
        }
    }
    Ok(worst)
}

/// Evaluate the example at `M`. Dense matrices are used up to [`DENSE_LIMIT`];
/// `seesaw` additionally optimizes a recovery on the dense instance.
pub fn verify_alleviation(m: u32, seesaw: Option<&SeesawOptions>) -> Result<AlleviationReport> {
    check_m(m)?;
    let sparse_error = sparse_recovery_error(m)?;
    let e = sparse_channel_e(m)?;
    let x_a = diag_real(&[0.0, 1.0]);
    let rho_a = CMat::identity(2, 2).scale(0.5);
    let fl = channel_fluctuation(&rho_a, &e, &x_a, &x_a, FluctuationStrategy::Exact)?;
    let rho_b = diag_real(&vec![1.0 / (2 * m + 1) as f64; 2 * m as usize + 1]);
    let x_b = diag_real(&(-(m as i64)..=m as i64).map(|k| k as f64).collect::<Vec<_>>());
    let f = 4.0 * variance(&rho_b, &x_b);
    let mut inputs = BTreeMap::new();
    inputs.insert("a".to_string(), fl.a_single);
    inputs.insert("f".to_string(), f);
    inputs.insert("delta_plus".to_string(), fl.delta_plus);
    let siq1 = evaluate_formula(BoundKind::Siq1, &inputs)?;
    let mut report = AlleviationReport {
        m,
        recovery_error: sparse_error,
        expected_error: 1.0 / ((2 * m + 1) as f64).sqrt(),
        dense_sparse_gap: None,
        a_single: fl.a_single,
        a_sum: fl.a_sum,
        delta_plus: fl.delta_plus,
        f,
        siq1,
        conservation_spread: None,
        channel_deviation: channel_deviation(&e)?,
        seesaw_error: None,
    };
    if m <= DENSE_LIMIT {
        let (inst, rec) = build_alleviation_instance(m)?;
        let dense = evaluate_recovery(&inst, RecoveryMode::WithRb, &rec)?;
        report.dense_sparse_gap = Some((dense - sparse_error).abs());
        report.conservation_spread = Some(conservation_check(&inst.u, inst.charge())?.spread);
        report.channel_deviation = report.channel_deviation.max(channel_deviation(&inst.channel_e()?)?);
        if let Some(opts) = seesaw {
            report.seesaw_error = Some(optimize_recovery(&inst, RecoveryMode::WithRb, opts)?.achieved_error);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maps_are_permutations() {
        for m in 1..4 {
            for f in [u_map as fn(u32, u8, i64) -> (u8, i64), v_map] {
                let mut seen = std::collections::BTreeSet::new();
                for a in 0..2u8 {
                    for k in -levels(m)..=levels(m) {
                        let (a2, k2) = f(m, a, k);
                        assert!(k2.abs() <= levels(m));
                        assert!(seen.insert((a2, k2)));
                    }
                }
            }
        }
    }

    #[test]
    fn u_conserves_total_charge() {
        for a in 0..2u8 {
            for k in -6..=6 {
                let (a2, k2) = u_map(2, a, k);
                assert_eq!(a as i64 + k, a2 as i64 + k2);
            }
        }
    }

    #[test]
    fn single_level_case() {
        let r = verify_alleviation(1, None).unwrap();
        assert!((r.recovery_error - 1.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((r.f - 8.0 / 3.0).abs() < 1e-12);
        assert!((r.siq1 - 0.5 / (2.0 * ((8.0f64 / 3.0).sqrt() + 4.0))).abs() < 1e-12);
        assert!(r.dense_sparse_gap.unwrap() < 1e-12);
    }
}
