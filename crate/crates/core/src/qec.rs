//! Covariant codes under erasure at a known location.

use crate::bounds::{ek17, ek17_half};
use crate::channel::QuantumChannel;
use crate::error::{Error, Result};
use crate::linalg::{c, check_hermitian, check_square, diag_real, isometry_deviation, kron, Layout, CMat, CVec};
use crate::metrics::spectral_spread;
use crate::recovery::{code_error, CodeErrorOptions};
use crate::symmetry::{covariance_check, covariant_reset_states, erasure_noise, total_local_charge};

/// Codes whose covariance deviation exceeds this are reported as inapplicable.
pub const COVARIANCE_LIMIT: f64 = 1e-6;

/// Encoding isometry `L → P_1 ⋯ P_N` with its charges.
#[derive(Clone, Debug)]
pub struct CodeDescription {
    pub name: String,
    /// `d_P × d_L` isometry.
    pub isometry: CMat,
    pub physical: Layout,
    pub x_l: CMat,
    /// One charge per physical subsystem.
    pub x_p: Vec<CMat>,
}

impl CodeDescription {
    pub fn new(name: &str, isometry: CMat, physical: Layout, x_l: CMat, x_p: Vec<CMat>) -> Result<Self> {
        let dl = isometry.ncols();
        if isometry.nrows() != physical.total_dim() {
            return Err(Error::DimensionMismatch { expected: physical.total_dim(), found: isometry.nrows() });
        }
        let dev = isometry_deviation(&isometry);
        if dev > crate::channel::CHANNEL_TOL {
            return Err(Error::NotIsometry(dev));
        }
        check_square(&x_l, dl)?;
        check_hermitian(&x_l)?;
        if x_p.len() != physical.len() {
            return Err(Error::DimensionMismatch { expected: physical.len(), found: x_p.len() });
        }
        for (x, d) in x_p.iter().zip(physical.dims()) {
            check_square(x, d)?;
            check_hermitian(x)?;
        }
        Ok(CodeDescription { name: name.to_string(), isometry, physical, x_l, x_p })
    }

    pub fn n(&self) -> usize {
        self.physical.len()
    }

    pub fn total_charge(&self) -> Result<CMat> {
        total_local_charge(&self.physical, &self.x_p)
    }

    pub fn encoder(&self) -> Result<QuantumChannel> {
        let logical = Layout::single("L", self.isometry.ncols())?;
        QuantumChannel::new(self.isometry.clone(), logical, self.physical.clone(), 1)
    }

    /// `𝒟_max = max_i 𝒟_{X_{P_i}}`.
    pub fn d_max(&self) -> Result<f64> {
        self.x_p.iter().try_fold(0.0f64, |m, x| Ok(m.max(spectral_spread(x)?)))
    }
}

fn qubit_register(n: usize) -> Result<Layout> {
    Layout::register("P", n, 2)
}

fn number() -> CMat {
    diag_real(&[0.0, 1.0])
}

fn basis_state(n: usize, bits: &[usize]) -> CVec {
    let mut v = CVec::zeros(1 << n);
    let idx = bits.iter().fold(0usize, |acc, &b| (acc << 1) | b);
    v[idx] = c(1.0, 0.0);
    v
}

fn dicke(n: usize, w: usize) -> CVec {
    let mut v = CVec::zeros(1 << n);
    let mut count = 0.0;
    for i in 0..1usize << n {
        if i.count_ones() as usize == w {
            v[i] = c(1.0, 0.0);
            count += 1.0;
        }
    }
    v.unscale(f64::sqrt(count))
}

fn from_columns(cols: &[CVec]) -> CMat {
    CMat::from_columns(cols)
}

/// Phase-covariant qubit code on three qubits:
/// `|0_L⟩ = cos α |D_1⟩ + sin α (|100⟩ − |010⟩)/√2`,
/// `|1_L⟩ = cos α |D_2⟩ + sin α (|011⟩ − |101⟩)/√2`,
/// with `|D_w⟩` the Dicke state of weight `w`. Both logical states lie in a
/// single number sector, so the code is covariant for `X_L = |1⟩⟨1|`.
pub fn dicke_code(alpha: f64) -> Result<CodeDescription> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v1 = (basis_state(3, &[1, 0, 0]) - basis_state(3, &[0, 1, 0])).scale(s);
    let v2 = (basis_state(3, &[0, 1, 1]) - basis_state(3, &[1, 0, 1])).scale(s);
    let zero = dicke(3, 1).scale(alpha.cos()) + v1.scale(alpha.sin());
    let one = dicke(3, 2).scale(alpha.cos()) + v2.scale(alpha.sin());
    CodeDescription::new(
        &format!("dicke(alpha={alpha})"),
        from_columns(&[zero, one]),
        qubit_register(3)?,
        number(),
        vec![number(); 3],
    )
}

/// Parameters of the shipped covariant family.
pub fn dicke_family_parameters() -> Vec<f64> {
    (0..5).map(|i| i as f64 * std::f64::consts::PI / 8.0).collect()
}

/// `|0⟩ ↦ |000⟩`, `|1⟩ ↦ |111⟩`, not covariant for `X_L = |1⟩⟨1|`.
pub fn repetition_code() -> Result<CodeDescription> {
    CodeDescription::new(
        "repetition",
        from_columns(&[basis_state(3, &[0, 0, 0]), basis_state(3, &[1, 1, 1])]),
        qubit_register(3)?,
        number(),
        vec![number(); 3],
    )
}

/// `|0⟩ ↦ (|0000⟩ + |1111⟩)/√2`, `|1⟩ ↦ (|0011⟩ + |1100⟩)/√2`, which corrects
/// the erasure of any single qubit.
pub fn four_qubit_erasure_code() -> Result<CodeDescription> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let zero = (basis_state(4, &[0, 0, 0, 0]) + basis_state(4, &[1, 1, 1, 1])).scale(s);
    let one = (basis_state(4, &[0, 0, 1, 1]) + basis_state(4, &[1, 1, 0, 0])).scale(s);
    CodeDescription::new("four-qubit", from_columns(&[zero, one]), qubit_register(4)?, number(), vec![number(); 4])
}

/// Identity encoding of one qubit.
pub fn trivial_code() -> Result<CodeDescription> {
    CodeDescription::new("trivial", CMat::identity(2, 2), qubit_register(1)?, number(), vec![number()])
}

/// Erasure noise resetting into the zero-charge eigenvector of each `X_{P_i}`.
pub fn covariant_erasure(code: &CodeDescription) -> Result<QuantumChannel> {
    let resets: Vec<CMat> = covariant_reset_states(&code.x_p)?.into_iter().map(|r| r.state).collect();
    erasure_noise(&code.physical, &resets)
}

/// Erasure noise resetting into arbitrary pure states `|τ_i⟩`.
pub fn erasure_with_resets(code: &CodeDescription, resets: &[CVec]) -> Result<QuantumChannel> {
    let states: Vec<CMat> = resets.iter().map(|v| v * v.adjoint()).collect();
    erasure_noise(&code.physical, &states)
}

#[derive(Clone, Debug)]
pub struct AuditReport {
    pub name: String,
    pub covariance_deviation: f64,
    /// Whether the covariance deviation is below [`COVARIANCE_LIMIT`].
    pub applicable: bool,
    pub d_xl: f64,
    pub d_max: f64,
    pub n: usize,
    pub ek17: f64,
    pub ek17_half: f64,
    pub me_error: f64,
    /// Worst-case error estimate of the best recovery found.
    pub delta_c_estimate: f64,
    /// Covariance of the erasure channel (should vanish).
    pub noise_covariance_deviation: f64,
}

impl AuditReport {
    /// `bound ≤ estimate + 1e-6`; inapplicable codes are never flagged.
    pub fn consistent(&self) -> bool {
        !self.applicable || self.ek17 <= self.delta_c_estimate + crate::bounds::SOUNDNESS_SLACK
    }
}

pub fn audit_code(code: &CodeDescription, opts: &CodeErrorOptions) -> Result<AuditReport> {
    let xp = code.total_charge()?;
    let cov = covariance_check(&code.encoder()?, &code.x_l, &xp)?;
    let noise = covariant_erasure(code)?;
    let flag = noise.output_dim() / xp.nrows();
    let x_out = kron(&CMat::identity(flag, flag), &xp);
    let noise_cov = covariance_check(&noise, &xp, &x_out)?;
    let d_xl = spectral_spread(&code.x_l)?;
    let d_max = code.d_max()?;
    if d_max <= 0.0 {
        return Err(Error::InvalidInput("physical charges have zero spread".into()));
    }
    let n = code.n();
    let err = code_error(&code.isometry, &noise, opts)?;
    Ok(AuditReport {
        name: code.name.clone(),
        covariance_deviation: cov.max_deviation,
        applicable: cov.max_deviation <= COVARIANCE_LIMIT,
        d_xl,
        d_max,
        n,
        ek17: ek17(d_xl, d_max, n as f64),
        ek17_half: ek17_half(d_xl, d_max, n as f64),
        me_error: err.maximally_entangled_error,
        delta_c_estimate: err.worst_case_estimate,
        noise_covariance_deviation: noise_cov.max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dicke_family_is_covariant() {
        for a in dicke_family_parameters() {
            let code = dicke_code(a).unwrap();
            let dev = covariance_check(&code.encoder().unwrap(), &code.x_l, &code.total_charge().unwrap()).unwrap();
            assert!(dev.max_deviation < 1e-10);
        }
    }

    #[test]
    fn repetition_code_is_not_covariant() {
        let code = repetition_code().unwrap();
        let dev = covariance_check(&code.encoder().unwrap(), &code.x_l, &code.total_charge().unwrap()).unwrap();
        assert!(dev.max_deviation > 0.1);
    }

    #[test]
    fn covariant_erasure_is_covariant_and_trace_preserving() {
        let code = dicke_code(0.3).unwrap();
        let noise = covariant_erasure(&code).unwrap();
        assert!(noise.trace_preservation_error() < 1e-12);
        let xp = code.total_charge().unwrap();
        let x_out = kron(&CMat::identity(3, 3), &xp);
        assert!(covariance_check(&noise, &xp, &x_out).unwrap().max_deviation < 1e-10);
    }

    #[test]
    fn ek17_large_n_asymptotics() {
        let v = ek17(1.0, 1.0, 100.0);
        let asym = 1.0 / 400.0;
        assert!((v / asym - 1.0).abs() < 0.01);
        assert_eq!(ek17(0.0, 1.0, 3.0), 0.0);
    }
}
