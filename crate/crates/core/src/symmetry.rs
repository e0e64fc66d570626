//! Charge sectors, symmetric random unitaries, conservation and covariance
//! diagnostics, and erasure noise.

use rand::Rng;

use crate::channel::QuantumChannel;
use crate::error::{Error, Result};
use crate::linalg::{
    check_hermitian, check_square, frobenius_norm, haar_unitary, hermitian_spectrum, is_diagonal,
    max_abs, unitary_exp, CMat, Layout, C64,
};
use crate::metrics::spectral_spread;

/// Eigenvalues closer than this are merged into one sector.
pub const SECTOR_GAP: f64 = 1e-8;
/// A channel is reported covariant when its deviation is at most this.
pub const COVARIANCE_TOL: f64 = 1e-8;

/// Eigenspace of a charge operator.
#[derive(Clone, Debug)]
pub struct ChargeSector {
    /// Charge values (one per generator for joint sectors).
    pub values: Vec<f64>,
    /// Orthonormal basis of the sector as columns.
    pub basis: CMat,
}

impl ChargeSector {
    pub fn value(&self) -> f64 {
        self.values[0]
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn projector(&self) -> CMat {
        &self.basis * self.basis.adjoint()
    }
}

/// Sectors of a Hermitian charge, in increasing charge order. Diagonal
/// operators (integer charges in the computational basis) take a fast path
/// that keeps computational basis vectors.
pub fn charge_sectors(x: &CMat) -> Result<Vec<ChargeSector>> {
    joint_charge_sectors(std::slice::from_ref(x))
}

/// Joint sectors of commuting charges.
pub fn joint_charge_sectors(xs: &[CMat]) -> Result<Vec<ChargeSector>> {
    if xs.is_empty() {
        return Err(Error::InvalidInput("no charges given".into()));
    }
    let d = xs[0].nrows();
    for x in xs {
        check_square(x, d)?;
        check_hermitian(x)?;
    }
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let comm = &xs[i] * &xs[j] - &xs[j] * &xs[i];
            if max_abs(&comm) > 1e-8 {
                return Err(Error::InvalidInput("charges do not commute".into()));
            }
        }
    }
    let mut groups: Vec<(Vec<f64>, Vec<Vec<C64>>)> = Vec::new();
    if xs.iter().all(|x| is_diagonal(x, 1e-12)) {
        for i in 0..d {
            let key: Vec<f64> = xs.iter().map(|x| x[(i, i)].re).collect();
            let mut v = vec![C64::new(0.0, 0.0); d];
            v[i] = C64::new(1.0, 0.0);
            push_grouped(&mut groups, key, v);
        }
    } else {
        // Generic commuting charges: diagonalise an irrational combination.
        let weights = [1.0, 0.754_877_666_246_692_7, 0.569_840_290_998_053_2, 0.438_445_607_371_741_2];
        let mut combo = CMat::zeros(d, d);
        for (k, x) in xs.iter().enumerate() {
            combo += x.scale(weights[k % weights.len()] / (1 + k / weights.len()) as f64);
        }
        let eig = hermitian_spectrum(&combo)?;
        let mut cluster_start = 0;
        for i in 0..=d {
            let boundary = i == d || (i > cluster_start && eig.values[i - 1] - eig.values[i] > SECTOR_GAP);
            if boundary && i > cluster_start {
                let basis = eig.vectors.columns(cluster_start, i - cluster_start).into_owned();
                let key: Vec<f64> = xs
                    .iter()
                    .map(|x| {
                        let block = basis.adjoint() * x * &basis;
                        block.trace().re / basis.ncols() as f64
                    })
                    .collect();
                for col in 0..basis.ncols() {
                    let v: Vec<C64> = basis.column(col).iter().copied().collect();
                    push_grouped(&mut groups, key.clone(), v);
                }
                cluster_start = i;
            }
        }
    }
    groups.sort_by(|a, b| {
        for (x, y) in a.0.iter().zip(&b.0) {
            if (x - y).abs() > SECTOR_GAP {
                return x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal);
            }
        }
        std::cmp::Ordering::Equal
    });
    Ok(groups
        .into_iter()
        .map(|(values, vecs)| {
            let basis = CMat::from_fn(d, vecs.len(), |i, j| vecs[j][i]);
            ChargeSector { values, basis }
        })
        .collect())
}

fn push_grouped(groups: &mut Vec<(Vec<f64>, Vec<Vec<C64>>)>, key: Vec<f64>, v: Vec<C64>) {
    for g in groups.iter_mut() {
        if g.0.iter().zip(&key).all(|(a, b)| (a - b).abs() <= SECTOR_GAP) {
            g.1.push(v);
            return;
        }
    }
    groups.push((key, vec![v]));
}

/// `⊕_m U_m` with each block Haar distributed on its sector.
pub fn sample_block_haar<R: Rng>(sectors: &[ChargeSector], rng: &mut R) -> Result<CMat> {
    let d = sectors.first().map(|s| s.basis.nrows()).unwrap_or(0);
    let total: usize = sectors.iter().map(|s| s.dim()).sum();
    if total != d {
        return Err(Error::DimensionMismatch { expected: d, found: total });
    }
    let mut u = CMat::zeros(d, d);
    for s in sectors {
        let block = haar_unitary(rng, s.dim());
        u += &s.basis * block * s.basis.adjoint();
    }
    Ok(u)
}

#[derive(Clone, Debug)]
pub struct ConservationReport {
    /// `Z = U(X_A + X_B)U† − (X_{A'} + X_{B'})`.
    pub z: CMat,
    /// `λ_max(Z) − λ_min(Z)`.
    pub spread: f64,
    pub operator_norm: f64,
}

impl ConservationReport {
    pub fn conserved(&self, tol: f64) -> bool {
        self.operator_norm <= tol
    }
}

pub fn conservation_check(u: &CMat, charges: &crate::channel::Charges) -> Result<ConservationReport> {
    let xin = charges.total_in();
    let xout = charges.total_out();
    check_square(u, xin.nrows())?;
    check_square(&xout, xin.nrows())?;
    let z = u * xin * u.adjoint() - xout;
    let z = crate::linalg::hermitian_part(&z);
    let eig = hermitian_spectrum(&z)?;
    let spread = (eig.max() - eig.min()).max(0.0);
    let operator_norm = eig.max().abs().max(eig.min().abs());
    Ok(ConservationReport { z, spread, operator_norm })
}

#[derive(Clone, Debug)]
pub struct CovarianceReport {
    pub max_deviation: f64,
    pub worst_theta: f64,
    pub covariant: bool,
}

/// Deviation `‖C(e^{iXθ} E e^{−iXθ}) − e^{iX'θ} C(E) e^{−iX'θ}‖_F` maximised
/// over a 16-point θ grid on `[0, 2π)` and all matrix units `E = |i⟩⟨j|`.
pub fn covariance_check(channel: &QuantumChannel, x_in: &CMat, x_out: &CMat) -> Result<CovarianceReport> {
    let din = channel.input_dim();
    let dout = channel.output_dim();
    check_square(x_in, din)?;
    check_square(x_out, dout)?;
    let mut worst = 0.0;
    let mut worst_theta = 0.0;
    for k in 0..16 {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / 16.0;
        let ui = unitary_exp(x_in, theta)?;
        let uo = unitary_exp(x_out, theta)?;
        for i in 0..din {
            for j in 0..din {
                let mut e = CMat::zeros(din, din);
                e[(i, j)] = C64::new(1.0, 0.0);
                let lhs = channel.apply(&(&ui * &e * ui.adjoint()))?;
                let rhs = &uo * channel.apply(&e)? * uo.adjoint();
                let dev = frobenius_norm(&(lhs - rhs));
                if dev > worst {
                    worst = dev;
                    worst_theta = theta;
                }
            }
        }
    }
    Ok(CovarianceReport { max_deviation: worst, worst_theta, covariant: worst <= COVARIANCE_TOL })
}

/// Erasure noise `N(ρ) = Σ_i (1/N) |i⟩⟨i|_C ⊗ τ_i^{(P_i)} ⊗ Tr_{P_i} ρ`.
/// The output layout is the flag register `C` followed by the physical layout.
pub fn erasure_noise(physical: &Layout, reset_states: &[CMat]) -> Result<QuantumChannel> {
    let n = physical.len();
    if reset_states.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: reset_states.len() });
    }
    let dims = physical.dims();
    let dp = physical.total_dim();
    let mut kraus = Vec::new();
    for (i, tau) in reset_states.iter().enumerate() {
        check_square(tau, dims[i])?;
        let eig = crate::linalg::psd_spectrum(tau)?;
        let left: usize = dims[..i].iter().product();
        let right: usize = dims[i + 1..].iter().product();
        for (w, col) in eig.values.iter().zip(0..dims[i]) {
            if *w <= 0.0 {
                continue;
            }
            let t = eig.vector(col);
            for k in 0..dims[i] {
                // |i⟩_C ⊗ (√w_t |t⟩⟨k| on P_i) / √N
                let scale = (w / n as f64).sqrt();
                let mut op = CMat::zeros(n * dp, dp);
                for l in 0..left {
                    for r in 0..right {
                        let src = (l * dims[i] + k) * right + r;
                        for (m, tm) in t.iter().enumerate() {
                            let dst = (l * dims[i] + m) * right + r;
                            op[(i * dp + dst, src)] += tm * scale;
                        }
                    }
                }
                kraus.push(op);
            }
        }
    }
    let flag = Layout::single("C", n)?;
    let out = flag.concat(physical)?;
    QuantumChannel::from_kraus(&kraus, physical.clone(), out)
}

/// Reset state for covariant erasure: the eigenvector of each local charge
/// with eigenvalue 0, or the lowest eigenvalue when 0 is absent.
#[derive(Clone, Debug)]
pub struct ResetState {
    pub state: CMat,
    pub eigenvalue: f64,
}

impl ResetState {
    /// Constant charge shift induced by resetting into this state.
    pub fn shift(&self) -> f64 {
        self.eigenvalue
    }
}

pub fn covariant_reset_states(local_charges: &[CMat]) -> Result<Vec<ResetState>> {
    local_charges
        .iter()
        .map(|x| {
            let eig = hermitian_spectrum(x)?;
            let idx = eig
                .values
                .iter()
                .position(|v| v.abs() <= SECTOR_GAP)
                .unwrap_or(eig.dim() - 1);
            let v = eig.vector(idx);
            Ok(ResetState { state: &v * v.adjoint(), eigenvalue: eig.values[idx] })
        })
        .collect()
}

/// Sum of local charges `Σ_i X_{P_i}` on the physical layout.
pub fn total_local_charge(physical: &Layout, local: &[CMat]) -> Result<CMat> {
    if local.len() != physical.len() {
        return Err(Error::DimensionMismatch { expected: physical.len(), found: local.len() });
    }
    let d = physical.total_dim();
    let mut total = CMat::zeros(d, d);
    for (i, x) in local.iter().enumerate() {
        let label = physical.parts()[i].label.clone();
        total += crate::linalg::embed(x, physical, &[label.as_str()])?;
    }
    Ok(total)
}

pub fn spread(x: &CMat) -> Result<f64> {
    spectral_spread(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Charges;
    use crate::linalg::{diag_real, isometry_deviation, random_density, rng_from_seed};

    fn n() -> CMat {
        diag_real(&[0.0, 1.0])
    }

    fn hadamard() -> CMat {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CMat::from_row_slice(2, 2, &[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)])
    }

    #[test]
    fn sectors_of_two_qubit_number() {
        let x = n().kronecker(&CMat::identity(2, 2)) + CMat::identity(2, 2).kronecker(&n());
        let s = charge_sectors(&x).unwrap();
        let dims: Vec<usize> = s.iter().map(|c| c.dim()).collect();
        let vals: Vec<f64> = s.iter().map(|c| c.value()).collect();
        assert_eq!(dims, vec![1, 2, 1]);
        assert_eq!(vals, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn generic_sectors_of_rotated_charge() {
        let mut rng = rng_from_seed(31);
        let v = haar_unitary(&mut rng, 4);
        let x = &v * diag_real(&[0.0, 1.0, 1.0, 3.0]) * v.adjoint();
        let s = charge_sectors(&x).unwrap();
        let dims: Vec<usize> = s.iter().map(|c| c.dim()).collect();
        assert_eq!(dims, vec![1, 2, 1]);
        assert!((s[2].value() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn block_haar_commutes_with_charge() {
        let x = n().kronecker(&CMat::identity(2, 2)) + CMat::identity(2, 2).kronecker(&n());
        let s = charge_sectors(&x).unwrap();
        let u = sample_block_haar(&s, &mut rng_from_seed(32)).unwrap();
        assert!(isometry_deviation(&u) < 1e-12);
        assert!(max_abs(&(&u * &x - &x * &u)) < 1e-12);
    }

    #[test]
    fn hadamard_on_first_qubit_violates_number_conservation_by_root_two() {
        let u = hadamard().kronecker(&CMat::identity(2, 2));
        let ch = Charges { x_a: n(), x_b: n(), x_a_out: n(), x_b_out: n() };
        let rep = conservation_check(&u, &ch).unwrap();
        assert!((rep.spread - 2f64.sqrt()).abs() < 1e-12);
        let ident = CMat::identity(4, 4);
        assert!(conservation_check(&ident, &ch).unwrap().spread < 1e-15);
    }

    #[test]
    fn identity_is_covariant_and_hadamard_is_not() {
        let l = Layout::single("Q", 2).unwrap();
        let id = QuantumChannel::identity(l.clone());
        assert!(covariance_check(&id, &n(), &n()).unwrap().covariant);
        let h = QuantumChannel::from_unitary(hadamard(), l.clone(), l).unwrap();
        assert!(covariance_check(&h, &n(), &n()).unwrap().max_deviation > 0.1);
    }

    #[test]
    fn erasure_noise_matches_definition() {
        let phys = Layout::register("P", 2, 2).unwrap();
        let taus = vec![diag_real(&[1.0, 0.0]), diag_real(&[0.0, 1.0])];
        let ch = erasure_noise(&phys, &taus).unwrap();
        let rho = random_density(&mut rng_from_seed(33), 4, 4);
        let out = ch.apply(&rho).unwrap();
        let (r1, _) = crate::linalg::partial_trace(&rho, &phys, &["P1"]).unwrap();
        let (r0, _) = crate::linalg::partial_trace(&rho, &phys, &["P0"]).unwrap();
        let flag0 = diag_real(&[0.5, 0.0]);
        let flag1 = diag_real(&[0.0, 0.5]);
        let expect = crate::linalg::tensor_compose(&[flag0, taus[0].clone(), r1])
            + crate::linalg::tensor_compose(&[flag1, r0, taus[1].clone()]);
        assert!(max_abs(&(out - expect)) < 1e-12);
    }

    #[test]
    fn covariantised_erasure_is_covariant() {
        let phys = Layout::register("P", 2, 3).unwrap();
        let local = vec![diag_real(&[-1.0, 0.0, 1.0]), diag_real(&[1.0, 2.0, 3.0])];
        let resets = covariant_reset_states(&local).unwrap();
        assert_eq!(resets[0].eigenvalue, 0.0);
        assert_eq!(resets[1].eigenvalue, 1.0);
        let taus: Vec<CMat> = resets.iter().map(|r| r.state.clone()).collect();
        let ch = erasure_noise(&phys, &taus).unwrap();
        let x_in = total_local_charge(&phys, &local).unwrap();
        let x_out = CMat::identity(2, 2).kronecker(&x_in);
        assert!(covariance_check(&ch, &x_in, &x_out).unwrap().covariant);
    }
}
