//! States, fidelity, purified distance, quantum Fisher information and
//! the moment functionals used by the bounds.

use crate::error::{Error, Result};
use crate::linalg::{
    check_hermitian, check_square, expectation, hermitian_spectrum, outer, psd_spectrum,
    psd_sqrt, reduced_from_vector, singular_values, CMat, CVec, Layout, C64,
};

/// Eigenvalue pairs whose sum is below this are skipped in QFI sums.
pub const QFI_PAIR_CUTOFF: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub matrix: CMat,
    pub layout: Layout,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: CMat, layout: Layout) -> Result<Self> {
        crate::linalg::check_dim_cap(layout.total_dim())?;
        check_square(&matrix, layout.total_dim())?;
        check_hermitian(&matrix)?;
        let tr = matrix.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized(tr - 1.0));
        }
        psd_spectrum(&matrix)?;
        Ok(DensityMatrix { matrix, layout })
    }

    pub fn maximally_mixed(layout: Layout) -> Self {
        let d = layout.total_dim();
        let matrix = CMat::identity(d, d).unscale(d as f64);
        DensityMatrix { matrix, layout }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn reduce(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let (m, l) = crate::linalg::partial_trace(&self.matrix, &self.layout, keep)?;
        Ok(DensityMatrix { matrix: m, layout: l })
    }
}

#[derive(Clone, Debug)]
pub struct PureState {
    pub amplitudes: CVec,
    pub layout: Layout,
}

impl PureState {
    pub fn new(amplitudes: CVec, layout: Layout) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.total_dim(),
                found: amplitudes.len(),
            });
        }
        let n = amplitudes.norm_squared();
        if (n - 1.0).abs() > TRACE_TOL {
            return Err(Error::NotNormalized(n - 1.0));
        }
        Ok(PureState { amplitudes, layout })
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix { matrix: outer(&self.amplitudes), layout: self.layout.clone() }
    }

    pub fn reduce(&self, keep: &[&str]) -> Result<DensityMatrix> {
        let (m, l) = reduced_from_vector(&self.amplitudes, &self.layout, keep)?;
        Ok(DensityMatrix { matrix: m, layout: l })
    }

    /// `Σ_i √r_i |i⟩|i⟩`, the canonical purification of a diagonal spectrum,
    /// with the second factor labelled `reference`.
    pub fn purify(rho: &CMat, system: &Layout, reference: &str) -> Result<PureState> {
        let eig = psd_spectrum(rho)?;
        let d = rho.nrows();
        let rank = eig.values.iter().filter(|&&v| v > 0.0).count().max(1);
        let layout = system.concat(&Layout::single(reference, rank)?)?;
        let mut amp = CVec::zeros(d * rank);
        for k in 0..rank {
            let w = eig.values[k].max(0.0).sqrt();
            for i in 0..d {
                amp[i * rank + k] = eig.vectors[(i, k)] * w;
            }
        }
        let n = amp.norm();
        Ok(PureState { amplitudes: amp.unscale(n), layout })
    }
}

/// Uhlmann fidelity `‖√ρ √σ‖₁`, clamped to `[0, 1]`.
pub fn fidelity(rho: &CMat, sigma: &CMat) -> Result<f64> {
    if rho.nrows() != sigma.nrows() {
        return Err(Error::DimensionMismatch { expected: rho.nrows(), found: sigma.nrows() });
    }
    let a = psd_sqrt(rho)?;
    let b = psd_sqrt(sigma)?;
    let f: f64 = singular_values(&(a * b)).iter().sum();
    Ok(f.clamp(0.0, 1.0))
}

/// Fidelity between a pure state and a density matrix, `√⟨ψ|σ|ψ⟩`.
pub fn fidelity_pure(psi: &CVec, sigma: &CMat) -> Result<f64> {
    if psi.len() != sigma.nrows() {
        return Err(Error::DimensionMismatch { expected: sigma.nrows(), found: psi.len() });
    }
    let v = (psi.adjoint() * sigma * psi)[(0, 0)].re;
    Ok(v.clamp(0.0, 1.0).sqrt())
}

/// Purified distance `√(1 − F²)`.
pub fn purified_distance(rho: &CMat, sigma: &CMat) -> Result<f64> {
    let f = fidelity(rho, sigma)?;
    Ok((1.0 - f * f).max(0.0).sqrt())
}

pub fn purified_distance_pure(psi: &CVec, sigma: &CMat) -> Result<f64> {
    let f2 = (psi.adjoint() * sigma * psi)[(0, 0)].re.clamp(0.0, 1.0);
    Ok((1.0 - f2).max(0.0).sqrt())
}

fn eigen_frame(rho: &CMat, xs: &[&CMat]) -> Result<(Vec<f64>, Vec<CMat>)> {
    let eig = psd_spectrum(rho)?;
    let v = &eig.vectors;
    let rotated = xs
        .iter()
        .map(|x| {
            check_square(x, rho.nrows())?;
            check_hermitian(x)?;
            Ok(v.adjoint() * *x * v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((eig.values, rotated))
}

/// Quantum Fisher information `2 Σ (r_i − r_j)² / (r_i + r_j) |X_ij|²`.
pub fn qfi(rho: &CMat, x: &CMat) -> Result<f64> {
    let (r, xe) = eigen_frame(rho, &[x])?;
    let xe = &xe[0];
    let d = r.len();
    let mut f = 0.0;
    for i in 0..d {
        for j in 0..d {
            let s = r[i] + r[j];
            if s <= QFI_PAIR_CUTOFF {
                continue;
            }
            let diff = r[i] - r[j];
            f += diff * diff / s * xe[(i, j)].norm_sqr();
        }
    }
    Ok(2.0 * f)
}

/// QFI matrix for several generators (real symmetric part).
pub fn qfi_matrix(rho: &CMat, xs: &[CMat]) -> Result<Vec<Vec<f64>>> {
    let refs: Vec<&CMat> = xs.iter().collect();
    let (r, xe) = eigen_frame(rho, &refs)?;
    let d = r.len();
    let n = xs.len();
    let mut out = vec![vec![0.0; n]; n];
    for a in 0..n {
        for b in a..n {
            let mut f = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let s = r[i] + r[j];
                    if s <= QFI_PAIR_CUTOFF {
                        continue;
                    }
                    let diff = r[i] - r[j];
                    f += diff * diff / s * (xe[a][(i, j)] * xe[b][(j, i)]).re;
                }
            }
            out[a][b] = 2.0 * f;
            out[b][a] = 2.0 * f;
        }
    }
    Ok(out)
}

pub fn mean(rho: &CMat, x: &CMat) -> f64 {
    expectation(x, rho)
}

pub fn variance(rho: &CMat, x: &CMat) -> f64 {
    let m = mean(rho, x);
    let x2 = x * x;
    (expectation(&x2, rho) - m * m).max(0.0)
}

/// Symmetrised covariance `⟨{X − ⟨X⟩, Y − ⟨Y⟩}⟩ / 2`.
pub fn covariance(rho: &CMat, x: &CMat, y: &CMat) -> f64 {
    let mx = mean(rho, x);
    let my = mean(rho, y);
    let xy = x * y;
    let yx = y * x;
    0.5 * (expectation(&xy, rho) + expectation(&yx, rho)) - mx * my
}

/// Mean deviation `⟨|X − ⟨X⟩|⟩` using the spectral decomposition of `X`.
pub fn mean_deviation(rho: &CMat, x: &CMat) -> Result<f64> {
    let m = mean(rho, x);
    let eig = hermitian_spectrum(x)?;
    let abs = eig.reconstruct(|v| (v - m).abs());
    Ok(expectation(&abs, rho))
}

/// Spread `λ_max − λ_min` of a Hermitian operator.
pub fn spectral_spread(x: &CMat) -> Result<f64> {
    let s = hermitian_spectrum(x)?;
    Ok((s.max() - s.min()).max(0.0))
}

/// Purification `Σ √r_l |l⟩_S|l⟩_R` of `rho` together with the reference
/// operator `X_R` for which `X_S ⊗ 1 + 1 ⊗ X_R` has variance `QFI / 4`.
#[derive(Clone, Debug)]
pub struct MinimalVarianceReference {
    pub purification: CVec,
    pub system_dim: usize,
    pub reference_dim: usize,
    pub x_reference: CMat,
}

impl MinimalVarianceReference {
    /// `X_S ⊗ 1 + 1 ⊗ X_R` on the purification space.
    pub fn total_generator(&self, x: &CMat) -> CMat {
        let ds = self.system_dim;
        let dr = self.reference_dim;
        x.kronecker(&CMat::identity(dr, dr)) + CMat::identity(ds, ds).kronecker(&self.x_reference)
    }

    pub fn total_variance(&self, x: &CMat) -> f64 {
        let g = self.total_generator(x);
        variance(&outer(&self.purification), &g)
    }
}

pub fn minimal_variance_reference(rho: &CMat, x: &CMat) -> Result<MinimalVarianceReference> {
    let (r, xe) = eigen_frame(rho, &[x])?;
    let eig = psd_spectrum(rho)?;
    let xe = &xe[0];
    let d = r.len();
    let support: Vec<usize> = (0..d).filter(|&i| r[i] > QFI_PAIR_CUTOFF).collect();
    let rank = support.len().max(1);
    let mut psi = CVec::zeros(d * rank);
    for (k, &l) in support.iter().enumerate() {
        let w = r[l].sqrt();
        for i in 0..d {
            psi[i * rank + k] = eig.vectors[(i, l)] * w;
        }
    }
    let n = psi.norm();
    let psi = psi.unscale(n);
    // (X_R)_{l m} = −2√(r_l r_m)/(r_l + r_m) ⟨m|X|l⟩ in the eigenbasis of ρ.
    let mut xr = CMat::zeros(rank, rank);
    for (a, &l) in support.iter().enumerate() {
        for (b, &m) in support.iter().enumerate() {
            let w = 2.0 * (r[l] * r[m]).sqrt() / (r[l] + r[m]);
            xr[(a, b)] = -xe[(m, l)] * w;
        }
    }
    Ok(MinimalVarianceReference { purification: psi, system_dim: d, reference_dim: rank, x_reference: xr })
}

/// Outcome of the mean-variance-distance tradeoff relations.
#[derive(Clone, Debug)]
pub struct TradeoffCheck {
    pub delta: f64,
    pub purified_distance: f64,
    pub var_rho: f64,
    pub var_sigma: f64,
    /// `|Δ| ≤ D_F (√V_ρ + √V_σ + |Δ|)`
    pub rcr2_lhs: f64,
    pub rcr2_rhs: f64,
    /// `Δ² ≤ D_F² ((√V_ρ + √V_σ)² + Δ²)`
    pub nrc_lhs: f64,
    pub nrc_rhs: f64,
}

impl TradeoffCheck {
    pub fn rcr2_holds(&self, tol: f64) -> bool {
        self.rcr2_lhs <= self.rcr2_rhs + tol
    }

    pub fn nrc_holds(&self, tol: f64) -> bool {
        self.nrc_lhs <= self.nrc_rhs + tol
    }
}

pub fn mvd_tradeoff_check(rho: &CMat, sigma: &CMat, x: &CMat) -> Result<TradeoffCheck> {
    check_hermitian(x)?;
    let delta = mean(rho, x) - mean(sigma, x);
    let df = purified_distance(rho, sigma)?;
    let vr = variance(rho, x);
    let vs = variance(sigma, x);
    let s = vr.sqrt() + vs.sqrt();
    Ok(TradeoffCheck {
        delta,
        purified_distance: df,
        var_rho: vr,
        var_sigma: vs,
        rcr2_lhs: delta.abs(),
        rcr2_rhs: df * (s + delta.abs()),
        nrc_lhs: delta * delta,
        nrc_rhs: df * df * (s * s + delta * delta),
    })
}

/// `exp(−iXε) ρ exp(iXε)`.
pub fn rotate(rho: &CMat, x: &CMat, eps: f64) -> Result<CMat> {
    let u = crate::linalg::unitary_exp(x, -eps)?;
    Ok(&u * rho * u.adjoint())
}

/// Finite-difference QFI `4 D_F(e^{−iXε}ρe^{iXε}, ρ)² / ε²`.
pub fn qfi_finite_difference(rho: &CMat, x: &CMat, eps: f64) -> Result<f64> {
    let moved = rotate(rho, x, eps)?;
    let f = fidelity(&moved, rho)?;
    Ok(4.0 * (1.0 - f * f) / (eps * eps))
}

/// Squared average fidelity over pure inputs from the squared entanglement
/// fidelity: `F_avg² = (d F_ent² + 1)/(d + 1)`.
pub fn avg_from_entanglement_fidelity(f_ent_sq: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::ZeroDimension("d".into()));
    }
    if !(0.0..=1.0).contains(&f_ent_sq) {
        return Err(Error::InvalidInput(format!("squared entanglement fidelity {f_ent_sq} outside [0, 1]")));
    }
    let d = d as f64;
    Ok((d * f_ent_sq + 1.0) / (d + 1.0))
}

/// Squared entanglement fidelity `⟨Φ|(id ⊗ ℰ)(Φ)|Φ⟩ = Σ_k |Tr K_k|² / d²`.
pub fn entanglement_fidelity_sq(kraus: &[CMat]) -> Result<f64> {
    let d = kraus.first().map(|k| k.ncols()).ok_or_else(|| Error::InvalidInput("no Kraus operators".into()))?;
    for k in kraus {
        check_square(k, d)?;
    }
    Ok(kraus.iter().map(|k| k.trace().norm_sqr()).sum::<f64>() / (d * d) as f64)
}

pub fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{basis_vector, diag_real, random_density, random_hermitian, rng_from_seed};

    fn plus() -> CVec {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CVec::from_vec(vec![C64::new(s, 0.0), C64::new(s, 0.0)])
    }

    #[test]
    fn orthogonal_states_have_unit_distance() {
        let r0 = outer(&basis_vector(2, 0));
        let r1 = outer(&basis_vector(2, 1));
        assert!((purified_distance(&r0, &r1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distance_to_self_vanishes() {
        let mut rng = rng_from_seed(11);
        let r = random_density(&mut rng, 4, 4);
        assert!(purified_distance(&r, &r).unwrap() < 1e-6);
    }

    #[test]
    fn fidelity_pure_agrees_with_general_form() {
        let mut rng = rng_from_seed(12);
        let s = random_density(&mut rng, 3, 2);
        let psi = crate::linalg::random_pure_state(&mut rng, 3);
        let a = fidelity_pure(&psi, &s).unwrap();
        let b = fidelity(&outer(&psi), &s).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn pure_state_qfi_is_four_variances() {
        let mut rng = rng_from_seed(13);
        let psi = crate::linalg::random_pure_state(&mut rng, 4);
        let x = random_hermitian(&mut rng, 4);
        let r = outer(&psi);
        assert!((qfi(&r, &x).unwrap() - 4.0 * variance(&r, &x)).abs() < 1e-10);
    }

    #[test]
    fn maximally_mixed_state_has_zero_qfi() {
        let mut rng = rng_from_seed(14);
        let x = random_hermitian(&mut rng, 3);
        let r = CMat::identity(3, 3).unscale(3.0);
        assert!(qfi(&r, &x).unwrap().abs() < 1e-12);
    }

    #[test]
    fn plus_state_moments() {
        let r = outer(&plus());
        let x = diag_real(&[0.0, 1.0]);
        assert!((qfi(&r, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!((variance(&r, &x) - 0.25).abs() < 1e-12);
        assert!((mean_deviation(&r, &x).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tradeoff_is_tight_for_orthogonal_eigenstates() {
        let r0 = outer(&basis_vector(2, 0));
        let r1 = outer(&basis_vector(2, 1));
        let x = diag_real(&[0.0, 1.0]);
        let t = mvd_tradeoff_check(&r0, &r1, &x).unwrap();
        assert!((t.rcr2_lhs - 1.0).abs() < 1e-12);
        assert!((t.rcr2_rhs - 1.0).abs() < 1e-12);
    }

    #[test]
    fn minimal_variance_reference_reaches_qfi() {
        let mut rng = rng_from_seed(15);
        let r = random_density(&mut rng, 3, 3);
        let x = random_hermitian(&mut rng, 3);
        let mv = minimal_variance_reference(&r, &x).unwrap();
        assert!((4.0 * mv.total_variance(&x) - qfi(&r, &x).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn minimal_variance_reference_for_pure_state_is_minus_mean() {
        let r = outer(&plus());
        let x = diag_real(&[0.0, 1.0]);
        let mv = minimal_variance_reference(&r, &x).unwrap();
        assert_eq!(mv.reference_dim, 1);
        assert!((mv.x_reference[(0, 0)].re + 0.5).abs() < 1e-12);
    }

    #[test]
    fn average_fidelity_of_identity_channel_is_one() {
        assert!((avg_from_entanglement_fidelity(1.0, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((avg_from_entanglement_fidelity(0.0, 2).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(avg_from_entanglement_fidelity(1.5, 2).is_err());
    }

    #[test]
    fn density_matrix_validation() {
        let l = Layout::single("A", 2).unwrap();
        assert!(matches!(
            DensityMatrix::new(diag_real(&[0.6, 0.6]), l.clone()),
            Err(Error::NotNormalized(_))
        ));
        assert!(matches!(DensityMatrix::new(diag_real(&[1.5, -0.5]), l), Err(Error::NotPsd(_))));
    }
}
