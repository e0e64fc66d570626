//! Quantum channels in Stinespring form and the bipartite dynamics instance.

use crate::error::{Error, Result};
use crate::linalg::{
    check_hermitian, check_square, conjugate_local, isometry_deviation, kron_vec, max_abs,
    partial_trace, reduced_from_vector, reorder_operator, reorder_vector, CMat, CVec, Layout, C64,
};

/// Tolerance for isometry / trace-preservation checks on channels.
pub const CHANNEL_TOL: f64 = 1e-8;

/// Channel `ρ ↦ Tr_env(V ρ V†)` with `V : in → out ⊗ env` (output index major).
#[derive(Clone, Debug)]
pub struct QuantumChannel {
    isometry: CMat,
    input: Layout,
    output: Layout,
    env_dim: usize,
}

impl QuantumChannel {
    pub fn new(isometry: CMat, input: Layout, output: Layout, env_dim: usize) -> Result<Self> {
        let rows = output.total_dim() * env_dim;
        if isometry.nrows() != rows {
            return Err(Error::DimensionMismatch { expected: rows, found: isometry.nrows() });
        }
        if isometry.ncols() != input.total_dim() {
            return Err(Error::DimensionMismatch {
                expected: input.total_dim(),
                found: isometry.ncols(),
            });
        }
        let dev = isometry_deviation(&isometry);
        if dev > CHANNEL_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(QuantumChannel { isometry, input, output, env_dim })
    }

    pub fn from_kraus(kraus: &[CMat], input: Layout, output: Layout) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::InvalidInput("empty Kraus list".into()));
        }
        let din = input.total_dim();
        let dout = output.total_dim();
        let n = kraus.len();
        let mut v = CMat::zeros(dout * n, din);
        for (e, k) in kraus.iter().enumerate() {
            if k.nrows() != dout || k.ncols() != din {
                return Err(Error::DimensionMismatch { expected: dout * din, found: k.len() });
            }
            for o in 0..dout {
                for i in 0..din {
                    v[(o * n + e, i)] = k[(o, i)];
                }
            }
        }
        QuantumChannel::new(v, input, output, n)
    }

    pub fn from_unitary(u: CMat, input: Layout, output: Layout) -> Result<Self> {
        QuantumChannel::new(u, input, output, 1)
    }

    pub fn identity(layout: Layout) -> Self {
        let d = layout.total_dim();
        QuantumChannel { isometry: CMat::identity(d, d), input: layout.clone(), output: layout, env_dim: 1 }
    }

    pub fn isometry(&self) -> &CMat {
        &self.isometry
    }

    pub fn input(&self) -> &Layout {
        &self.input
    }

    pub fn output(&self) -> &Layout {
        &self.output
    }

    pub fn env_dim(&self) -> usize {
        self.env_dim
    }

    pub fn input_dim(&self) -> usize {
        self.input.total_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.output.total_dim()
    }

    pub fn kraus(&self) -> Vec<CMat> {
        let dout = self.output_dim();
        let din = self.input_dim();
        let n = self.env_dim;
        (0..n)
            .map(|e| CMat::from_fn(dout, din, |o, i| self.isometry[(o * n + e, i)]))
            .filter(|k| max_abs(k) > 0.0)
            .collect()
    }

    /// Apply to any operator on the input space (not necessarily Hermitian).
    pub fn apply(&self, m: &CMat) -> Result<CMat> {
        check_square(m, self.input_dim())?;
        let dout = self.output_dim();
        let mut out = CMat::zeros(dout, dout);
        for k in self.kraus() {
            out += &k * m * k.adjoint();
        }
        Ok(out)
    }

    /// Heisenberg picture `Σ K† Y K`.
    pub fn adjoint_apply(&self, y: &CMat) -> Result<CMat> {
        check_square(y, self.output_dim())?;
        let din = self.input_dim();
        let mut out = CMat::zeros(din, din);
        for k in self.kraus() {
            out += k.adjoint() * y * &k;
        }
        Ok(out)
    }

    /// Apply to the subsystems of `layout` that carry the channel's input
    /// labels; other subsystems are spectators. Result layout is the channel
    /// output followed by the spectators in their original order.
    pub fn apply_on(&self, m: &CMat, layout: &Layout) -> Result<(CMat, Layout)> {
        let inputs = self.input.labels();
        let mut order: Vec<&str> = inputs.clone();
        let spectators: Vec<&str> =
            layout.labels().into_iter().filter(|l| !inputs.contains(l)).collect();
        order.extend(spectators.iter().copied());
        let (mp, lp) = reorder_operator(m, layout, &order)?;
        if lp.select(&inputs)?.dims() != self.input.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.input.total_dim(),
                found: lp.select(&inputs)?.total_dim(),
            });
        }
        let rest = layout.total_dim() / self.input_dim();
        let dout = self.output_dim();
        let mut out = CMat::zeros(dout * rest, dout * rest);
        for k in self.kraus() {
            out += conjugate_local(&k, &mp, rest);
        }
        let spect_layout = layout.select(&spectators)?;
        let out_layout = self.output.concat(&spect_layout)?;
        Ok((out, out_layout))
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &QuantumChannel) -> Result<QuantumChannel> {
        if other.input.dims() != self.output.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.output_dim(),
                found: other.input_dim(),
            });
        }
        let mut kraus = Vec::new();
        for k2 in other.kraus() {
            for k1 in self.kraus() {
                kraus.push(&k2 * &k1);
            }
        }
        let kraus = compress_kraus(&kraus, self.input_dim() * other.output_dim());
        QuantumChannel::from_kraus(&kraus, self.input.clone(), other.output.clone())
    }

    /// `max |Σ K†K − I|`.
    pub fn trace_preservation_error(&self) -> f64 {
        isometry_deviation(&self.isometry)
    }
}

/// Equivalent Kraus set with at most `max_count` operators (exact when the
/// Kraus rank does not exceed `max_count`).
pub fn compress_kraus(kraus: &[CMat], max_count: usize) -> Vec<CMat> {
    if kraus.is_empty() {
        return vec![];
    }
    let (dout, din) = kraus[0].shape();
    let n = kraus.len();
    let mut stack = CMat::zeros(dout * din, n);
    for (j, k) in kraus.iter().enumerate() {
        for o in 0..dout {
            for i in 0..din {
                stack[(o * din + i, j)] = k[(o, i)];
            }
        }
    }
    let svd = stack.svd(true, false);
    let u = svd.u.expect("svd u");
    let s = svd.singular_values;
    let top = s.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    for j in 0..s.len() {
        if s[j] <= top * 1e-14 || out.len() >= max_count {
            continue;
        }
        out.push(CMat::from_fn(dout, din, |o, i| u[(o * din + i, j)] * s[j]));
    }
    out
}

/// Charges of one conserved quantity on the four subsystems.
#[derive(Clone, Debug)]
pub struct Charges {
    pub x_a: CMat,
    pub x_b: CMat,
    pub x_a_out: CMat,
    pub x_b_out: CMat,
}

impl Charges {
    pub fn total_in(&self) -> CMat {
        let da = self.x_a.nrows();
        let db = self.x_b.nrows();
        self.x_a.kronecker(&CMat::identity(db, db)) + CMat::identity(da, da).kronecker(&self.x_b)
    }

    pub fn total_out(&self) -> CMat {
        let da = self.x_a_out.nrows();
        let db = self.x_b_out.nrows();
        self.x_a_out.kronecker(&CMat::identity(db, db))
            + CMat::identity(da, da).kronecker(&self.x_b_out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub a: usize,
    pub ra: usize,
    pub b: usize,
    pub rb: usize,
    pub a_out: usize,
    pub b_out: usize,
}

/// Input `ψ_{AR_A} ⊗ φ_{BR_B}`, dynamics `U : AB → A'B'` and conserved charges.
/// The first entry of `charges` is the primary charge.
#[derive(Clone, Debug)]
pub struct Instance {
    pub psi: CVec,
    pub phi: CVec,
    pub u: CMat,
    pub dims: Dims,
    pub charges: Vec<Charges>,
}

pub const A: &str = "A";
pub const B: &str = "B";
pub const RA: &str = "RA";
pub const RB: &str = "RB";
pub const A_OUT: &str = "A'";
pub const B_OUT: &str = "B'";

impl Instance {
    pub fn new(psi: CVec, phi: CVec, u: CMat, dims: Dims, charges: Vec<Charges>) -> Result<Self> {
        if psi.len() != dims.a * dims.ra {
            return Err(Error::DimensionMismatch { expected: dims.a * dims.ra, found: psi.len() });
        }
        if phi.len() != dims.b * dims.rb {
            return Err(Error::DimensionMismatch { expected: dims.b * dims.rb, found: phi.len() });
        }
        for v in [&psi, &phi] {
            let n = v.norm_squared();
            if (n - 1.0).abs() > 1e-8 {
                return Err(Error::NotNormalized(n - 1.0));
            }
        }
        let d = dims.a * dims.b;
        if dims.a_out * dims.b_out != d {
            return Err(Error::DimensionMismatch { expected: d, found: dims.a_out * dims.b_out });
        }
        check_square(&u, d)?;
        let dev = isometry_deviation(&u);
        if dev > CHANNEL_TOL {
            return Err(Error::NotIsometry(dev));
        }
        for ch in &charges {
            for (x, dim) in [
                (&ch.x_a, dims.a),
                (&ch.x_b, dims.b),
                (&ch.x_a_out, dims.a_out),
                (&ch.x_b_out, dims.b_out),
            ] {
                check_square(x, dim)?;
                check_hermitian(x)?;
            }
        }
        if charges.is_empty() {
            return Err(Error::InvalidInput("at least one conserved charge is required".into()));
        }
        crate::linalg::check_dim_cap(d)?;
        Ok(Instance { psi, phi, u, dims, charges })
    }

    pub fn charge(&self) -> &Charges {
        &self.charges[0]
    }

    pub fn psi_layout(&self) -> Layout {
        Layout::new(&[(A, self.dims.a), (RA, self.dims.ra)]).expect("layout")
    }

    pub fn phi_layout(&self) -> Layout {
        Layout::new(&[(B, self.dims.b), (RB, self.dims.rb)]).expect("layout")
    }

    pub fn rho_a(&self) -> CMat {
        reduced_from_vector(&self.psi, &self.psi_layout(), &[A]).expect("layout").0
    }

    pub fn rho_b(&self) -> CMat {
        reduced_from_vector(&self.phi, &self.phi_layout(), &[B]).expect("layout").0
    }

    pub fn psi_matrix(&self) -> CMat {
        CMat::from_fn(self.dims.a, self.dims.ra, |a, r| self.psi[a * self.dims.ra + r])
    }

    /// `U (ρ ⊗ ρ_B) U†` on `A'B'`.
    pub fn joint_output(&self, rho: &CMat) -> Result<CMat> {
        check_square(rho, self.dims.a)?;
        let full = rho.kronecker(&self.rho_b());
        Ok(&self.u * full * self.u.adjoint())
    }

    fn out_layout(&self) -> Layout {
        Layout::new(&[(A_OUT, self.dims.a_out), (B_OUT, self.dims.b_out)]).expect("layout")
    }

    /// `ℰ(ρ) = Tr_{B'} U(ρ ⊗ ρ_B)U†`.
    pub fn apply_e(&self, rho: &CMat) -> Result<CMat> {
        Ok(partial_trace(&self.joint_output(rho)?, &self.out_layout(), &[A_OUT])?.0)
    }

    /// `Tr_{A'} U(ρ ⊗ ρ_B)U†`.
    pub fn apply_complement(&self, rho: &CMat) -> Result<CMat> {
        Ok(partial_trace(&self.joint_output(rho)?, &self.out_layout(), &[B_OUT])?.0)
    }

    /// Stinespring isometry `|a⟩ ↦ (U ⊗ 1)(|a⟩|φ⟩)` into `A' ⊗ B' ⊗ R_B`.
    fn stinespring(&self) -> CMat {
        let Dims { a, b, rb, .. } = self.dims;
        let mut v = CMat::zeros(a * b * rb, a);
        for ai in 0..a {
            for bi in 0..b {
                for r in 0..rb {
                    let amp = self.phi[bi * rb + r];
                    if amp == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let col = ai * b + bi;
                    for o in 0..a * b {
                        v[(o * rb + r, ai)] += self.u[(o, col)] * amp;
                    }
                }
            }
        }
        v
    }

    /// Channel `A → A'` (environment `B' R_B`).
    pub fn channel_e(&self) -> Result<QuantumChannel> {
        let v = self.stinespring();
        QuantumChannel::new(
            v,
            Layout::single(A, self.dims.a)?,
            Layout::single(A_OUT, self.dims.a_out)?,
            self.dims.b_out * self.dims.rb,
        )
    }

    /// Channel `A → A' R_B` (environment `B'`).
    pub fn channel_to_a_out_rb(&self) -> Result<QuantumChannel> {
        let Dims { a, a_out, b_out, rb, .. } = self.dims;
        let v = self.stinespring();
        // rows of v: (a', b', r); reorder to (a', r, b').
        let mut w = CMat::zeros(a_out * rb * b_out, a);
        for ao in 0..a_out {
            for bo in 0..b_out {
                for r in 0..rb {
                    let src = (ao * b_out + bo) * rb + r;
                    let dst = (ao * rb + r) * b_out + bo;
                    for i in 0..a {
                        w[(dst, i)] = v[(src, i)];
                    }
                }
            }
        }
        QuantumChannel::new(
            w,
            Layout::single(A, a)?,
            Layout::new(&[(A_OUT, a_out), (RB, rb)])?,
            b_out,
        )
    }

    pub fn scramble(&self) -> Result<ScrambledState> {
        let Dims { a, ra, b, rb, a_out, b_out } = self.dims;
        let input = kron_vec(&self.psi, &self.phi);
        let layout = Layout::new(&[(A, a), (RA, ra), (B, b), (RB, rb)])?;
        let (v, _) = reorder_vector(&input, &layout, &[A, B, RA, RB])?;
        let nr = ra * rb;
        let mut out = CVec::zeros(v.len());
        for o in 0..a * b {
            for i in 0..a * b {
                let uoi = self.u[(o, i)];
                if uoi == C64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..nr {
                    out[o * nr + r] += uoi * v[i * nr + r];
                }
            }
        }
        let layout = Layout::new(&[(A_OUT, a_out), (B_OUT, b_out), (RA, ra), (RB, rb)])?;
        Ok(ScrambledState { omega: out, layout })
    }
}

/// Global pure state after the dynamics, on `A' B' R_A R_B`.
#[derive(Clone, Debug)]
pub struct ScrambledState {
    pub omega: CVec,
    pub layout: Layout,
}

impl ScrambledState {
    pub fn reduced(&self, keep: &[&str]) -> Result<CMat> {
        Ok(reduced_from_vector(&self.omega, &self.layout, keep)?.0)
    }

    /// Amplitudes reordered as `(R_A, Q, rest)` for a recovery acting on `q`.
    pub fn arranged(&self, q: &[&str]) -> Result<(CVec, usize, usize, usize)> {
        let mut order = vec![RA];
        order.extend_from_slice(q);
        let rest: Vec<&str> =
            self.layout.labels().into_iter().filter(|l| !order.contains(l)).collect();
        order.extend(rest.iter().copied());
        let (v, l) = reorder_vector(&self.omega, &self.layout, &order)?;
        let dr = l.select(&[RA])?.total_dim();
        let dq = l.select(q)?.total_dim();
        let db = l.total_dim() / (dr * dq);
        Ok((v, dr, dq, db))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{diag_real, haar_unitary, random_density, random_pure_state, rng_from_seed};

    fn bell() -> CVec {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        CVec::from_vec(vec![C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)])
    }

    fn qubit_charges() -> Charges {
        let n = diag_real(&[0.0, 1.0]);
        Charges { x_a: n.clone(), x_b: n.clone(), x_a_out: n.clone(), x_b_out: n }
    }

    fn swap_instance() -> Instance {
        let mut u = CMat::zeros(4, 4);
        for (i, j) in [(0, 0), (1, 2), (2, 1), (3, 3)] {
            u[(i, j)] = C64::new(1.0, 0.0);
        }
        let dims = Dims { a: 2, ra: 2, b: 2, rb: 2, a_out: 2, b_out: 2 };
        Instance::new(bell(), bell(), u, dims, vec![qubit_charges()]).unwrap()
    }

    #[test]
    fn kraus_round_trip_and_trace_preservation() {
        let mut rng = rng_from_seed(21);
        let v = crate::linalg::haar_isometry(&mut rng, 6, 2);
        let ch = QuantumChannel::new(
            v,
            Layout::single("X", 2).unwrap(),
            Layout::single("Y", 2).unwrap(),
            3,
        )
        .unwrap();
        let again = QuantumChannel::from_kraus(&ch.kraus(), ch.input().clone(), ch.output().clone()).unwrap();
        let rho = random_density(&mut rng, 2, 2);
        let d = ch.apply(&rho).unwrap() - again.apply(&rho).unwrap();
        assert!(max_abs(&d) < 1e-12);
        assert!((ch.apply(&rho).unwrap().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_isometry_is_rejected() {
        let v = CMat::identity(2, 2).scale(2.0);
        let l = Layout::single("X", 2).unwrap();
        assert!(matches!(QuantumChannel::new(v, l.clone(), l, 1), Err(Error::NotTracePreserving(_))));
    }

    #[test]
    fn apply_on_with_spectator_matches_kron() {
        let mut rng = rng_from_seed(22);
        let u = haar_unitary(&mut rng, 2);
        let ch = QuantumChannel::from_unitary(
            u.clone(),
            Layout::single("B", 2).unwrap(),
            Layout::single("C", 2).unwrap(),
        )
        .unwrap();
        let rho = random_density(&mut rng, 6, 6);
        let layout = Layout::new(&[("A", 3), ("B", 2)]).unwrap();
        let (out, l) = ch.apply_on(&rho, &layout).unwrap();
        assert_eq!(l.labels(), vec!["C", "A"]);
        let (perm, _) = reorder_operator(&rho, &layout, &["B", "A"]).unwrap();
        let big = u.kronecker(&CMat::identity(3, 3));
        let expect = &big * perm * big.adjoint();
        assert!(max_abs(&(out - expect)) < 1e-12);
    }

    #[test]
    fn swap_dynamics_moves_reference_correlations() {
        let inst = swap_instance();
        let s = inst.scramble().unwrap();
        // A' now holds B's half, so A' R_B is a Bell pair.
        let r = s.reduced(&[A_OUT, RB]).unwrap();
        let bell_rho = crate::linalg::outer(&bell());
        assert!(max_abs(&(r - bell_rho)) < 1e-12);
        let e = inst.channel_e().unwrap();
        let rho = random_density(&mut rng_from_seed(5), 2, 2);
        let out = e.apply(&rho).unwrap();
        assert!(max_abs(&(out - CMat::identity(2, 2).scale(0.5))) < 1e-12);
    }

    #[test]
    fn channel_views_agree_with_direct_evaluation() {
        let mut rng = rng_from_seed(23);
        let u = haar_unitary(&mut rng, 8);
        let dims = Dims { a: 2, ra: 2, b: 4, rb: 3, a_out: 4, b_out: 2 };
        let psi = random_pure_state(&mut rng, 4);
        let phi = random_pure_state(&mut rng, 12);
        let ch = Charges {
            x_a: diag_real(&[0.0, 1.0]),
            x_b: diag_real(&[0.0, 1.0, 1.0, 2.0]),
            x_a_out: diag_real(&[0.0, 1.0, 1.0, 2.0]),
            x_b_out: diag_real(&[0.0, 1.0]),
        };
        let inst = Instance::new(psi, phi, u, dims, vec![ch]).unwrap();
        let rho = random_density(&mut rng, 2, 2);
        let direct = inst.apply_e(&rho).unwrap();
        let via = inst.channel_e().unwrap().apply(&rho).unwrap();
        assert!(max_abs(&(direct - via)) < 1e-12);
        let s = inst.scramble().unwrap();
        let ra = inst.rho_a();
        let from_scramble = s.reduced(&[A_OUT]).unwrap();
        assert!(max_abs(&(from_scramble - inst.apply_e(&ra).unwrap())) < 1e-12);
        let n = inst.channel_to_a_out_rb().unwrap();
        let q = s.reduced(&[A_OUT, RB]).unwrap();
        assert!(max_abs(&(q - n.apply(&ra).unwrap())) < 1e-12);
    }

    #[test]
    fn composed_channel_matches_sequential_application() {
        let mut rng = rng_from_seed(24);
        let l2 = Layout::single("X", 2).unwrap();
        let c1 = QuantumChannel::new(crate::linalg::haar_isometry(&mut rng, 4, 2), l2.clone(), l2.clone(), 2).unwrap();
        let c2 = QuantumChannel::new(crate::linalg::haar_isometry(&mut rng, 6, 2), l2.clone(), l2, 3).unwrap();
        let rho = random_density(&mut rng, 2, 2);
        let seq = c2.apply(&c1.apply(&rho).unwrap()).unwrap();
        let comp = c1.then(&c2).unwrap().apply(&rho).unwrap();
        assert!(max_abs(&(seq - comp)) < 1e-12);
    }
}
