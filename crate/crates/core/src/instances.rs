//! Seeded generators of qubit instances with conserved charges.

use rand::Rng;

use crate::channel::{Charges, Dims, Instance};
use crate::error::{Error, Result};
use crate::linalg::{
    diag_real, hermitian_part, operator_norm, random_hermitian, random_pure_state, rng_from_seed, unitary_exp, CMat,
    CVec,
};
use crate::symmetry::{charge_sectors, joint_charge_sectors, sample_block_haar};

/// Charge `Σ_q w_q |1⟩⟨1|_q` on a register of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct QubitCharge {
    pub weights: Vec<f64>,
}

impl QubitCharge {
    pub fn uniform(n: usize) -> Self {
        QubitCharge { weights: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Diagonal operator of the qubits `range` (most significant qubit first).
    pub fn local(&self, range: std::ops::Range<usize>) -> CMat {
        let w = &self.weights[range];
        let n = w.len();
        let diag: Vec<f64> = (0..1usize << n)
            .map(|idx| (0..n).filter(|&q| idx >> (n - 1 - q) & 1 == 1).map(|q| w[q]).sum())
            .collect();
        diag_real(&diag)
    }

    pub fn total(&self) -> CMat {
        self.local(0..self.len())
    }

    /// Charges for inputs `A` = first `qa` qubits and outputs `A'` = first `l` qubits.
    pub fn split(&self, qa: usize, l: usize) -> Charges {
        let n = self.len();
        Charges {
            x_a: self.local(0..qa),
            x_b: self.local(qa..n),
            x_a_out: self.local(0..l),
            x_b_out: self.local(l..n),
        }
    }
}

/// Qubit counts of a random instance. `A` and `R_A` have `qa` qubits,
/// `B` and `R_B` have `qb` qubits, `A'` has `l` qubits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QubitShape {
    pub qa: usize,
    pub qb: usize,
    pub l: usize,
}

impl QubitShape {
    pub fn dims(&self) -> Dims {
        let n = self.qa + self.qb;
        Dims {
            a: 1 << self.qa,
            ra: 1 << self.qa,
            b: 1 << self.qb,
            rb: 1 << self.qb,
            a_out: 1 << self.l,
            b_out: 1 << (n - self.l),
        }
    }

    /// Shape drawn from `qa, qb ∈ {1, 2}` and `1 ≤ l < qa + qb`.
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        let qa = rng.random_range(1..=2);
        let qb = rng.random_range(1..=2);
        let l = rng.random_range(1..qa + qb);
        QubitShape { qa, qb, l }
    }

    fn validate(&self) -> Result<()> {
        if self.qa == 0 || self.qb == 0 {
            return Err(Error::ZeroDimension("qubit count".into()));
        }
        if self.l > self.qa + self.qb {
            return Err(Error::InvalidInput(format!("l = {} exceeds qa + qb = {}", self.l, self.qa + self.qb)));
        }
        Ok(())
    }
}

/// How the input states are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StateKind {
    /// Haar random purifications.
    Random,
    /// `ρ_A` diagonal in the charge basis with random weights; `φ` random.
    ChargeDiagonal,
}

fn diagonal_purification<R: Rng>(rng: &mut R, d: usize) -> CVec {
    let w: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    let mut v = CVec::zeros(d * d);
    for (i, wi) in w.iter().enumerate() {
        v[i * d + i] = crate::linalg::c((wi / s).sqrt(), 0.0);
    }
    v
}

fn states<R: Rng>(rng: &mut R, dims: &Dims, kind: StateKind) -> (CVec, CVec) {
    let psi = match kind {
        StateKind::Random => random_pure_state(rng, dims.a * dims.ra),
        StateKind::ChargeDiagonal => diagonal_purification(rng, dims.a),
    };
    let phi = random_pure_state(rng, dims.b * dims.rb);
    (psi, phi)
}

/// Instance whose dynamics is block-Haar over the sectors of the total qubit
/// number, which is therefore conserved.
pub fn random_conserving_instance(seed: u64, shape: QubitShape, kind: StateKind) -> Result<Instance> {
    shape.validate()?;
    let mut rng = rng_from_seed(seed);
    let charge = QubitCharge::uniform(shape.qa + shape.qb);
    let u = sample_block_haar(&charge_sectors(&charge.total())?, &mut rng)?;
    let dims = shape.dims();
    let (psi, phi) = states(&mut rng, &dims, kind);
    Instance::new(psi, phi, u, dims, vec![charge.split(shape.qa, shape.l)])
}

/// Conserving instance with the shape itself drawn from the seed.
pub fn random_small_instance(seed: u64) -> Result<Instance> {
    let mut rng = rng_from_seed(seed ^ 0x9e37_79b9_7f4a_7c15);
    let shape = QubitShape::random(&mut rng);
    let kind = if rng.random_bool(0.5) { StateKind::Random } else { StateKind::ChargeDiagonal };
    random_conserving_instance(seed, shape, kind)
}

/// Family `U(θ) = U_0 e^{iθH}` interpolating away from a conserving `U_0`,
/// with `H` a random Hermitian perturbation of unit operator norm.
#[derive(Clone, Debug)]
pub struct ViolationFamily {
    pub base: Instance,
    pub perturbation: CMat,
}

impl ViolationFamily {
    pub fn new(seed: u64, shape: QubitShape, kind: StateKind) -> Result<Self> {
        let base = random_conserving_instance(seed, shape, kind)?;
        let mut rng = rng_from_seed(seed.wrapping_mul(31).wrapping_add(17));
        let h = random_hermitian(&mut rng, base.u.nrows());
        let h = hermitian_part(&h).unscale(operator_norm(&h));
        Ok(ViolationFamily { base, perturbation: h })
    }

    pub fn at(&self, theta: f64) -> Result<Instance> {
        let u = &self.base.u * unitary_exp(&self.perturbation, theta)?;
        let b = &self.base;
        Instance::new(b.psi.clone(), b.phi.clone(), u, b.dims, b.charges.clone())
    }
}

/// `2+2` qubit instance conserving two commuting charges: the total qubit
/// number and the number on the first qubit of `A` plus the first qubit of `B`.
pub fn two_charge_instance(seed: u64, l: usize) -> Result<Instance> {
    let shape = QubitShape { qa: 2, qb: 2, l };
    shape.validate()?;
    let mut rng = rng_from_seed(seed);
    let c1 = QubitCharge::uniform(4);
    let c2 = QubitCharge { weights: vec![1.0, 0.0, 1.0, 0.0] };
    let u = sample_block_haar(&joint_charge_sectors(&[c1.total(), c2.total()])?, &mut rng)?;
    let dims = shape.dims();
    let (psi, phi) = states(&mut rng, &dims, StateKind::Random);
    Instance::new(psi, phi, u, dims, vec![c1.split(2, l), c2.split(2, l)])
}

fn pauli(which: char) -> CMat {
    use crate::linalg::c;
    let (a, b, cc, d) = match which {
        'x' => (c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)),
        'y' => (c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)),
        _ => (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)),
    };
    CMat::from_row_slice(2, 2, &[a, b, cc, d])
}

/// Two-qubit instance with `U = e^{iα} e^{iθ SWAP}`, which conserves every
/// collective spin component. Charges are `σ_z/2` and `σ_x/2` per qubit.
pub fn swap_instance(seed: u64) -> Result<Instance> {
    let mut rng = rng_from_seed(seed);
    let mut swap = CMat::zeros(4, 4);
    for i in 0..2 {
        for j in 0..2 {
            swap[(i * 2 + j, j * 2 + i)] = crate::linalg::c(1.0, 0.0);
        }
    }
    let theta = rng.random_range(0.0..std::f64::consts::PI);
    let alpha = rng.random_range(0.0..std::f64::consts::TAU);
    let u = unitary_exp(&swap, theta)? * crate::linalg::c(alpha.cos(), alpha.sin());
    let dims = Dims { a: 2, ra: 2, b: 2, rb: 2, a_out: 2, b_out: 2 };
    let (psi, phi) = states(&mut rng, &dims, StateKind::Random);
    let charges = ['z', 'x']
        .iter()
        .map(|&p| {
            let x = pauli(p).scale(0.5);
            Charges { x_a: x.clone(), x_b: x.clone(), x_a_out: x.clone(), x_b_out: x }
        })
        .collect();
    Instance::new(psi, phi, u, dims, charges)
}
