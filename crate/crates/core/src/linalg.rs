//! Dense complex linear algebra on labelled tensor-product spaces.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Flat indices are row-major
//! over the subsystem order of a [`Layout`]: the first subsystem is the most
//! significant digit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;
pub type SeededRng = ChaCha8Rng;

/// Hermiticity tolerance (max entrywise deviation from the adjoint).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Eigenvalues in `[-PSD_CLAMP, 0)` are clamped to zero silently.
pub const PSD_CLAMP: f64 = 1e-10;
/// Eigenvalues below `-PSD_ERROR` make a PSD check fail.
pub const PSD_ERROR: f64 = 1e-8;
/// Default cap on the dimension of any single dense space.
pub const DEFAULT_DIM_CAP: usize = 4096;

const TIE_TOL: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Active dimension cap, honouring `SYMREC_DIM_CAP`.
pub fn dim_cap() -> usize {
    std::env::var("SYMREC_DIM_CAP")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_DIM_CAP)
}

pub fn check_dim_cap(dim: usize) -> Result<()> {
    let cap = dim_cap();
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labelled subsystems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    parts: Vec<Subsystem>,
}

impl Layout {
    pub fn new<S: AsRef<str>>(parts: &[(S, usize)]) -> Result<Self> {
        let mut out: Vec<Subsystem> = Vec::with_capacity(parts.len());
        for (label, dim) in parts {
            let label = label.as_ref().to_string();
            if *dim == 0 {
                return Err(Error::ZeroDimension(label));
            }
            if out.iter().any(|s| s.label == label) {
                return Err(Error::DuplicateSubsystem(label));
            }
            out.push(Subsystem { label, dim: *dim });
        }
        Ok(Layout { parts: out })
    }

    /// Single subsystem layout.
    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new(&[(label, dim)])
    }

    /// `n` subsystems labelled `{prefix}0..{prefix}{n-1}` of dimension `dim`.
    pub fn register(prefix: &str, n: usize, dim: usize) -> Result<Self> {
        let parts: Vec<(String, usize)> = (0..n).map(|i| (format!("{prefix}{i}"), dim)).collect();
        Self::new(&parts)
    }

    pub fn parts(&self) -> &[Subsystem] {
        &self.parts
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.parts.iter().map(|s| s.dim).collect()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.parts.iter().map(|s| s.label.as_str()).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.parts.iter().map(|s| s.dim).product()
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.parts
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::UnknownSubsystem(label.to_string()))
    }

    pub fn concat(&self, other: &Layout) -> Result<Layout> {
        let mut parts: Vec<(String, usize)> =
            self.parts.iter().map(|s| (s.label.clone(), s.dim)).collect();
        parts.extend(other.parts.iter().map(|s| (s.label.clone(), s.dim)));
        Layout::new(&parts)
    }

    pub fn select(&self, labels: &[&str]) -> Result<Layout> {
        let mut parts = Vec::with_capacity(labels.len());
        for l in labels {
            let i = self.index_of(l)?;
            parts.push((self.parts[i].label.clone(), self.parts[i].dim));
        }
        Layout::new(&parts)
    }

    /// Same dimensions, every label prefixed.
    pub fn prefixed(&self, prefix: &str) -> Layout {
        Layout {
            parts: self
                .parts
                .iter()
                .map(|s| Subsystem { label: format!("{prefix}{}", s.label), dim: s.dim })
                .collect(),
        }
    }
}

/// Map from flat index in the permuted order to flat index in the original.
/// `perm[k]` is the original axis placed at position `k`.
pub fn permutation_map(dims: &[usize], perm: &[usize]) -> Vec<usize> {
    let n = dims.len();
    debug_assert_eq!(perm.len(), n);
    let mut strides = vec![1usize; n];
    for i in (0..n.saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let total: usize = dims.iter().product();
    let mut map = vec![0usize; total];
    let mut digits = vec![0usize; n];
    for slot in map.iter_mut() {
        let mut old = 0;
        for k in 0..n {
            old += digits[k] * strides[perm[k]];
        }
        *slot = old;
        for k in (0..n).rev() {
            digits[k] += 1;
            if digits[k] < new_dims[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    map
}

pub fn permute_vector(v: &CVec, dims: &[usize], perm: &[usize]) -> CVec {
    let map = permutation_map(dims, perm);
    CVec::from_iterator(map.len(), map.iter().map(|&o| v[o]))
}

pub fn permute_operator(m: &CMat, dims: &[usize], perm: &[usize]) -> CMat {
    let map = permutation_map(dims, perm);
    let d = map.len();
    CMat::from_fn(d, d, |i, j| m[(map[i], map[j])])
}

/// Axis order that brings `first` to the front (in the given order) followed
/// by the remaining axes in layout order.
fn front_order(layout: &Layout, first: &[&str]) -> Result<Vec<usize>> {
    let mut order = Vec::with_capacity(layout.len());
    for l in first {
        let i = layout.index_of(l)?;
        if order.contains(&i) {
            return Err(Error::DuplicateSubsystem(l.to_string()));
        }
        order.push(i);
    }
    for i in 0..layout.len() {
        if !order.contains(&i) {
            order.push(i);
        }
    }
    Ok(order)
}

/// Reorder an operator so that its subsystems follow `order` (labels).
pub fn reorder_operator(m: &CMat, layout: &Layout, order: &[&str]) -> Result<(CMat, Layout)> {
    check_square(m, layout.total_dim())?;
    if order.len() != layout.len() {
        return Err(Error::InvalidInput("reorder must list every subsystem".into()));
    }
    let perm = front_order(layout, order)?;
    let out = layout.select(order)?;
    Ok((permute_operator(m, &layout.dims(), &perm), out))
}

pub fn reorder_vector(v: &CVec, layout: &Layout, order: &[&str]) -> Result<(CVec, Layout)> {
    if v.len() != layout.total_dim() {
        return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: v.len() });
    }
    if order.len() != layout.len() {
        return Err(Error::InvalidInput("reorder must list every subsystem".into()));
    }
    let perm = front_order(layout, order)?;
    let out = layout.select(order)?;
    Ok((permute_vector(v, &layout.dims(), &perm), out))
}

pub fn check_square(m: &CMat, dim: usize) -> Result<()> {
    if m.nrows() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.nrows() });
    }
    if m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: m.ncols() });
    }
    Ok(())
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVec, b: &CVec) -> CVec {
    let mut out = CVec::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

/// Kronecker product of a list of operators, left to right.
pub fn tensor_compose(ops: &[CMat]) -> CMat {
    let mut acc = CMat::identity(1, 1);
    for op in ops {
        acc = acc.kronecker(op);
    }
    acc
}

/// Partial trace keeping `keep` (in the given order).
pub fn partial_trace(m: &CMat, layout: &Layout, keep: &[&str]) -> Result<(CMat, Layout)> {
    check_square(m, layout.total_dim())?;
    let perm = front_order(layout, keep)?;
    let kept = layout.select(keep)?;
    let dk = kept.total_dim();
    let dt = layout.total_dim() / dk;
    let dims = layout.dims();
    let map = permutation_map(&dims, &perm);
    let out = CMat::from_fn(dk, dk, |i, j| {
        let mut s = C64::new(0.0, 0.0);
        for t in 0..dt {
            s += m[(map[i * dt + t], map[j * dt + t])];
        }
        s
    });
    Ok((out, kept))
}

/// Reshape a vector into a `(kept, traced)` matrix with `keep` in front.
pub fn split_vector(v: &CVec, layout: &Layout, keep: &[&str]) -> Result<CMat> {
    if v.len() != layout.total_dim() {
        return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: v.len() });
    }
    let perm = front_order(layout, keep)?;
    let dk = layout.select(keep)?.total_dim();
    let dt = layout.total_dim() / dk;
    let map = permutation_map(&layout.dims(), &perm);
    Ok(CMat::from_fn(dk, dt, |i, t| v[map[i * dt + t]]))
}

/// Reduced density matrix of a pure state vector.
pub fn reduced_from_vector(v: &CVec, layout: &Layout, keep: &[&str]) -> Result<(CMat, Layout)> {
    let m = split_vector(v, layout, keep)?;
    Ok((&m * m.adjoint(), layout.select(keep)?))
}

/// Embed an operator acting on `targets` into the full layout (identity elsewhere).
pub fn embed(op: &CMat, layout: &Layout, targets: &[&str]) -> Result<CMat> {
    let sub = layout.select(targets)?;
    check_square(op, sub.total_dim())?;
    let rest = layout.total_dim() / sub.total_dim();
    let big = op.kronecker(&CMat::identity(rest, rest));
    let perm = front_order(layout, targets)?;
    // `big` lives in the order `perm`; invert to return to layout order.
    let mut inv = vec![0usize; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    let permuted_dims: Vec<usize> = perm.iter().map(|&p| layout.dims()[p]).collect();
    Ok(permute_operator(&big, &permuted_dims, &inv))
}

/// `(K ⊗ I_rest) M` where `M` has row index `(t, r)` with `r` of size `rest`.
pub fn left_mul_local(k: &CMat, m: &CMat, rest: usize) -> CMat {
    let din = k.ncols();
    let dout = k.nrows();
    debug_assert_eq!(m.nrows(), din * rest);
    let mut out = CMat::zeros(dout * rest, m.ncols());
    for col in 0..m.ncols() {
        for o in 0..dout {
            for t in 0..din {
                let kot = k[(o, t)];
                if kot == C64::new(0.0, 0.0) {
                    continue;
                }
                for r in 0..rest {
                    out[(o * rest + r, col)] += kot * m[(t * rest + r, col)];
                }
            }
        }
    }
    out
}

/// `(K ⊗ I) M (K ⊗ I)†` for operators whose leading tensor factor is acted on.
pub fn conjugate_local(k: &CMat, m: &CMat, rest: usize) -> CMat {
    let left = left_mul_local(k, m, rest);
    let both = left_mul_local(k, &left.adjoint(), rest);
    both.adjoint()
}

pub fn hermitian_deviation(m: &CMat) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

pub fn check_hermitian(m: &CMat) -> Result<()> {
    let dev = hermitian_deviation(m);
    if dev > HERMITIAN_TOL * m.nrows().max(1) as f64 {
        return Err(Error::NotHermitian(dev));
    }
    Ok(())
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Spectral decomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted in descending order. Ties (within 1e-12) are broken
/// lexicographically on the eigenvectors after fixing each vector's phase so
/// that its first non-negligible component is real and positive.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Eigenvectors as columns, in the same order as `values`.
    pub vectors: CMat,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, i: usize) -> CVec {
        self.vectors.column(i).into_owned()
    }

    /// Rebuild `Σ f(λ_i) |v_i⟩⟨v_i|`.
    pub fn reconstruct<F: Fn(f64) -> f64>(&self, f: F) -> CMat {
        let mut scaled = self.vectors.clone();
        for (i, &lam) in self.values.iter().enumerate() {
            scaled.column_mut(i).scale_mut(f(lam));
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

fn phase_fix(v: &mut [C64]) {
    if let Some(p) = v.iter().find(|z| z.norm() > 1e-12).copied() {
        let ph = p.conj() / p.norm();
        for z in v.iter_mut() {
            *z *= ph;
        }
    }
}

fn lex_cmp(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        if (x.re - y.re).abs() > TIE_TOL {
            return y.re.partial_cmp(&x.re).unwrap_or(std::cmp::Ordering::Equal);
        }
        if (x.im - y.im).abs() > TIE_TOL {
            return y.im.partial_cmp(&x.im).unwrap_or(std::cmp::Ordering::Equal);
        }
    }
    std::cmp::Ordering::Equal
}

pub fn hermitian_spectrum(m: &CMat) -> Result<Spectrum> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    check_hermitian(m)?;
    Ok(spectrum_unchecked(&hermitian_part(m)))
}

fn spectrum_unchecked(h: &CMat) -> Spectrum {
    let d = h.nrows();
    if d == 0 {
        return Spectrum { values: vec![], vectors: CMat::zeros(0, 0) };
    }
    let eig = h.clone().symmetric_eigen();
    let mut items: Vec<(f64, Vec<C64>)> = (0..d)
        .map(|i| {
            let mut v: Vec<C64> = eig.eigenvectors.column(i).iter().copied().collect();
            phase_fix(&mut v);
            (eig.eigenvalues[i], v)
        })
        .collect();
    items.sort_by(|a, b| {
        if (a.0 - b.0).abs() > TIE_TOL {
            b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            lex_cmp(&a.1, &b.1)
        }
    });
    let values = items.iter().map(|x| x.0).collect();
    let vectors = CMat::from_fn(d, d, |i, j| items[j].1[i]);
    Spectrum { values, vectors }
}

/// Spectrum of a PSD matrix with tiny negative eigenvalues clamped to zero.
pub fn psd_spectrum(m: &CMat) -> Result<Spectrum> {
    let mut s = hermitian_spectrum(m)?;
    let min = s.min();
    if min < -PSD_ERROR {
        return Err(Error::NotPsd(min));
    }
    for v in s.values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(s)
}

pub fn psd_sqrt(m: &CMat) -> Result<CMat> {
    Ok(psd_spectrum(m)?.reconstruct(f64::sqrt))
}

/// Moore-Penrose inverse square root on the support (eigenvalues above `cutoff`).
pub fn psd_inv_sqrt(m: &CMat, cutoff: f64) -> Result<CMat> {
    Ok(psd_spectrum(m)?.reconstruct(|x| if x > cutoff { 1.0 / x.sqrt() } else { 0.0 }))
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return vec![];
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

pub fn trace_norm(m: &CMat) -> f64 {
    singular_values(m).iter().sum()
}

pub fn operator_norm(m: &CMat) -> f64 {
    singular_values(m).iter().copied().fold(0.0, f64::max)
}

pub fn frobenius_norm(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Unitary factor `W` maximising `Re Tr(W G)` over isometries (`W` is `G†`-shaped).
pub fn polar_isometry(g: &CMat) -> CMat {
    // G = U Σ V†  =>  W = V U†.
    let svd = g.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    v_t.adjoint() * u.adjoint()
}

/// Closest isometry (columns orthonormal) to `m`.
pub fn nearest_isometry(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    svd.u.expect("svd u") * svd.v_t.expect("svd v_t")
}

pub fn isometry_deviation(v: &CMat) -> f64 {
    let g = v.adjoint() * v;
    max_abs(&(g - CMat::identity(v.ncols(), v.ncols())))
}

pub fn expectation(m: &CMat, rho: &CMat) -> f64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            s += m[(i, j)] * rho[(j, i)];
        }
    }
    s.re
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &CMat, b: &CMat) -> C64 {
    let mut s = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

pub fn basis_vector(d: usize, i: usize) -> CVec {
    let mut v = CVec::zeros(d);
    v[i] = C64::new(1.0, 0.0);
    v
}

pub fn diag_real(values: &[f64]) -> CMat {
    let d = values.len();
    CMat::from_fn(d, d, |i, j| if i == j { C64::new(values[i], 0.0) } else { C64::new(0.0, 0.0) })
}

pub fn is_diagonal(m: &CMat, tol: f64) -> bool {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)].norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Exponential `exp(i t H)` of a Hermitian generator.
pub fn unitary_exp(h: &CMat, t: f64) -> Result<CMat> {
    let s = hermitian_spectrum(h)?;
    let mut scaled = s.vectors.clone();
    for (k, &lam) in s.values.iter().enumerate() {
        let ph = C64::from_polar(1.0, lam * t);
        for i in 0..scaled.nrows() {
            scaled[(i, k)] = s.vectors[(i, k)] * ph;
        }
    }
    Ok(&scaled * s.vectors.adjoint())
}

/// Matrix with i.i.d. complex Gaussian entries of unit variance.
pub fn ginibre<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Haar-random isometry `rows × cols` (rows ≥ cols) via QR with phase fix.
pub fn haar_isometry<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    assert!(rows >= cols, "isometry needs rows >= cols");
    let g = ginibre(rng, rows, cols);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..cols {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..rows {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub fn haar_unitary<R: Rng>(rng: &mut R, d: usize) -> CMat {
    haar_isometry(rng, d, d)
}

pub fn random_pure_state<R: Rng>(rng: &mut R, d: usize) -> CVec {
    let g = ginibre(rng, d, 1);
    let n = g.norm();
    CVec::from_iterator(d, g.iter().map(|z| z / n))
}

/// Random density matrix `G G† / Tr` with `G` Ginibre `d × rank`.
pub fn random_density<R: Rng>(rng: &mut R, d: usize, rank: usize) -> CMat {
    let g = ginibre(rng, d, rank.max(1));
    let m = &g * g.adjoint();
    let t = m.trace().re;
    m.unscale(t)
}

pub fn random_hermitian<R: Rng>(rng: &mut R, d: usize) -> CMat {
    let g = ginibre(rng, d, d);
    hermitian_part(&g)
}
