//! Dense operator and superoperator algebra.
//!
//! Operators are `DMatrix<Complex64>`. Superoperators act on column-stacked
//! vectorizations, `vec(X)[i + j*d] = X[i, j]`, so that
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)` and the Hilbert–Schmidt adjoint of a
//! superoperator is the conjugate transpose of its matrix.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type Operator = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Components whose Frobenius norm falls below this are dropped.
pub const COMPONENT_CUTOFF: f64 = 1e-12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> Operator {
    Operator::identity(d, d)
}

pub fn sigma_x() -> Operator {
    Operator::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn sigma_y() -> Operator {
    Operator::from_row_slice(2, 2, &[ZERO, -I, I, ZERO])
}

pub fn sigma_z() -> Operator {
    Operator::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

pub fn from_real(d: usize, entries: &[f64]) -> Operator {
    Operator::from_row_slice(d, d, &entries.iter().map(|&x| c(x, 0.0)).collect::<Vec<_>>())
}

pub fn diag_real(entries: &[f64]) -> Operator {
    let d = entries.len();
    let mut m = Operator::zeros(d, d);
    for (i, &x) in entries.iter().enumerate() {
        m[(i, i)] = c(x, 0.0);
    }
    m
}

pub fn kron(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

/// Embeds a single-site operator at `site` of an `n`-site chain of local dimension `local`.
pub fn embed_site(op: &Operator, site: usize, n: usize) -> Operator {
    let local = op.nrows();
    let mut out = identity(1);
    for j in 0..n {
        out = if j == site { kron(&out, op) } else { kron(&out, &identity(local)) };
    }
    out
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_residual(x: &Operator) -> f64 {
    max_abs(&(x - x.adjoint()))
}

pub fn hermitize(x: &Operator) -> Operator {
    (x + x.adjoint()) * c(0.5, 0.0)
}

pub fn max_abs(x: &DMatrix<Complex64>) -> f64 {
    x.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn trace(x: &Operator) -> Complex64 {
    x.trace()
}

/// Hilbert–Schmidt inner product `Tr(Y† X)`.
pub fn hs_inner(y: &Operator, x: &Operator) -> Complex64 {
    y.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum()
}

/// Hermitian eigendecomposition with eigenvalues sorted ascending.
pub fn hermitian_eig(x: &Operator) -> (Vec<f64>, Operator) {
    let h = hermitize(x);
    let n = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = Operator::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// Applies a real function to the spectrum of a Hermitian operator.
pub fn hermitian_fn(x: &Operator, f: impl Fn(f64) -> f64) -> Operator {
    let (vals, vecs) = hermitian_eig(x);
    let d: Vec<Complex64> = vals.iter().map(|&v| c(f(v), 0.0)).collect();
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= d[j];
    }
    scaled * vecs.adjoint()
}

pub fn min_eigenvalue(x: &Operator) -> f64 {
    hermitian_eig(x).0.first().copied().unwrap_or(0.0)
}

/// Trace norm, the sum of singular values.
pub fn trace_norm(x: &Operator) -> f64 {
    if hermiticity_residual(x) <= 1e-14 * (1.0 + max_abs(x)) {
        return hermitian_eig(x).0.iter().map(|v| v.abs()).sum();
    }
    x.clone().svd(false, false).singular_values.iter().sum()
}

/// Operator norm, the largest singular value.
pub fn op_norm(x: &Operator) -> f64 {
    x.clone().svd(false, false).singular_values.iter().fold(0.0, |m: f64, &s| m.max(s))
}

/// `‖a − b‖₁` (no factor ½).
pub fn trace_distance(a: &Operator, b: &Operator) -> f64 {
    trace_norm(&(a - b))
}

pub fn vectorize(x: &Operator) -> DVector<Complex64> {
    DVector::from_column_slice(x.as_slice())
}

pub fn unvectorize(v: &DVector<Complex64>, d: usize) -> Operator {
    Operator::from_column_slice(d, d, v.as_slice())
}

/// Matrix exponential `e^{-i H t}` of a Hermitian operator.
pub fn unitary_evolution(h: &Operator, t: f64) -> Operator {
    let (vals, vecs) = hermitian_eig(h);
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= Complex64::from_polar(1.0, -vals[j] * t);
    }
    scaled * vecs.adjoint()
}

/// Partial trace over the second factor of a bipartite operator.
pub fn partial_trace_second(x: &Operator, d_first: usize, d_second: usize) -> Operator {
    let mut out = Operator::zeros(d_first, d_first);
    for i in 0..d_first {
        for j in 0..d_first {
            let mut acc = ZERO;
            for b in 0..d_second {
                acc += x[(i * d_second + b, j * d_second + b)];
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Linear map on `d×d` operators stored as a `d²×d²` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator {
    dim: usize,
    matrix: DMatrix<Complex64>,
}

impl Superoperator {
    pub fn from_matrix(dim: usize, matrix: DMatrix<Complex64>) -> Self {
        assert_eq!(matrix.nrows(), dim * dim);
        assert_eq!(matrix.ncols(), dim * dim);
        Self { dim, matrix }
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_matrix(dim, DMatrix::zeros(dim * dim, dim * dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_matrix(dim, DMatrix::identity(dim * dim, dim * dim))
    }

    /// `X ↦ a X b`.
    pub fn sandwich(a: &Operator, b: &Operator) -> Self {
        Self::from_matrix(a.nrows(), kron(&b.transpose(), a))
    }

    /// `X ↦ a X`.
    pub fn left(a: &Operator) -> Self {
        Self::sandwich(a, &identity(a.nrows()))
    }

    /// `X ↦ X b`.
    pub fn right(b: &Operator) -> Self {
        Self::sandwich(&identity(b.nrows()), b)
    }

    /// `X ↦ -i[H, X]`.
    pub fn hamiltonian(h: &Operator) -> Self {
        let d = h.nrows();
        let id = identity(d);
        let m = (kron(&id, h) - kron(&h.transpose(), &id)) * (-I);
        Self::from_matrix(d, m)
    }

    /// `X ↦ L X L† − ½{L†L, X}`.
    pub fn dissipator(l: &Operator) -> Self {
        let d = l.nrows();
        let id = identity(d);
        let ll = l.adjoint() * l;
        let m = kron(&l.conjugate(), l) - (kron(&id, &ll) + kron(&ll.transpose(), &id)) * c(0.5, 0.0);
        Self::from_matrix(d, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn apply(&self, x: &Operator) -> Operator {
        unvectorize(&(&self.matrix * vectorize(x)), self.dim)
    }

    /// Hilbert–Schmidt adjoint.
    pub fn adjoint(&self) -> Self {
        Self::from_matrix(self.dim, self.matrix.adjoint())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Superoperator) -> Self {
        Self::from_matrix(self.dim, &self.matrix * &other.matrix)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_matrix(self.dim, &self.matrix * s)
    }

    pub fn add(&self, other: &Superoperator) -> Self {
        Self::from_matrix(self.dim, &self.matrix + &other.matrix)
    }

    pub fn sub(&self, other: &Superoperator) -> Self {
        Self::from_matrix(self.dim, &self.matrix - &other.matrix)
    }

    /// Max-abs entry of the matrix difference.
    pub fn max_abs_diff(&self, other: &Superoperator) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// `e^{t S}`.
    pub fn exp(&self, t: f64) -> Self {
        Self::from_matrix(self.dim, (&self.matrix * c(t, 0.0)).exp())
    }

    /// Choi-type matrix `Σ_K vec(K) vec(K)†` for a map `X ↦ Σ K X K†`.
    ///
    /// It is a permutation of the usual Choi matrix, so positivity is unchanged.
    pub fn choi(&self) -> DMatrix<Complex64> {
        let d = self.dim;
        let mut out = DMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        out[(i + k * d, j + l * d)] = self.matrix[(i + j * d, k + l * d)];
                    }
                }
            }
        }
        out
    }

    /// Residual of Hermiticity preservation: max |S[X]† − S[X†]| over matrix units.
    pub fn hermiticity_preservation_residual(&self) -> f64 {
        let choi = self.choi();
        max_abs(&(&choi - choi.adjoint()))
    }

    /// Residual of trace annihilation, ‖S†[I]‖ in max-abs.
    pub fn trace_annihilation_residual(&self) -> f64 {
        max_abs(&self.adjoint().apply(&identity(self.dim)))
    }
}

impl AsRef<Superoperator> for Superoperator {
    fn as_ref(&self) -> &Superoperator {
        self
    }
}

/// System Hamiltonian, normalized Hermitian couplings, inverse temperature and coupling strength.
#[derive(Clone, Debug)]
pub struct SystemModel {
    pub hamiltonian: Operator,
    pub couplings: Vec<Operator>,
    pub beta: f64,
    pub alpha: f64,
}

impl SystemModel {
    /// Validates Hermiticity, unit operator norm of every coupling, and parameter ranges.
    ///
    /// Couplings must be Hermitian so that `A_k(ω)† = A_k(−ω)` stays inside the family.
    pub fn new(hamiltonian: Operator, couplings: Vec<Operator>, beta: f64, alpha: f64) -> Result<Self> {
        let d = hamiltonian.nrows();
        if hamiltonian.ncols() != d || d == 0 {
            return Err(Error::InvalidModel("hamiltonian must be square and non-empty".into()));
        }
        if hamiltonian.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidModel("hamiltonian has non-finite entries".into()));
        }
        if hermiticity_residual(&hamiltonian) > 1e-12 {
            return Err(Error::InvalidModel("hamiltonian is not Hermitian".into()));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidModel(format!("beta must be positive, got {beta}")));
        }
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidModel(format!("alpha must be non-negative, got {alpha}")));
        }
        for (k, a) in couplings.iter().enumerate() {
            if a.nrows() != d || a.ncols() != d {
                return Err(Error::InvalidModel(format!("coupling {k} has wrong dimension")));
            }
            if hermiticity_residual(a) > 1e-12 {
                return Err(Error::InvalidModel(format!("coupling {k} is not Hermitian")));
            }
            let n = op_norm(a);
            if (n - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidModel(format!("coupling {k} has operator norm {n}, expected 1")));
            }
        }
        Ok(Self { hamiltonian, couplings, beta, alpha })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn gibbs_state(&self) -> Operator {
        gibbs_state(&self.hamiltonian, self.beta)
    }
}

/// `e^{-βH}/Z`, computed with a shifted spectrum.
pub fn gibbs_state(h: &Operator, beta: f64) -> Operator {
    let (vals, _) = hermitian_eig(h);
    let e0 = vals[0];
    let g = hermitian_fn(h, |e| (-beta * (e - e0)).exp());
    let z = g.trace();
    g / z
}

/// Bohr-frequency decomposition of the couplings with respect to the Hamiltonian.
#[derive(Clone, Debug)]
pub struct BohrDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Operator,
    pub bohr_frequencies: Vec<f64>,
    /// Per coupling, the non-negligible components `(frequency index, A_k(ω))`, sorted by index.
    pub components: Vec<Vec<(usize, Operator)>>,
    pub bin_tolerance: f64,
}

impl BohrDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn n_couplings(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize, freq_index: usize) -> Option<&Operator> {
        self.components[k].iter().find(|(f, _)| *f == freq_index).map(|(_, op)| op)
    }

    /// Index of the frequency `−ω`.
    pub fn mirror_index(&self, freq_index: usize) -> Option<usize> {
        let target = -self.bohr_frequencies[freq_index];
        let tol = self.bin_tolerance.max(1e-12);
        self.bohr_frequencies.iter().position(|&w| (w - target).abs() <= tol)
    }

    /// Smallest separation between distinct Bohr frequencies.
    pub fn min_gap(&self) -> f64 {
        self.bohr_frequencies.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Decomposes every coupling into Bohr-frequency components.
///
/// Eigenvalue differences are single-linkage clustered with the given tolerance
/// (default `1e-9 ×` spectral range); each bin is represented by its mean.
pub fn bohr_decompose(model: &SystemModel, bin_tolerance: Option<f64>) -> Result<BohrDecomposition> {
    bohr_decompose_ops(&model.hamiltonian, &model.couplings, bin_tolerance)
}

pub fn bohr_decompose_ops(h: &Operator, couplings: &[Operator], bin_tolerance: Option<f64>) -> Result<BohrDecomposition> {
    if hermiticity_residual(h) > 1e-12 {
        return Err(Error::InvalidModel("hamiltonian is not Hermitian".into()));
    }
    let d = h.nrows();
    let (vals, vecs) = hermitian_eig(h);
    let range = vals[d - 1] - vals[0];
    let tol = bin_tolerance.unwrap_or(1e-9 * range);
    if !(tol >= 0.0) {
        return Err(Error::InvalidModel(format!("bin tolerance must be non-negative, got {tol}")));
    }

    let mut diffs: Vec<(f64, usize, usize)> = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            diffs.push((vals[i] - vals[j], i, j));
        }
    }
    diffs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut bin_of = vec![vec![0usize; d]; d];
    let mut sums: Vec<(f64, usize)> = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    for &(w, i, j) in &diffs {
        if sums.is_empty() || w - prev > tol {
            sums.push((0.0, 0));
        }
        let last = sums.len() - 1;
        sums[last].0 += w;
        sums[last].1 += 1;
        bin_of[i][j] = last;
        prev = w;
    }
    let nb = sums.len();
    let mut freqs: Vec<f64> = sums.iter().map(|(s, n)| s / *n as f64).collect();
    // The difference set is symmetric, so bin b mirrors bin nb-1-b.
    let raw = freqs.clone();
    for b in 0..nb {
        freqs[b] = 0.5 * (raw[b] - raw[nb - 1 - b]);
    }

    let mut components = Vec::with_capacity(couplings.len());
    for a in couplings {
        let a_eig = vecs.adjoint() * a * &vecs;
        let mut per_bin = vec![Operator::zeros(d, d); nb];
        for i in 0..d {
            for j in 0..d {
                per_bin[bin_of[i][j]][(i, j)] = a_eig[(i, j)];
            }
        }
        let mut comps = Vec::new();
        for (b, m) in per_bin.into_iter().enumerate() {
            if m.norm() < COMPONENT_CUTOFF {
                continue;
            }
            comps.push((b, &vecs * m * vecs.adjoint()));
        }
        components.push(comps);
    }
    Ok(BohrDecomposition { eigenvalues: vals, eigenvectors: vecs, bohr_frequencies: freqs, components, bin_tolerance: tol })
}

fn gibbs_spectrum(gibbs: &Operator) -> Result<(Vec<f64>, Operator)> {
    let (vals, vecs) = hermitian_eig(gibbs);
    if vals[0] < -1e-12 {
        return Err(Error::Conditioning(format!("state has negative eigenvalue {:.3e}", vals[0])));
    }
    Ok((vals, vecs))
}

/// Smallest eigenvalue ratio accepted when an inverse power of a state is formed.
pub const MIN_SPECTRAL_RATIO: f64 = 1e-30;

fn check_invertible(vals: &[f64]) -> Result<()> {
    let max = vals[vals.len() - 1];
    if !(vals[0] > MIN_SPECTRAL_RATIO * max) {
        return Err(Error::Conditioning(format!("state is singular (eigenvalue ratio {:.3e})", vals[0] / max)));
    }
    Ok(())
}

fn power(vals: &[f64], vecs: &Operator, s: f64) -> Operator {
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        let p = if s == 0.0 { 1.0 } else { vals[j].max(0.0).powf(s) };
        col *= c(p, 0.0);
    }
    scaled * vecs.adjoint()
}

/// Modular map `X ↦ γ^s X γ^{−s}`.
pub fn modular_map(gibbs: &Operator, exponent: f64) -> Result<Superoperator> {
    let d = gibbs.nrows();
    if exponent == 0.0 {
        return Ok(Superoperator::identity(d));
    }
    let (vals, vecs) = gibbs_spectrum(gibbs)?;
    check_invertible(&vals)?;
    Ok(Superoperator::sandwich(&power(&vals, &vecs, exponent), &power(&vals, &vecs, -exponent)))
}

/// Symmetric multiplication `X ↦ √γ X √γ`.
pub fn jop_map(gibbs: &Operator) -> Result<Superoperator> {
    let (vals, vecs) = gibbs_spectrum(gibbs)?;
    let r = power(&vals, &vecs, 0.5);
    Ok(Superoperator::sandwich(&r, &r))
}

/// Inverse of [`jop_map`].
pub fn jop_inverse(gibbs: &Operator) -> Result<Superoperator> {
    let (vals, vecs) = gibbs_spectrum(gibbs)?;
    check_invertible(&vals)?;
    let r = power(&vals, &vecs, -0.5);
    Ok(Superoperator::sandwich(&r, &r))
}

/// Right multiplication `X ↦ X γ`.
pub fn rop_map(gibbs: &Operator) -> Superoperator {
    Superoperator::right(gibbs)
}

/// Inverse of [`rop_map`].
pub fn rop_inverse(gibbs: &Operator) -> Result<Superoperator> {
    let (vals, vecs) = gibbs_spectrum(gibbs)?;
    check_invertible(&vals)?;
    Ok(Superoperator::right(&power(&vals, &vecs, -1.0)))
}

/// Normalized identity followed by the generalized Gell-Mann matrices, each with unit HS norm.
pub fn gell_mann_basis(d: usize) -> Vec<Operator> {
    let mut basis = vec![identity(d) / c((d as f64).sqrt(), 0.0)];
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..d {
        for k in (j + 1)..d {
            let mut sym = Operator::zeros(d, d);
            sym[(j, k)] = c(s, 0.0);
            sym[(k, j)] = c(s, 0.0);
            basis.push(sym);
            let mut anti = Operator::zeros(d, d);
            anti[(j, k)] = c(0.0, -s);
            anti[(k, j)] = c(0.0, s);
            basis.push(anti);
        }
    }
    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut m = Operator::zeros(d, d);
        for j in 0..l {
            m[(j, j)] = c(norm, 0.0);
        }
        m[(l, l)] = c(-(l as f64) * norm, 0.0);
        basis.push(m);
    }
    basis
}

/// Coefficients `c_kl` of `Φ[X] = Σ c_kl F_l X F_k†` in an orthonormal basis `{F_k}`.
///
/// With `F_1 = I/√d` the identity channel has `c_11 = d`.
#[derive(Clone, Debug)]
pub struct GksMatrix {
    pub basis: Vec<Operator>,
    pub coefficients: DMatrix<Complex64>,
}

impl GksMatrix {
    /// Block excluding the identity direction.
    pub fn reduced(&self) -> DMatrix<Complex64> {
        let n = self.coefficients.nrows();
        self.coefficients.view((1, 1), (n - 1, n - 1)).into_owned()
    }

    pub fn reconstruct(&self) -> Superoperator {
        let d = self.basis[0].nrows();
        let mut m = DMatrix::zeros(d * d, d * d);
        for (k, fk) in self.basis.iter().enumerate() {
            let fk_conj = fk.conjugate();
            for (l, fl) in self.basis.iter().enumerate() {
                let ckl = self.coefficients[(k, l)];
                if ckl.norm() == 0.0 {
                    continue;
                }
                m += kron(&fk_conj, fl) * ckl;
            }
        }
        Superoperator::from_matrix(d, m)
    }

    pub fn hermiticity_residual(&self) -> f64 {
        max_abs(&(&self.coefficients - self.coefficients.adjoint()))
    }
}

fn basis_matrix(basis: &[Operator]) -> DMatrix<Complex64> {
    let n = basis.len();
    let mut f = DMatrix::zeros(n, n);
    for (k, b) in basis.iter().enumerate() {
        f.set_column(k, &vectorize(b));
    }
    f
}

pub fn gks_matrix(superop: &Superoperator, basis: &[Operator]) -> Result<GksMatrix> {
    let d = superop.dim();
    if basis.len() != d * d {
        return Err(Error::Basis(f64::INFINITY));
    }
    let f = basis_matrix(basis);
    let dev = max_abs(&(f.adjoint() * &f - DMatrix::identity(d * d, d * d)));
    let id_dev = max_abs(&(&basis[0] - identity(d) / c((d as f64).sqrt(), 0.0)));
    if dev > 1e-10 || id_dev > 1e-10 {
        return Err(Error::Basis(dev.max(id_dev)));
    }
    let coefficients = (f.adjoint() * superop.choi() * &f).transpose();
    Ok(GksMatrix { basis: basis.to_vec(), coefficients })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Channel,
    Generator,
}

#[derive(Clone, Copy, Debug)]
pub struct CpReport {
    pub kind: MapKind,
    pub min_eigenvalue: f64,
    pub hermiticity_residual: f64,
    pub is_cp: bool,
}

/// Complete-positivity test: full GKS matrix for channels, reduced GKS matrix for generators.
pub fn is_cp(superop: &Superoperator, kind: MapKind, tol: f64) -> CpReport {
    let gks = gks_matrix(superop, &gell_mann_basis(superop.dim())).expect("Gell-Mann basis is orthonormal");
    let m = match kind {
        MapKind::Channel => gks.coefficients.clone(),
        MapKind::Generator => gks.reduced(),
    };
    let herm = max_abs(&(&m - m.adjoint()));
    let min_eigenvalue = if m.nrows() == 0 { 0.0 } else { min_eigenvalue(&m) };
    CpReport { kind, min_eigenvalue, hermiticity_residual: herm, is_cp: min_eigenvalue >= -tol && herm <= tol.max(1e-10) }
}
