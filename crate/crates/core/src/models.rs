//! Named system models used by tests, the benchmark and the CLI.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::opcore::{c, embed_site, hermitian_eig, hermitize, identity, op_norm, sigma_x, sigma_z, Operator, SystemModel};

/// Qubit with `H = (gap/2) σ_z` coupled through `σ_x`.
pub fn qubit(gap: f64, beta: f64, alpha: f64) -> Result<SystemModel> {
    SystemModel::new(sigma_z() * c(gap / 2.0, 0.0), vec![sigma_x()], beta, alpha)
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> Operator {
    let m = Operator::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    hermitize(&m)
}

/// Normalize a Hermitian operator to unit operator norm.
pub fn unit_norm(a: &Operator) -> Operator {
    a / c(op_norm(a), 0.0)
}

/// Random `d`-level model with `n_couplings` random unit-norm Hermitian couplings.
pub fn random_model(d: usize, n_couplings: usize, beta: f64, alpha: f64, seed: u64) -> Result<SystemModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = random_hermitian(d, &mut rng);
    let couplings = (0..n_couplings).map(|_| unit_norm(&random_hermitian(d, &mut rng))).collect();
    SystemModel::new(h, couplings, beta, alpha)
}

/// Nearest-neighbour spin chain with local terms kept for truncation.
#[derive(Clone, Debug)]
pub struct ChainModel {
    pub n_sites: usize,
    /// `(first site, last site, operator on the full chain)`.
    pub terms: Vec<(usize, usize, Operator)>,
}

impl ChainModel {
    pub fn hamiltonian(&self) -> Operator {
        let d = 1 << self.n_sites;
        self.terms.iter().fold(Operator::zeros(d, d), |acc, (_, _, op)| acc + op)
    }

    /// Sum of the terms supported inside `[lo, hi]`.
    pub fn restricted(&self, lo: usize, hi: usize) -> Operator {
        let d = 1 << self.n_sites;
        self.terms.iter().filter(|(a, b, _)| *a >= lo && *b <= hi).fold(Operator::zeros(d, d), |acc, (_, _, op)| acc + op)
    }
}

/// Transverse-field Ising chain `H = −J Σ σ_z σ_z − h Σ σ_x` with open ends.
pub fn tfim_chain(n_sites: usize, j: f64, h: f64) -> Result<ChainModel> {
    if n_sites == 0 || n_sites > 10 {
        return Err(Error::Capacity(n_sites, 10));
    }
    let mut terms = Vec::new();
    for s in 0..n_sites {
        terms.push((s, s, embed_site(&sigma_x(), s, n_sites) * c(-h, 0.0)));
    }
    for s in 0..n_sites.saturating_sub(1) {
        let zz = embed_site(&sigma_z(), s, n_sites) * embed_site(&sigma_z(), s + 1, n_sites);
        terms.push((s, s + 1, zz * c(-j, 0.0)));
    }
    Ok(ChainModel { n_sites, terms })
}

/// Two-site transverse-field Ising chain coupled through `σ_x` on each site,
/// one bath channel per coupling.
pub fn two_site_chain(beta: f64, alpha: f64) -> Result<SystemModel> {
    let chain = tfim_chain(2, 1.0, 0.7)?;
    let couplings = (0..2).map(|s| embed_site(&sigma_x(), s, 2)).collect();
    SystemModel::new(chain.hamiltonian(), couplings, beta, alpha)
}

/// Three-level ladder with energies `0, 1, 2 + splitting` and a nearest-neighbour
/// coupling, so two Bohr frequencies sit `splitting` apart.
pub fn near_degenerate_ladder(splitting: f64, beta: f64, alpha: f64) -> Result<SystemModel> {
    if !(splitting > 0.0) {
        return Err(Error::InvalidModel(format!("splitting must be positive, got {splitting}")));
    }
    let mut h = Operator::zeros(3, 3);
    h[(1, 1)] = c(1.0, 0.0);
    h[(2, 2)] = c(2.0 + splitting, 0.0);
    let mut a = Operator::zeros(3, 3);
    for i in 0..2 {
        a[(i, i + 1)] = c(1.0, 0.0);
        a[(i + 1, i)] = c(1.0, 0.0);
    }
    SystemModel::new(h, vec![unit_norm(&a)], beta, alpha)
}

/// Smallest nonzero separation between distinct eigenvalues.
pub fn spectral_gap(h: &Operator) -> f64 {
    let vals = hermitian_eig(h).0;
    vals.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 1e-12).fold(f64::INFINITY, f64::min)
}

pub fn maximally_mixed(d: usize) -> Operator {
    identity(d) / c(d as f64, 0.0)
}

/// Random density matrix `M M† / Tr(M M†)` with Ginibre `M`.
pub fn random_state(d: usize, rng: &mut impl Rng) -> Operator {
    let m = Operator::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let p = &m * m.adjoint();
    let tr = p.trace();
    p / tr
}
