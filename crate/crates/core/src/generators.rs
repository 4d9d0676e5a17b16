//! Master-equation generators in frequency-pair form.
//!
//! Every generator is stored in the interaction-picture core form
//!
//! `L[ρ] = −(i/2)[H_LS, ρ] + Σ_ab γ_ab (A_a ρ A_b† − ½{A_b† A_a, ρ})`,
//! `H_LS = Σ_ab S_ab A_b† A_a`,
//!
//! where `a = (l, ω)` and `b = (k, ω̃)` run over the non-zero Bohr components
//! of the couplings, so `γ_ab` is `γ_kl^{ω,ω̃}` of the coarse-grained theory.
//! Frequency integrals over discrete spectra are sums over Bohr bins with no
//! extra `2π` factors.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bath::{BathSpec, CMatrix};
use crate::error::{Error, Result};
use crate::opcore::{
    c, hermiticity_residual, hermitize, max_abs, min_eigenvalue, unitary_evolution, BohrDecomposition, Operator, Superoperator, SystemModel, I, ZERO,
};
use crate::quad::{gauss_hermite, PanelRule};
use crate::special::dawson;

/// Observation time `T(α)`, possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ObservationTime {
    Finite(f64),
    Infinite,
}

impl ObservationTime {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_infinite() && t > 0.0 {
            Ok(Self::Infinite)
        } else if t > 0.0 {
            Ok(Self::Finite(t))
        } else {
            Err(Error::InvalidModel(format!("observation time must be positive, got {t}")))
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Self::Finite(t) => *t,
            Self::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Self::Infinite)
    }

    /// `e^{−(T ω₋)²/4}`.
    pub fn pair_factor(&self, omega_minus: f64, diagonal: bool) -> f64 {
        if diagonal {
            return 1.0;
        }
        match self {
            Self::Finite(t) => (-(t * omega_minus).powi(2) / 4.0).exp(),
            Self::Infinite => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    Davies,
    Redfield,
    CoarseGrained,
    ExactDb,
}

impl GeneratorKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Davies => "davies",
            Self::Redfield => "redfield",
            Self::CoarseGrained => "coarse_grained",
            Self::ExactDb => "exact_db",
        }
    }
}

/// One Bohr component `A_k(ω)` used as a generator channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Channel {
    pub coupling: usize,
    pub freq_index: usize,
    pub omega: f64,
}

/// Rate tensors over channel pairs; entry `(a, b)` is `γ_kl^{ω,ω̃}` with
/// `a = (l, ω)` and `b = (k, ω̃)`.
#[derive(Clone, Debug)]
pub struct FrequencyPairCoefficients {
    pub channels: Vec<Channel>,
    pub gamma: DMatrix<Complex64>,
    pub s_coeff: DMatrix<Complex64>,
    pub frequencies: Vec<f64>,
    pub observation_time: ObservationTime,
}

impl FrequencyPairCoefficients {
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Position of channel `(k, freq_index)`.
    pub fn index_of(&self, coupling: usize, freq_index: usize) -> Option<usize> {
        self.channels.iter().position(|ch| ch.coupling == coupling && ch.freq_index == freq_index)
    }

    pub fn gamma_hermiticity_residual(&self) -> f64 {
        max_abs(&(&self.gamma - self.gamma.adjoint()))
    }

    /// Zero every entry that couples different Bohr frequencies.
    pub fn rwa(&self) -> Self {
        let mut out = self.clone();
        for a in 0..self.len() {
            for b in 0..self.len() {
                if self.channels[a].freq_index != self.channels[b].freq_index {
                    out.gamma[(a, b)] = ZERO;
                    out.s_coeff[(a, b)] = ZERO;
                }
            }
        }
        out
    }
}

/// Channels of a Bohr decomposition, ordered by coupling then frequency.
pub fn channels_of(bohr: &BohrDecomposition) -> (Vec<Channel>, Vec<Operator>) {
    let mut channels = Vec::new();
    let mut ops = Vec::new();
    for (k, comps) in bohr.components.iter().enumerate() {
        for (f, op) in comps {
            channels.push(Channel { coupling: k, freq_index: *f, omega: bohr.bohr_frequencies[*f] });
            ops.push(op.clone());
        }
    }
    (channels, ops)
}

/// Numerical options for the rate computations.
#[derive(Clone, Copy, Debug)]
pub struct RateOptions {
    /// Gauss–Hermite order for the smoothed rates.
    pub hermite_nodes: usize,
    /// Compare the frequency-domain rates with the time-domain definition.
    pub cross_check: bool,
    /// Relative tolerance of the cross-check.
    pub cross_check_tol: f64,
}

impl Default for RateOptions {
    fn default() -> Self {
        Self { hermite_nodes: 120, cross_check: true, cross_check_tol: 1e-4 }
    }
}

fn check_bath(bohr: &BohrDecomposition, bath: &BathSpec) -> Result<()> {
    if bohr.n_couplings() != bath.n_channels {
        return Err(Error::InvalidModel(format!("{} couplings but the bath has {} channels", bohr.n_couplings(), bath.n_channels)));
    }
    Ok(())
}

/// Distinct pairs of frequency indices that occur among the channels.
fn frequency_indices(channels: &[Channel]) -> Vec<usize> {
    let mut idx: Vec<usize> = channels.iter().map(|ch| ch.freq_index).collect();
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Fill channel-pair tensors from per-frequency-pair `n×n` matrices `m(fa, fb)`,
/// reading entry `[k_b, l_a]`.
fn assemble(channels: &[Channel], mut m: impl FnMut(usize, usize) -> Result<(CMatrix, CMatrix)>) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let n = channels.len();
    let freqs = frequency_indices(channels);
    let mut table = std::collections::HashMap::new();
    for &fa in &freqs {
        for &fb in &freqs {
            table.insert((fa, fb), m(fa, fb)?);
        }
    }
    let mut gamma = DMatrix::zeros(n, n);
    let mut s = DMatrix::zeros(n, n);
    for (a, ca) in channels.iter().enumerate() {
        for (b, cb) in channels.iter().enumerate() {
            let (g, sm) = &table[&(ca.freq_index, cb.freq_index)];
            gamma[(a, b)] = g[(cb.coupling, ca.coupling)];
            s[(a, b)] = sm[(cb.coupling, ca.coupling)];
        }
    }
    Ok((gamma, s))
}

fn integrate_matrix(rule: &PanelRule, n: usize, f: impl Fn(f64) -> CMatrix) -> CMatrix {
    let mut acc = CMatrix::zeros(n, n);
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        acc += f(x) * c(w, 0.0);
    }
    acc
}

/// Breakpoints every `max_width` on `[a, b]` plus the point `p` if inside.
fn split_rule(a: f64, b: f64, p: f64, max_width: f64, order: usize) -> PanelRule {
    PanelRule::graded(a, b, p, max_width, max_width, order)
}

/// Davies Lamb-shift matrix `−(1/π) P.V.∫ Ĉ(ν)/(ν + ω) dν`.
///
/// The singularity is removed by subtracting `Ĉ(p)` at `p = −ω`; the result is
/// compared against a refined rule and rejected if they disagree.
pub fn davies_lamb_shift(bath: &BathSpec, omega: f64) -> Result<CMatrix> {
    let lim = bath.omega_cutoff;
    let p = -omega;
    let n = bath.n_channels;
    let cp = bath.spectral_density(p);
    let eval = |width: f64, order: usize| {
        let rule = split_rule(-lim, lim, p, width, order);
        let mut acc = integrate_matrix(&rule, n, |nu| (bath.spectral_density(nu) - &cp) / c(nu - p, 0.0));
        acc += &cp * c(((lim - p) / (lim + p)).abs().ln(), 0.0);
        acc * c(-1.0 / PI, 0.0)
    };
    let coarse = eval(0.25, 16);
    let fine = eval(0.125, 20);
    let scale = bath.sup_density().max(f64::MIN_POSITIVE);
    let diff = max_abs(&(&coarse - &fine));
    if diff > 1e-8 * scale.max(max_abs(&fine)) {
        return Err(Error::Quadrature(format!("principal value at ω = {omega} not converged ({diff:.3e})")));
    }
    Ok(fine)
}

/// Davies coefficients: `γ^{ω,ω} = Ĉ(−ω)`, off-diagonal pairs zero.
pub fn davies_rates(bohr: &BohrDecomposition, bath: &BathSpec) -> Result<FrequencyPairCoefficients> {
    check_bath(bohr, bath)?;
    let (channels, _) = channels_of(bohr);
    let n = bath.n_channels;
    let freqs = &bohr.bohr_frequencies;
    let (gamma, s_coeff) = assemble(&channels, |fa, fb| {
        if fa != fb {
            return Ok((CMatrix::zeros(n, n), CMatrix::zeros(n, n)));
        }
        Ok((bath.spectral_density(-freqs[fa]), davies_lamb_shift(bath, freqs[fa])?))
    })?;
    Ok(FrequencyPairCoefficients { channels, gamma, s_coeff, frequencies: freqs.clone(), observation_time: ObservationTime::Infinite })
}

/// Smoothed rate `(1/√π)∫ Ĉ(Ω/T − ω₊) e^{−Ω²} dΩ` without the pair factor.
fn smoothed_gamma(bath: &BathSpec, t: f64, omega_plus: f64, gh: &(Vec<f64>, Vec<f64>)) -> CMatrix {
    let n = bath.n_channels;
    let mut acc = CMatrix::zeros(n, n);
    for (&x, &w) in gh.0.iter().zip(&gh.1) {
        acc += bath.spectral_density(x / t - omega_plus) * c(w, 0.0);
    }
    acc / c(PI.sqrt(), 0.0)
}

/// Smoothed Lamb-shift kernel `−(2T/π)∫ Ĉ(ν) F(T(ν + ω₊)) dν` without the pair
/// factor, where `F` is the Dawson function.
fn smoothed_lamb_shift(bath: &BathSpec, t: f64, omega_plus: f64) -> CMatrix {
    let lim = bath.omega_cutoff;
    let rule = PanelRule::graded(-lim, lim, -omega_plus, (1.0 / t).min(0.25), 0.25, 16);
    let acc = integrate_matrix(&rule, bath.n_channels, |nu| bath.spectral_density(nu) * c(dawson(t * (nu + omega_plus)), 0.0));
    acc * c(-2.0 * t / PI, 0.0)
}

/// Time-domain rates `γ = f ∫ e^{−ixω₊} e^{−x²/4T²} C(x) dx` and
/// `S = −i f ∫ sign(x) e^{−ixω₊} e^{−x²/4T²} C(x) dx`.
fn time_domain_rates(bath: &BathSpec, t: f64, omega_plus: f64, factor: f64) -> Result<(CMatrix, CMatrix)> {
    let grid = bath.correlation_grid()?;
    let n = bath.n_channels;
    let mut g = CMatrix::zeros(n, n);
    let mut s = CMatrix::zeros(n, n);
    for ((&x, &w), cx) in grid.rule.nodes.iter().zip(&grid.rule.weights).zip(&grid.values) {
        let weight = Complex64::from_polar(w * (-x * x / (4.0 * t * t)).exp(), -x * omega_plus);
        g += cx * weight;
        s += cx * (weight * x.signum());
    }
    Ok((g * c(factor, 0.0), s * (-I * factor)))
}

/// Coarse-grained rates `γ` and `S` for all channel pairs.
pub fn cg_rates(
    bohr: &BohrDecomposition,
    bath: &BathSpec,
    observation_time: ObservationTime,
    opts: &RateOptions,
) -> Result<FrequencyPairCoefficients> {
    let t = match observation_time {
        ObservationTime::Infinite => return davies_rates(bohr, bath),
        ObservationTime::Finite(t) => t,
    };
    check_bath(bohr, bath)?;
    let (channels, _) = channels_of(bohr);
    let n = bath.n_channels;
    let freqs = &bohr.bohr_frequencies;
    let gh = gauss_hermite(opts.hermite_nodes);
    let floor = 1e-6 * bath.sup_density();
    let (gamma, s_coeff) = assemble(&channels, |fa, fb| {
        let (w, wt) = (freqs[fa], freqs[fb]);
        let factor = observation_time.pair_factor(w - wt, fa == fb);
        if factor == 0.0 {
            return Ok((CMatrix::zeros(n, n), CMatrix::zeros(n, n)));
        }
        let plus = 0.5 * (w + wt);
        let g = smoothed_gamma(bath, t, plus, &gh) * c(factor, 0.0);
        let s = smoothed_lamb_shift(bath, t, plus) * c(factor, 0.0);
        if opts.cross_check {
            let (g_td, s_td) = time_domain_rates(bath, t, plus, factor)?;
            for (a, b) in [(&g, &g_td), (&s, &s_td)] {
                let dev = max_abs(&(a - b));
                let scale = max_abs(a).max(max_abs(b));
                if dev > opts.cross_check_tol * scale + floor {
                    return Err(Error::Consistency(dev / scale.max(f64::MIN_POSITIVE)));
                }
            }
        }
        Ok((g, s))
    })?;
    Ok(FrequencyPairCoefficients { channels, gamma, s_coeff, frequencies: freqs.clone(), observation_time })
}

/// Exactly detailed-balanced rates: `γ̃ = e^{−(Tω₋)²/4} ĝ(−ω̃)ĝ(−ω)`,
/// `S̃` equal to the coarse-grained value on the diagonal and
/// `i tanh(βω₋/4) γ̃` elsewhere.
pub fn db_rates(bohr: &BohrDecomposition, bath: &BathSpec, observation_time: ObservationTime) -> Result<FrequencyPairCoefficients> {
    check_bath(bohr, bath)?;
    let (channels, _) = channels_of(bohr);
    let n = bath.n_channels;
    let freqs = &bohr.bohr_frequencies;
    let idx = frequency_indices(&channels);
    let mut sqrt = std::collections::HashMap::new();
    for &f in &idx {
        sqrt.insert(f, bath.spectral_sqrt(-freqs[f])?);
    }
    let beta = bath.beta;
    let (gamma, s_coeff) = assemble(&channels, |fa, fb| {
        let (w, wt) = (freqs[fa], freqs[fb]);
        if fa == fb {
            let g = &sqrt[&fb] * &sqrt[&fa];
            let s = match observation_time {
                ObservationTime::Infinite => davies_lamb_shift(bath, w)?,
                ObservationTime::Finite(t) => smoothed_lamb_shift(bath, t, w),
            };
            return Ok((g, s));
        }
        let factor = observation_time.pair_factor(w - wt, false);
        if factor == 0.0 {
            return Ok((CMatrix::zeros(n, n), CMatrix::zeros(n, n)));
        }
        let g = &sqrt[&fb] * &sqrt[&fa] * c(factor, 0.0);
        let s = &g * (I * (beta * (w - wt) / 4.0).tanh());
        Ok((g, s))
    })?;
    Ok(FrequencyPairCoefficients { channels, gamma, s_coeff, frequencies: freqs.clone(), observation_time })
}

/// A Lindblad generator in frequency-pair form with its dense superoperator.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    pub kind: GeneratorKind,
    pub lamb_shift: Operator,
    pub coeffs: FrequencyPairCoefficients,
    /// The operators `A_a` in channel order.
    pub components: Vec<Operator>,
    pub superop: Superoperator,
}

impl LindbladGenerator {
    pub fn dim(&self) -> usize {
        self.superop.dim()
    }

    /// Assemble from coefficients. For CP kinds the rate matrix must be PSD.
    pub fn from_coefficients(kind: GeneratorKind, coeffs: FrequencyPairCoefficients, components: Vec<Operator>, dim: usize) -> Result<Self> {
        assert_eq!(coeffs.len(), components.len());
        if kind != GeneratorKind::Redfield && !coeffs.is_empty() {
            let g = &coeffs.gamma;
            let scale = max_abs(g).max(1.0);
            let min = min_eigenvalue(g);
            if min < -1e-8 * scale || coeffs.gamma_hermiticity_residual() > 1e-9 * scale {
                return Err(Error::Construction(format!("rate matrix is not positive semidefinite (min eigenvalue {min:.3e})")));
            }
        }
        let m = components.len();
        let mut lamb = Operator::zeros(dim, dim);
        let mut k = Operator::zeros(dim, dim);
        let mut jump = DMatrix::<Complex64>::zeros(dim * dim, dim * dim);
        let adj: Vec<Operator> = components.iter().map(|a| a.adjoint()).collect();
        let conj: Vec<Operator> = components.iter().map(|a| a.conjugate()).collect();
        for a in 0..m {
            for b in 0..m {
                let g = coeffs.gamma[(a, b)];
                let s = coeffs.s_coeff[(a, b)];
                if g == ZERO && s == ZERO {
                    continue;
                }
                let prod = &adj[b] * &components[a];
                if s != ZERO {
                    lamb += &prod * s;
                }
                if g != ZERO {
                    k += &prod * g;
                    jump += crate::opcore::kron(&conj[b], &components[a]) * g;
                }
            }
        }
        // −(i/2)[H_LS, ρ] − ½{K, ρ} as one left and one right multiplication
        let left = &lamb * c(0.0, -0.5) - &k * c(0.5, 0.0);
        let right = &lamb * c(0.0, 0.5) - &k * c(0.5, 0.0);
        let mut superop = Superoperator::left(&left).add(&Superoperator::right(&right));
        superop = superop.add(&Superoperator::from_matrix(dim, jump));
        Ok(Self { kind, lamb_shift: lamb, coeffs, components, superop })
    }

    pub fn lamb_shift_hermiticity_residual(&self) -> f64 {
        hermiticity_residual(&self.lamb_shift)
    }

    /// Dissipative part only.
    pub fn dissipator(&self) -> Superoperator {
        let mut coeffs = self.coeffs.clone();
        coeffs.s_coeff.fill(ZERO);
        Self::from_coefficients(GeneratorKind::Redfield, coeffs, self.components.clone(), self.dim()).expect("dissipator").superop
    }

    /// Schrödinger-picture generator `L̂ − (i/α²)[H_S, ·]` on the rescaled time axis.
    pub fn schroedinger(&self, model: &SystemModel) -> Result<Superoperator> {
        if model.alpha <= 0.0 {
            return Err(Error::InvalidModel("the Schrödinger picture needs alpha > 0".into()));
        }
        Ok(self.superop.add(&Superoperator::hamiltonian(&model.hamiltonian).scale(c(1.0 / (model.alpha * model.alpha), 0.0))))
    }
}

/// Drop every cross-frequency term.
pub fn rwa_project(gen: &LindbladGenerator) -> LindbladGenerator {
    let coeffs = gen.coeffs.rwa();
    LindbladGenerator::from_coefficients(GeneratorKind::Redfield, coeffs, gen.components.clone(), gen.dim())
        .map(|mut g| {
            g.kind = gen.kind;
            g
        })
        .expect("projection of a valid generator")
}

fn components_for(bohr: &BohrDecomposition) -> Vec<Operator> {
    channels_of(bohr).1
}

pub fn build_davies(model: &SystemModel, bohr: &BohrDecomposition, bath: &BathSpec) -> Result<LindbladGenerator> {
    let coeffs = davies_rates(bohr, bath)?;
    LindbladGenerator::from_coefficients(GeneratorKind::Davies, coeffs, components_for(bohr), model.dim())
}

pub fn build_cg(model: &SystemModel, bohr: &BohrDecomposition, bath: &BathSpec, observation_time: ObservationTime) -> Result<LindbladGenerator> {
    build_cg_with(model, bohr, bath, observation_time, &RateOptions::default())
}

pub fn build_cg_with(
    model: &SystemModel,
    bohr: &BohrDecomposition,
    bath: &BathSpec,
    observation_time: ObservationTime,
    opts: &RateOptions,
) -> Result<LindbladGenerator> {
    let coeffs = cg_rates(bohr, bath, observation_time, opts)?;
    LindbladGenerator::from_coefficients(GeneratorKind::CoarseGrained, coeffs, components_for(bohr), model.dim())
}

pub fn build_db(model: &SystemModel, bohr: &BohrDecomposition, bath: &BathSpec, observation_time: ObservationTime) -> Result<LindbladGenerator> {
    let coeffs = db_rates(bohr, bath, observation_time)?;
    LindbladGenerator::from_coefficients(GeneratorKind::ExactDb, coeffs, components_for(bohr), model.dim())
}

/// A generator that may depend on the (rescaled) time.
pub trait TimeDependentGenerator {
    fn dim(&self) -> usize;
    fn at(&self, t: f64) -> Superoperator;
}

impl TimeDependentGenerator for Superoperator {
    fn dim(&self) -> usize {
        Superoperator::dim(self)
    }

    fn at(&self, _t: f64) -> Superoperator {
        self.clone()
    }
}

impl TimeDependentGenerator for LindbladGenerator {
    fn dim(&self) -> usize {
        self.superop.dim()
    }

    fn at(&self, _t: f64) -> Superoperator {
        self.superop.clone()
    }
}

/// Redfield generator `L_t = U†_{t/α²} ∘ L̂ ∘ U_{t/α²}` with `U_s[X] = e^{−iHs} X e^{iHs}`.
#[derive(Clone, Debug)]
pub struct RedfieldGenerator {
    pub core: Superoperator,
    pub hamiltonian: Operator,
    pub alpha: f64,
    pub observation_time: ObservationTime,
}

impl TimeDependentGenerator for RedfieldGenerator {
    fn dim(&self) -> usize {
        self.core.dim()
    }

    fn at(&self, t: f64) -> Superoperator {
        if t == 0.0 {
            return self.core.clone();
        }
        let s = t / (self.alpha * self.alpha);
        let u = unitary_evolution(&self.hamiltonian, s);
        let ud = u.adjoint();
        Superoperator::sandwich(&ud, &u).compose(&self.core).compose(&Superoperator::sandwich(&u, &ud))
    }
}

/// Redfield core from the Gaussian-damped half-line time integrals
/// `∫₀^∞ e^{−x²/4T²} (C(x)[A_l(−x)ρ, A_k] + C(−x)[A_l, ρA_k(−x)]) dx`.
pub fn build_redfield(
    model: &SystemModel,
    bohr: &BohrDecomposition,
    bath: &BathSpec,
    observation_time: ObservationTime,
) -> Result<RedfieldGenerator> {
    check_bath(bohr, bath)?;
    if model.alpha <= 0.0 {
        return Err(Error::InvalidModel("Redfield evolution needs alpha > 0".into()));
    }
    let (channels, ops) = channels_of(bohr);
    let d = model.dim();
    let grid = bath.correlation_grid()?;
    let t = observation_time.value();
    let damp = |x: f64| if t.is_infinite() { 1.0 } else { (-x * x / (4.0 * t * t)).exp() };
    // Γ⁺(ω) = ∫₀^∞ damp e^{−iωx} C(x), Γ⁻(ω) = ∫₀^∞ damp e^{iωx} C(−x)
    let half = |omega: f64, sign: f64| -> CMatrix {
        let mut acc = CMatrix::zeros(bath.n_channels, bath.n_channels);
        for ((&x, &w), cx) in grid.rule.nodes.iter().zip(&grid.rule.weights).zip(&grid.values) {
            if sign * x > 0.0 {
                let phase = Complex64::from_polar(w * damp(x), -omega * x);
                acc += cx * phase;
            }
        }
        acc
    };
    let idx = frequency_indices(&channels);
    let mut plus = std::collections::HashMap::new();
    let mut minus = std::collections::HashMap::new();
    for &f in &idx {
        let w = bohr.bohr_frequencies[f];
        plus.insert(f, half(w, 1.0));
        minus.insert(f, half(w, -1.0));
    }
    let mut k_plus = Operator::zeros(d, d);
    let mut k_minus = Operator::zeros(d, d);
    let mut jump = DMatrix::<Complex64>::zeros(d * d, d * d);
    for (a, ca) in channels.iter().enumerate() {
        for (b, cb) in channels.iter().enumerate() {
            let gp = plus[&ca.freq_index][(cb.coupling, ca.coupling)];
            let gm = minus[&cb.freq_index][(cb.coupling, ca.coupling)];
            let prod = ops[b].adjoint() * &ops[a];
            k_plus += &prod * gp;
            k_minus += &prod * gm;
            jump += crate::opcore::kron(&ops[b].conjugate(), &ops[a]) * (gp + gm);
        }
    }
    let core = Superoperator::from_matrix(d, jump).sub(&Superoperator::left(&k_plus)).sub(&Superoperator::right(&k_minus));
    Ok(RedfieldGenerator { core, hamiltonian: model.hamiltonian.clone(), alpha: model.alpha, observation_time })
}

/// Discretized `ω*` representation of a dissipator: `Σ_i w_i Σ_λ D[J_λ(ω*_i)]`.
#[derive(Clone, Debug)]
pub struct JumpOperatorSet {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// `jumps[i][λ]` at node `i`.
    pub jumps: Vec<Vec<Operator>>,
}

impl JumpOperatorSet {
    pub fn dissipator(&self, dim: usize) -> Superoperator {
        let mut acc = Superoperator::zero(dim);
        for (w, js) in self.weights.iter().zip(&self.jumps) {
            for j in js {
                acc = acc.add(&Superoperator::dissipator(j).scale(c(*w, 0.0)));
            }
        }
        acc
    }
}

/// Uniform `ω*` grid on `[min Bohr − 5/T, max Bohr + 5/T]` with spacing at most `1/(2T)`.
fn jump_grid(bohr: &BohrDecomposition, t: f64, node_count: usize) -> (Vec<f64>, f64) {
    let fmin = bohr.bohr_frequencies.first().copied().unwrap_or(0.0);
    let fmax = bohr.bohr_frequencies.last().copied().unwrap_or(0.0);
    let (lo, hi) = (fmin - 5.0 / t, fmax + 5.0 / t);
    let n = node_count.max(((hi - lo) * 2.0 * t).ceil() as usize + 1).max(2);
    let h = (hi - lo) / (n - 1) as f64;
    ((0..n).map(|i| lo + h * i as f64).collect(), h)
}

fn trapezoid(n: usize, h: f64) -> Vec<f64> {
    (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect()
}

fn finite_time(observation_time: ObservationTime) -> Result<f64> {
    match observation_time {
        ObservationTime::Finite(t) => Ok(t),
        ObservationTime::Infinite => Err(Error::InvalidModel("jump operators need a finite observation time".into())),
    }
}

/// Smoothed coarse-grained jumps `J_λ(ω*) = Σ_l ĝ_λl(ω*) Σ_ω f̂(ω + ω*) A_l(ω)`
/// with `f̂(ν) = (2T√π)^{1/2} e^{−T²ν²/2}` and weight `h/2π`.
pub fn smoothed_jumps_cg(bohr: &BohrDecomposition, bath: &BathSpec, observation_time: ObservationTime, node_count: usize) -> Result<JumpOperatorSet> {
    check_bath(bohr, bath)?;
    let t = finite_time(observation_time)?;
    let (grid, h) = jump_grid(bohr, t, node_count.max(16));
    let d = bohr.dim();
    let n = bath.n_channels;
    let norm = (2.0 * t * PI.sqrt()).sqrt();
    let mut jumps = Vec::with_capacity(grid.len());
    for &ws in &grid {
        let g = bath.spectral_sqrt(ws)?;
        let smoothed: Vec<Operator> = bohr
            .components
            .iter()
            .map(|comps| {
                let mut acc = Operator::zeros(d, d);
                for (f, op) in comps {
                    let nu = bohr.bohr_frequencies[*f] + ws;
                    acc += op * c(norm * (-t * t * nu * nu / 2.0).exp(), 0.0);
                }
                acc
            })
            .collect();
        let js = (0..n)
            .map(|lam| {
                let mut acc = Operator::zeros(d, d);
                for (l, s) in smoothed.iter().enumerate() {
                    acc += s * g[(lam, l)];
                }
                acc
            })
            .collect();
        jumps.push(js);
    }
    let weights = trapezoid(grid.len(), h).into_iter().map(|w| w / (2.0 * PI)).collect();
    Ok(JumpOperatorSet { nodes: grid, weights, jumps })
}

/// Detailed-balanced jumps `Â_λ(ω*) = √(T/√π) Σ_ω e^{−T²(ω*−ω)²/2} ĝ_λl(−ω) A_l(ω)`, weight `h`.
pub fn db_jumps(bohr: &BohrDecomposition, bath: &BathSpec, observation_time: ObservationTime, node_count: usize) -> Result<JumpOperatorSet> {
    check_bath(bohr, bath)?;
    let t = finite_time(observation_time)?;
    let (grid, h) = jump_grid(bohr, t, node_count.max(16));
    let d = bohr.dim();
    let n = bath.n_channels;
    let norm = (t / PI.sqrt()).sqrt();
    let mut sqrt = std::collections::HashMap::new();
    for comps in &bohr.components {
        for (f, _) in comps {
            if !sqrt.contains_key(f) {
                sqrt.insert(*f, bath.spectral_sqrt(-bohr.bohr_frequencies[*f])?);
            }
        }
    }
    let mut jumps = Vec::with_capacity(grid.len());
    for &ws in &grid {
        let js = (0..n)
            .map(|lam| {
                let mut acc = Operator::zeros(d, d);
                for (l, comps) in bohr.components.iter().enumerate() {
                    for (f, op) in comps {
                        let w = bohr.bohr_frequencies[*f];
                        let coef = sqrt[f][(lam, l)] * (norm * (-t * t * (ws - w).powi(2) / 2.0).exp());
                        acc += op * coef;
                    }
                }
                acc
            })
            .collect();
        jumps.push(js);
    }
    Ok(JumpOperatorSet { nodes: grid.clone(), weights: trapezoid(grid.len(), h), jumps })
}

/// Sampled filter functions of the detailed-balanced construction.
#[derive(Clone, Debug)]
pub struct FilterFunctions {
    pub times: Vec<f64>,
    /// `G(t) = (√π T)^{−1/2} (e^{−s²/2T²} ∗ g)(t)`, one channel matrix per time.
    pub g: Vec<CMatrix>,
    pub f: Vec<f64>,
}

/// `G(t) = (√π T)^{−1/2} (T/√(2π)) ∫ e^{−iνt} e^{−T²ν²/2} ĝ(ν) dν`.
pub fn filter_g(bath: &BathSpec, t_obs: f64, t: f64) -> Result<CMatrix> {
    let rule = bath.frequency_rule();
    let g = bath.sqrt_density_at_nodes()?;
    let mut acc = CMatrix::zeros(bath.n_channels, bath.n_channels);
    for ((&nu, &w), gv) in rule.nodes.iter().zip(&rule.weights).zip(g) {
        acc += gv * Complex64::from_polar(w * (-t_obs * t_obs * nu * nu / 2.0).exp(), -nu * t);
    }
    Ok(acc * c((PI.sqrt() * t_obs).powf(-0.5) * t_obs / (2.0 * PI).sqrt(), 0.0))
}

/// `F(t) = (2/β) e^{β²/16T²} ∫ sech(2πx/β) sin(β(t−x)/2T²) e^{−(t−x)²/T²} dx`.
pub fn filter_f(beta: f64, t_obs: f64, t: f64) -> f64 {
    if beta <= 0.0 {
        return 0.0;
    }
    let lo = (-6.0 * beta).max(t - 8.0 * t_obs);
    let hi = (6.0 * beta).min(t + 8.0 * t_obs);
    if hi <= lo {
        return 0.0;
    }
    let width = (beta / (2.0 * PI)).min(t_obs) / 2.0;
    let panels = (((hi - lo) / width).ceil() as usize).clamp(1, 20_000);
    let rule = PanelRule::uniform(lo, hi, panels, 16);
    let integral = rule.integrate(|x| {
        let u = t - x;
        (1.0 / (2.0 * PI * x / beta).cosh()) * (beta * u / (2.0 * t_obs * t_obs)).sin() * (-u * u / (t_obs * t_obs)).exp()
    });
    2.0 / beta * (beta * beta / (16.0 * t_obs * t_obs)).exp() * integral
}

pub fn filter_functions(bath: &BathSpec, observation_time: ObservationTime, beta: f64, times: &[f64]) -> Result<FilterFunctions> {
    let t_obs = finite_time(observation_time)?;
    let g = times.iter().map(|&t| filter_g(bath, t_obs, t)).collect::<Result<Vec<_>>>()?;
    let f = times.iter().map(|&t| filter_f(beta, t_obs, t)).collect();
    Ok(FilterFunctions { times: times.to_vec(), g, f })
}

/// `(1/(√π T)) ∫ |F(t)| dt` by quadrature.
pub fn filter_f_l1(beta: f64, t_obs: f64) -> f64 {
    let lim = 8.0 * t_obs + 6.0 * beta;
    let rule = PanelRule::uniform(-lim, lim, 400, 16);
    rule.integrate(|t| filter_f(beta, t_obs, t).abs()) / (PI.sqrt() * t_obs)
}

/// Hermitian part helper used by callers that need a guaranteed Hermitian Lamb shift.
pub fn hermitian_lamb_shift(gen: &LindbladGenerator) -> Operator {
    hermitize(&gen.lamb_shift)
}

/// Plain-text generator dump as parsed back by [`read_generator_dump`].
#[derive(Clone, Debug)]
pub struct GeneratorDump {
    pub kind: String,
    pub dim: usize,
    pub observation_time: f64,
    pub channels: Vec<Channel>,
    pub superop: Superoperator,
    pub lamb_shift: Operator,
    pub gamma: DMatrix<Complex64>,
    pub s_coeff: DMatrix<Complex64>,
}

fn write_block(out: &mut impl std::io::Write, name: &str, m: &DMatrix<Complex64>) -> std::io::Result<()> {
    writeln!(out, "[{name} {} {}]", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:e} {:e}", m[(i, j)].re, m[(i, j)].im)).collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

impl LindbladGenerator {
    /// Metadata header (`key = value`) followed by `[name rows cols]` blocks of
    /// row-major `re im` pairs. Numbers use the shortest exact decimal form.
    pub fn write_text(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "# thermolind generator")?;
        writeln!(out, "kind = {}", self.kind.name())?;
        writeln!(out, "dim = {}", self.dim())?;
        writeln!(out, "observation_time = {:e}", self.coeffs.observation_time.value())?;
        writeln!(out, "channels = {}", self.coeffs.len())?;
        for (a, ch) in self.coeffs.channels.iter().enumerate() {
            writeln!(out, "channel.{a} = {} {} {:e}", ch.coupling, ch.freq_index, ch.omega)?;
        }
        write_block(out, "superoperator", self.superop.matrix())?;
        write_block(out, "lamb_shift", &self.lamb_shift)?;
        write_block(out, "gamma", &self.coeffs.gamma)?;
        write_block(out, "s_coeff", &self.coeffs.s_coeff)
    }
}

pub fn read_generator_dump(text: &str) -> Result<GeneratorDump> {
    let bad = |msg: String| Error::Input(format!("generator dump: {msg}"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("not a number: {s:?}")));
    let mut header = std::collections::BTreeMap::new();
    let mut blocks = std::collections::BTreeMap::new();
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    while let Some(line) = lines.next() {
        if let Some(spec) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let parts: Vec<&str> = spec.split_whitespace().collect();
            let [name, rows, cols] = parts[..] else { return Err(bad(format!("bad block header {line:?}"))) };
            let (rows, cols): (usize, usize) = (rows.parse().map_err(|_| bad(line.into()))?, cols.parse().map_err(|_| bad(line.into()))?);
            let mut m = DMatrix::<Complex64>::zeros(rows, cols);
            for i in 0..rows {
                let row = lines.next().ok_or_else(|| bad(format!("block {name} is truncated")))?;
                let vals = row.split_whitespace().map(num).collect::<Result<Vec<_>>>()?;
                if vals.len() != 2 * cols {
                    return Err(bad(format!("block {name} row {i} has {} numbers, expected {}", vals.len(), 2 * cols)));
                }
                for j in 0..cols {
                    m[(i, j)] = Complex64::new(vals[2 * j], vals[2 * j + 1]);
                }
            }
            blocks.insert(name.to_string(), m);
        } else {
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad(format!("unexpected line {line:?}")))?;
            header.insert(k.to_string(), v.to_string());
        }
    }
    let field = |k: &str| header.get(k).ok_or_else(|| bad(format!("missing {k}")));
    let dim: usize = field("dim")?.parse().map_err(|_| bad("dim".into()))?;
    let n: usize = field("channels")?.parse().map_err(|_| bad("channels".into()))?;
    let channels = (0..n)
        .map(|a| {
            let v: Vec<&str> = field(&format!("channel.{a}"))?.split_whitespace().collect();
            let [k, f, w] = v[..] else { return Err(bad(format!("channel.{a}"))) };
            Ok(Channel { coupling: k.parse().map_err(|_| bad(k.into()))?, freq_index: f.parse().map_err(|_| bad(f.into()))?, omega: num(w)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut block = |k: &str| blocks.remove(k).ok_or_else(|| bad(format!("missing block {k}")));
    let superop = block("superoperator")?;
    if superop.nrows() != dim * dim || superop.ncols() != dim * dim {
        return Err(bad("superoperator does not match dim".into()));
    }
    Ok(GeneratorDump {
        kind: field("kind")?.clone(),
        dim,
        observation_time: num(field("observation_time")?)?,
        channels,
        superop: Superoperator::from_matrix(dim, superop),
        lamb_shift: block("lamb_shift")?,
        gamma: block("gamma")?,
        s_coeff: block("s_coeff")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{make_gaussian_kms_bath, make_ohmic_bath};
    use crate::dbcheck::{check_kms, rwa_superop};
    use crate::models::{qubit, random_model, random_state};
    use crate::opcore::{bohr_decompose, is_cp, trace_norm, MapKind};
    use crate::special::gaussian_hilbert;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q1() -> (SystemModel, BohrDecomposition, BathSpec) {
        let m = qubit(1.0, 1.0, 0.1).unwrap();
        let b = bohr_decompose(&m, None).unwrap();
        (m, b, make_gaussian_kms_bath(1.0, 1.0, 1.0).unwrap())
    }

    // Closed forms for Ĉ(ν) = e^{βν/2 − ν²τ²}.
    fn b1_davies_s(beta: f64, tau: f64, omega: f64) -> f64 {
        let mu = beta / (4.0 * tau * tau);
        -(beta * beta / (16.0 * tau * tau)).exp() * gaussian_hilbert(tau * (mu + omega))
    }

    fn b1_smoothed_gamma(beta: f64, tau: f64, t: f64, w: f64, wt: f64) -> f64 {
        // e^{−(Tω₋)²/4} (T/√π) ∫ Ĉ(ν) e^{−T²(ν+ω₊)²} dν
        let (wp, wm) = ((w + wt) / 2.0, w - wt);
        let a = beta / 2.0 - 2.0 * t * t * wp;
        let b = tau * tau + t * t;
        (-(t * wm).powi(2) / 4.0).exp() * t / b.sqrt() * (a * a / (4.0 * b) - t * t * wp * wp).exp()
    }

    fn entry(coeffs: &FrequencyPairCoefficients, w: f64, wt: f64) -> (Complex64, Complex64) {
        let a = coeffs.channels.iter().position(|ch| (ch.omega - w).abs() < 1e-9).unwrap();
        let b = coeffs.channels.iter().position(|ch| (ch.omega - wt).abs() < 1e-9).unwrap();
        (coeffs.gamma[(a, b)], coeffs.s_coeff[(a, b)])
    }

    #[test]
    fn davies_rates_q1_closed_form() {
        let (_, bohr, bath) = q1();
        let coeffs = davies_rates(&bohr, &bath).unwrap();
        let (g, s) = entry(&coeffs, 1.0, 1.0);
        assert!((g.re - (-1.5f64).exp()).abs() < 1e-12);
        let (g, _) = entry(&coeffs, -1.0, -1.0);
        assert!((g.re - (-0.5f64).exp()).abs() < 1e-12);
        assert!((s.re - b1_davies_s(1.0, 1.0, 1.0)).abs() < 1e-8, "{s} vs {}", b1_davies_s(1.0, 1.0, 1.0));
        let (g, _) = entry(&coeffs, 1.0, -1.0);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn cg_rates_match_gaussian_convolution() {
        let (_, bohr, bath) = q1();
        let t = 7.07;
        let coeffs = cg_rates(&bohr, &bath, ObservationTime::new(t).unwrap(), &RateOptions::default()).unwrap();
        for &(w, wt) in &[(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)] {
            let (g, _) = entry(&coeffs, w, wt);
            let want = b1_smoothed_gamma(1.0, 1.0, t, w, wt);
            assert!((g.re - want).abs() <= 1e-5 * want.max(1e-300) + 1e-14 && g.im.abs() < 1e-12, "({w},{wt}): {g} vs {want}");
        }
    }

    #[test]
    fn cg_approaches_davies_at_large_t() {
        let (_, bohr, bath) = q1();
        let dav = davies_rates(&bohr, &bath).unwrap();
        let cg = cg_rates(&bohr, &bath, ObservationTime::new(1e6).unwrap(), &RateOptions::default()).unwrap();
        assert!(max_abs(&(&cg.gamma - &dav.gamma)) < 1e-8);
        assert!(max_abs(&(&cg.s_coeff - &dav.s_coeff)) < 1e-6);
    }

    #[test]
    fn db_rates_q1_closed_form() {
        let (_, bohr, bath) = q1();
        let coeffs = db_rates(&bohr, &bath, ObservationTime::new(7.07).unwrap()).unwrap();
        let (g, _) = entry(&coeffs, 1.0, 1.0);
        assert!((g.re - (-1.5f64).exp()).abs() < 1e-9);
        let (g, s) = entry(&coeffs, 1.0, -1.0);
        assert!((s - I * (0.5f64).tanh() * g).norm() < 1e-14);
    }

    #[test]
    fn db_generator_is_kms_and_cp() {
        let baths = [make_gaussian_kms_bath(0.7, 1.0, 1.0).unwrap(), make_ohmic_bath(0.7, 2.0, 0.5).unwrap()];
        for bath in &baths {
            for seed in 0..2 {
                let m = random_model(3, 1, 0.7, 0.1, seed).unwrap();
                let bohr = bohr_decompose(&m, None).unwrap();
                for &t in &[1.0, 4.0] {
                    let gen = build_db(&m, &bohr, bath, ObservationTime::new(t).unwrap()).unwrap();
                    let rep = check_kms(&gen.superop, &m.gibbs_state(), MapKind::Generator, Some(&bohr), 0.7).unwrap();
                    assert!(rep.kms_residual < 1e-9 && rep.gibbs_residual < 1e-9, "{rep:?}");
                    assert!(is_cp(&gen.superop, MapKind::Generator, 1e-8).is_cp);
                    assert!(gen.lamb_shift_hermiticity_residual() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn redfield_secular_part_equals_cg_secular_part() {
        let m = random_model(3, 2, 1.0, 0.1, 11).unwrap();
        let bohr = bohr_decompose(&m, None).unwrap();
        let bath = make_gaussian_kms_bath(1.0, 1.0, 1.0).unwrap().independent_channels(2).unwrap();
        let t = ObservationTime::new(3.0).unwrap();
        let red = build_redfield(&m, &bohr, &bath, t).unwrap();
        let cg = build_cg(&m, &bohr, &bath, t).unwrap();
        let diff = rwa_superop(&red.core, &bohr).max_abs_diff(&rwa_superop(&cg.superop, &bohr));
        assert!(diff < 1e-6, "{diff}");
    }

    #[test]
    fn redfield_is_not_cp_on_q1() {
        let (m, bohr, bath) = q1();
        let red = build_redfield(&m, &bohr, &bath, ObservationTime::new(2.0).unwrap()).unwrap();
        assert!(is_cp(&red.core, MapKind::Generator, 1e-8).min_eigenvalue < -1e-4);
        assert!(build_redfield(&qubit(1.0, 1.0, 0.0).unwrap(), &bohr, &bath, ObservationTime::Infinite).is_err());
    }

    #[test]
    fn redfield_at_zero_is_core_and_rotates() {
        let (m, bohr, bath) = q1();
        let red = build_redfield(&m, &bohr, &bath, ObservationTime::new(4.0).unwrap()).unwrap();
        assert_eq!(red.at(0.0).max_abs_diff(&red.core), 0.0);
        // period of the rotation is 2π α²
        let period = 2.0 * PI * 0.01;
        assert!(red.at(period).max_abs_diff(&red.core) < 1e-9);
    }

    #[test]
    fn jump_sets_reassemble_generators() {
        let (_, bohr, bath) = q1();
        let t = ObservationTime::new(7.07).unwrap();
        let cg = build_cg(&qubit(1.0, 1.0, 0.1).unwrap(), &bohr, &bath, t).unwrap();
        let db = build_db(&qubit(1.0, 1.0, 0.1).unwrap(), &bohr, &bath, t).unwrap();
        let mut last = f64::INFINITY;
        for &n in &[64, 128] {
            let e_db = db_jumps(&bohr, &bath, t, n).unwrap().dissipator(2).max_abs_diff(&db.dissipator());
            assert!(e_db <= (last / 2.0).max(1e-10), "db n={n}: {e_db}");
            last = e_db;
        }
        let e_cg = smoothed_jumps_cg(&bohr, &bath, t, 128).unwrap().dissipator(2).max_abs_diff(&cg.dissipator());
        assert!(e_cg < 1e-6, "{e_cg}");
    }

    #[test]
    fn filter_f_is_odd_bounded_and_has_tanh_transform() {
        let (beta, t) = (1.0, 3.0);
        for &x in &[0.3, 1.7, 5.0] {
            assert!((filter_f(beta, t, x) + filter_f(beta, t, -x)).abs() < 1e-12);
        }
        let l1 = filter_f_l1(beta, t);
        let bound = beta * (beta * beta / (16.0 * t * t)).exp() / (2.0 * PI.sqrt() * t);
        assert!(l1 <= bound, "{l1} > {bound}");
        let rule = PanelRule::uniform(-30.0, 30.0, 240, 16);
        let fs: Vec<f64> = rule.nodes.iter().map(|&x| filter_f(beta, t, x)).collect();
        for &nu in &[0.1, 0.4, 1.0] {
            // F is odd, so its transform is i ∫ F(τ) sin(ντ) dτ
            let im: f64 = rule.nodes.iter().zip(&rule.weights).zip(&fs).map(|((x, w), f)| w * f * (nu * x).sin()).sum::<f64>() / (PI.sqrt() * t);
            let want = (beta * nu / 4.0).tanh() * (-t * t * nu * nu / 4.0).exp();
            assert!((im - want).abs() < 1e-9, "nu={nu}: {im} vs {want}");
        }
        assert_eq!(filter_f(0.0, t, 1.0), 0.0);
    }

    #[test]
    fn filter_g_norm_matches_parseval() {
        let (_, _, bath) = q1();
        let t = 2.0;
        let rule = PanelRule::uniform(-40.0, 40.0, 400, 16);
        let l2: f64 = rule.nodes.iter().zip(&rule.weights).map(|(&x, w)| w * filter_g(&bath, t, x).unwrap()[(0, 0)].norm_sqr()).sum();
        // Parseval: ∫|G|² dt = (√π T)^{−1} (T²/2π) 2π ∫ e^{−T²ν²} Ĉ(ν) dν = b1_smoothed_gamma(ω = 0)
        let want = b1_smoothed_gamma(1.0, 1.0, t, 0.0, 0.0);
        assert!((l2 - want).abs() < 1e-8 * want, "{l2} vs {want}");
    }

    #[test]
    fn cg_map_is_cp_and_trace_preserving_on_random_states() {
        let m = random_model(3, 1, 1.0, 0.1, 3).unwrap();
        let bohr = bohr_decompose(&m, None).unwrap();
        let bath = make_gaussian_kms_bath(1.0, 1.0, 1.0).unwrap();
        let gen = build_cg(&m, &bohr, &bath, ObservationTime::new(2.0).unwrap()).unwrap();
        assert!(is_cp(&gen.superop, MapKind::Generator, 1e-8).is_cp);
        let channel = gen.superop.exp(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let rho = random_state(3, &mut rng);
            let out = channel.apply(&rho);
            assert!((out.trace().re - 1.0).abs() < 1e-10);
            assert!((trace_norm(&out) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn observation_time_validation() {
        assert!(ObservationTime::new(0.0).is_err());
        assert!(ObservationTime::new(-1.0).is_err());
        assert!(ObservationTime::new(f64::INFINITY).unwrap().is_infinite());
    }

    #[test]
    fn text_dump_round_trips_exactly() {
        let (m, b, bath) = q1();
        let g = build_db(&m, &b, &bath, ObservationTime::new(2.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let back = read_generator_dump(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.kind, "exact_db");
        assert_eq!(back.observation_time, 2.0);
        assert_eq!(back.channels, g.coeffs.channels);
        assert_eq!(back.superop.matrix(), g.superop.matrix());
        assert_eq!(back.gamma, g.coeffs.gamma);
        assert_eq!(back.s_coeff, g.coeffs.s_coeff);
        assert!(read_generator_dump("dim = 2\nchannels = 0\n").is_err());
    }
}
