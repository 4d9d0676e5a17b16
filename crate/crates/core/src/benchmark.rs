//! Exact system + finite-bath simulation and comparison with master equations.
//!
//! The finite bath is a spin star: `N` independent spins `H_B = Σ ω_j σ_z^j / 2`
//! coupled through `B = Σ c_j σ_x^j`. It cannot be Gaussian, so results here are
//! trends and relative comparisons, not the constants of the asymptotic bounds.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bath::BathSpec;
use crate::dynamics::{propagate, sci, Method, Picture, TimeAxis, Trajectory};
use crate::error::{Error, Result};
use crate::errorbudget::{bound, BoundInput, BoundKind};
use crate::generators::{GeneratorKind, LindbladGenerator};
use crate::models::ChainModel;
use crate::opcore::{c, embed_site, hermitian_eig, hermitize, identity, kron, op_norm, sigma_x, sigma_z, trace, Operator, SystemModel};

pub const MAX_JOINT_DIM: usize = 1 << 12;
pub const MAX_BATH_SPINS: usize = 10;
/// Relative fit residual above which the spin star is flagged.
pub const FIT_WARNING: f64 = 0.2;

#[derive(Clone, Debug)]
pub struct SpinStarSpec {
    pub n_bath: usize,
    /// Spin frequencies spread over `(0, spread]`.
    pub spread: f64,
    /// Fixed `c_j`; `None` fits them to the target correlation.
    pub couplings: Option<Vec<f64>>,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub frequencies: Vec<f64>,
    pub couplings: Vec<f64>,
    /// `‖C_fit − C‖₂ / ‖C‖₂` on the fit grid.
    pub relative_residual: f64,
    pub fit_window: f64,
    pub warning: bool,
}

#[derive(Clone, Debug)]
pub struct JointModel {
    pub system: SystemModel,
    pub bath_hamiltonian: Operator,
    /// `(A_k, B_k)` with `A_k` on the system and `B_k` on the bath.
    pub interaction: Vec<(Operator, Operator)>,
    pub alpha: f64,
    pub bath_gibbs: Operator,
    pub fit: FitReport,
}

impl JointModel {
    pub fn bath_dim(&self) -> usize {
        self.bath_hamiltonian.nrows()
    }

    pub fn joint_dim(&self) -> usize {
        self.system.dim() * self.bath_dim()
    }

    /// `H_S ⊗ 1 + 1 ⊗ H_B + α Σ A_k ⊗ B_k` in real time.
    pub fn hamiltonian(&self) -> Operator {
        let (ds, db) = (self.system.dim(), self.bath_dim());
        let mut h = kron(&self.system.hamiltonian, &identity(db)) + kron(&identity(ds), &self.bath_hamiltonian);
        for (a, b) in &self.interaction {
            h += kron(a, b) * c(self.alpha, 0.0);
        }
        h
    }

    /// `∫_{−S}^{S} |C_fit(x)| dx` for the spin-star correlation; real time `S`.
    ///
    /// The reduced dynamics up to time `S` only probes the bath correlation on
    /// `[−S, S]`, so this plays the role of `Γ₀` for the finite bath.
    pub fn fitted_gamma0(&self, horizon: f64) -> f64 {
        if horizon <= 0.0 {
            return 0.0;
        }
        let fmax = self.fit.frequencies.iter().cloned().fold(0.0, f64::max);
        let panels = ((horizon * fmax.max(1.0)).ceil() as usize).clamp(1, 1_000_000);
        let rule = crate::quad::PanelRule::uniform(0.0, horizon, panels, 16);
        let beta = self.system.beta;
        let fit = &self.fit;
        2.0 * rule.integrate(|x| {
            fit.frequencies.iter().zip(&fit.couplings).map(|(&w, &cj)| spin_correlation(w, beta, x) * cj * cj).sum::<Complex64>().norm()
        })
    }

    /// Largest `|⟨B_k⟩_{γ_B}|`.
    pub fn bath_mean(&self) -> f64 {
        self.interaction.iter().map(|(_, b)| trace(&(&self.bath_gibbs * b)).norm()).fold(0.0, f64::max)
    }
}

/// `⟨σ_x(t) σ_x⟩` for a single spin of frequency `ω` at inverse temperature `β`.
fn spin_correlation(omega: f64, beta: f64, t: f64) -> Complex64 {
    let (p_down, p_up) = spin_populations(omega, beta);
    Complex64::from_polar(p_down, -omega * t) + Complex64::from_polar(p_up, omega * t)
}

fn spin_populations(omega: f64, beta: f64) -> (f64, f64) {
    // p_↓/p_↑ = e^{βω}
    let p_up = 1.0 / (1.0 + (beta * omega).exp());
    (1.0 - p_up, p_up)
}

/// Non-negative least squares `min ‖Σ w_j x_j − y‖²` by cyclic coordinate descent.
fn nnls(gram: &DMatrix<f64>, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut w = vec![0.0; n];
    for _ in 0..20_000 {
        let mut change: f64 = 0.0;
        for j in 0..n {
            if gram[(j, j)] <= 0.0 {
                continue;
            }
            let grad: f64 = (0..n).map(|k| gram[(j, k)] * w[k]).sum::<f64>() - rhs[j];
            let next = (w[j] - grad / gram[(j, j)]).max(0.0);
            change = change.max((next - w[j]).abs());
            w[j] = next;
        }
        if change < 1e-15 {
            break;
        }
    }
    w
}

/// Spin star approximating the channel-0 correlation of `target` on `[0, 3τ₀]`.
///
/// Frequencies sit on a uniform grid over `(0, spread]` with a seeded ±10% jitter
/// of the grid spacing; the squared couplings are fitted by non-negative least
/// squares. The system must have a single coupling.
pub fn make_spin_star(system: &SystemModel, spec: &SpinStarSpec, target: &BathSpec) -> Result<JointModel> {
    if spec.n_bath == 0 || spec.n_bath > MAX_BATH_SPINS {
        return Err(Error::Capacity(spec.n_bath, MAX_BATH_SPINS));
    }
    let db = 1usize << spec.n_bath;
    if system.dim() * db > MAX_JOINT_DIM {
        return Err(Error::Capacity(system.dim() * db, MAX_JOINT_DIM));
    }
    if system.couplings.len() != 1 {
        return Err(Error::InvalidModel("the spin star couples to exactly one system operator".into()));
    }
    if !(spec.spread > 0.0) {
        return Err(Error::InvalidModel(format!("frequency spread must be positive, got {}", spec.spread)));
    }
    let beta = system.beta;
    let n = spec.n_bath;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h = spec.spread / n as f64;
    let freqs: Vec<f64> = (0..n).map(|j| h * (j as f64 + 0.5) + rng.gen_range(-0.1..0.1) * h).collect();

    let window = 3.0 * target.timescales()?.tau0;
    let times: Vec<f64> = (0..=120).map(|i| window * i as f64 / 120.0).collect();
    let want: Vec<Complex64> = times.iter().map(|&t| target.time_correlation(t)[(0, 0)]).collect();
    let basis: Vec<Vec<Complex64>> = freqs.iter().map(|&w| times.iter().map(|&t| spin_correlation(w, beta, t)).collect()).collect();
    let couplings = match &spec.couplings {
        Some(cs) if cs.len() == n => cs.clone(),
        Some(cs) => return Err(Error::InvalidModel(format!("{} couplings given for {n} bath spins", cs.len()))),
        None => {
            let gram = DMatrix::from_fn(n, n, |j, k| basis[j].iter().zip(&basis[k]).map(|(x, y)| (x.conj() * y).re).sum());
            let rhs: Vec<f64> = basis.iter().map(|b| b.iter().zip(&want).map(|(x, y)| (x.conj() * y).re).sum()).collect();
            nnls(&gram, &rhs).into_iter().map(f64::sqrt).collect()
        }
    };
    let fitted = |i: usize| -> Complex64 { (0..n).map(|j| basis[j][i] * couplings[j] * couplings[j]).sum() };
    let num: f64 = (0..times.len()).map(|i| (fitted(i) - want[i]).norm_sqr()).sum();
    let den: f64 = want.iter().map(|x| x.norm_sqr()).sum();
    let relative_residual = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };

    let mut h_b = Operator::zeros(db, db);
    let mut b_op = Operator::zeros(db, db);
    let mut gibbs = Operator::from_element(1, 1, c(1.0, 0.0));
    for j in 0..n {
        h_b += embed_site(&sigma_z(), j, n) * c(freqs[j] / 2.0, 0.0);
        b_op += embed_site(&sigma_x(), j, n) * c(couplings[j], 0.0);
        let (p_down, p_up) = spin_populations(freqs[j], beta);
        let mut g = Operator::zeros(2, 2);
        g[(0, 0)] = c(p_up, 0.0);
        g[(1, 1)] = c(p_down, 0.0);
        gibbs = kron(&gibbs, &g);
    }
    // no energy shift on average
    let mean = trace(&(&gibbs * &b_op));
    b_op -= identity(db) * mean;

    let fit = FitReport { frequencies: freqs, couplings, relative_residual, fit_window: window, warning: relative_residual > FIT_WARNING };
    Ok(JointModel {
        system: system.clone(),
        bath_hamiltonian: h_b,
        interaction: vec![(system.couplings[0].clone(), b_op)],
        alpha: system.alpha,
        bath_gibbs: gibbs,
        fit,
    })
}

/// Joint evolution of `ρ₀ ⊗ γ_B`, reduced to the system in the interaction picture.
///
/// `times` are rescaled (`s = σ/α²`); with `α = 0` the real axis is used.
pub fn exact_reduced(joint: &JointModel, rho0: &Operator, times: &[f64]) -> Result<Trajectory> {
    let (ds, db) = (joint.system.dim(), joint.bath_dim());
    if ds * db > MAX_JOINT_DIM {
        return Err(Error::Capacity(ds * db, MAX_JOINT_DIM));
    }
    if rho0.nrows() != ds {
        return Err(Error::Input(format!("state dimension {} does not match the system dimension {ds}", rho0.nrows())));
    }
    let scale = if joint.alpha > 0.0 { 1.0 / (joint.alpha * joint.alpha) } else { 1.0 };
    let axis = if joint.alpha > 0.0 { TimeAxis::Rescaled } else { TimeAxis::Real };
    let (vals, vecs) = hermitian_eig(&joint.hamiltonian());
    let (hs_vals, hs_vecs) = hermitian_eig(&joint.system.hamiltonian);
    // ρ₀ ⊗ γ_B = Σ |ψ⟩⟨ψ| with columns √(λ_k p_b) |φ_k⟩ ⊗ |b⟩; γ_B is diagonal
    let (lam, phi) = hermitian_eig(rho0);
    let mut columns = Vec::new();
    for (k, &l) in lam.iter().enumerate() {
        for b in 0..db {
            let w = l * joint.bath_gibbs[(b, b)].re;
            if w > 1e-300 {
                columns.push((k, b, w.sqrt()));
            }
        }
    }
    let psi0 = DMatrix::<Complex64>::from_fn(ds * db, columns.len(), |row, col| {
        let (k, b, w) = columns[col];
        if row % db == b {
            phi[(row / db, k)] * w
        } else {
            c(0.0, 0.0)
        }
    });
    let start = vecs.adjoint() * psi0;
    let states = times
        .iter()
        .map(|&t| {
            let s = t * scale;
            let mut rotated = start.clone();
            for (i, mut row) in rotated.row_iter_mut().enumerate() {
                row *= Complex64::from_polar(1.0, -vals[i] * s);
            }
            let psi = &vecs * rotated;
            let mut reduced = Operator::zeros(ds, ds);
            for i in 0..ds {
                for j in 0..=i {
                    let mut acc = c(0.0, 0.0);
                    for b in 0..db {
                        acc += psi.row(i * db + b).dot(&psi.row(j * db + b).conjugate());
                    }
                    reduced[(i, j)] = acc;
                    reduced[(j, i)] = acc.conj();
                }
            }
            // ρ̃ = e^{iH_S s} ρ e^{−iH_S s}
            let mut u = hs_vecs.clone();
            for (k, mut col) in u.column_iter_mut().enumerate() {
                col *= Complex64::from_polar(1.0, hs_vals[k] * s);
            }
            let u = u * hs_vecs.adjoint();
            hermitize(&(&u * reduced * u.adjoint()))
        })
        .collect();
    Ok(Trajectory { times: times.to_vec(), states, picture: Picture::Interaction, axis })
}

/// `a + b t` least squares; returns `(a, b, rss)`.
pub fn linear_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = t.len() as f64;
    let (mt, my) = (t.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = t.iter().map(|x| (x - mt).powi(2)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(x, v)| (x - mt) * (v - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let a = my - b * mt;
    let rss = t.iter().zip(y).map(|(x, v)| (v - a - b * x).powi(2)).sum();
    (a, b, rss)
}

/// `a e^{b t}` least squares with `a ≥ 0`; returns `(a, b, rss)`.
pub fn exponential_fit(t: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let span = t.iter().cloned().fold(0.0, f64::max).max(1e-12);
    let eval = |b: f64| -> (f64, f64) {
        let e: Vec<f64> = t.iter().map(|x| (b * x).exp()).collect();
        let den: f64 = e.iter().map(|v| v * v).sum();
        let a = (e.iter().zip(y).map(|(v, w)| v * w).sum::<f64>() / den).max(0.0);
        (a, e.iter().zip(y).map(|(v, w)| (w - a * v).powi(2)).sum())
    };
    let mut best = (0.0, f64::INFINITY);
    for i in -400..=400 {
        let b = 10.0 * i as f64 / (400.0 * span);
        let r = eval(b).1;
        if r < best.1 {
            best = (b, r);
        }
    }
    // golden-section refinement around the grid minimum
    let step = 10.0 / (400.0 * span);
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..100 {
        let (x1, x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if eval(x1).1 < eval(x2).1 {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let b = 0.5 * (lo + hi);
    let (a, r) = eval(b);
    if r <= best.1 {
        (a, b, r)
    } else {
        let (a, r) = eval(best.0);
        (a, best.0, r)
    }
}

#[derive(Clone, Debug)]
pub struct ErrorCurve {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub envelope: Vec<f64>,
    pub alpha: f64,
    pub observation_time: f64,
    pub kind: GeneratorKind,
    pub linear: (f64, f64, f64),
    pub exponential: (f64, f64, f64),
}

impl ErrorCurve {
    /// Linear envelope fits at least as well as exponential growth.
    pub fn linear_preferred(&self) -> bool {
        self.linear.2 <= self.exponential.2
    }

    /// Distance at the sample closest to the middle of the time span.
    pub fn midpoint_distance(&self) -> f64 {
        let mid = 0.5 * (self.times[0] + self.times[self.times.len() - 1]);
        let i = (0..self.times.len()).min_by(|&a, &b| (self.times[a] - mid).abs().total_cmp(&(self.times[b] - mid).abs())).unwrap_or(0);
        self.distances[i]
    }

    /// `t,distance,envelope` rows.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "t,distance,envelope")?;
        for i in 0..self.times.len() {
            writeln!(out, "{},{},{}", sci(self.times[i]), sci(self.distances[i]), sci(self.envelope[i]))?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "kind={}\nalpha={}\nobservation_time={}\nlinear_a={}\nlinear_b={}\nlinear_rss={}\nexponential_a={}\nexponential_b={}\nexponential_rss={}\nlinear_preferred={}\n",
            self.kind.name(),
            sci(self.alpha),
            sci(self.observation_time),
            sci(self.linear.0),
            sci(self.linear.1),
            sci(self.linear.2),
            sci(self.exponential.0),
            sci(self.exponential.1),
            sci(self.exponential.2),
            self.linear_preferred()
        )
    }
}

/// Distances between an exact reduced trajectory and the master-equation one.
///
/// The envelope is `total_error` at the constants in `budget` (zero if absent).
pub fn error_curve_against(
    exact: &Trajectory,
    gen: &LindbladGenerator,
    alpha: f64,
    observation_time: f64,
    budget: Option<&BoundInput>,
) -> Result<ErrorCurve> {
    let master = propagate(&gen.superop, &exact.states[0], &exact.times, Method::Auto)?;
    let distances = exact.distances(&master)?;
    let envelope = exact
        .times
        .iter()
        .map(|&t| match budget {
            Some(b) => bound(BoundKind::TotalError, &b.with_t(t).with_observation_time(observation_time)),
            None => Ok(0.0),
        })
        .collect::<Result<Vec<_>>>()?;
    let linear = linear_fit(&exact.times, &distances);
    let exponential = exponential_fit(&exact.times, &distances);
    Ok(ErrorCurve { times: exact.times.clone(), distances, envelope, alpha, observation_time, kind: gen.kind, linear, exponential })
}

pub fn error_curve(
    joint: &JointModel,
    gen: &LindbladGenerator,
    rho0: &Operator,
    times: &[f64],
    observation_time: f64,
    budget: Option<&BoundInput>,
) -> Result<ErrorCurve> {
    let exact = exact_reduced(joint, rho0, times)?;
    error_curve_against(&exact, gen, joint.alpha, observation_time, budget)
}

/// Truncation error of a smoothed jump operator on a chain.
///
/// `Â(ω*) = ĝ(ω*) Σ_ω f̂(ω + ω*) A(ω)` with `f̂(ν) = √(2T√π) e^{−T²ν²/2}`, computed
/// with the full Hamiltonian and with the terms inside `[site − r, site + r]`.
/// Returns `‖Â − Â_r‖_∞` for `r = 0..n−1`.
pub fn quasi_locality_probe(
    chain: &ChainModel,
    local_op: &Operator,
    site: usize,
    bath: &BathSpec,
    observation_time: f64,
    omega_star: f64,
) -> Result<Vec<f64>> {
    let n = chain.n_sites;
    if n == 0 || n > 8 {
        return Err(Error::Capacity(n, 8));
    }
    if site >= n {
        return Err(Error::Input(format!("site {site} outside a chain of {n} sites")));
    }
    if chain.terms.iter().any(|(a, b, _)| b - a > 1) {
        return Err(Error::InvalidModel("quasi-locality probe needs nearest-neighbour terms".into()));
    }
    if !(observation_time > 0.0) {
        return Err(Error::Input("observation time must be positive".into()));
    }
    let a = embed_site(local_op, site, n);
    let g = bath.spectral_sqrt(omega_star)?[(0, 0)];
    let norm = (2.0 * observation_time * PI.sqrt()).sqrt();
    let smoothed = |h: &Operator| -> Operator {
        let (vals, vecs) = hermitian_eig(h);
        let mut m = vecs.adjoint() * &a * &vecs;
        for i in 0..vals.len() {
            for j in 0..vals.len() {
                let nu = vals[i] - vals[j] + omega_star;
                m[(i, j)] *= g * norm * (-observation_time * observation_time * nu * nu / 2.0).exp();
            }
        }
        &vecs * m * vecs.adjoint()
    };
    let full = smoothed(&chain.hamiltonian());
    Ok((0..n)
        .map(|r| {
            let lo = site.saturating_sub(r);
            let hi = (site + r).min(n - 1);
            op_norm(&(&full - smoothed(&chain.restricted(lo, hi))))
        })
        .collect())
}
