//! Bath spectral densities, their square roots, time-domain correlations and timescales.
//!
//! Conventions: `Ĉ(ω) = ∫dt e^{iωt} C(t)` and `C(t) = (2π)⁻¹ ∫dω e^{-iωt} Ĉ(ω)`.
//! The frequency-domain density is the source of truth; `C(t)` and `g(t)` are
//! always obtained from it by quadrature.

use std::f64::consts::PI;
use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::opcore::{c, hermitian_eig, hermitian_fn, hermiticity_residual, max_abs, ZERO};
use crate::quad::PanelRule;

pub type CMatrix = DMatrix<Complex64>;

type Density = Arc<dyn Fn(f64) -> CMatrix + Send + Sync>;

/// Eigenvalues in `[-SQRT_CLAMP, 0)` are treated as zero when taking square roots.
pub const SQRT_CLAMP: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum BathFamily {
    GaussianKms { tau_c: f64, scale: f64 },
    Ohmic { cutoff: f64, scale: f64 },
    Zero,
    Custom(String),
}

struct FrequencyCache {
    rule: PanelRule,
    c_hat: Vec<CMatrix>,
}

/// Matrix-valued bath spectral density together with its quadrature setup.
#[derive(Clone)]
pub struct BathSpec {
    pub n_channels: usize,
    pub beta: f64,
    pub omega_cutoff: f64,
    pub quad_nodes: usize,
    pub family: BathFamily,
    density: Density,
    freq: Arc<OnceLock<FrequencyCache>>,
    sqrt_cache: Arc<OnceLock<std::result::Result<Vec<CMatrix>, f64>>>,
    timescales: Arc<OnceLock<std::result::Result<BathTimescales, String>>>,
    corr_grid: Arc<OnceLock<std::result::Result<CorrelationGrid, String>>>,
}

/// Samples of `C(t)` on a composite rule covering the decay window.
#[derive(Clone, Debug)]
pub struct CorrelationGrid {
    pub rule: PanelRule,
    pub values: Vec<CMatrix>,
}

impl fmt::Debug for BathSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BathSpec")
            .field("n_channels", &self.n_channels)
            .field("beta", &self.beta)
            .field("omega_cutoff", &self.omega_cutoff)
            .field("quad_nodes", &self.quad_nodes)
            .field("family", &self.family)
            .finish()
    }
}

pub const DEFAULT_QUAD_NODES: usize = 2048;
const PANEL_ORDER: usize = 16;

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `Ĉ(ω) = scale · e^{βω/2} e^{-ω²τ_c²}`, which satisfies the KMS condition exactly.
pub fn make_gaussian_kms_bath(beta: f64, tau_c: f64, scale: f64) -> Result<BathSpec> {
    positive("beta", beta)?;
    positive("tau_c", tau_c)?;
    positive("scale", scale)?;
    let f = move |w: f64| scale * (0.5 * beta * w - w * w * tau_c * tau_c).exp();
    Ok(BathSpec::scalar(beta, 8.0 / tau_c + beta, BathFamily::GaussianKms { tau_c, scale }, f))
}

/// Thermalized Ohmic density with Gaussian cutoff,
/// `Ĉ(ω) = scale · ω e^{-ω²/ω_c²} / (1 − e^{-βω})`, equal to `scale/β` at `ω = 0`.
pub fn make_ohmic_bath(beta: f64, cutoff: f64, coupling_scale: f64) -> Result<BathSpec> {
    positive("beta", beta)?;
    positive("cutoff", cutoff)?;
    positive("coupling_scale", coupling_scale)?;
    let f = move |w: f64| ohmic_density(w, beta, cutoff, coupling_scale);
    Ok(BathSpec::scalar(beta, 8.0 * cutoff + beta, BathFamily::Ohmic { cutoff, scale: coupling_scale }, f))
}

fn ohmic_density(w: f64, beta: f64, cutoff: f64, scale: f64) -> f64 {
    let envelope = (-(w / cutoff).powi(2)).exp();
    let x = beta * w;
    let thermal = if x.abs() < 1e-8 {
        (1.0 + 0.5 * x) / beta
    } else if x > 0.0 {
        w / -(-x).exp_m1()
    } else {
        // ω/(1 − e^{-βω}) = |ω| e^{βω}/(1 − e^{βω}) for ω < 0
        -w * x.exp() / -x.exp_m1()
    };
    scale * thermal * envelope
}

impl BathSpec {
    /// Scalar (single-channel) bath from a real density function.
    pub fn scalar(beta: f64, omega_cutoff: f64, family: BathFamily, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::custom(1, beta, omega_cutoff, family, move |w| CMatrix::from_element(1, 1, c(f(w), 0.0)))
    }

    pub fn custom(n_channels: usize, beta: f64, omega_cutoff: f64, family: BathFamily, f: impl Fn(f64) -> CMatrix + Send + Sync + 'static) -> Self {
        Self {
            n_channels,
            beta,
            omega_cutoff,
            quad_nodes: DEFAULT_QUAD_NODES,
            family,
            density: Arc::new(f),
            freq: Arc::new(OnceLock::new()),
            sqrt_cache: Arc::new(OnceLock::new()),
            timescales: Arc::new(OnceLock::new()),
            corr_grid: Arc::new(OnceLock::new()),
        }
    }

    /// `Ĉ ≡ 0` on `n_channels` channels.
    pub fn zero(n_channels: usize, beta: f64) -> Self {
        Self::custom(n_channels, beta, 1.0, BathFamily::Zero, move |_| CMatrix::zeros(n_channels, n_channels))
    }

    /// `n` independent copies of a scalar bath: `Ĉ_kl = δ_kl ĉ`.
    pub fn independent_channels(&self, n: usize) -> Result<Self> {
        self.mixed(CMatrix::identity(n, n))
    }

    /// Correlated channels `Ĉ(ω) = ĉ(ω) Q` for a real symmetric positive semidefinite `Q`.
    pub fn mixed(&self, q: CMatrix) -> Result<Self> {
        if self.n_channels != 1 {
            return Err(Error::InvalidModel("mixing requires a scalar base bath".into()));
        }
        if q.iter().any(|z| z.im != 0.0) || max_abs(&(&q - q.transpose())) > 0.0 {
            return Err(Error::InvalidModel("mixing matrix must be real symmetric".into()));
        }
        let min = hermitian_eig(&q).0[0];
        if min < -SQRT_CLAMP {
            return Err(Error::Positivity(min));
        }
        let base = self.density.clone();
        let n = q.nrows();
        let mut out = Self::custom(n, self.beta, self.omega_cutoff, self.family.clone(), move |w| &q * base(w)[(0, 0)]);
        out.quad_nodes = self.quad_nodes;
        Ok(out)
    }

    /// Same density with a different number of frequency quadrature nodes.
    pub fn with_quad_nodes(&self, nodes: usize) -> Self {
        let mut out = Self::custom(self.n_channels, self.beta, self.omega_cutoff, self.family.clone(), {
            let d = self.density.clone();
            move |w| d(w)
        });
        out.quad_nodes = nodes.max(PANEL_ORDER);
        out
    }

    pub fn spectral_density(&self, omega: f64) -> CMatrix {
        (self.density)(omega)
    }

    /// Scalar density value for single-channel baths.
    pub fn scalar_density(&self, omega: f64) -> f64 {
        (self.density)(omega)[(0, 0)].re
    }

    fn frequency_cache(&self) -> &FrequencyCache {
        self.freq.get_or_init(|| {
            let panels = (self.quad_nodes / PANEL_ORDER).max(1);
            let rule = PanelRule::uniform(-self.omega_cutoff, self.omega_cutoff, panels, PANEL_ORDER);
            let c_hat = rule.nodes.iter().map(|&w| self.spectral_density(w)).collect();
            FrequencyCache { rule, c_hat }
        })
    }

    /// Quadrature nodes and weights over `[-ω_cut, ω_cut]`.
    pub fn frequency_rule(&self) -> &PanelRule {
        &self.frequency_cache().rule
    }

    fn sqrt_at_nodes(&self) -> Result<&Vec<CMatrix>> {
        let cached = self.sqrt_cache.get_or_init(|| {
            let cache = self.frequency_cache();
            cache.c_hat.iter().map(matrix_sqrt).collect::<Result<Vec<_>>>().map_err(|e| match e {
                Error::Positivity(v) => v,
                _ => f64::NAN,
            })
        });
        cached.as_ref().map_err(|&v| Error::Positivity(v))
    }

    /// Positive square root `ĝ(ω)` of `Ĉ(ω)`.
    pub fn spectral_sqrt(&self, omega: f64) -> Result<CMatrix> {
        matrix_sqrt(&self.spectral_density(omega))
    }

    /// `C(t)` by quadrature of the inverse transform.
    pub fn time_correlation(&self, t: f64) -> CMatrix {
        let cache = self.frequency_cache();
        inverse_transform(&cache.rule, &cache.c_hat, t, self.n_channels)
    }

    /// `g(t)`, the inverse transform of `ĝ`.
    pub fn sqrt_correlation(&self, t: f64) -> Result<CMatrix> {
        let g = self.sqrt_at_nodes()?;
        Ok(inverse_transform(self.frequency_rule(), g, t, self.n_channels))
    }

    /// Values `ĝ` at the frequency quadrature nodes.
    pub fn sqrt_density_at_nodes(&self) -> Result<&[CMatrix]> {
        self.sqrt_at_nodes().map(|v| v.as_slice())
    }

    /// Largest entry magnitude of `Ĉ` on the quadrature grid.
    pub fn sup_density(&self) -> f64 {
        self.frequency_cache().c_hat.iter().map(max_abs).fold(0.0, f64::max)
    }

    /// `C(t)` sampled on the quadrature rule over the decay window, cached.
    pub fn correlation_grid(&self) -> Result<&CorrelationGrid> {
        self.corr_grid
            .get_or_init(|| {
                let ts = self.timescales().map_err(|e| e.to_string())?;
                let rule = time_rule(ts.window);
                let values = rule.nodes.iter().map(|&t| self.time_correlation(t)).collect();
                Ok(CorrelationGrid { rule, values })
            })
            .as_ref()
            .map_err(|e| Error::Window(e.clone()))
    }

    /// Bath timescales, computed once and cached.
    pub fn timescales(&self) -> Result<BathTimescales> {
        self.timescales.get_or_init(|| compute_timescales(self).map_err(|e| e.to_string())).clone().map_err(Error::Window)
    }
}

fn matrix_sqrt(m: &CMatrix) -> Result<CMatrix> {
    if m.nrows() == 1 {
        let v = m[(0, 0)].re;
        if v < -SQRT_CLAMP {
            return Err(Error::Positivity(v));
        }
        return Ok(CMatrix::from_element(1, 1, c(v.max(0.0).sqrt(), 0.0)));
    }
    let min = hermitian_eig(m).0[0];
    if min < -SQRT_CLAMP {
        return Err(Error::Positivity(min));
    }
    Ok(hermitian_fn(m, |x| x.max(0.0).sqrt()))
}

fn inverse_transform(rule: &PanelRule, values: &[CMatrix], t: f64, n: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(n, n);
    for ((&w, &wt), v) in rule.nodes.iter().zip(&rule.weights).zip(values) {
        let phase = Complex64::from_polar(wt / (2.0 * PI), -w * t);
        acc += v * phase;
    }
    acc
}

/// `Γ₀`, `τ₀`, `Γ`, `τ` and the time window used to compute them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathTimescales {
    pub gamma0: f64,
    pub tau0: f64,
    pub gamma: f64,
    pub tau: f64,
    pub window: f64,
}

impl BathTimescales {
    pub fn gamma0_tau0(&self) -> f64 {
        self.gamma0 * self.tau0
    }

    pub fn gamma_tau(&self) -> f64 {
        self.gamma * self.tau
    }
}

fn entry_sum(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).sum()
}

/// Smallest power-of-two window beyond which `f` stays below `rel · f(0)`.
fn decay_window(f: &dyn Fn(f64) -> f64, rel: f64) -> Result<f64> {
    let scale = f(0.0);
    if scale == 0.0 {
        return Ok(1.0);
    }
    let mut t = 1.0;
    while t <= 4096.0 {
        let tail = (0..=16).map(|i| t * (1.0 + i as f64 / 16.0)).map(|s| f(s).max(f(-s))).fold(0.0, f64::max);
        if tail < rel * scale {
            return Ok(t);
        }
        t *= 2.0;
    }
    Err(Error::Window(format!("correlation still above {rel:e} of its peak at t = {t}")))
}

/// Composite rule on `[-window, window]` with `t = 0` as a panel boundary.
pub(crate) fn time_rule(window: f64) -> PanelRule {
    let panels = ((window / 0.05).ceil() as usize).max(32) * 2;
    PanelRule::uniform(-window, window, panels, 8)
}

fn compute_timescales(bath: &BathSpec) -> Result<BathTimescales> {
    let n = bath.n_channels;
    let c_mag = |t: f64| entry_sum(&bath.time_correlation(t));
    let window_c = decay_window(&c_mag, 1e-8)?;
    let rule = time_rule(window_c);
    let (mut g0, mut g0t0) = (0.0, 0.0);
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let m = c_mag(t);
        g0 += w * m;
        g0t0 += w * t.abs() * m;
    }

    let g_mag = |t: f64| bath.sqrt_correlation(t).map(|m| entry_sum(&m)).unwrap_or(f64::NAN);
    bath.sqrt_at_nodes()?;
    let window_g = decay_window(&g_mag, 1e-8)?;
    let rule_g = time_rule(window_g);
    let mut i1 = DMatrix::<f64>::zeros(n, n);
    let mut it = DMatrix::<f64>::zeros(n, n);
    for (&t, &w) in rule_g.nodes.iter().zip(&rule_g.weights) {
        let g = bath.sqrt_correlation(t)?;
        for k in 0..n {
            for l in 0..n {
                let a = g[(k, l)].norm();
                i1[(k, l)] += w * a;
                it[(k, l)] += w * t.abs() * a;
            }
        }
    }
    let gamma = (&i1 * &i1).sum();
    let gamma_tau = 2.0 * (&it * &i1).sum();
    Ok(BathTimescales {
        gamma0: g0,
        tau0: if g0 > 0.0 { g0t0 / g0 } else { 0.0 },
        gamma,
        tau: if gamma > 0.0 { gamma_tau / gamma } else { 0.0 },
        window: window_c.max(window_g),
    })
}

/// Outcome of [`verify_bath`].
#[derive(Clone, Debug)]
pub struct BathReport {
    pub hermiticity_residual: f64,
    pub min_eigenvalue: f64,
    pub kms_residual: f64,
    /// Largest `|v†C(t)v| − v†C(0)v` found; positive values violate boundedness.
    pub boundedness_excess: f64,
    pub positivity_ok: bool,
    pub kms_ok: bool,
    pub passed: bool,
}

/// Relative KMS residual `‖Ĉ(ω) − e^{βω}Ĉ(−ω)ᵀ‖ / ‖Ĉ(ω)‖` at one frequency.
pub fn kms_residual_at(bath: &BathSpec, omega: f64, floor: f64) -> f64 {
    let a = bath.spectral_density(omega);
    let b = bath.spectral_density(-omega).transpose() * c((bath.beta * omega).exp(), 0.0);
    max_abs(&(&a - &b)) / (max_abs(&a) + floor)
}

/// Hermiticity, positivity, KMS and boundedness checks on dense grids.
pub fn verify_bath(bath: &BathSpec, seed: u64) -> BathReport {
    let lim = bath.omega_cutoff;
    let grid: Vec<f64> = (0..=4000).map(|i| -lim + 2.0 * lim * i as f64 / 4000.0).collect();
    let peak = grid.iter().map(|&w| max_abs(&bath.spectral_density(w))).fold(0.0, f64::max);
    let floor = 1e-12 * peak.max(f64::MIN_POSITIVE);
    let (mut herm, mut min_eig, mut kms) = (0.0_f64, f64::INFINITY, 0.0_f64);
    for &w in &grid {
        let m = bath.spectral_density(w);
        herm = herm.max(hermiticity_residual(&m));
        min_eig = min_eig.min(hermitian_eig(&m).0[0]);
        kms = kms.max(kms_residual_at(bath, w, floor));
    }

    let n = bath.n_channels;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c0 = bath.time_correlation(0.0);
    let horizon = bath.timescales().map(|ts| ts.window).unwrap_or(10.0);
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..8 {
        let v: Vec<Complex64> = (0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        let quad = |m: &CMatrix| -> Complex64 {
            let mut acc = ZERO;
            for k in 0..n {
                for l in 0..n {
                    acc += v[k].conj() * m[(k, l)] * v[l];
                }
            }
            acc
        };
        let base = quad(&c0).re;
        for i in 0..=20 {
            let t = horizon * i as f64 / 20.0;
            excess = excess.max(quad(&bath.time_correlation(t)).norm() - base);
        }
    }
    let positivity_ok = min_eig >= -1e-10 && excess <= 1e-10 * c0.norm().max(1.0);
    let kms_ok = kms <= 1e-8;
    BathReport {
        hermiticity_residual: herm,
        min_eigenvalue: min_eig,
        kms_residual: kms,
        boundedness_excess: excess,
        positivity_ok,
        kms_ok,
        passed: positivity_ok && kms_ok && herm <= 1e-10,
    }
}
