//! Closed-form error bounds and the optimal observation time.
//!
//! Times `t` are rescaled times (`σ = α² s`); `observation_time` is `T(α)`.

use std::f64::consts::{E, PI};
use std::fmt;

use nalgebra::DMatrix;

use crate::bath::{time_rule, BathSpec, BathTimescales};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundKind {
    Born,
    Markov,
    RedfieldRate,
    RedfieldIntegrated,
    Smoothing,
    CoarseGrainTotal,
    Thm8Gamma,
    Thm8S,
    Thm9,
    Thm11,
    Thm12,
    TotalError,
}

impl BoundKind {
    pub const ALL: [BoundKind; 12] = [
        BoundKind::Born,
        BoundKind::Markov,
        BoundKind::RedfieldRate,
        BoundKind::RedfieldIntegrated,
        BoundKind::Smoothing,
        BoundKind::CoarseGrainTotal,
        BoundKind::Thm8Gamma,
        BoundKind::Thm8S,
        BoundKind::Thm9,
        BoundKind::Thm11,
        BoundKind::Thm12,
        BoundKind::TotalError,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Born => "born",
            BoundKind::Markov => "markov",
            BoundKind::RedfieldRate => "redfield_rate",
            BoundKind::RedfieldIntegrated => "redfield_integrated",
            BoundKind::Smoothing => "smoothing",
            BoundKind::CoarseGrainTotal => "coarse_grain_total",
            BoundKind::Thm8Gamma => "thm8_gamma",
            BoundKind::Thm8S => "thm8_s",
            BoundKind::Thm9 => "thm9",
            BoundKind::Thm11 => "thm11",
            BoundKind::Thm12 => "thm12",
            BoundKind::TotalError => "total_error",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Inputs shared by all bounds. Fields a kind does not need may be left `None`.
#[derive(Clone, Copy, Debug)]
pub struct BoundInput {
    pub alpha: f64,
    pub beta: f64,
    pub t: Option<f64>,
    pub observation_time: Option<f64>,
    /// `ω − ω̃` for the per-pair bounds.
    pub omega_minus: Option<f64>,
    pub timescales: BathTimescales,
    pub k_constant: Option<f64>,
}

impl BoundInput {
    pub fn new(alpha: f64, beta: f64, timescales: BathTimescales) -> Self {
        Self { alpha, beta, t: None, observation_time: None, omega_minus: None, timescales, k_constant: None }
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    pub fn with_observation_time(mut self, t_obs: f64) -> Self {
        self.observation_time = Some(t_obs);
        self
    }

    pub fn with_omega_minus(mut self, w: f64) -> Self {
        self.omega_minus = Some(w);
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.k_constant = Some(k);
        self
    }

    fn validate(&self) -> Result<()> {
        let ts = &self.timescales;
        let named = [
            ("alpha", Some(self.alpha)),
            ("beta", Some(self.beta)),
            ("t", self.t),
            ("observation_time", self.observation_time),
            ("gamma0", Some(ts.gamma0)),
            ("tau0", Some(ts.tau0)),
            ("gamma", Some(ts.gamma)),
            ("tau", Some(ts.tau)),
            ("k_constant", self.k_constant),
        ];
        for (name, v) in named {
            if let Some(v) = v {
                if !(v >= 0.0) || v.is_nan() {
                    return Err(Error::Input(format!("{name} must be non-negative, got {v}")));
                }
            }
        }
        Ok(())
    }
}

fn need(v: Option<f64>, name: &str, kind: BoundKind) -> Result<f64> {
    v.ok_or_else(|| Error::Input(format!("bound {kind} needs {name}")))
}

fn positive_t_obs(input: &BoundInput, kind: BoundKind) -> Result<f64> {
    let t = need(input.observation_time, "observation_time", kind)?;
    if t <= 0.0 {
        return Err(Error::Input(format!("bound {kind} needs observation_time > 0")));
    }
    Ok(t)
}

/// `K1 + K2 t + K3 log(1 + Γ₀t/α²)` with
/// `K1 = 4Γ₀α²T/√π`, `K2 = 6α²Γ₀(Γ₀τ₀) + (2+3Γ₀τ₀)/T + 4α²Γ₀²T`, `K3 = 2α²Γ₀(1+Γ₀τ₀)`.
///
/// At `T = T*` this reduces to the three-term expression in α.
fn coarse_grain_total(alpha: f64, g0: f64, g0t0: f64, t: f64, t_obs: f64) -> f64 {
    let a2 = alpha * alpha;
    let k1 = 4.0 * g0 * a2 * t_obs / PI.sqrt();
    let k2 = 6.0 * a2 * g0 * g0t0 + (2.0 + 3.0 * g0t0) / t_obs + 4.0 * a2 * g0 * g0 * t_obs;
    let k3 = 2.0 * a2 * g0 * (1.0 + g0t0);
    let log = if a2 > 0.0 { (g0 * t / a2).ln_1p() } else { 0.0 };
    k1 + k2 * t + k3 * log
}

fn thm11(input: &BoundInput, kind: BoundKind) -> Result<f64> {
    let t_obs = positive_t_obs(input, kind)?;
    let k = need(input.k_constant, "k_constant", kind)?;
    let ts = &input.timescales;
    let b = input.beta;
    Ok(ts.gamma / (2.0 * PI.sqrt() * t_obs) * ((8.0 + PI) * ts.tau + b * (b * b / (16.0 * t_obs * t_obs)).exp()) + k / (t_obs * t_obs))
}

/// Right-hand side of the selected bound.
pub fn bound(kind: BoundKind, input: &BoundInput) -> Result<f64> {
    input.validate()?;
    let ts = &input.timescales;
    let (g0, g0t0) = (ts.gamma0, ts.gamma0 * ts.tau0);
    let a2 = input.alpha * input.alpha;
    let value = match kind {
        BoundKind::Born => 4.0 * a2 * g0 * need(input.t, "t", kind)? * g0t0,
        BoundKind::Markov => 2.0 * a2 * g0 * need(input.t, "t", kind)? * g0t0,
        BoundKind::RedfieldRate => {
            let t = need(input.t, "t", kind)?;
            let t_obs = need(input.observation_time, "observation_time", kind)?;
            let memory = if a2 + g0 * t > 0.0 { a2 / (a2 + g0 * t) } else { 1.0 };
            2.0 * g0 * (1.0 + g0t0) * (1.0 / (2.0 + g0 * t_obs) + memory)
        }
        BoundKind::RedfieldIntegrated => {
            let t = need(input.t, "t", kind)?;
            let t_obs = need(input.observation_time, "observation_time", kind)?;
            let log = if a2 > 0.0 { a2 * (g0 * t / a2).ln_1p() } else { 0.0 };
            2.0 * (1.0 + g0t0) * (g0 * t / (2.0 + g0 * t_obs) + log)
        }
        BoundKind::Smoothing => 2.0 * g0 * a2 * need(input.observation_time, "observation_time", kind)? / PI.sqrt(),
        BoundKind::CoarseGrainTotal => {
            let t = need(input.t, "t", kind)?;
            coarse_grain_total(input.alpha, g0, g0t0, t, positive_t_obs(input, kind)?)
        }
        BoundKind::Thm8Gamma => {
            let t_obs = positive_t_obs(input, kind)?;
            let wm = need(input.omega_minus, "omega_minus", kind)?;
            g0 * (-(t_obs * wm).powi(2) / 4.0).exp() * (1.0 - (input.beta * input.beta / (t_obs * t_obs)).exp()).abs()
        }
        BoundKind::Thm8S => {
            let t_obs = positive_t_obs(input, kind)?;
            let wm = need(input.omega_minus, "omega_minus", kind)?;
            g0 / t_obs * (input.beta / (2.0 * (2.0 * E).sqrt()) + ts.tau0 * (-(t_obs * wm).powi(2) / 4.0).exp() / (2.0 * PI).sqrt())
        }
        BoundKind::Thm9 => {
            let t_obs = positive_t_obs(input, kind)?;
            ts.gamma * ts.tau * ((2.0 * PI).sqrt() + E.sqrt()) / ((PI * E).sqrt() * t_obs)
        }
        BoundKind::Thm11 => thm11(input, kind)?,
        BoundKind::Thm12 => need(input.t, "t", kind)? * thm11(input, kind)?,
        BoundKind::TotalError => {
            let t = need(input.t, "t", kind)?;
            coarse_grain_total(input.alpha, g0, g0t0, t, positive_t_obs(input, kind)?) + t * thm11(input, kind)?
        }
    };
    Ok(value)
}

/// `T* = √(2 + 3Γ₀τ₀) / (2αΓ₀)`.
pub fn optimal_t(alpha: f64, timescales: &BathTimescales) -> Result<f64> {
    if alpha <= 0.0 {
        return Err(Error::Divergence("optimal observation time diverges at alpha = 0".into()));
    }
    if timescales.gamma0 <= 0.0 {
        return Err(Error::Divergence("optimal observation time diverges for a bath with Γ₀ = 0".into()));
    }
    Ok((2.0 + 3.0 * timescales.gamma0_tau0()).sqrt() / (2.0 * alpha * timescales.gamma0))
}

/// `K = Σ_{k,λ,l} ∫∫ (2t₁² − t₁t₂ + 2t₂²) |g_kλ(t₁) g_λl(t₂)| dt₁ dt₂`.
///
/// The integrand separates, so `K = Σ 2 M₂M₀ − M₁M₁ + 2 M₀M₂` over the entrywise
/// moments `M_j = ∫ t^j |g(t)| dt`, each computed by composite Gauss–Legendre
/// quadrature over the bath window.
pub fn k_constant(bath: &BathSpec) -> Result<f64> {
    let n = bath.n_channels;
    let window = bath.timescales()?.window;
    let rule = time_rule(window);
    let mut m = [DMatrix::<f64>::zeros(n, n), DMatrix::<f64>::zeros(n, n), DMatrix::<f64>::zeros(n, n)];
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let g = bath.sqrt_correlation(t)?;
        for k in 0..n {
            for l in 0..n {
                let a = w * g[(k, l)].norm();
                m[0][(k, l)] += a;
                m[1][(k, l)] += a * t;
                m[2][(k, l)] += a * t * t;
            }
        }
    }
    Ok(2.0 * (&m[2] * &m[0]).sum() - (&m[1] * &m[1]).sum() + 2.0 * (&m[0] * &m[2]).sum())
}

/// One row per bound kind; kinds whose inputs are missing are skipped.
pub fn bound_table(input: &BoundInput) -> Vec<(BoundKind, f64)> {
    BoundKind::ALL.iter().filter_map(|&k| bound(k, input).ok().map(|v| (k, v))).collect()
}
