//! Propagation of density matrices, smoothing and rate diagnostics.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::generators::TimeDependentGenerator;
use crate::opcore::{c, hermitize, min_eigenvalue, trace, trace_distance, unitary_evolution, unvectorize, vectorize, Operator, Superoperator};
use crate::quad::gauss_hermite;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Picture {
    Interaction,
    Schroedinger,
}

/// Whether `times` are rescaled (`σ = α² s`) or real.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimeAxis {
    Rescaled,
    Real,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Operator>,
    pub picture: Picture,
    pub axis: TimeAxis,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&Operator> {
        self.states.last()
    }

    pub fn max_trace_error(&self) -> f64 {
        self.states.iter().map(|r| (trace(r) - c(1.0, 0.0)).norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.states.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
    }

    /// Pointwise trace distance to another trajectory on the same grid.
    pub fn distances(&self, other: &Trajectory) -> Result<Vec<f64>> {
        if self.times.len() != other.times.len() || self.times.iter().zip(&other.times).any(|(a, b)| (a - b).abs() > 1e-12 * a.abs().max(1.0)) {
            return Err(Error::Input("trajectories live on different time grids".into()));
        }
        Ok(self.states.iter().zip(&other.states).map(|(a, b)| trace_distance(a, b)).collect())
    }

    /// Switches picture with `ρ ↦ U ρ U†`, `U = e^{∓iH s}`; `s = σ/α²` on the rescaled axis.
    pub fn to_picture(&self, picture: Picture, hamiltonian: &Operator, alpha: f64) -> Result<Trajectory> {
        if picture == self.picture {
            return Ok(self.clone());
        }
        let scale = match self.axis {
            TimeAxis::Real => 1.0,
            TimeAxis::Rescaled if alpha > 0.0 => 1.0 / (alpha * alpha),
            TimeAxis::Rescaled => return Err(Error::Input("picture change on the rescaled axis needs alpha > 0".into())),
        };
        let sign = if picture == Picture::Schroedinger { 1.0 } else { -1.0 };
        let states = self
            .times
            .iter()
            .zip(&self.states)
            .map(|(&t, r)| {
                let u = unitary_evolution(hamiltonian, sign * t * scale);
                &u * r * u.adjoint()
            })
            .collect();
        Ok(Trajectory { times: self.times.clone(), states, picture, axis: self.axis })
    }

    /// CSV with `time`, row-major `re`/`im` entries, then distance to `reference` (if any) and purity.
    pub fn write_csv(&self, reference: Option<&Operator>, out: &mut impl Write) -> std::io::Result<()> {
        let d = self.states.first().map_or(0, |s| s.nrows());
        let mut header = vec!["time".to_string()];
        for i in 0..d {
            for j in 0..d {
                header.push(format!("re_{i}_{j}"));
                header.push(format!("im_{i}_{j}"));
            }
        }
        if reference.is_some() {
            header.push("trace_distance_to_reference".into());
        }
        header.push("purity".into());
        writeln!(out, "{}", header.join(","))?;
        for (&t, r) in self.times.iter().zip(&self.states) {
            let mut row = vec![sci(t)];
            for i in 0..d {
                for j in 0..d {
                    row.push(sci(r[(i, j)].re));
                    row.push(sci(r[(i, j)].im));
                }
            }
            if let Some(g) = reference {
                row.push(sci(trace_distance(r, g)));
            }
            row.push(sci((r * r).trace().re));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Scientific notation with 12 significant digits.
pub fn sci(x: f64) -> String {
    format!("{x:.11e}")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ExactExpm,
    AdaptiveRk,
    /// `ExactExpm` when `d² ≤ 4096`.
    Auto,
}

#[derive(Clone, Copy, Debug)]
pub struct RkOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for RkOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-12, max_steps: 1_000_000 }
    }
}

fn check_inputs(dim: usize, rho0: &Operator, times: &[f64]) -> Result<()> {
    if rho0.nrows() != dim || rho0.ncols() != dim {
        return Err(Error::Input(format!("state is {}x{}, generator acts on dimension {dim}", rho0.nrows(), rho0.ncols())));
    }
    if (trace(rho0) - c(1.0, 0.0)).norm() > 1e-8 || crate::opcore::hermiticity_residual(rho0) > 1e-10 || min_eigenvalue(rho0) < -1e-10 {
        return Err(Error::Input("initial state is not a density matrix".into()));
    }
    if times.first().is_some_and(|&t| t < 0.0) || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("times must be non-negative and strictly increasing".into()));
    }
    Ok(())
}

/// Propagates `ρ̇ = L ρ` and samples at `times` (interaction picture, rescaled axis).
pub fn propagate(gen: &Superoperator, rho0: &Operator, times: &[f64], method: Method) -> Result<Trajectory> {
    propagate_with(gen, rho0, times, method, &RkOptions::default())
}

pub fn propagate_with(gen: &Superoperator, rho0: &Operator, times: &[f64], method: Method, opts: &RkOptions) -> Result<Trajectory> {
    let d = gen.dim();
    check_inputs(d, rho0, times)?;
    let method = match method {
        Method::Auto if d * d <= 4096 => Method::ExactExpm,
        Method::Auto => Method::AdaptiveRk,
        m => m,
    };
    let m = gen.matrix();
    let mut v = vectorize(rho0);
    let mut t = 0.0;
    let mut states = Vec::with_capacity(times.len());
    let mut cached: Option<(f64, DMatrix<Complex64>)> = None;
    let mut rk_step = None;
    for &target in times {
        let dt = target - t;
        if dt > 0.0 {
            v = match method {
                Method::ExactExpm => {
                    let prop = match &cached {
                        Some((h, p)) if (h - dt).abs() <= 1e-14 * dt => p,
                        _ => {
                            cached = Some((dt, (m * c(dt, 0.0)).exp()));
                            &cached.as_ref().unwrap().1
                        }
                    };
                    prop * v
                }
                _ => dopri(m, v, dt, opts, &mut rk_step)?,
            };
        }
        t = target;
        let rho = hermitize(&unvectorize(&v, d));
        v = vectorize(&rho);
        states.push(rho);
    }
    Ok(Trajectory { times: times.to_vec(), states, picture: Picture::Interaction, axis: TimeAxis::Rescaled })
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// Integrates the linear system over `span`; `step` carries the step size between calls.
fn dopri(m: &DMatrix<Complex64>, mut y: DVector<Complex64>, span: f64, opts: &RkOptions, step: &mut Option<f64>) -> Result<DVector<Complex64>> {
    let norm = m.norm().max(1e-300);
    let mut h = step.unwrap_or(0.01 / norm).min(span);
    let mut done = 0.0;
    let mut steps = 0usize;
    let mut rejected_in_a_row = 0usize;
    while done < span {
        if steps >= opts.max_steps {
            return Err(Error::Stiffness(format!("step budget {} exhausted at t = {done:.3e} of {span:.3e}, h = {h:.3e}", opts.max_steps)));
        }
        steps += 1;
        let h_try = h.min(span - done);
        let mut k: Vec<DVector<Complex64>> = Vec::with_capacity(7);
        k.push(m * &y);
        for row in A.iter() {
            let mut arg = y.clone();
            for (j, &a) in row.iter().enumerate().take(k.len()) {
                if a != 0.0 {
                    arg.axpy(c(h_try * a, 0.0), &k[j], c(1.0, 0.0));
                }
            }
            k.push(m * arg);
        }
        let mut y5 = y.clone();
        let mut err = DVector::<Complex64>::zeros(y.len());
        for j in 0..7 {
            y5.axpy(c(h_try * B5[j], 0.0), &k[j], c(1.0, 0.0));
            err.axpy(c(h_try * (B5[j] - B4[j]), 0.0), &k[j], c(1.0, 0.0));
        }
        let scale = opts.atol + opts.rtol * y.camax().max(y5.camax());
        let e = err.camax() / scale;
        if e <= 1.0 {
            done += h_try;
            y = y5;
            rejected_in_a_row = 0;
        } else {
            rejected_in_a_row += 1;
            if rejected_in_a_row > 50 || h_try < 1e-14 * span.max(1.0) {
                return Err(Error::Stiffness(format!(
                    "step rejected {rejected_in_a_row} times at t = {done:.3e}, h = {h_try:.3e}, error ratio {e:.3e}"
                )));
            }
        }
        let factor = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
        h = h_try * factor;
    }
    *step = Some(h);
    Ok(y)
}

#[derive(Clone, Copy, Debug)]
pub struct TimeDepOptions {
    /// Upper bound on the step; the step is also kept below `0.1/‖L(t)‖`.
    pub max_step: f64,
}

impl Default for TimeDepOptions {
    fn default() -> Self {
        Self { max_step: 0.01 }
    }
}

/// Time-ordered propagation with the fourth-order commutator-free Magnus scheme
/// `e^{h(a₁L₁ + a₂L₂)} e^{h(a₂L₁ + a₁L₂)}`; exact for constant generators.
pub fn propagate_timedep(gen: &dyn TimeDependentGenerator, rho0: &Operator, times: &[f64], opts: &TimeDepOptions) -> Result<Trajectory> {
    let d = gen.dim();
    check_inputs(d, rho0, times)?;
    if !(opts.max_step > 0.0) {
        return Err(Error::Input("max_step must be positive".into()));
    }
    let s3 = 3f64.sqrt();
    let (c1, c2) = (0.5 - s3 / 6.0, 0.5 + s3 / 6.0);
    let (a1, a2) = (0.25 + s3 / 6.0, 0.25 - s3 / 6.0);
    let mut v = vectorize(rho0);
    let mut t = 0.0;
    let mut states = Vec::with_capacity(times.len());
    for &target in times {
        while t < target {
            let l0 = gen.at(t);
            let norm = l0.matrix().norm();
            let cap = if norm > 0.0 { opts.max_step.min(0.1 / norm) } else { opts.max_step };
            let h = cap.min(target - t);
            let l1 = gen.at(t + c1 * h);
            let l2 = gen.at(t + c2 * h);
            let first = (l1.matrix() * c(a2 * h, 0.0) + l2.matrix() * c(a1 * h, 0.0)).exp();
            let second = (l1.matrix() * c(a1 * h, 0.0) + l2.matrix() * c(a2 * h, 0.0)).exp();
            v = second * (first * v);
            t = if target - t <= h { target } else { t + h };
            let rho = hermitize(&unvectorize(&v, d));
            v = vectorize(&rho);
        }
        states.push(unvectorize(&v, d));
    }
    Ok(Trajectory { times: times.to_vec(), states, picture: Picture::Interaction, axis: TimeAxis::Rescaled })
}

fn interpolate(traj: &Trajectory, t: f64) -> Operator {
    let ts = &traj.times;
    if t <= ts[0] {
        return traj.states[0].clone();
    }
    if t >= ts[ts.len() - 1] {
        return traj.states[ts.len() - 1].clone();
    }
    let i = ts.partition_point(|&x| x <= t) - 1;
    let w = (t - ts[i]) / (ts[i + 1] - ts[i]);
    &traj.states[i] * c(1.0 - w, 0.0) + &traj.states[i + 1] * c(w, 0.0)
}

/// Gaussian average `ρ̄(t) = ∫ e^{−q²/T²}/(√π T) ρ(t + α²q) dq` on the rescaled axis.
///
/// States before the first sample are taken to be the first state; beyond the
/// last sample, the last state. Linear interpolation between samples keeps the
/// output a convex combination of trajectory states.
pub fn smooth_average(traj: &Trajectory, observation_time: f64, alpha: f64) -> Result<Trajectory> {
    if traj.is_empty() {
        return Err(Error::Resolution("empty trajectory".into()));
    }
    if traj.axis != TimeAxis::Rescaled {
        return Err(Error::Input("smoothing expects the rescaled time axis".into()));
    }
    if !(observation_time >= 0.0) || !(alpha >= 0.0) {
        return Err(Error::Input("observation time and alpha must be non-negative".into()));
    }
    let width = alpha * alpha * observation_time;
    let spacing = traj.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let min_spacing = traj.times.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    if width <= 0.0 || width * 8.0 < min_spacing.min(spacing) * 1e-3 {
        return Ok(traj.clone());
    }
    if spacing > width / 8.0 && width * 8.0 > min_spacing {
        return Err(Error::Resolution(format!("sample spacing {spacing:.3e} exceeds α²T/8 = {:.3e}", width / 8.0)));
    }
    let (nodes, weights) = gauss_hermite(48);
    let norm: f64 = weights.iter().sum();
    let states = traj
        .times
        .iter()
        .map(|&t| {
            let mut acc = Operator::zeros(traj.states[0].nrows(), traj.states[0].ncols());
            for (&x, &w) in nodes.iter().zip(&weights) {
                acc += interpolate(traj, t + width * x) * c(w / norm, 0.0);
            }
            hermitize(&acc)
        })
        .collect();
    Ok(Trajectory { times: traj.times.clone(), states, picture: traj.picture, axis: traj.axis })
}

/// Largest finite-difference rate `‖ρ(t_{i+1}) − ρ(t_i)‖₁ / Δt`.
pub fn rate_monitor(traj: &Trajectory) -> f64 {
    traj.times.windows(2).zip(traj.states.windows(2)).map(|(t, s)| trace_distance(&s[1], &s[0]) / (t[1] - t[0])).fold(0.0, f64::max)
}

/// The fastest-rate bound: `2α²Γ₀` on the real axis, `2Γ₀` on the rescaled one.
pub fn rate_bound(axis: TimeAxis, alpha: f64, gamma0: f64) -> f64 {
    match axis {
        TimeAxis::Real => 2.0 * alpha * alpha * gamma0,
        TimeAxis::Rescaled => 2.0 * gamma0,
    }
}
