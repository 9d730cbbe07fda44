//! Annealing schedules and fixed-step integrators.

use log::warn;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default integration step used throughout.
pub const DEFAULT_DT: f64 = 0.1;

/// Time-dependent annealing parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Held at `value`.
    Constant { value: f64 },
    /// `rate * t`, e.g. the collinearity penalty `P(t)`.
    LinearRamp { rate: f64 },
    /// `(1 - p0) tanh(eps t) + p0`.
    TanhPump { p0: f64, eps: f64 },
    /// `beta0 (1 - t / horizon)`.
    BetaDecay { beta0: f64, horizon: f64 },
}

impl Schedule {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::LinearRamp { rate } => linear_ramp(t, rate),
            Schedule::TanhPump { p0, eps } => tanh_pump(t, p0, eps),
            Schedule::BetaDecay { beta0, horizon } => beta_decay(t, beta0, horizon),
        }
    }
}

pub fn linear_ramp(t: f64, rate: f64) -> f64 {
    rate * t
}

pub fn tanh_pump(t: f64, p0: f64, eps: f64) -> f64 {
    (1.0 - p0) * (eps * t).tanh() + p0
}

pub fn beta_decay(t: f64, beta0: f64, horizon: f64) -> f64 {
    beta0 * (1.0 - t / horizon)
}

/// `(A(t), B(t)) = (1 - t/T, t/T)`, with `t` clamped into `[0, T]`.
pub fn linear_interp(t: f64, horizon: f64) -> (f64, f64) {
    let clamped = t.clamp(0.0, horizon);
    if clamped != t {
        warn!("linear_interp: t = {t} outside [0, {horizon}], clamped");
    }
    let b = clamped / horizon;
    (1.0 - b, b)
}

/// Gain feedback rate `ε (1 - |x_i|²)` for each squared amplitude.
pub fn gain_feedback_rate(norms_sq: &[f64], eps: f64, out: &mut [f64]) {
    for (o, &r2) in out.iter_mut().zip(norms_sq) {
        *o = eps * (1.0 - r2);
    }
}

/// One explicit step of the gain feedback `γ_i ← γ_i + ε (1 - |x_i|²) dt`.
pub fn gain_feedback_step(gamma: &mut [f64], norms_sq: &[f64], eps: f64, dt: f64) {
    for (g, &r2) in gamma.iter_mut().zip(norms_sq) {
        *g += eps * (1.0 - r2) * dt;
    }
}

fn check_finite(state: &[f64], t: f64) -> Result<()> {
    match state.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::Divergence(format!(
            "non-finite component {i} after step at t = {t}"
        ))),
    }
}

/// Classical fourth-order Runge-Kutta with reusable stage buffers.
///
/// The vector field is `f(t, y, dy)` writing the derivative into `dy`.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn step<F>(&mut self, mut f: F, state: &mut [f64], t: f64, dt: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let half = 0.5 * dt;
        f(t, state, &mut self.k1);
        for ((tmp, &y), &k) in self.tmp.iter_mut().zip(state.iter()).zip(&self.k1) {
            *tmp = y + half * k;
        }
        f(t + half, &self.tmp, &mut self.k2);
        for ((tmp, &y), &k) in self.tmp.iter_mut().zip(state.iter()).zip(&self.k2) {
            *tmp = y + half * k;
        }
        f(t + half, &self.tmp, &mut self.k3);
        for ((tmp, &y), &k) in self.tmp.iter_mut().zip(state.iter()).zip(&self.k3) {
            *tmp = y + dt * k;
        }
        f(t + dt, &self.tmp, &mut self.k4);
        let sixth = dt / 6.0;
        for (i, y) in state.iter_mut().enumerate() {
            *y += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        check_finite(state, t + dt)
    }
}

/// Single RK4 step without buffer reuse.
pub fn rk4_step<F>(f: F, state: &mut [f64], t: f64, dt: f64) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    Rk4::new(state.len()).step(f, state, t, dt)
}

/// Explicit Euler step `y ← y + f(t, y) dt`.
pub fn euler_step<F>(mut f: F, state: &mut [f64], t: f64, dt: f64, drift: &mut [f64]) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    f(t, state, drift);
    for (y, &d) in state.iter_mut().zip(drift.iter()) {
        *y += d * dt;
    }
    check_finite(state, t + dt)
}

/// Euler-Maruyama step `y ← y + f dt + σ_c √dt ξ_c`.
///
/// `sigma` holds one noise scale per component; a normal draw is consumed
/// only for components with nonzero scale, so `σ = 0` everywhere reduces
/// exactly to [`euler_step`] and leaves the random stream untouched.
pub fn em_step<F, R>(
    f: F,
    sigma: &[f64],
    state: &mut [f64],
    t: f64,
    dt: f64,
    rng: &mut R,
    drift: &mut [f64],
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    R: rand::Rng + ?Sized,
{
    let mut f = f;
    f(t, state, drift);
    let sqrt_dt = dt.sqrt();
    for ((y, &d), &s) in state.iter_mut().zip(drift.iter()).zip(sigma) {
        *y += d * dt;
        if s != 0.0 {
            let xi: f64 = rng.sample(StandardNormal);
            *y += s * sqrt_dt * xi;
        }
    }
    check_finite(state, t + dt)
}
