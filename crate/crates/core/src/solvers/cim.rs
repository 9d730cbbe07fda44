//! Coherent Ising machine and its manifold-reduction variant.
//!
//! Amplitudes follow `ẋ_i = p(t) x_i - x_i³ + α Σ_j J_ij x_j`, the gradient
//! flow of `E = 1/4 Σ (p - x_i²)² - α/2 Σ_ij J_ij x_i x_j`, with the pump
//! `p(t) = (1 - p0) tanh(ε t) + p0`.

use std::time::Instant;

use super::{
    check_bound, couple, dynamics_coupling, finish, uniform_init, Recorder, RunResult,
    SolverConfig, SolverKind, TrajectorySample,
};
use crate::dynamics::{tanh_pump, Rk4};
use crate::error::Result;
use crate::graph::CouplingMatrix;
use crate::ising::{energy_unchecked, SpinConfig};
use crate::rng::rng_from_seed;

pub fn cim_energy(x: &[f64], p: f64, alpha: f64, j: &CouplingMatrix) -> f64 {
    let mut gain = 0.0;
    let mut coupling = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        gain += (p - xi * xi).powi(2);
        coupling += xi * j.row(i).iter().zip(x).map(|(&w, &v)| w * v).sum::<f64>();
    }
    0.25 * gain - 0.5 * alpha * coupling
}

pub fn cim_rhs(x: &[f64], p: f64, alpha: f64, j: &CouplingMatrix, out: &mut [f64]) {
    couple(j, x, out);
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = p * xi - xi * xi * xi + alpha * *o;
    }
}

/// `x_i ← (1 - δ) x_i + δ R(x) x_i / |x_i|` with `R(x) = Σ x_i² / N`;
/// components with `|x_i| <= floor` are left alone.
pub fn mr_cim_map(x: &mut [f64], delta: f64, floor: f64) {
    let r = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    for v in x.iter_mut() {
        if v.abs() > floor {
            *v = (1.0 - delta) * *v + delta * r * v.signum();
        }
    }
}

/// Integrates CIM (or MR-CIM when `cfg.solver` is `MrCim`) and returns the
/// final amplitudes with the optional trajectory.
pub fn cim_integrate(
    j: &CouplingMatrix,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, Option<super::Trajectory>)> {
    cfg.validate()?;
    let n = j.n();
    let (jd, alpha) = dynamics_coupling(j, cfg);
    let mut rng = rng_from_seed(cfg.seed);
    let mut x = uniform_init(&mut rng, n, cfg.init_scale);
    let mut rk = Rk4::new(n);
    let (p0, eps) = (cfg.p0, cfg.eps);
    let reduce = (cfg.solver == SolverKind::MrCim).then_some(cfg.delta);

    let mut recorder = Recorder::new(cfg.trajectory_stride);
    let sample = |t: f64, x: &[f64]| TrajectorySample {
        t,
        state: x.to_vec(),
        model_energy: cim_energy(x, tanh_pump(t, p0, eps), alpha, &jd),
        ising_energy: energy_unchecked(j, SpinConfig::from_signs(x.iter().copied()).as_slice()),
    };
    if recorder.wants(0) {
        recorder.push(sample(0.0, &x));
    }
    for step in 0..cfg.n_steps {
        let t = step as f64 * cfg.dt;
        rk.step(
            |t, y, dy| cim_rhs(y, tanh_pump(t, p0, eps), alpha, &jd, dy),
            &mut x,
            t,
            cfg.dt,
        )?;
        if let Some(delta) = reduce {
            mr_cim_map(&mut x, delta, cfg.amplitude_floor);
        }
        let t_next = t + cfg.dt;
        check_bound(&x, cfg.divergence_bound, "CIM amplitude", t_next)?;
        if recorder.wants(step + 1) {
            recorder.push(sample(t_next, &x));
        }
    }
    Ok((x, recorder.into_inner()))
}

pub fn cim_run(j: &CouplingMatrix, cfg: &SolverConfig) -> Result<RunResult> {
    let started = Instant::now();
    let (x, traj) = cim_integrate(j, cfg)?;
    finish(j, cfg, SpinConfig::from_signs(x), None, traj, started.elapsed())
}

/// CIM with the amplitude pull applied after every step.
pub fn mr_cim_run(j: &CouplingMatrix, cfg: &SolverConfig) -> Result<RunResult> {
    let mut cfg = cfg.clone();
    cfg.solver = SolverKind::MrCim;
    let started = Instant::now();
    let (x, traj) = cim_integrate(j, &cfg)?;
    finish(j, &cfg, SpinConfig::from_signs(x), None, traj, started.elapsed())
}
