//! Momentum-enhanced Hopfield-Tank network.
//!
//! Second-order dynamics in `(x, v = ẋ)`:
//!
//! ```text
//! m v̇_i = -γ v_i + β(t) x_i + α g'(x_i) Σ_j J_ij g(x_j),   g = tanh
//! ```
//!
//! The coupling force is the descent direction of the Ising energy of the
//! activations, `-∂/∂x_i [-1/2 Σ_ij J_ij g(x_i) g(x_j)]`, and `β(t)` acts as
//! an annealed anti-damping drive `β0 (1 - t/T)`. At frozen `β` the
//! mechanical energy [`meht_energy`] decreases at rate `γ |v|²`.
//! Amplitudes above one are clipped to their sign after every step.

use std::time::Instant;

use super::{
    check_bound, couple, dynamics_coupling, finish, uniform_init, Recorder, RunResult,
    SolverConfig, TrajectorySample,
};
use crate::dynamics::{beta_decay, Rk4};
use crate::error::Result;
use crate::graph::CouplingMatrix;
use crate::ising::{energy_unchecked, SpinConfig};
use crate::rng::rng_from_seed;

/// Parameters of the ME-HT vector field at one instant.
#[derive(Debug, Clone, Copy)]
pub struct MehtParams {
    pub mass: f64,
    pub damping: f64,
    pub beta: f64,
    pub alpha: f64,
}

/// Derivative of the flat state `[x, v]`.
pub fn meht_rhs(y: &[f64], params: MehtParams, j: &CouplingMatrix, dy: &mut [f64]) {
    let n = j.n();
    let (x, v) = y.split_at(n);
    let (dx, dv) = dy.split_at_mut(n);
    dx.copy_from_slice(v);
    let g: Vec<f64> = x.iter().map(|xi| xi.tanh()).collect();
    couple(j, &g, dv);
    for i in 0..n {
        let dg = 1.0 - g[i] * g[i];
        dv[i] = (-params.damping * v[i] + params.beta * x[i] + params.alpha * dg * dv[i])
            / params.mass;
    }
}

/// `m/2 |v|² - β/2 |x|² - α/2 Σ_ij J_ij g(x_i) g(x_j)`.
pub fn meht_energy(y: &[f64], params: MehtParams, j: &CouplingMatrix) -> f64 {
    let n = j.n();
    let (x, v) = y.split_at(n);
    let g: Vec<f64> = x.iter().map(|xi| xi.tanh()).collect();
    let mut coupling = 0.0;
    for i in 0..n {
        coupling += g[i] * j.row(i).iter().zip(&g).map(|(&w, &gj)| w * gj).sum::<f64>();
    }
    let kinetic: f64 = v.iter().map(|vi| vi * vi).sum();
    let confine: f64 = x.iter().map(|xi| xi * xi).sum();
    0.5 * params.mass * kinetic - 0.5 * params.beta * confine - 0.5 * params.alpha * coupling
}

pub fn meht_integrate(
    j: &CouplingMatrix,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, Option<super::Trajectory>)> {
    cfg.validate()?;
    let n = j.n();
    let (jd, alpha) = dynamics_coupling(j, cfg);
    let mut rng = rng_from_seed(cfg.seed);
    let mut y = uniform_init(&mut rng, n, cfg.init_scale);
    y.extend(std::iter::repeat_n(0.0, n));
    let horizon = cfg.horizon();
    let params = |t: f64| MehtParams {
        mass: cfg.mass,
        damping: cfg.damping,
        beta: beta_decay(t, cfg.beta0, horizon),
        alpha,
    };
    let mut rk = Rk4::new(2 * n);
    let mut recorder = Recorder::new(cfg.trajectory_stride);
    let sample = |t: f64, y: &[f64]| TrajectorySample {
        t,
        state: y[..n].to_vec(),
        model_energy: meht_energy(y, params(t), &jd),
        ising_energy: energy_unchecked(j, SpinConfig::from_signs(y[..n].iter().copied()).as_slice()),
    };
    if recorder.wants(0) {
        recorder.push(sample(0.0, &y));
    }
    for step in 0..cfg.n_steps {
        let t = step as f64 * cfg.dt;
        rk.step(|t, y, dy| meht_rhs(y, params(t), &jd, dy), &mut y, t, cfg.dt)?;
        if cfg.clip {
            for xi in &mut y[..n] {
                if xi.abs() > 1.0 {
                    *xi = xi.signum();
                }
            }
        }
        let t_next = t + cfg.dt;
        check_bound(&y, cfg.divergence_bound, "ME-HT state", t_next)?;
        if recorder.wants(step + 1) {
            recorder.push(sample(t_next, &y));
        }
    }
    y.truncate(n);
    Ok((y, recorder.into_inner()))
}

pub fn meht_run(j: &CouplingMatrix, cfg: &SolverConfig) -> Result<RunResult> {
    let started = Instant::now();
    let (x, traj) = meht_integrate(j, cfg)?;
    finish(j, cfg, SpinConfig::from_signs(x), None, traj, started.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::mobius_ladder;
    use crate::solvers::SolverKind;

    #[test]
    fn force_is_negative_potential_gradient() {
        let j = mobius_ladder(8, 0.6).unwrap();
        let p = MehtParams {
            mass: 1.3,
            damping: 0.0,
            beta: 0.4,
            alpha: 0.7,
        };
        let mut y: Vec<f64> = (0..8).map(|i| 0.2 * (i as f64 - 3.0)).collect();
        y.extend(std::iter::repeat_n(0.0, 8));
        let mut dy = vec![0.0; 16];
        meht_rhs(&y, p, &j, &mut dy);
        let h = 1e-6;
        for c in 0..8 {
            let mut up = y.clone();
            let mut dn = y.clone();
            up[c] += h;
            dn[c] -= h;
            let force = -(meht_energy(&up, p, &j) - meht_energy(&dn, p, &j)) / (2.0 * h);
            assert!((force / p.mass - dy[8 + c]).abs() < 1e-7);
        }
    }

    #[test]
    fn free_damped_motion_decays() {
        let j = CouplingMatrix::zeros(4);
        let mut cfg = SolverConfig::for_solver(SolverKind::MeHt).with_seed(1);
        cfg.beta0 = 0.0;
        cfg.init_scale = 0.5;
        cfg.n_steps = 4000;
        let (x, _) = meht_integrate(&j, &cfg).unwrap();
        // v̇ = -γ v only: x freezes at x0 + v0/γ = x0 since v0 = 0
        let mut rng = rng_from_seed(1);
        let x0 = uniform_init(&mut rng, 4, 0.5);
        for (a, b) in x.iter().zip(&x0) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = MehtParams {
            mass: 1.0,
            damping: 0.99,
            beta: -0.5,
            alpha: 0.0,
        };
        let mut y = vec![0.5, -0.3, 0.1, 0.0, 0.2, 0.0, 0.0, 0.0];
        let mut rk = Rk4::new(8);
        for s in 0..2000 {
            rk.step(|_, y, dy| meht_rhs(y, p, &j, dy), &mut y, s as f64 * 0.1, 0.1).unwrap();
        }
        assert!(y.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn clipping_keeps_amplitudes_in_unit_box() {
        let j = mobius_ladder(8, 1.0).unwrap();
        let mut cfg = SolverConfig::for_solver(SolverKind::MeHt).with_seed(4);
        cfg.trajectory_stride = Some(1);
        let (_, traj) = meht_integrate(&j, &cfg).unwrap();
        for s in traj.unwrap().samples {
            assert!(s.state.iter().all(|v| v.abs() <= 1.0));
        }
    }
}
