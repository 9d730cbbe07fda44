//! Spin-vector Langevin model.
//!
//! Angles `θ_i` with momenta `p_i = m θ̇_i`:
//!
//! ```text
//! θ̇_i = p_i / m
//! ṗ_i = -α ∂H/∂θ_i - (γ/m) p_i + noise
//! ∂H/∂θ_i = -B(t) Σ_j J_ij cos θ_i sin θ_j + A(t) sin θ_i
//! ```
//!
//! with `A = 1 - t/T`, `B = t/T`. Noise-free runs use RK4; with `σ > 0` the
//! system is an SDE and is stepped with Euler-Maruyama, noise entering the
//! momenta only. Spins are `sign(sin θ_i)`.

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use rand::Rng as _;

use super::{
    check_bound, couple, dynamics_coupling, finish, Recorder, RunResult, SolverConfig,
    TrajectorySample,
};
use crate::dynamics::{em_step, linear_interp, Rk4};
use crate::error::Result;
use crate::graph::CouplingMatrix;
use crate::ising::{energy_unchecked, SpinConfig};
use crate::rng::rng_from_seed;

/// Gradient of the interpolated Hamiltonian at schedule values `(a, b)`.
pub fn svl_gradient(theta: &[f64], a: f64, b: f64, j: &CouplingMatrix, out: &mut [f64]) {
    let sin: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    couple(j, &sin, out);
    for (i, o) in out.iter_mut().enumerate() {
        *o = -b * theta[i].cos() * *o + a * sin[i];
    }
}

/// `H(θ) = -A Σ cos θ_i - B/2 Σ_ij J_ij sin θ_i sin θ_j`, the potential
/// whose gradient is [`svl_gradient`].
pub fn svl_energy(theta: &[f64], a: f64, b: f64, j: &CouplingMatrix) -> f64 {
    let sin: Vec<f64> = theta.iter().map(|t| t.sin()).collect();
    let mut coupling = 0.0;
    for (i, si) in sin.iter().enumerate() {
        coupling += si * j.row(i).iter().zip(&sin).map(|(&w, &sj)| w * sj).sum::<f64>();
    }
    -a * theta.iter().map(|t| t.cos()).sum::<f64>() - 0.5 * b * coupling
}

pub fn svl_integrate(
    j: &CouplingMatrix,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, Option<super::Trajectory>)> {
    cfg.validate()?;
    let n = j.n();
    let (jd, alpha) = dynamics_coupling(j, cfg);
    let mut rng = rng_from_seed(cfg.seed);
    let mut y: Vec<f64> = (0..n).map(|_| rng.random_range(-FRAC_PI_2..=FRAC_PI_2)).collect();
    y.extend(std::iter::repeat_n(0.0, n));
    let horizon = cfg.horizon();
    let (mass, damping) = (cfg.mass, cfg.damping);

    let field = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (theta, p) = y.split_at(n);
        let (dtheta, dp) = dy.split_at_mut(n);
        let (a, b) = linear_interp(t.min(horizon), horizon);
        svl_gradient(theta, a, b, &jd, dp);
        for i in 0..n {
            dtheta[i] = p[i] / mass;
            dp[i] = -alpha * dp[i] - damping / mass * p[i];
        }
    };

    let sigma: Vec<f64> = std::iter::repeat_n(0.0, n)
        .chain(std::iter::repeat_n(cfg.sigma, n))
        .collect();
    let mut rk = Rk4::new(2 * n);
    let mut drift = vec![0.0; 2 * n];
    let mut recorder = Recorder::new(cfg.trajectory_stride);
    let sample = |t: f64, y: &[f64]| {
        let (a, b) = linear_interp(t.min(horizon), horizon);
        TrajectorySample {
            t,
            state: y[..n].to_vec(),
            model_energy: svl_energy(&y[..n], a, b, &jd),
            ising_energy: energy_unchecked(
                j,
                SpinConfig::from_signs(y[..n].iter().map(|t| t.sin())).as_slice(),
            ),
        }
    };
    if recorder.wants(0) {
        recorder.push(sample(0.0, &y));
    }
    for step in 0..cfg.n_steps {
        let t = step as f64 * cfg.dt;
        if cfg.sigma > 0.0 {
            em_step(field, &sigma, &mut y, t, cfg.dt, &mut rng, &mut drift)?;
        } else {
            rk.step(field, &mut y, t, cfg.dt)?;
        }
        let t_next = t + cfg.dt;
        check_bound(&y[n..], cfg.divergence_bound, "SVL momentum", t_next)?;
        if recorder.wants(step + 1) {
            recorder.push(sample(t_next, &y));
        }
    }
    y.truncate(n);
    Ok((y, recorder.into_inner()))
}

pub fn svl_run(j: &CouplingMatrix, cfg: &SolverConfig) -> Result<RunResult> {
    let started = Instant::now();
    let (theta, traj) = svl_integrate(j, cfg)?;
    let spins = SpinConfig::from_signs(theta.iter().map(|t| t.sin()));
    finish(j, cfg, spins, None, traj, started.elapsed())
}
