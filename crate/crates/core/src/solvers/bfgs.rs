//! BFGS baseline on the scalar soft-spin relaxation
//! `E(x) = 1/4 Σ (1 - x_i²)² - 1/2 Σ_ij J_ij x_i x_j`.

use std::time::Instant;

use log::debug;
use rand::Rng as _;

use super::{couple, dynamics_coupling, finish, Recorder, RunResult, SolverConfig, TrajectorySample};
use crate::error::{Error, Result};
use crate::graph::CouplingMatrix;
use crate::ising::{energy_unchecked, SpinConfig};
use crate::rng::{rng_from_seed, splitmix64};

pub fn relaxation_energy(x: &[f64], j: &CouplingMatrix) -> f64 {
    let mut well = 0.0;
    let mut coupling = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        well += (1.0 - xi * xi).powi(2);
        coupling += xi * j.row(i).iter().zip(x).map(|(&w, &v)| w * v).sum::<f64>();
    }
    0.25 * well - 0.5 * coupling
}

pub fn relaxation_gradient(x: &[f64], j: &CouplingMatrix, out: &mut [f64]) {
    couple(j, x, out);
    for (o, &xi) in out.iter_mut().zip(x) {
        *o = -xi * (1.0 - xi * xi) - *o;
    }
}

const GRAD_TOL: f64 = 1e-9;
const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;

enum Outcome {
    Converged(Vec<f64>),
    LineSearchFailed,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises from `x` with an inverse-Hessian BFGS update and Armijo
/// backtracking. Hitting the iteration cap returns the current iterate.
fn minimise(
    mut x: Vec<f64>,
    j: &CouplingMatrix,
    max_iter: usize,
    mut on_iter: impl FnMut(usize, &[f64]),
) -> Outcome {
    let n = x.len();
    let mut h = vec![0.0; n * n];
    let reset = |h: &mut Vec<f64>| {
        h.fill(0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut h);
    let mut g = vec![0.0; n];
    relaxation_gradient(&x, j, &mut g);
    let mut f = relaxation_energy(&x, j);
    let mut d = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for iter in 0..max_iter {
        on_iter(iter, &x);
        if dot(&g, &g).sqrt() < GRAD_TOL {
            break;
        }
        for i in 0..n {
            d[i] = -h[i * n..(i + 1) * n].iter().zip(&g).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            reset(&mut h);
            for i in 0..n {
                d[i] = -g[i];
            }
            slope = -dot(&g, &g);
        }
        let mut step = 1.0;
        let f_new = loop {
            for i in 0..n {
                x_new[i] = x[i] + step * d[i];
            }
            let f_try = relaxation_energy(&x_new, j);
            if f_try <= f + ARMIJO * step * slope {
                break f_try;
            }
            step *= 0.5;
            if step < MIN_STEP {
                return Outcome::LineSearchFailed;
            }
        };
        relaxation_gradient(&x_new, j, &mut g_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n)
                .map(|i| h[i * n..(i + 1) * n].iter().zip(&y).map(|(a, b)| a * b).sum())
                .collect();
            let yhy = dot(&y, &hy);
            for a in 0..n {
                for b in 0..n {
                    h[a * n + b] += (1.0 + rho * yhy) * rho * s[a] * s[b]
                        - rho * (hy[a] * s[b] + s[a] * hy[b]);
                }
            }
        }
        x.copy_from_slice(&x_new);
        g.copy_from_slice(&g_new);
        f = f_new;
    }
    Outcome::Converged(x)
}

/// Local BFGS minimisation from a uniform start in `[-1, 1]^n`; spins are the
/// signs of the minimiser. `n_steps` caps the iterations.
pub fn bfgs_run(j: &CouplingMatrix, cfg: &SolverConfig) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let n = j.n();
    let (jd, _) = dynamics_coupling(j, cfg);
    let mut seed = cfg.seed;
    for attempt in 0..=cfg.max_restarts {
        let mut rng = rng_from_seed(seed);
        let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let mut recorder = Recorder::new(cfg.trajectory_stride);
        let outcome = minimise(x0, &jd, cfg.n_steps, |iter, x| {
            if recorder.wants(iter) {
                recorder.push(TrajectorySample {
                    t: iter as f64,
                    state: x.to_vec(),
                    model_energy: relaxation_energy(x, &jd),
                    ising_energy: energy_unchecked(
                        j,
                        SpinConfig::from_signs(x.iter().copied()).as_slice(),
                    ),
                });
            }
        });
        match outcome {
            Outcome::Converged(x) => {
                return finish(
                    j,
                    cfg,
                    SpinConfig::from_signs(x),
                    None,
                    recorder.into_inner(),
                    started.elapsed(),
                );
            }
            Outcome::LineSearchFailed => {
                debug!("BFGS line search failed on attempt {attempt}, restarting");
                seed = splitmix64(seed);
            }
        }
    }
    Err(Error::Divergence(format!(
        "BFGS line search failed after {} restarts",
        cfg.max_restarts
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{mobius_ladder, sk_instance};
    use crate::solvers::SolverKind;

    #[test]
    fn gradient_matches_finite_differences() {
        let j = sk_instance(10, 4).unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.7).sin()).collect();
        let mut g = vec![0.0; 10];
        relaxation_gradient(&x, &j, &mut g);
        let h = 1e-6;
        for c in 0..10 {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[c] += h;
            dn[c] -= h;
            let fd = (relaxation_energy(&up, &j) - relaxation_energy(&dn, &j)) / (2.0 * h);
            assert!((fd - g[c]).abs() / g[c].abs().max(1.0) < 1e-6);
        }
    }

    #[test]
    fn decoupled_wells_end_at_a_corner() {
        let j = CouplingMatrix::zeros(6);
        let cfg = SolverConfig::for_solver(SolverKind::Bfgs).with_seed(9);
        let x0 = {
            let mut rng = rng_from_seed(9);
            (0..6).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>()
        };
        match minimise(x0, &j, 1000, |_, _| {}) {
            Outcome::Converged(x) => {
                assert!(x.iter().all(|v| (v.abs() - 1.0).abs() < 1e-6));
                assert!(relaxation_energy(&x, &j).abs() < 1e-12);
            }
            Outcome::LineSearchFailed => panic!("line search failed"),
        }
        assert!(bfgs_run(&j, &cfg).is_ok());
    }

    #[test]
    fn reaches_stationary_point_on_mobius() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let mut rng = rng_from_seed(2);
        let x0: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..=1.0)).collect();
        if let Outcome::Converged(x) = minimise(x0, &j, 1000, |_, _| {}) {
            let mut g = vec![0.0; 8];
            relaxation_gradient(&x, &j, &mut g);
            assert!(dot(&g, &g).sqrt() < 1e-8);
        } else {
            panic!("line search failed");
        }
    }
}
