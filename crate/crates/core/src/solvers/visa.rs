//! Vector Ising Spin Annealer.
//!
//! Each spin is a 3-vector `x_i` following the gradient flow of
//!
//! ```text
//! H = α/4 Σ_i (γ_i - |x_i|²)²  -  1/2 Σ_ij J_ij x_i·x_j  +  P/2 Σ_ij |x_i × x_j|²
//! ```
//!
//! with the gain fed back as `γ̇_i = ε (1 - |x_i|²)` and the penalty ramped
//! as `P(t) = p_rate t`. The penalty gradient is
//! `2P (x_i Σ_j |x_j|² - Σ_j x_j (x_i·x_j))`; both sums are taken through
//! `S = Σ_j |x_j|²` and `M = Σ_j x_j x_jᵀ`, so a derivative costs `O(n²)`
//! for the coupling and `O(n)` for the penalty.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    check_bound, dynamics_coupling, finish, uniform_init, InitMode, Recorder, RunResult,
    SolverConfig, TrajectorySample,
};
use crate::dynamics::Rk4;
use crate::error::{Error, Result};
use crate::graph::CouplingMatrix;
use crate::ising::{energy_unchecked, vector_readout, VectorState};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisaEnergyTerms {
    pub h1: f64,
    pub h2: f64,
    pub h3: f64,
}

impl VisaEnergyTerms {
    pub fn total(&self) -> f64 {
        self.h1 + self.h2 + self.h3
    }
}

/// `S = Σ|x_j|²` and the orientation matrix `M` (row-major 3×3).
#[inline]
fn moments(x: &[f64]) -> (f64, [f64; 9]) {
    let mut s = 0.0;
    let mut m = [0.0; 9];
    for v in x.chunks_exact(3) {
        s += v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        for a in 0..3 {
            for b in 0..3 {
                m[3 * a + b] += v[a] * v[b];
            }
        }
    }
    (s, m)
}

pub(crate) fn energy_terms_flat(
    x: &[f64],
    gamma: &[f64],
    p: f64,
    alpha: f64,
    j: &CouplingMatrix,
) -> VisaEnergyTerms {
    let n = j.n();
    let mut h1 = 0.0;
    let mut h2 = 0.0;
    for i in 0..n {
        let xi = &x[3 * i..3 * i + 3];
        let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        h1 += (gamma[i] - r2).powi(2);
        let row = j.row(i);
        for (k, &w) in row.iter().enumerate() {
            if w != 0.0 {
                let xk = &x[3 * k..3 * k + 3];
                h2 += w * (xi[0] * xk[0] + xi[1] * xk[1] + xi[2] * xk[2]);
            }
        }
    }
    // Σ_ij |x_i × x_j|² = S² - ‖M‖_F²
    let (s, m) = moments(x);
    let frob: f64 = m.iter().map(|v| v * v).sum();
    VisaEnergyTerms {
        h1: alpha / 4.0 * h1,
        h2: -0.5 * h2,
        h3: p / 2.0 * (s * s - frob),
    }
}

/// [`visa_energy`] on a flat `3n` state, without dimension checks.
pub fn visa_energy_flat(x: &[f64], gamma: &[f64], p: f64, alpha: f64, j: &CouplingMatrix) -> f64 {
    energy_terms_flat(x, gamma, p, alpha, j).total()
}

fn check_dims(x: &VectorState, gamma: &[f64], j: &CouplingMatrix) -> Result<()> {
    for got in [x.len(), gamma.len()] {
        if got != j.n() {
            return Err(Error::Dimension {
                expected: j.n(),
                got,
            });
        }
    }
    Ok(())
}

pub fn visa_energy_terms(
    x: &VectorState,
    gamma: &[f64],
    p: f64,
    alpha: f64,
    j: &CouplingMatrix,
) -> Result<VisaEnergyTerms> {
    check_dims(x, gamma, j)?;
    Ok(energy_terms_flat(&x.to_flat(), gamma, p, alpha, j))
}

pub fn visa_energy(
    x: &VectorState,
    gamma: &[f64],
    p: f64,
    alpha: f64,
    j: &CouplingMatrix,
) -> Result<f64> {
    Ok(visa_energy_terms(x, gamma, p, alpha, j)?.total())
}

/// `-∇H` on a flat `3n` state, written into `out`.
pub fn visa_rhs_flat(
    x: &[f64],
    gamma: &[f64],
    p: f64,
    alpha: f64,
    j: &CouplingMatrix,
    out: &mut [f64],
) {
    let n = j.n();
    let (s, m) = if p != 0.0 { moments(x) } else { (0.0, [0.0; 9]) };
    for i in 0..n {
        let xi = [x[3 * i], x[3 * i + 1], x[3 * i + 2]];
        let r2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2];
        let gain = alpha * (gamma[i] - r2);
        let mut acc = [gain * xi[0], gain * xi[1], gain * xi[2]];
        for (k, &w) in j.row(i).iter().enumerate() {
            if w != 0.0 {
                acc[0] += w * x[3 * k];
                acc[1] += w * x[3 * k + 1];
                acc[2] += w * x[3 * k + 2];
            }
        }
        if p != 0.0 {
            for a in 0..3 {
                let mx = m[3 * a] * xi[0] + m[3 * a + 1] * xi[1] + m[3 * a + 2] * xi[2];
                acc[a] -= 2.0 * p * (xi[a] * s - mx);
            }
        }
        out[3 * i..3 * i + 3].copy_from_slice(&acc);
    }
}

/// Negative gradient of [`visa_energy`].
pub fn visa_rhs(
    x: &VectorState,
    gamma: &[f64],
    p: f64,
    alpha: f64,
    j: &CouplingMatrix,
) -> Result<VectorState> {
    check_dims(x, gamma, j)?;
    let flat = x.to_flat();
    let mut out = vec![0.0; flat.len()];
    visa_rhs_flat(&flat, gamma, p, alpha, j, &mut out);
    Ok(VectorState::from_flat(&out))
}

pub(crate) fn initial_vectors(n: usize, cfg: &SolverConfig) -> Vec<f64> {
    let mut rng = rng_from_seed(cfg.seed);
    // the first components are drawn first so they coincide with a CIM start
    let first = uniform_init(&mut rng, n, cfg.init_scale);
    let (second, third) = match cfg.init_mode {
        InitMode::Isotropic => (
            uniform_init(&mut rng, n, cfg.init_scale),
            uniform_init(&mut rng, n, cfg.init_scale),
        ),
        InitMode::Matched => {
            let b = uniform_init(&mut rng, n, cfg.init_scale / 100.0);
            (b.clone(), b)
        }
    };
    (0..n).flat_map(|i| [first[i], second[i], third[i]]).collect()
}

fn readout_energy(j: &CouplingMatrix, x: &[f64]) -> f64 {
    match vector_readout(&VectorState::from_flat(x)) {
        Ok((spins, _)) => energy_unchecked(j, spins.as_slice()),
        Err(_) => f64::NAN,
    }
}

/// State at the end of a VISA integration.
#[derive(Debug, Clone)]
pub struct VisaFinal {
    pub x: VectorState,
    pub gamma: Vec<f64>,
    pub trajectory: Option<super::Trajectory>,
}

/// Integrates VISA with RK4 from a small random start, jointly with the gain
/// feedback, and returns the final vectors and gains.
pub fn visa_integrate(j: &CouplingMatrix, cfg: &SolverConfig) -> Result<VisaFinal> {
    cfg.validate()?;
    let n = j.n();
    let (jd, alpha) = dynamics_coupling(j, cfg);

    let mut state = initial_vectors(n, cfg);
    state.extend(std::iter::repeat_n(cfg.gamma0, n));
    let mut rk = Rk4::new(state.len());
    let (eps, p_rate, feedback) = (cfg.eps, cfg.p_rate, cfg.gain_feedback);

    let field = |t: f64, y: &[f64], dy: &mut [f64]| {
        let (x, gamma) = y.split_at(3 * n);
        let (dx, dgamma) = dy.split_at_mut(3 * n);
        visa_rhs_flat(x, gamma, p_rate * t, alpha, &jd, dx);
        for (i, dg) in dgamma.iter_mut().enumerate() {
            *dg = if feedback {
                let v = &x[3 * i..3 * i + 3];
                eps * (1.0 - (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))
            } else {
                0.0
            };
        }
    };

    let mut recorder = Recorder::new(cfg.trajectory_stride);
    let sample = |t: f64, y: &[f64]| {
        let (x, gamma) = y.split_at(3 * n);
        TrajectorySample {
            t,
            state: x.to_vec(),
            model_energy: energy_terms_flat(x, gamma, p_rate * t, alpha, &jd).total(),
            ising_energy: readout_energy(j, x),
        }
    };
    if recorder.wants(0) {
        recorder.push(sample(0.0, &state));
    }
    for step in 0..cfg.n_steps {
        let t = step as f64 * cfg.dt;
        rk.step(field, &mut state, t, cfg.dt)?;
        let t_next = t + cfg.dt;
        check_bound(&state[..3 * n], cfg.divergence_bound, "VISA amplitude", t_next)?;
        if recorder.wants(step + 1) {
            recorder.push(sample(t_next, &state));
        }
    }
    let gamma = state.split_off(3 * n);
    Ok(VisaFinal {
        x: VectorState::from_flat(&state),
        gamma,
        trajectory: recorder.into_inner(),
    })
}

/// [`visa_integrate`] followed by readout along the dominant axis.
pub fn visa_run(j: &CouplingMatrix, cfg: &SolverConfig) -> Result<RunResult> {
    let started = Instant::now();
    let fin = visa_integrate(j, cfg)?;
    let (spins, axis) = vector_readout(&fin.x)?;
    finish(j, cfg, spins, Some(axis), fin.trajectory, started.elapsed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::mobius_ladder;
    use crate::ising::ising_energy;
    use crate::rng::rng_from_seed;
    use crate::solvers::SolverKind;
    use rand::Rng;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn random_state(rng: &mut crate::rng::Rng, n: usize) -> VectorState {
        VectorState(
            (0..n)
                .map(|_| {
                    [
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ]
                })
                .collect(),
        )
    }

    #[test]
    fn origin_energy_is_gain_term_only() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let t = visa_energy_terms(&VectorState::zeros(8), &[-0.5; 8], 0.7, 4.0, &j).unwrap();
        assert_eq!((t.h1, t.h2, t.h3), (2.0, 0.0, 0.0));
    }

    #[test]
    fn two_spin_minimiser_energy() {
        let mut j = CouplingMatrix::zeros(2);
        j.set(0, 1, -1.0).unwrap();
        let r = FRAC_1_SQRT_2;
        let x = VectorState(vec![[r, -r, 0.0], [-r, r, 0.0]]);
        let t = visa_energy_terms(&x, &[1.0, 1.0], 3.0, 4.0, &j).unwrap();
        assert!(t.h1.abs() < 1e-15);
        assert!(t.h3.abs() < 1e-15);
        assert!((t.h2 + 1.0).abs() < 1e-15);
    }

    #[test]
    fn collinear_states_have_no_penalty() {
        let mut rng = rng_from_seed(8);
        let j = mobius_ladder(8, 0.4).unwrap();
        let axis = [0.3, -0.5, 0.81];
        let x = VectorState(
            (0..8)
                .map(|_| {
                    let a: f64 = rng.random_range(-2.0..2.0);
                    [a * axis[0], a * axis[1], a * axis[2]]
                })
                .collect(),
        );
        let t = visa_energy_terms(&x, &[0.2; 8], 5.0, 4.0, &j).unwrap();
        assert!(t.h3.abs() < 1e-12);
    }

    #[test]
    fn penalty_matches_pairwise_cross_products() {
        let mut rng = rng_from_seed(9);
        let x = random_state(&mut rng, 5);
        let j = CouplingMatrix::zeros(5);
        let t = visa_energy_terms(&x, &[0.0; 5], 0.8, 1.0, &j).unwrap();
        let mut direct = 0.0;
        for a in &x.0 {
            for b in &x.0 {
                let c = [
                    a[1] * b[2] - a[2] * b[1],
                    a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0],
                ];
                direct += c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
            }
        }
        assert!((t.h3 - 0.4 * direct).abs() < 1e-12);
    }

    #[test]
    fn origin_is_fixed_point() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let d = visa_rhs(&VectorState::zeros(8), &[0.3; 8], 1.0, 4.0, &j).unwrap();
        assert!(d.0.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn rhs_matches_finite_differences() {
        let mut rng = rng_from_seed(10);
        let j = mobius_ladder(8, 0.4).unwrap();
        for _ in 0..20 {
            let x = random_state(&mut rng, 8);
            let gamma: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let p = rng.random_range(0.0..2.0);
            let rhs = visa_rhs(&x, &gamma, p, 4.0, &j).unwrap().to_flat();
            let flat = x.to_flat();
            let h = 1e-6;
            for c in 0..flat.len() {
                let mut up = flat.clone();
                let mut dn = flat.clone();
                up[c] += h;
                dn[c] -= h;
                let fd = -(energy_terms_flat(&up, &gamma, p, 4.0, &j).total()
                    - energy_terms_flat(&dn, &gamma, p, 4.0, &j).total())
                    / (2.0 * h);
                let scale = rhs[c].abs().max(1.0);
                assert!((fd - rhs[c]).abs() / scale < 1e-6, "component {c}: {fd} vs {}", rhs[c]);
            }
        }
    }

    #[test]
    fn planar_states_stay_planar_without_penalty() {
        let mut rng = rng_from_seed(12);
        let j = mobius_ladder(8, 0.4).unwrap();
        let x = VectorState(
            (0..8)
                .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0])
                .collect(),
        );
        let d = visa_rhs(&x, &[0.5; 8], 0.0, 4.0, &j).unwrap();
        assert!(d.0.iter().all(|v| v[2] == 0.0));
    }

    #[test]
    fn first_component_embedding_stays_scalar() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let mut cfg = SolverConfig::for_solver(SolverKind::Visa).with_seed(4);
        cfg.p_rate = 0.0;
        cfg.init_mode = InitMode::Matched;
        cfg.init_scale = 0.01;
        // zero the transverse draw by shrinking it below representable noise
        let n = 8;
        let mut state: Vec<f64> = initial_vectors(n, &cfg)
            .chunks_exact(3)
            .flat_map(|c| [c[0], 0.0, 0.0])
            .collect();
        state.extend(std::iter::repeat_n(cfg.gamma0, n));
        let mut rk = Rk4::new(state.len());
        for step in 0..2000 {
            let t = step as f64 * 0.1;
            rk.step(
                |_, y: &[f64], dy: &mut [f64]| {
                    let (x, g) = y.split_at(3 * n);
                    let (dx, dg) = dy.split_at_mut(3 * n);
                    visa_rhs_flat(x, g, 0.0, 4.0, &j, dx);
                    for i in 0..n {
                        let v = &x[3 * i..3 * i + 3];
                        dg[i] = 0.03 * (1.0 - (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]));
                    }
                },
                &mut state,
                t,
                0.1,
            )
            .unwrap();
        }
        for i in 0..n {
            assert_eq!(state[3 * i + 1], 0.0);
            assert_eq!(state[3 * i + 2], 0.0);
        }
        assert!(state[..3 * n].iter().any(|v| v.abs() > 0.5));
    }

    #[test]
    fn matched_start_shares_first_components_with_cim() {
        let mut cfg = SolverConfig::for_solver(SolverKind::Visa).with_seed(21);
        cfg.init_mode = InitMode::Matched;
        let v = initial_vectors(8, &cfg);
        let mut rng = rng_from_seed(21);
        let a = uniform_init(&mut rng, 8, cfg.init_scale);
        for i in 0..8 {
            assert_eq!(v[3 * i], a[i]);
            assert_eq!(v[3 * i + 1], v[3 * i + 2]);
            assert!(v[3 * i + 1].abs() <= 1e-4);
        }
    }

    #[test]
    fn run_converges_to_unit_collinear_spins() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let cfg = SolverConfig::for_solver(SolverKind::Visa).with_seed(5);
        let x = visa_integrate(&j, &cfg).unwrap().x;
        let norms: Vec<f64> =
            x.0.iter().map(|v| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()).collect();
        for &r in &norms {
            assert!((1.0 - r * r).abs() <= 0.05, "norm {r}");
        }
        for (a, ra) in x.0.iter().zip(&norms) {
            for (b, rb) in x.0.iter().zip(&norms) {
                let c = [
                    a[1] * b[2] - a[2] * b[1],
                    a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0],
                ];
                let sin = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt() / (ra * rb);
                assert!(sin <= 0.1, "sin {sin}");
            }
        }
        let r = visa_run(&j, &cfg).unwrap();
        assert_eq!(r.energy, ising_energy(&j, &r.spins).unwrap());
        assert!(r.axis.is_some());
    }
}
