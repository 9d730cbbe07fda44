//! Dynamical Ising solvers behind one configuration type.
//!
//! Every solver is a deterministic function of `(J, SolverConfig)`: the
//! config carries the seed, and runs never share state.

mod bfgs;
mod cim;
mod meht;
mod svl;
mod visa;

pub use bfgs::{bfgs_run, relaxation_energy, relaxation_gradient};
pub use cim::{cim_energy, cim_integrate, cim_rhs, cim_run, mr_cim_map, mr_cim_run};
pub use meht::{meht_energy, meht_integrate, meht_rhs, meht_run, MehtParams};
pub use svl::{svl_energy, svl_gradient, svl_integrate, svl_run};
pub use visa::{
    visa_energy, visa_energy_flat, visa_energy_terms, visa_integrate, visa_rhs, visa_rhs_flat, visa_run, VisaEnergyTerms,
    VisaFinal,
};

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dynamics::DEFAULT_DT;
use crate::error::{ensure, Error, Result};
use crate::graph::CouplingMatrix;
use crate::ising::{ising_energy, SpinConfig};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Visa,
    Cim,
    #[serde(rename = "mrcim")]
    MrCim,
    #[serde(rename = "meht")]
    MeHt,
    Svl,
    Bfgs,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Visa,
        SolverKind::Cim,
        SolverKind::MrCim,
        SolverKind::MeHt,
        SolverKind::Svl,
        SolverKind::Bfgs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Visa => "visa",
            SolverKind::Cim => "cim",
            SolverKind::MrCim => "mrcim",
            SolverKind::MeHt => "meht",
            SolverKind::Svl => "svl",
            SolverKind::Bfgs => "bfgs",
        }
    }

    /// Stable numeric id used when deriving per-run seeds.
    pub fn id(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::validation(format!("unknown solver '{s}'")))
    }
}

/// How the VISA vectors are initialised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// All three components uniform in `[-init_scale, init_scale]`.
    Isotropic,
    /// `(a, b, b)` with `a` uniform in `[-init_scale, init_scale]` (the same
    /// draw a CIM run with this seed starts from) and `b` uniform in
    /// `[-init_scale / 100, init_scale / 100]`.
    Matched,
}

/// All schedule and hyperparameter values of a run. Fields that a solver
/// does not use are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub solver: SolverKind,
    pub n_steps: usize,
    pub dt: f64,
    /// Gain feedback rate (VISA) or pump rate (CIM family).
    pub eps: f64,
    /// Initial gain `γ_i(0)` (VISA).
    pub gamma0: f64,
    /// Initial pump `p(0)` (CIM family).
    pub p0: f64,
    /// H1 stiffness (VISA) or coupling strength (CIM, ME-HT, SVL).
    pub alpha: f64,
    /// Divide `alpha` by the largest eigenvalue of the coupling matrix.
    pub alpha_relative: bool,
    /// Slope of the collinearity penalty `P(t) = p_rate * t` (VISA).
    pub p_rate: f64,
    /// MR-CIM pull strength in (0, 1).
    pub delta: f64,
    pub mass: f64,
    pub damping: f64,
    pub beta0: f64,
    /// Langevin noise scale (SVL).
    pub sigma: f64,
    /// Anneal horizon `T`; defaults to `n_steps * dt`.
    pub horizon: Option<f64>,
    pub seed: u64,
    pub init_scale: f64,
    pub init_mode: InitMode,
    /// Run aborts once any amplitude exceeds this.
    pub divergence_bound: f64,
    /// MR-CIM skips the pull below this amplitude.
    pub amplitude_floor: f64,
    /// ME-HT amplitude clipping to `[-1, 1]`.
    pub clip: bool,
    /// VISA gain feedback; when off `γ` stays at `gamma0`.
    pub gain_feedback: bool,
    /// Integrate with `J / ρ(J)` (spectral radius) instead of `J`. Energies
    /// and spins are always reported against the original matrix.
    pub normalize_coupling: bool,
    /// Record every `stride`-th step.
    pub trajectory_stride: Option<usize>,
    /// BFGS restarts after a line-search failure.
    pub max_restarts: usize,
}

impl SolverConfig {
    /// Defaults for `kind`, taken from the published figure parameters where
    /// they exist.
    pub fn for_solver(kind: SolverKind) -> Self {
        let base = SolverConfig {
            solver: kind,
            n_steps: 3000,
            dt: DEFAULT_DT,
            eps: 0.03,
            gamma0: -0.5,
            p0: -1.0,
            alpha: 4.0,
            alpha_relative: false,
            p_rate: 0.005,
            delta: 0.1,
            mass: 1.0,
            damping: 0.99,
            beta0: 1.5,
            sigma: 0.1,
            horizon: None,
            seed: 0,
            init_scale: 0.01,
            init_mode: InitMode::Isotropic,
            divergence_bound: 1e3,
            amplitude_floor: 1e-12,
            clip: true,
            gain_feedback: true,
            normalize_coupling: false,
            trajectory_stride: None,
            max_restarts: 5,
        };
        match kind {
            SolverKind::Visa => base,
            SolverKind::Cim | SolverKind::MrCim => SolverConfig {
                n_steps: 10_000,
                eps: 0.003,
                alpha: 1.0,
                ..base
            },
            SolverKind::MeHt => SolverConfig {
                n_steps: 2000,
                alpha: 2.5,
                alpha_relative: true,
                ..base
            },
            SolverKind::Svl => SolverConfig {
                n_steps: 1000,
                alpha: 1.0,
                alpha_relative: true,
                ..base
            },
            SolverKind::Bfgs => SolverConfig {
                n_steps: 1000,
                alpha: 1.0,
                ..base
            },
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SolverConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(self.n_steps as f64 * self.dt)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.dt > 0.0 && self.dt.is_finite(), || format!("dt must be positive, got {}", self.dt))?;
        ensure(self.n_steps > 0, || "n_steps must be positive".to_string())?;
        ensure(self.sigma >= 0.0, || format!("sigma must be non-negative, got {}", self.sigma))?;
        ensure(self.init_scale >= 0.0, || "init_scale must be non-negative".to_string())?;
        ensure(self.horizon() > 0.0, || "anneal horizon must be positive".to_string())?;
        ensure(self.trajectory_stride != Some(0), || "trajectory stride must be positive".to_string())?;
        match self.solver {
            SolverKind::Visa => {
                ensure(self.alpha > 0.0, || format!("VISA alpha must be positive, got {}", self.alpha))?;
                ensure(self.eps >= 0.0, || "eps must be non-negative".to_string())?;
            }
            SolverKind::MrCim => ensure(self.delta > 0.0 && self.delta < 1.0, || {
                format!("MR-CIM delta must lie in (0, 1), got {}", self.delta)
            })?,
            SolverKind::MeHt | SolverKind::Svl => {
                ensure(self.mass > 0.0, || format!("mass must be positive, got {}", self.mass))?;
                ensure(self.damping >= 0.0, || "damping must be non-negative".to_string())?;
            }
            SolverKind::Cim | SolverKind::Bfgs => {}
        }
        Ok(())
    }
}

/// Sampled states along a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub stride: usize,
    pub samples: Vec<TrajectorySample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    /// Solver state (VISA: flat `3n` vector; scalar solvers: amplitudes or
    /// angles).
    pub state: Vec<f64>,
    /// The solver's own energy function at this instant.
    pub model_energy: f64,
    /// Ising energy of the spins read out at this instant.
    pub ising_energy: f64,
}

impl Trajectory {
    fn new(stride: usize) -> Self {
        Self {
            stride,
            samples: Vec::new(),
        }
    }

    /// Long-format CSV: `t,component,value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,component,value")?;
        for s in &self.samples {
            for (c, v) in s.state.iter().enumerate() {
                writeln!(out, "{:?},{c},{v:?}", s.t)?;
            }
        }
        Ok(())
    }
}

mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub solver: SolverKind,
    pub seed: u64,
    pub spins: SpinConfig,
    /// Always `ising_energy(J, spins)`.
    pub energy: f64,
    /// VISA readout axis.
    pub axis: Option<[f64; 3]>,
    pub trajectory: Option<Trajectory>,
    pub success: Option<bool>,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

impl RunResult {
    /// Marks the run against a reference energy (match within `1e-9`).
    pub fn with_reference(mut self, reference_energy: f64) -> Self {
        self.success = Some((self.energy - reference_energy).abs() <= 1e-9);
        self
    }
}

/// Runs the solver selected by `cfg.solver`.
pub fn solve(j: &CouplingMatrix, cfg: &SolverConfig) -> Result<RunResult> {
    match cfg.solver {
        SolverKind::Visa => visa_run(j, cfg),
        SolverKind::Cim => cim_run(j, cfg),
        SolverKind::MrCim => mr_cim_run(j, cfg),
        SolverKind::MeHt => meht_run(j, cfg),
        SolverKind::Svl => svl_run(j, cfg),
        SolverKind::Bfgs => bfgs_run(j, cfg),
    }
}

/// Coupling matrix the dynamics integrate with, and the effective coupling
/// strength `alpha`.
pub(crate) fn dynamics_coupling(j: &CouplingMatrix, cfg: &SolverConfig) -> (CouplingMatrix, f64) {
    let jd = if cfg.normalize_coupling {
        let rho = j.spectral_radius();
        if rho > 0.0 {
            j.scaled(1.0 / rho)
        } else {
            j.clone()
        }
    } else {
        j.clone()
    };
    let alpha = if cfg.alpha_relative {
        let lmax = jd.max_eigenvalue();
        if lmax > 0.0 {
            cfg.alpha / lmax
        } else {
            cfg.alpha
        }
    } else {
        cfg.alpha
    };
    (jd, alpha)
}

pub(crate) fn uniform_init(rng: &mut Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len)
        .map(|_| if scale > 0.0 { rng.random_range(-scale..=scale) } else { 0.0 })
        .collect()
}

/// `y_i = Σ_j J_ij x_j`.
#[inline]
pub(crate) fn couple(j: &CouplingMatrix, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = j.row(i).iter().zip(x).map(|(&w, &v)| w * v).sum();
    }
}

pub(crate) fn check_bound(values: &[f64], bound: f64, what: &str, t: f64) -> Result<()> {
    match values.iter().position(|v| v.abs() > bound) {
        None => Ok(()),
        Some(i) => Err(Error::Divergence(format!(
            "{what} component {i} exceeded {bound} at t = {t:.3}"
        ))),
    }
}

pub(crate) fn finish(
    j: &CouplingMatrix,
    cfg: &SolverConfig,
    spins: SpinConfig,
    axis: Option<[f64; 3]>,
    trajectory: Option<Trajectory>,
    wall_time: Duration,
) -> Result<RunResult> {
    let energy = ising_energy(j, &spins)?;
    Ok(RunResult {
        solver: cfg.solver,
        seed: cfg.seed,
        spins,
        energy,
        axis,
        trajectory,
        success: None,
        wall_time,
    })
}

/// Collects samples at a fixed stride.
pub(crate) struct Recorder {
    trajectory: Option<Trajectory>,
}

impl Recorder {
    pub(crate) fn new(stride: Option<usize>) -> Self {
        Self {
            trajectory: stride.map(Trajectory::new),
        }
    }

    #[inline]
    pub(crate) fn wants(&self, step: usize) -> bool {
        matches!(&self.trajectory, Some(t) if step % t.stride == 0)
    }

    pub(crate) fn push(&mut self, sample: TrajectorySample) {
        if let Some(t) = self.trajectory.as_mut() {
            t.samples.push(sample);
        }
    }

    pub(crate) fn into_inner(self) -> Option<Trajectory> {
        self.trajectory
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{mobius_ladder, sk_instance};

    #[test]
    fn kind_names_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
        assert!("quantum".parse::<SolverKind>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = SolverConfig::for_solver(SolverKind::MrCim);
        assert!(cfg.validate().is_ok());
        cfg.delta = 1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::for_solver(SolverKind::Visa);
        cfg.dt = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SolverConfig::for_solver(SolverKind::Svl);
        cfg.sigma = -0.1;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn every_solver_is_deterministic_and_consistent() {
        let j = mobius_ladder(8, 0.4).unwrap();
        for kind in SolverKind::ALL {
            let mut cfg = SolverConfig::for_solver(kind).with_seed(17);
            cfg.n_steps = cfg.n_steps.min(1500);
            let a = solve(&j, &cfg).unwrap();
            let b = solve(&j, &cfg).unwrap();
            assert_eq!(a.spins, b.spins, "{kind}");
            assert_eq!(a.energy, ising_energy(&j, &a.spins).unwrap(), "{kind}");
        }
    }

    #[test]
    fn normalised_coupling_reports_original_energy() {
        let j = sk_instance(12, 3).unwrap();
        let mut cfg = SolverConfig::for_solver(SolverKind::Cim).with_seed(2);
        cfg.normalize_coupling = true;
        cfg.n_steps = 2000;
        let r = solve(&j, &cfg).unwrap();
        assert_eq!(r.energy, ising_energy(&j, &r.spins).unwrap());
    }

    #[test]
    fn reference_marks_success() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let r = solve(&j, &SolverConfig::for_solver(SolverKind::Visa).with_seed(1)).unwrap();
        let e = r.energy;
        assert_eq!(r.clone().with_reference(e).success, Some(true));
        assert_eq!(r.with_reference(e - 1.0).success, Some(false));
    }

    #[test]
    fn trajectory_csv_layout() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let mut cfg = SolverConfig::for_solver(SolverKind::Visa).with_seed(3);
        cfg.n_steps = 100;
        cfg.trajectory_stride = Some(10);
        let r = solve(&j, &cfg).unwrap();
        let traj = r.trajectory.unwrap();
        assert_eq!(traj.samples.len(), 11);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,component,value"));
        assert_eq!(text.lines().count(), 1 + 11 * 24);
    }
}
