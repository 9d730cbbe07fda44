//! Seeded experiment harness: ground-state probabilities, parameter sweeps
//! and random-instance benchmarks.
//!
//! Every run draws its seed from [`derive_seed`] keyed by
//! `(base_seed, instance, solver, run)`, so results do not depend on the
//! number of worker threads or on scheduling.

mod benchmark;

use std::io::Write;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::graph::{jg_boundaries, jg_cyclic, mobius_ladder, mobius_thresholds, CouplingMatrix};
use crate::ising::{brute_force_ground, BRUTE_FORCE_LIMIT};
use crate::rng::derive_seed;
use crate::solvers::{solve, SolverConfig, SolverKind};

pub use benchmark::{
    quality_improvement, random_benchmark, random_instance_solvers, long_visa_references, read_reference_file, BenchmarkReport, BenchmarkSpec,
    InstanceFamily, InstanceRecord, QualityRecord, ReferenceMode, SolverSummary,
};

/// Energies closer than this count as equal.
pub const ENERGY_TOL: f64 = 1e-9;

/// Outcome of repeated seeded runs against a reference energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStateStats {
    pub successes: usize,
    pub runs: usize,
    /// Runs stopped by the divergence guard; they count as failures.
    pub diverged: usize,
}

impl GroundStateStats {
    pub fn p_gs(&self) -> f64 {
        self.successes as f64 / self.runs as f64
    }
}

/// Runs `cfg` `runs` times and counts final Ising energies equal to
/// `reference_energy`. Run `r` uses seed
/// `derive_seed(base_seed, instance, solver id, r)`.
pub fn ground_state_stats(
    j: &CouplingMatrix,
    cfg: &SolverConfig,
    runs: usize,
    reference_energy: f64,
    base_seed: u64,
    instance: u64,
) -> Result<GroundStateStats> {
    ensure(runs >= 1, || "runs must be at least 1".to_string())?;
    cfg.validate()?;
    let outcomes: Vec<Result<Option<bool>>> = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let seed = derive_seed(base_seed, instance, cfg.solver.id(), r);
            match solve(j, &cfg.with_seed(seed)) {
                Ok(res) => Ok(Some((res.energy - reference_energy).abs() <= ENERGY_TOL)),
                Err(Error::Divergence(msg)) => {
                    debug!("{} run {r} diverged: {msg}", cfg.solver);
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut stats = GroundStateStats {
        successes: 0,
        runs,
        diverged: 0,
    };
    for o in outcomes {
        match o? {
            Some(true) => stats.successes += 1,
            Some(false) => {}
            None => stats.diverged += 1,
        }
    }
    Ok(stats)
}

/// Fraction of `runs` seeded runs that reach `reference_energy`.
pub fn ground_state_probability(
    j: &CouplingMatrix,
    cfg: &SolverConfig,
    runs: usize,
    reference_energy: f64,
    base_seed: u64,
) -> Result<f64> {
    Ok(ground_state_stats(j, cfg, runs, reference_energy, base_seed, 0)?.p_gs())
}

/// Graph family of a sweep, with the parameter values held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SweepFamily {
    Mobius { n: usize, j: f64 },
    Jg { n: usize, k: usize, j: f64, g: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    J,
    G,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::J => "J",
            SweepParam::G => "G",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub family: SweepFamily,
    pub param: SweepParam,
    pub values: Vec<f64>,
    pub solvers: Vec<SolverConfig>,
    pub runs_per_point: usize,
    pub base_seed: u64,
    /// Set the CIM and MR-CIM initial pump to `J - 2` at every grid point.
    pub cim_pump_follows_j: bool,
    /// Reference energy per grid point; required above the exhaustive-search
    /// limit.
    pub reference_energies: Option<Vec<f64>>,
}

impl SweepSpec {
    pub fn new(family: SweepFamily, param: SweepParam, values: Vec<f64>, solvers: Vec<SolverConfig>) -> Self {
        SweepSpec {
            family,
            param,
            values,
            solvers,
            runs_per_point: 1000,
            base_seed: 0,
            cim_pump_follows_j: true,
            reference_energies: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.values.is_empty(), || "sweep grid is empty".to_string())?;
        ensure(!self.solvers.is_empty(), || "sweep needs at least one solver".to_string())?;
        ensure(self.runs_per_point >= 1, || "runs per point must be at least 1".to_string())?;
        ensure(self.values.iter().all(|v| v.is_finite()), || "sweep values must be finite".to_string())?;
        if let SweepFamily::Mobius { .. } = self.family {
            ensure(self.param == SweepParam::J, || "a Möbius ladder sweep can only vary J".to_string())?;
        }
        if let Some(r) = &self.reference_energies {
            ensure(r.len() == self.values.len(), || {
                format!("{} reference energies for {} grid points", r.len(), self.values.len())
            })?;
        }
        for cfg in &self.solvers {
            cfg.validate()?;
        }
        Ok(())
    }

    /// `(J, G)` at a grid value; `G` is 0 for Möbius ladders.
    fn couplings(&self, value: f64) -> (f64, f64) {
        match (&self.family, self.param) {
            (SweepFamily::Mobius { .. }, _) => (value, 0.0),
            (SweepFamily::Jg { g, .. }, SweepParam::J) => (value, *g),
            (SweepFamily::Jg { j, .. }, SweepParam::G) => (*j, value),
        }
    }

    pub fn graph(&self, value: f64) -> Result<CouplingMatrix> {
        let (j, g) = self.couplings(value);
        match self.family {
            SweepFamily::Mobius { n, .. } => mobius_ladder(n, j),
            SweepFamily::Jg { n, k, .. } => jg_cyclic(n, j, g, k),
        }
    }

    /// Analytic threshold lines that fall inside the swept range.
    pub fn markers(&self) -> Result<Vec<SweepMarker>> {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut out = Vec::new();
        match self.family {
            SweepFamily::Mobius { n, .. } => {
                if n % 4 == 0 {
                    let t = mobius_thresholds(n)?;
                    out.push(SweepMarker { name: "J_e".into(), kind: "eigenvalue".into(), value: t.j_e });
                    out.push(SweepMarker { name: "J_crit".into(), kind: "energy".into(), value: t.j_crit });
                }
            }
            SweepFamily::Jg { k, j, g, .. } => {
                if let Ok(lines) = jg_boundaries(k) {
                    for line in lines {
                        let at = match self.param {
                            SweepParam::J => line.j_at(g),
                            SweepParam::G => line.g_at(j),
                        };
                        if let Some(v) = at {
                            out.push(SweepMarker {
                                name: format!("S{}/S{}", line.between.0, line.between.1),
                                kind: format!("{:?}", line.kind).to_lowercase(),
                                value: v,
                            });
                        }
                    }
                }
            }
        }
        out.retain(|m| m.value >= lo && m.value <= hi);
        Ok(out)
    }
}

/// An analytic threshold drawn on top of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMarker {
    pub name: String,
    /// `energy` for a ground-state change, `eigenvalue` for a change of the
    /// leading eigenvector.
    pub kind: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub solver: SolverKind,
    pub p_gs: f64,
    pub runs: usize,
    pub reference_energy: f64,
    pub diverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    pub markers: Vec<SweepMarker>,
}

impl SweepTable {
    /// `param,solver,p_gs,runs,reference_energy` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "param,solver,p_gs,runs,reference_energy")?;
        for r in &self.rows {
            writeln!(out, "{:?},{},{:?},{},{:?}", r.param, r.solver, r.p_gs, r.runs, r.reference_energy)?;
        }
        Ok(())
    }

    /// `marker,kind,value` rows for the threshold lines.
    pub fn write_markers_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "marker,kind,value")?;
        for m in &self.markers {
            writeln!(out, "{},{},{:?}", m.name, m.kind, m.value)?;
        }
        Ok(())
    }

    pub fn get(&self, param: f64, solver: SolverKind) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.param == param && r.solver == solver)
    }
}

/// Ground-state probability of every solver at every grid point.
pub fn sweep(spec: &SweepSpec) -> Result<SweepTable> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.values.len() * spec.solvers.len());
    for (idx, &value) in spec.values.iter().enumerate() {
        let j = spec.graph(value)?;
        let reference = match &spec.reference_energies {
            Some(r) => r[idx],
            None if j.n() <= BRUTE_FORCE_LIMIT => brute_force_ground(&j)?.1,
            None => {
                return Err(Error::TooLarge {
                    n: j.n(),
                    limit: BRUTE_FORCE_LIMIT,
                })
            }
        };
        let (jv, _) = spec.couplings(value);
        for cfg in &spec.solvers {
            let mut cfg = cfg.clone();
            if spec.cim_pump_follows_j && matches!(cfg.solver, SolverKind::Cim | SolverKind::MrCim) {
                cfg.p0 = jv - 2.0;
            }
            let stats = ground_state_stats(&j, &cfg, spec.runs_per_point, reference, spec.base_seed, idx as u64)?;
            info!(
                "{} = {value}: {} p_gs = {:.3} ({} diverged)",
                spec.param.name(),
                cfg.solver,
                stats.p_gs(),
                stats.diverged
            );
            rows.push(SweepRow {
                param: value,
                solver: cfg.solver,
                p_gs: stats.p_gs(),
                runs: stats.runs,
                reference_energy: reference,
                diverged: stats.diverged,
            });
        }
    }
    Ok(SweepTable {
        param: spec.param,
        rows,
        markers: spec.markers()?,
    })
}

/// Evenly spaced grid `from, from + step, ...` up to `to` inclusive; the last
/// point snaps to `to` when within half a step of rounding.
pub fn linspace_step(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    ensure(step > 0.0 && step.is_finite(), || format!("step must be positive, got {step}"))?;
    ensure(to >= from, || format!("empty range [{from}, {to}]"))?;
    let count = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| from + k as f64 * step).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::mobius_ladder;

    #[test]
    fn probability_is_seed_stable() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let mut cfg = SolverConfig::for_solver(SolverKind::Bfgs);
        cfg.n_steps = 200;
        let a = ground_state_probability(&j, &cfg, 50, -6.4, 11).unwrap();
        let b = ground_state_probability(&j, &cfg, 50, -6.4, 11).unwrap();
        assert_eq!(a, b);
        assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn unreachable_reference_gives_zero() {
        let j = mobius_ladder(8, 0.4).unwrap();
        let cfg = SolverConfig::for_solver(SolverKind::Bfgs);
        assert_eq!(ground_state_probability(&j, &cfg, 20, -100.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn empty_solver_list_is_rejected() {
        let spec = SweepSpec::new(SweepFamily::Mobius { n: 8, j: 0.4 }, SweepParam::J, vec![0.4], vec![]);
        assert!(matches!(sweep(&spec), Err(Error::Validation(_))));
    }

    #[test]
    fn mobius_markers_are_the_thresholds() {
        let spec = SweepSpec::new(
            SweepFamily::Mobius { n: 8, j: 0.0 },
            SweepParam::J,
            linspace_step(0.1, 0.6, 0.05).unwrap(),
            vec![SolverConfig::for_solver(SolverKind::Visa)],
        );
        let m = spec.markers().unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].value, 1.0 - (std::f64::consts::PI / 4.0).cos());
        assert_eq!(m[1].value, 0.5);
    }

    #[test]
    fn jg_markers_follow_the_swept_parameter() {
        let spec = SweepSpec::new(
            SweepFamily::Jg { n: 8, k: 2, j: 0.0, g: 0.5 },
            SweepParam::J,
            linspace_step(-0.5, 0.5, 0.05).unwrap(),
            vec![SolverConfig::for_solver(SolverKind::Visa)],
        );
        let lines = jg_boundaries(2).unwrap();
        for m in spec.markers().unwrap() {
            assert!(lines.iter().any(|l| l.residual(m.value, 0.5).abs() < 1e-12));
        }
    }

    #[test]
    fn grid_includes_both_ends() {
        let g = linspace_step(0.1, 0.6, 0.05).unwrap();
        assert_eq!(g.len(), 11);
        assert!((g[10] - 0.6).abs() < 1e-12);
    }
}
