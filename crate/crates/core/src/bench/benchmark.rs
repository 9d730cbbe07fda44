use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::graph::{sk_instance, three_regular_instance, CouplingMatrix};
use crate::ising::{brute_force_ground, BRUTE_FORCE_LIMIT};
use crate::rng::derive_seed;
use crate::solvers::{solve, SolverConfig, SolverKind};

/// Objective convention written into every report.
pub const OBJECTIVE_CONVENTION: &str = "objective = -ising_energy (higher is better)";

/// Solver slot used when deriving instance seeds.
const INSTANCE_STREAM: u64 = 1 << 32;
/// Solver slot used for the extra reference runs.
const REFERENCE_STREAM: u64 = (1 << 32) + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceFamily {
    Sk,
    ThreeRegular,
}

impl InstanceFamily {
    pub fn name(self) -> &'static str {
        match self {
            InstanceFamily::Sk => "sk",
            InstanceFamily::ThreeRegular => "three_regular",
        }
    }

    pub fn generate(self, n: usize, seed: u64) -> Result<CouplingMatrix> {
        match self {
            InstanceFamily::Sk => sk_instance(n, seed),
            InstanceFamily::ThreeRegular => three_regular_instance(n, seed),
        }
    }
}

impl std::str::FromStr for InstanceFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sk" => Ok(InstanceFamily::Sk),
            "three_regular" | "3regular" | "3-regular" => Ok(InstanceFamily::ThreeRegular),
            other => Err(Error::validation(format!("unknown instance family '{other}'"))),
        }
    }
}

/// Where reference energies come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Exhaustive search; only for `n <= 24`.
    Oracle,
    /// Lowest energy found by any configured solver or reference run.
    BestFound,
    /// `instance_id energy` lines.
    File(PathBuf),
}

impl ReferenceMode {
    fn name(&self) -> &'static str {
        match self {
            ReferenceMode::Oracle => "oracle",
            ReferenceMode::BestFound => "best_found",
            ReferenceMode::File(_) => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub families: Vec<InstanceFamily>,
    pub n: usize,
    /// Instances per family.
    pub instances: usize,
    pub solvers: Vec<SolverConfig>,
    pub base_seed: u64,
    pub reference_mode: ReferenceMode,
    /// Each solver keeps the best of this many seeded attempts.
    pub attempts: usize,
    /// Extra runs that only contribute to best-found references.
    pub reference_runs: Vec<SolverConfig>,
}

impl BenchmarkSpec {
    pub fn new(families: Vec<InstanceFamily>, n: usize, instances: usize, solvers: Vec<SolverConfig>) -> Self {
        BenchmarkSpec {
            families,
            n,
            instances,
            solvers,
            base_seed: 0,
            reference_mode: ReferenceMode::BestFound,
            attempts: 1,
            reference_runs: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(!self.families.is_empty(), || "no instance families".to_string())?;
        ensure(self.instances >= 1, || "instances must be at least 1".to_string())?;
        ensure(!self.solvers.is_empty(), || "benchmark needs at least one solver".to_string())?;
        ensure(self.attempts >= 1, || "attempts must be at least 1".to_string())?;
        if self.reference_mode == ReferenceMode::Oracle && self.n > BRUTE_FORCE_LIMIT {
            return Err(Error::TooLarge {
                n: self.n,
                limit: BRUTE_FORCE_LIMIT,
            });
        }
        for cfg in self.solvers.iter().chain(&self.reference_runs) {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// VISA, CIM, MR-CIM and SVL tuned for random instances of size `n`.
///
/// Above 24 spins the dynamics run on the spectrally normalised coupling
/// and the VISA penalty slope shrinks with `n`, which keeps the RK4 step
/// stable at the final penalty.
pub fn random_instance_solvers(n: usize) -> Vec<SolverConfig> {
    let large = n > BRUTE_FORCE_LIMIT;
    let mut visa = SolverConfig::for_solver(SolverKind::Visa);
    if large {
        visa.normalize_coupling = true;
        visa.alpha = 0.5;
        visa.p_rate = 0.04 / n as f64;
    } else {
        visa.n_steps = 2000;
    }
    let mut cim = SolverConfig::for_solver(SolverKind::Cim);
    cim.normalize_coupling = true;
    let mut mrcim = SolverConfig::for_solver(SolverKind::MrCim);
    mrcim.normalize_coupling = true;
    vec![visa, cim, mrcim, SolverConfig::for_solver(SolverKind::Svl)]
}

/// Slower VISA runs used only to sharpen best-found references.
pub fn long_visa_references(n: usize, count: usize) -> Vec<SolverConfig> {
    let mut cfg = random_instance_solvers(n).remove(0);
    cfg.n_steps *= 2;
    cfg.p_rate /= 2.0;
    cfg.eps /= 2.0;
    vec![cfg; count]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: u64,
    pub family: InstanceFamily,
    /// Seed the instance was generated from.
    pub seed: u64,
    pub solver: SolverKind,
    /// `None` when every attempt diverged.
    pub best_energy: Option<f64>,
    pub reference_energy: f64,
    pub objective: Option<f64>,
    pub reference_objective: f64,
    /// `objective / reference_objective`, defined when the reference
    /// objective is positive.
    pub proximity_gap: Option<f64>,
    pub diverged_attempts: usize,
    pub wall_time_ms: f64,
}

/// VISA against the best competing solver on one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityRecord {
    pub instance: u64,
    pub family: InstanceFamily,
    pub competitor: SolverKind,
    pub visa_objective: f64,
    pub competitor_objective: f64,
    pub improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub family: InstanceFamily,
    pub solver: SolverKind,
    pub mean_gap: Option<f64>,
    pub min_gap: Option<f64>,
    /// Fraction of instances where the solver matched the reference energy.
    pub reference_hit_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: u32,
    pub objective: String,
    pub reference_mode: String,
    pub n: usize,
    pub base_seed: u64,
    pub records: Vec<InstanceRecord>,
    pub quality_improvement: Vec<QualityRecord>,
    pub summary: Vec<SolverSummary>,
}

impl BenchmarkReport {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn summary_for(&self, family: InstanceFamily, solver: SolverKind) -> Option<&SolverSummary> {
        self.summary.iter().find(|s| s.family == family && s.solver == solver)
    }
}

/// `(O_visa - O_x) / O_visa`; `None` when `O_visa` is zero.
pub fn quality_improvement(o_visa: f64, o_x: f64) -> Option<f64> {
    (o_visa != 0.0).then(|| (o_visa - o_x) / o_visa)
}

/// Reads `instance_id energy` lines; blank lines and `#` comments are skipped.
pub fn read_reference_file(path: &Path) -> Result<BTreeMap<u64, f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |msg: &str| Error::Parse {
            line: idx + 1,
            msg: msg.to_string(),
        };
        let mut parts = line.split_whitespace();
        let id = parts
            .next()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| parse_err("expected an instance id"))?;
        let e = parts
            .next()
            .and_then(|s| s.parse::<f64>().ok())
            .filter(|e| e.is_finite())
            .ok_or_else(|| parse_err("expected a finite energy"))?;
        if parts.next().is_some() {
            return Err(parse_err("expected two fields"));
        }
        out.insert(id, e);
    }
    Ok(out)
}

struct Attempt {
    energy: Option<f64>,
    millis: f64,
}

fn run_attempt(j: &CouplingMatrix, cfg: &SolverConfig, seed: u64) -> Result<Attempt> {
    let start = Instant::now();
    let energy = match solve(j, &cfg.with_seed(seed)) {
        Ok(r) => Some(r.energy),
        Err(Error::Divergence(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(Attempt {
        energy,
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Generates instances, runs every solver on each and scores the results
/// against the configured reference.
pub fn random_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    spec.validate()?;
    let file_refs = match &spec.reference_mode {
        ReferenceMode::File(p) => Some(read_reference_file(p)?),
        _ => None,
    };

    let mut instances = Vec::new();
    for (fi, &family) in spec.families.iter().enumerate() {
        for k in 0..spec.instances {
            let id = (fi * spec.instances + k) as u64;
            let seed = derive_seed(spec.base_seed, id, INSTANCE_STREAM, 0);
            instances.push((id, family, seed));
        }
    }
    let graphs: Vec<CouplingMatrix> = instances
        .par_iter()
        .map(|&(_, family, seed)| family.generate(spec.n, seed))
        .collect::<Result<_>>()?;

    let tasks: Vec<(usize, usize, u64)> = (0..instances.len())
        .flat_map(|i| (0..spec.solvers.len()).flat_map(move |s| (0..spec.attempts as u64).map(move |a| (i, s, a))))
        .collect();
    let attempts: Vec<Attempt> = tasks
        .par_iter()
        .map(|&(i, s, a)| {
            let cfg = &spec.solvers[s];
            let seed = derive_seed(spec.base_seed, instances[i].0, cfg.solver.id(), a);
            run_attempt(&graphs[i], cfg, seed)
        })
        .collect::<Result<_>>()?;

    let extra: Vec<Option<f64>> = if spec.reference_mode == ReferenceMode::BestFound {
        let jobs: Vec<(usize, usize)> = (0..instances.len())
            .flat_map(|i| (0..spec.reference_runs.len()).map(move |r| (i, r)))
            .collect();
        let energies: Vec<Option<f64>> = jobs
            .par_iter()
            .map(|&(i, r)| {
                let seed = derive_seed(spec.base_seed, instances[i].0, REFERENCE_STREAM, r as u64);
                run_attempt(&graphs[i], &spec.reference_runs[r], seed).map(|a| a.energy)
            })
            .collect::<Result<_>>()?;
        let mut per = vec![None; instances.len()];
        for ((i, _), e) in jobs.into_iter().zip(energies) {
            per[i] = min_opt(per[i], e);
        }
        per
    } else {
        vec![None; instances.len()]
    };

    let per_instance = spec.solvers.len() * spec.attempts;
    let mut records = Vec::new();
    let mut quality = Vec::new();
    for (i, &(id, family, seed)) in instances.iter().enumerate() {
        let chunk = &attempts[i * per_instance..(i + 1) * per_instance];
        let best: Vec<(Option<f64>, usize, f64)> = chunk
            .chunks(spec.attempts)
            .map(|c| {
                let e = c.iter().fold(None, |acc, a| min_opt(acc, a.energy));
                let div = c.iter().filter(|a| a.energy.is_none()).count();
                (e, div, c.iter().map(|a| a.millis).sum())
            })
            .collect();
        let reference = match &spec.reference_mode {
            ReferenceMode::Oracle => brute_force_ground(&graphs[i])?.1,
            ReferenceMode::BestFound => best
                .iter()
                .fold(extra[i], |acc, b| min_opt(acc, b.0))
                .ok_or_else(|| Error::Divergence(format!("every run diverged on instance {id}")))?,
            ReferenceMode::File(_) => *file_refs.as_ref().and_then(|m| m.get(&id)).ok_or_else(|| {
                Error::validation(format!("reference file has no entry for instance {id}"))
            })?,
        };
        let ref_obj = -reference;
        for (cfg, &(energy, diverged, millis)) in spec.solvers.iter().zip(&best) {
            let objective = energy.map(|e| -e);
            records.push(InstanceRecord {
                instance: id,
                family,
                seed,
                solver: cfg.solver,
                best_energy: energy,
                reference_energy: reference,
                objective,
                reference_objective: ref_obj,
                proximity_gap: objective.filter(|_| ref_obj > 0.0).map(|o| o / ref_obj),
                diverged_attempts: diverged,
                wall_time_ms: millis,
            });
        }
        let visa = spec
            .solvers
            .iter()
            .zip(&best)
            .find(|(c, _)| c.solver == SolverKind::Visa)
            .and_then(|(_, b)| b.0);
        let competitor = spec
            .solvers
            .iter()
            .zip(&best)
            .filter(|(c, _)| c.solver != SolverKind::Visa)
            .filter_map(|(c, b)| b.0.map(|e| (c.solver, -e)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let (Some(ev), Some((kind, o_x))) = (visa, competitor) {
            quality.push(QualityRecord {
                instance: id,
                family,
                competitor: kind,
                visa_objective: -ev,
                competitor_objective: o_x,
                improvement: quality_improvement(-ev, o_x),
            });
        }
    }

    let mut summary = Vec::new();
    for &family in &spec.families {
        for cfg in &spec.solvers {
            let rows: Vec<&InstanceRecord> = records
                .iter()
                .filter(|r| r.family == family && r.solver == cfg.solver)
                .collect();
            let gaps: Vec<f64> = rows.iter().filter_map(|r| r.proximity_gap).collect();
            let hits = rows
                .iter()
                .filter(|r| r.best_energy.is_some_and(|e| (e - r.reference_energy).abs() <= super::ENERGY_TOL))
                .count();
            let s = SolverSummary {
                family,
                solver: cfg.solver,
                mean_gap: (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64),
                min_gap: gaps.iter().copied().reduce(f64::min),
                reference_hit_rate: hits as f64 / rows.len() as f64,
            };
            info!(
                "{} {}: mean gap {:?}, hit rate {:.3}",
                family.name(),
                cfg.solver,
                s.mean_gap,
                s.reference_hit_rate
            );
            summary.push(s);
        }
    }

    Ok(BenchmarkReport {
        schema: 1,
        objective: OBJECTIVE_CONVENTION.to_string(),
        reference_mode: spec.reference_mode.name().to_string(),
        n: spec.n,
        base_seed: spec.base_seed,
        records,
        quality_improvement: quality,
        summary,
    })
}

fn min_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}
