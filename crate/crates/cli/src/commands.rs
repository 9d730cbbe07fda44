use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use spin_anneal::bench::{
    self, linspace_step, long_visa_references, random_instance_solvers, read_reference_file, BenchmarkSpec,
    InstanceFamily, ReferenceMode, SweepFamily, SweepParam, SweepSpec,
};
use spin_anneal::graph::{
    jg_cyclic, mobius_ladder, read_matrix_file, sk_instance, three_regular_instance, write_matrix,
};
use spin_anneal::ising::{brute_force_ground, BRUTE_FORCE_LIMIT};
use spin_anneal::landscape::{
    self, find_cim_critical_points, find_critical_points_with, write_basins_csv, write_critical_csv, LandscapeConfig,
    PhaseLabel, PhaseMap, PointLabel,
};
use spin_anneal::solvers::solve;
use spin_anneal::{CouplingMatrix, Error, Result, SolverConfig, SolverKind};

use crate::args::*;
use crate::config::{apply_overrides, apply_setting, ConfigFile};

/// Everything needed to reproduce a result file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    /// Resolved command, all defaults materialised.
    pub command: Command,
    /// Resolved solver configurations.
    pub solvers: Vec<SolverConfig>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    fn new(command: &Command, solvers: Vec<SolverConfig>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: command.name().to_string(),
            command: command.clone(),
            solvers,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }
}

pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_manifest(manifest: &RunManifest, out: &Path) -> Result<()> {
    let path = sidecar(out, ".manifest.json");
    let w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(w, manifest)?;
    info!("manifest written to {}", path.display());
    Ok(())
}

/// Writes through `emit` to `out`, or to stdout when `out` is `None`.
fn emit_to<F>(out: Option<&Path>, emit: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    match out {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p)?);
            emit(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            emit(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn json_to(out: &mut dyn Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn build_graph(g: &GraphArgs, instance_seed: u64) -> Result<CouplingMatrix> {
    match g.family {
        Family::Mobius => mobius_ladder(g.n, g.j),
        Family::Jg => jg_cyclic(g.n, g.j, g.g, g.k),
        Family::Sk => sk_instance(g.n, instance_seed),
        Family::ThreeRegular => three_regular_instance(g.n, instance_seed),
    }
}

fn parse_solvers(list: &str) -> Result<Vec<SolverKind>> {
    let kinds: Vec<SolverKind> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if kinds.is_empty() {
        return Err(Error::Validation("at least one solver is required".into()));
    }
    Ok(kinds)
}

/// Defaults, then the config-file section, then `--set` overrides.
fn resolve_solver(base: SolverConfig, file: &ConfigFile, overrides: &[String]) -> Result<SolverConfig> {
    let mut cfg = base;
    if let Some(section) = file.solvers.get(&cfg.solver) {
        for (k, v) in section {
            apply_setting(&mut cfg, k, v)?;
        }
    }
    apply_overrides(&mut cfg, overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Resolves the solver list of `command` against `file`.
pub fn resolve_solvers(command: &Command, file: &ConfigFile) -> Result<Vec<SolverConfig>> {
    match command {
        Command::Solve(a) => {
            let kind: SolverKind = a.solver.parse()?;
            let mut overrides: Vec<String> =
                a.schedule.settings().into_iter().map(|(k, v)| format!("{k}={v}")).collect();
            overrides.extend(a.set.iter().cloned());
            Ok(vec![resolve_solver(SolverConfig::for_solver(kind), file, &overrides)?])
        }
        Command::Sweep(a) => parse_solvers(&a.solvers)?
            .into_iter()
            .map(|k| resolve_solver(SolverConfig::for_solver(k), file, &a.set))
            .collect(),
        Command::Bench(a) => {
            let tuned = random_instance_solvers(a.n);
            parse_solvers(&a.solvers)?
                .into_iter()
                .map(|k| {
                    let base = tuned
                        .iter()
                        .find(|c| c.solver == k)
                        .cloned()
                        .unwrap_or_else(|| SolverConfig::for_solver(k));
                    resolve_solver(base, file, &a.set)
                })
                .collect()
        }
        _ => Ok(Vec::new()),
    }
}

pub fn run(command: &Command, solvers: Vec<SolverConfig>) -> Result<()> {
    let mut manifest = RunManifest::new(command, solvers);
    match command {
        Command::Gen(a) => cmd_gen(a, &mut manifest),
        Command::Solve(a) => cmd_solve(a, &mut manifest),
        Command::Sweep(a) => cmd_sweep(a, &mut manifest),
        Command::Bench(a) => cmd_bench(a, &mut manifest),
        Command::Critical(a) => cmd_critical(a, &mut manifest),
        Command::Basins(a) => cmd_basins(a, &mut manifest),
        Command::Phasemap(a) => cmd_phasemap(a, &mut manifest),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn finish(manifest: &mut RunManifest, out: Option<&Path>) -> Result<()> {
    if let Some(p) = out {
        manifest.outputs.insert(0, p.to_path_buf());
        write_manifest(manifest, p)?;
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs, manifest: &mut RunManifest) -> Result<()> {
    let m = build_graph(&a.graph, a.seed)?;
    emit_to(a.out.as_deref(), |w| write_matrix(&m, w))?;
    if let Some(p) = &a.out {
        eprintln!("wrote n = {} with {} edges to {}", m.n(), m.edges().count(), p.display());
    }
    finish(manifest, a.out.as_deref())
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    manifest: &'a RunManifest,
    reference_energy: Option<f64>,
    result: &'a spin_anneal::RunResult,
}

fn cmd_solve(a: &SolveArgs, manifest: &mut RunManifest) -> Result<()> {
    let j = match &a.graph {
        Some(p) => {
            manifest.inputs.push(p.clone());
            read_matrix_file(p)?
        }
        None => build_graph(&a.inline, a.instance_seed)?,
    };
    let mut cfg = manifest.solvers[0].with_seed(a.seed);
    if a.traj.is_some() {
        cfg.trajectory_stride = Some(a.stride);
    }
    let reference = (j.n() <= BRUTE_FORCE_LIMIT)
        .then(|| brute_force_ground(&j).map(|r| r.1))
        .transpose()?;
    let mut result = solve(&j, &cfg)?;
    if let Some(e) = reference {
        result = result.with_reference(e);
    }
    let spins: String = result.spins.as_slice().iter().map(|&s| if s > 0 { '+' } else { '-' }).collect();
    println!("solver {} seed {} energy {:?} spins {spins}", cfg.solver, cfg.seed, result.energy);
    if let Some(e) = reference {
        println!("ground energy {e:?} reached: {}", result.success == Some(true));
    }
    if let (Some(p), Some(t)) = (&a.traj, &result.trajectory) {
        let w = BufWriter::new(File::create(p)?);
        t.write_csv(w)?;
        manifest.outputs.push(p.clone());
    }
    if let Some(p) = &a.out {
        manifest.outputs.push(p.clone());
        if let Some(t) = &a.traj {
            manifest.outputs.push(t.clone());
        }
        manifest.outputs.dedup();
        let mut slim = result.clone();
        slim.trajectory = None;
        let w = BufWriter::new(File::create(p)?);
        serde_json::to_writer_pretty(
            w,
            &SolveOutput {
                manifest,
                reference_energy: reference,
                result: &slim,
            },
        )?;
    }
    Ok(())
}

fn sweep_spec(a: &SweepArgs, solvers: Vec<SolverConfig>) -> Result<SweepSpec> {
    let g = &a.graph;
    let family = match g.family {
        Family::Mobius => SweepFamily::Mobius { n: g.n, j: g.j },
        Family::Jg => SweepFamily::Jg {
            n: g.n,
            k: g.k,
            j: g.j,
            g: g.g,
        },
        other => {
            return Err(Error::Validation(format!(
                "sweeps need a cyclic family (mobius or jg), got {other:?}"
            )))
        }
    };
    let param = match a.param {
        Param::J => SweepParam::J,
        Param::G => SweepParam::G,
    };
    let values = linspace_step(a.from, a.to, a.step)?;
    let reference_energies = match &a.references {
        Some(p) => {
            let map = read_reference_file(p)?;
            Some(
                (0..values.len() as u64)
                    .map(|i| {
                        map.get(&i)
                            .copied()
                            .ok_or_else(|| Error::Validation(format!("reference file has no entry for point {i}")))
                    })
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        None => None,
    };
    Ok(SweepSpec {
        family,
        param,
        values,
        solvers,
        runs_per_point: a.runs,
        base_seed: a.seed,
        cim_pump_follows_j: !a.fixed_pump,
        reference_energies,
    })
}

fn cmd_sweep(a: &SweepArgs, manifest: &mut RunManifest) -> Result<()> {
    let spec = sweep_spec(a, manifest.solvers.clone())?;
    if let Some(p) = &a.references {
        manifest.inputs.push(p.clone());
    }
    let table = bench::sweep(&spec)?;
    emit_to(a.out.as_deref(), |w| match a.format {
        Format::Csv => table.write_csv(w),
        Format::Json => json_to(w, &table),
    })?;
    if let Some(p) = &a.out {
        let markers = sidecar(p, ".markers.csv");
        table.write_markers_csv(BufWriter::new(File::create(&markers)?))?;
        manifest.outputs.push(markers);
    }
    finish(manifest, a.out.as_deref())
}

fn cmd_bench(a: &BenchArgs, manifest: &mut RunManifest) -> Result<()> {
    let families: Vec<InstanceFamily> = a
        .families
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    let reference_mode = match a.reference.as_str() {
        "oracle" => ReferenceMode::Oracle,
        "best_found" | "best-found" => ReferenceMode::BestFound,
        path => {
            manifest.inputs.push(PathBuf::from(path));
            ReferenceMode::File(PathBuf::from(path))
        }
    };
    let spec = BenchmarkSpec {
        families,
        n: a.n,
        instances: a.instances,
        solvers: manifest.solvers.clone(),
        base_seed: a.seed,
        reference_runs: if reference_mode == ReferenceMode::BestFound {
            long_visa_references(a.n, a.reference_runs)
        } else {
            Vec::new()
        },
        reference_mode,
        attempts: a.attempts,
    };
    let report = bench::random_benchmark(&spec)?;
    for s in &report.summary {
        eprintln!(
            "{:>13} {:>6}: mean gap {} hit rate {:.3}",
            s.family.name(),
            s.solver.name(),
            s.mean_gap.map_or("n/a".to_string(), |g| format!("{g:.4}")),
            s.reference_hit_rate
        );
    }
    emit_to(a.out.as_deref(), |w| {
        report.write_json(&mut *w)?;
        writeln!(w)?;
        Ok(())
    })?;
    finish(manifest, a.out.as_deref())
}

fn landscape_graph(g: &GraphArgs) -> Result<CouplingMatrix> {
    match g.family {
        Family::Mobius | Family::Jg => build_graph(g, 0),
        other => Err(Error::Validation(format!(
            "landscape analysis needs a cyclic family (mobius or jg), got {other:?}"
        ))),
    }
}

#[derive(Serialize)]
struct CriticalOutput<'a> {
    search: &'a landscape::CriticalSearch,
    saddle_path_distance: Option<f64>,
}

fn cmd_critical(a: &CriticalArgs, manifest: &mut RunManifest) -> Result<()> {
    let l = &a.landscape;
    let j = landscape_graph(&l.graph)?;
    let cfg = LandscapeConfig {
        start_range: a.start_range,
        ..LandscapeConfig::default()
    };
    let search = match a.model {
        Model::Visa => find_critical_points_with(&j, l.gamma, l.p, l.alpha, a.starts, l.seed, &cfg)?,
        Model::Cim => find_cim_critical_points(&j, l.gamma, l.alpha, a.starts, l.seed, &cfg)?,
    };
    let dd = search.saddle_path_distance().ok();
    let minima: Vec<String> = search
        .minima()
        .take(2)
        .map(|p| format!("{} {:.6}", p.label.name(), p.energy))
        .collect();
    eprintln!(
        "{} critical points ({} orbits, {} failed starts); lowest minima: {}; saddle-path distance: {}",
        search.points.len(),
        search.orbit_count,
        search.failed_starts,
        minima.join(", "),
        dd.map_or("n/a".to_string(), |d| format!("{d:.6}"))
    );
    emit_to(a.out.as_deref(), |w| match a.format {
        Format::Csv => write_critical_csv(&search.points, w),
        Format::Json => json_to(
            w,
            &CriticalOutput {
                search: &search,
                saddle_path_distance: dd,
            },
        ),
    })?;
    finish(manifest, a.out.as_deref())
}

fn cmd_basins(a: &BasinsArgs, manifest: &mut RunManifest) -> Result<()> {
    let l = &a.landscape;
    let j = landscape_graph(&l.graph)?;
    let survey = landscape::basins(&j, l.gamma, l.p, l.alpha, a.starts, l.seed)?;
    eprintln!(
        "S0 {:.3}, S1 {:.3}, other {:.3}, failed descents {}",
        survey.fraction(PointLabel::S0Min),
        survey.fraction(PointLabel::S1Min),
        survey.fraction(PointLabel::OtherMin),
        survey.failures
    );
    emit_to(a.out.as_deref(), |w| match a.format {
        Format::Csv => write_basins_csv(&survey, w),
        Format::Json => json_to(w, &survey),
    })?;
    finish(manifest, a.out.as_deref())
}

fn write_phase_csv(map: &PhaseMap, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "gamma,p,label,lowest_energy,e_s0,e_s1")?;
    let opt = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:?}"));
    for c in &map.cells {
        let label = match c.label {
            PhaseLabel::S0 => "S0",
            PhaseLabel::S1 => "S1",
            PhaseLabel::Other => "other",
        };
        writeln!(
            out,
            "{:?},{:?},{label},{:?},{},{}",
            c.gamma,
            c.p,
            c.lowest_energy,
            opt(c.e_s0),
            opt(c.e_s1)
        )?;
    }
    Ok(())
}

fn cmd_phasemap(a: &PhasemapArgs, manifest: &mut RunManifest) -> Result<()> {
    let j = landscape_graph(&a.graph)?;
    let gammas = linspace_step(a.gamma_from, a.gamma_to, a.gamma_step)?;
    let penalties = linspace_step(a.p_from, a.p_to, a.p_step)?;
    let map = landscape::phase_map(&j, &gammas, &penalties, a.alpha, a.starts, a.seed)?;
    let boundary: Vec<String> = map.boundary.iter().map(|(g, p)| format!("({g:.3}, {p:.3})")).collect();
    eprintln!("S0/S1 boundary: {}", boundary.join(" "));
    emit_to(a.out.as_deref(), |w| match a.format {
        Format::Csv => write_phase_csv(&map, w),
        Format::Json => json_to(w, &map),
    })?;
    finish(manifest, a.out.as_deref())
}

fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let recorded: RunManifest = serde_json::from_reader(File::open(&a.manifest)?)?;
    let mut command = recorded.command;
    if let Some(out) = &a.out {
        let slot = match &mut command {
            Command::Gen(c) => &mut c.out,
            Command::Solve(c) => &mut c.out,
            Command::Sweep(c) => &mut c.out,
            Command::Bench(c) => &mut c.out,
            Command::Critical(c) => &mut c.out,
            Command::Basins(c) => &mut c.out,
            Command::Phasemap(c) => &mut c.out,
            Command::Replay(_) => return Err(Error::Validation("a manifest cannot record a replay".into())),
        };
        *slot = Some(out.clone());
    }
    if matches!(command, Command::Replay(_)) {
        return Err(Error::Validation("a manifest cannot record a replay".into()));
    }
    run(&command, recorded.solvers)
}
