use spin_anneal::bench::{
    ground_state_probability, linspace_step, quality_improvement, random_benchmark, sweep, BenchmarkSpec,
    InstanceFamily, ReferenceMode, SweepFamily, SweepParam, SweepSpec,
};
use spin_anneal::graph::{jg_boundaries, mobius_ladder};
use spin_anneal::landscape::{basins, find_critical_points, PointLabel};
use spin_anneal::{SolverConfig, SolverKind};

#[test]
fn unfrustrated_ladder_is_always_solved() {
    // J = 0 leaves an even antiferromagnetic ring
    let j = mobius_ladder(8, 0.0).unwrap();
    let mut cfg = SolverConfig::for_solver(SolverKind::Cim);
    cfg.p0 = -2.0;
    assert_eq!(ground_state_probability(&j, &cfg, 50, -8.0, 4).unwrap(), 1.0);
}

#[test]
fn sweep_rerun_is_identical() {
    let spec = SweepSpec {
        runs_per_point: 30,
        base_seed: 21,
        ..SweepSpec::new(
            SweepFamily::Mobius { n: 8, j: 0.4 },
            SweepParam::J,
            linspace_step(0.1, 0.6, 0.25).unwrap(),
            vec![SolverConfig::for_solver(SolverKind::Visa), SolverConfig::for_solver(SolverKind::Svl)],
        )
    };
    let (a, b) = (sweep(&spec).unwrap(), sweep(&spec).unwrap());
    assert_eq!(a, b);
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 1 + 3 * 2);
}

#[test]
fn jg_sweep_markers_lie_on_boundaries() {
    let spec = SweepSpec::new(
        SweepFamily::Jg { n: 8, k: 2, j: 0.0, g: 0.5 },
        SweepParam::J,
        linspace_step(-0.5, 0.5, 0.1).unwrap(),
        vec![SolverConfig::for_solver(SolverKind::Cim)],
    );
    let lines = jg_boundaries(2).unwrap();
    let markers = spec.markers().unwrap();
    assert!(!markers.is_empty());
    for m in markers {
        assert!((-0.5..=0.5).contains(&m.value));
        assert!(lines.iter().any(|l| l.residual(m.value, 0.5).abs() < 1e-12), "{m:?}");
    }
}

#[test]
fn oracle_gap_is_one_exactly_at_the_optimum() {
    let mut spec = BenchmarkSpec::new(
        vec![InstanceFamily::Sk],
        12,
        6,
        vec![SolverConfig::for_solver(SolverKind::Cim), SolverConfig::for_solver(SolverKind::Bfgs)],
    );
    spec.reference_mode = ReferenceMode::Oracle;
    spec.base_seed = 3;
    let report = random_benchmark(&spec).unwrap();
    assert_eq!(report.schema, 1);
    assert_eq!(report.records.len(), 12);
    for r in &report.records {
        let gap = r.proximity_gap.unwrap();
        assert!(gap <= 1.0 + 1e-12);
        let optimal = (r.best_energy.unwrap() - r.reference_energy).abs() <= 1e-9;
        assert_eq!(optimal, (gap - 1.0).abs() <= 1e-12);
    }
    // no VISA configured, so no improvement statistic
    assert!(report.quality_improvement.is_empty());
}

#[test]
fn quality_improvement_definition() {
    assert!((quality_improvement(10.0, 9.0).unwrap() - 0.1).abs() < 1e-15);
    assert_eq!(quality_improvement(3.0, 3.0), Some(0.0));
    assert!(quality_improvement(3.0, 4.0).unwrap() < 0.0);
}

#[test]
fn equal_energy_minima_at_the_boundary_point() {
    let j = mobius_ladder(8, 0.4).unwrap();
    let search = find_critical_points(&j, -0.087, 0.32, 1.0, 300, 5).unwrap();
    let s0 = search.lowest(PointLabel::S0Min).expect("S0 minimum");
    let s1 = search.lowest(PointLabel::S1Min).expect("S1 minimum");
    assert!((s0.energy - s1.energy).abs() < 0.01, "{} vs {}", s0.energy, s1.energy);
    assert!(search.saddle_path_distance().unwrap() > 0.0);
}

#[test]
fn basin_survey_accounts_for_every_start() {
    let j = mobius_ladder(8, 0.4).unwrap();
    let survey = basins(&j, 0.25, 0.5, 1.0, 120, 6).unwrap();
    assert_eq!(survey.points.len() + survey.failures, 120);
    let total: f64 = [PointLabel::S0Min, PointLabel::S1Min, PointLabel::OtherMin]
        .iter()
        .map(|&l| survey.fraction(l))
        .sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(survey.points.windows(2).all(|w| w[0].index < w[1].index));
}
