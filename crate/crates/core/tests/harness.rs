use blockprior::harness::emit::{format_float, gray, sidecar_path, SWEEP_HEADER};
use blockprior::harness::sweep::{crossing, Series};
use blockprior::harness::{
    emit, read_sweep_csv, render, run, run_phase_transition, run_sensitivity_table, run_weights_table, to_csv,
    ExperimentConfig, Format, Grid, Mode, PartitionSpec, Report,
};
use blockprior::Error;

fn heatmap(m: Vec<f64>, s: Vec<f64>, trials: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(Mode::Heatmap);
    c.n = Some(40);
    c.q = Some(10);
    c.m_grid = Some(Grid::List(m));
    c.s_grid = Some(Grid::List(s));
    c.trials = trials;
    c.seed = 11;
    c
}

fn transition() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(Mode::TransitionCurve);
    c.n = Some(80);
    c.q = Some(20);
    c.partition = Some(PartitionSpec::Sizes { sizes: vec![10, 10], active: vec![5, 1] });
    c.m_grid = Some(Grid::Range { start: 20.0, stop: 80.0, step: 20.0 });
    c.trials = 4;
    c.seed = 3;
    c
}

#[test]
fn extreme_measurement_counts() {
    let r = run_phase_transition(&heatmap(vec![1.0, 40.0], vec![2.0], 5)).unwrap();
    assert_eq!(r.cells.len(), 2);
    assert_eq!(r.cells[0].rate(), 0.0);
    assert_eq!(r.cells[1].rate(), 1.0);
}

#[test]
fn empty_sweep_is_header_only() {
    let r = run_phase_transition(&heatmap(vec![10.0], vec![], 3)).unwrap();
    assert!(r.cells.is_empty());
    let csv = to_csv(&Report::Sweep(r)).unwrap();
    assert_eq!(csv.trim_end(), SWEEP_HEADER.join(","));
}

#[test]
fn csv_round_trip_is_exact() {
    let r = run_phase_transition(&transition()).unwrap();
    let csv = to_csv(&Report::Sweep(r.clone())).unwrap();
    assert_eq!(read_sweep_csv(&csv).unwrap(), r.cells);
    for x in [0.1, 1.0 / 3.0, 1e-300, 12345.678901234567, f64::MIN_POSITIVE] {
        assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
    }
}

#[test]
fn transition_has_both_series_on_the_same_grid() {
    let r = run_phase_transition(&transition()).unwrap();
    let unit: Vec<usize> = r.cells.iter().filter(|c| c.series == Series::Unit).map(|c| c.m).collect();
    let opt: Vec<usize> = r.cells.iter().filter(|c| c.series == Series::Optimal).map(|c| c.m).collect();
    assert_eq!(unit, vec![20, 40, 60, 80]);
    assert_eq!(unit, opt);
    assert_eq!(r.set_weights.len(), 2);
    assert_eq!(r.set_weights.iter().cloned().fold(0.0, f64::max), 1.0);
    let last: Vec<_> = r.cells.iter().filter(|c| c.m == 80).collect();
    assert!(last.iter().all(|c| c.rate() == 1.0));
}

#[test]
fn reruns_are_byte_identical() {
    let config = transition();
    let a = to_csv(&Report::Sweep(run_phase_transition(&config).unwrap())).unwrap();
    let b = to_csv(&Report::Sweep(run_phase_transition(&config).unwrap())).unwrap();
    assert_eq!(a, b);
    let mut other = config.clone();
    other.seed += 1;
    let c = to_csv(&Report::Sweep(run_phase_transition(&other).unwrap())).unwrap();
    assert_eq!(a.lines().next(), c.lines().next());
}

#[test]
fn emit_writes_csv_sidecar_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let report = Report::Sweep(run_phase_transition(&transition()).unwrap());
    let path = dir.path().join("curve.csv");
    emit(&report, Format::Csv, &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), to_csv(&report).unwrap());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(meta["metadata"]["seed"], 3);
    let svg_path = dir.path().join("curve.svg");
    emit(&report, Format::Svg, &svg_path).unwrap();
    let svg = std::fs::read_to_string(&svg_path).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn heatmap_fills_follow_rate() {
    assert_eq!(gray(0.0), "rgb(0,0,0)");
    assert_eq!(gray(1.0), "rgb(255,255,255)");
    assert_eq!(gray(0.5), "rgb(128,128,128)");
    let r = run_phase_transition(&heatmap(vec![1.0, 40.0], vec![2.0], 2)).unwrap();
    let svg = render(&Report::Sweep(r), Format::Svg).unwrap();
    assert!(svg.contains("rgb(0,0,0)") && svg.contains("rgb(255,255,255)"));
}

#[test]
fn crossing_interpolates() {
    assert_eq!(crossing(&[(10.0, 0.0), (20.0, 1.0)]), Some(15.0));
    assert_eq!(crossing(&[(10.0, 0.2), (20.0, 0.4), (30.0, 0.6)]), Some(25.0));
    assert_eq!(crossing(&[(10.0, 0.0), (20.0, 0.3)]), None);
}

#[test]
fn weights_table_rows() {
    let t = run_weights_table(&[0.0, 0.1, 0.5, 0.9, 1.0], &[10]);
    assert!(t.row(10, 0.0).unwrap().error.is_some());
    assert_eq!(t.row(10, 1.0).unwrap().omega, Some(0.0));
    let w: Vec<f64> = [0.1, 0.5, 0.9, 1.0].iter().map(|&a| t.row(10, a).unwrap().omega.unwrap()).collect();
    assert!(w.windows(2).all(|p| p[1] < p[0]));
    let (high, low) = (0.9, 5.0 / 58.0);
    let t = run_weights_table(&[high, low], &[10]);
    let ratio = t.row(10, high).unwrap().omega_relative.unwrap();
    assert!((ratio - 0.100671).abs() <= 5e-5, "{ratio}");
    assert_eq!(t.row(10, low).unwrap().omega_relative, Some(1.0));
    assert!(t.rows.iter().filter_map(|r| r.residual).all(|r| r.abs() <= 1e-12));
}

#[test]
fn sensitivity_table_layout() {
    let alphas: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
    let t = run_sensitivity_table(&alphas, &[2, 10, 30], 2.0);
    assert_eq!(t.rows.len(), 60);
    let ks: Vec<usize> = t.rows.iter().map(|r| r.k).collect();
    assert!(ks.windows(2).all(|p| p[0] <= p[1]));
    assert_eq!(t.flat_from.len(), 3);
    for (k, from) in &t.flat_from {
        assert!(from.is_some(), "k = {k}");
    }
    let csv = to_csv(&Report::Sensitivity(t)).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("k,alpha,c"));
}

#[test]
fn run_dispatches_tables() {
    let mut c = ExperimentConfig::new(Mode::BoundsTable);
    c.q = Some(50);
    c.k_list = Some(vec![4]);
    let Report::Bounds(b) = run(&c).unwrap() else { panic!("wrong report") };
    assert_eq!(b.rows.len(), 21);
    assert_eq!(b.rows[0].m_hat, 0.0);
    assert!((b.rows[20].m_hat - 4.0).abs() < 1e-12);
}

#[test]
fn config_errors() {
    let bad_partition = r#"{"mode":"transition-curve","n":40,"q":10,
        "partition":{"rho":[0.5,0.5],"alpha":[0.3,0.1]},"m_grid":[10]}"#;
    let c = ExperimentConfig::from_json(bad_partition).unwrap();
    assert!(matches!(c.validate(), Err(Error::Config(_))));

    let mut c = transition();
    c.m_grid = Some(Grid::List(vec![81.0]));
    assert!(matches!(c.validate(), Err(Error::Config(_))));

    let unknown = r#"{"mode":"heatmap","n":40,"q":10,"colour":"red"}"#;
    assert!(matches!(ExperimentConfig::from_json(unknown), Err(Error::Config(_))));

    let mut c = heatmap(vec![10.0], vec![2.0], 0);
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    c.trials = 1;
    c.n = Some(41);
    assert!(matches!(c.validate(), Err(Error::Config(_))));
}

#[test]
fn shipped_configs_parse() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let c = ExperimentConfig::load(&path).unwrap();
        c.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
