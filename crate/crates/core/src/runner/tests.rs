use super::*;
use crate::error::Error;
use crate::metrics::GroupReport;
use std::collections::BTreeMap;
use std::fs;

fn tiny() -> ExperimentConfig {
    let mut c = ExperimentConfig { name: "tiny".into(), kappas: vec![0.5, 0.9], seeds: vec![0, 1], examples: 120, ..Default::default() };
    c.regression.epochs = 30;
    c.regression.r2_grid = vec![0.0];
    c.riesz.epochs = 30;
    c.riesz.r2_grid = vec![0.0];
    c.train.epochs = 30;
    c.r_grid = vec![1.0, 10.0];
    c.audit.instances = 5;
    c
}

#[test]
fn config_round_trips_and_validates() {
    let c = tiny();
    let back = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
    let mut bad = c.clone();
    bad.kappas = vec![1.0];
    assert!(matches!(bad.validate(), Err(Error::KappaOutOfRange(_))));
    assert!(ExperimentConfig::from_toml("format_version = 2").is_err());
    assert!(ExperimentConfig::from_toml("unknown_key = 1").is_err());
    let mut moved = c.clone();
    moved.output_dir = "elsewhere".into();
    assert_eq!(moved.hash(), c.hash());
}

#[test]
fn minimal_toml_uses_defaults() {
    let c = ExperimentConfig::from_toml("name = \"x\"\nkappas = [0.7]\n[dgp]\ntemplate = \"syn_text\"\nkappa = 0.7\n").unwrap();
    assert_eq!(c.seeds, ExperimentConfig::default().seeds);
    assert!(c.dgp.confound_observed);
}

#[test]
fn gen_writes_one_file_per_split_and_cell_deterministically() {
    let c = tiny();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let pa = cmd_gen(&c, a.path()).unwrap();
    let pb = cmd_gen(&c, b.path()).unwrap();
    assert_eq!(pa.len(), 4 * 3);
    for (x, y) in pa.iter().zip(&pb) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
    let s = load_cell(a.path(), &dataset_id(&c, 0.9, 1)).unwrap();
    assert_eq!(s, generate_cell(&c, 0.9, 1).unwrap());
}

#[test]
fn estimate_then_train_then_report() {
    let mut c = tiny();
    c.seeds = vec![0];
    c.kappas = vec![0.7];
    c.methods = vec![MethodSpec::Erm, MethodSpec::AutoAcer, MethodSpec::Cad];
    let d = tempfile::tempdir().unwrap();
    assert!(matches!(cmd_estimate(&c, d.path()), Err(Error::Dataset(_))));
    cmd_gen(&c, d.path()).unwrap();
    let est = cmd_estimate(&c, d.path()).unwrap();
    // causal and spurious, two estimators each
    assert_eq!(est.len(), 4);
    let table = fs::read_to_string(d.path().join("table1.csv")).unwrap();
    assert!(table.starts_with("attribute,estimator,selection,kappa=0.7"));
    assert!(table.contains("causal,ground_truth,,0.29"));

    let runs = cmd_train(&c, d.path()).unwrap();
    assert_eq!(runs.len(), 3);
    let erm = &runs[0];
    assert_eq!(erm.grid.len(), 1, "ERM ignores the R grid");
    let auto = &runs[1];
    assert_eq!(auto.grid.len(), 2);
    let id = dataset_id(&c, 0.7, 0);
    for (a, t) in &auto.targets {
        let e = est.iter().find(|r| r.dataset == id && &r.attribute == a && r.estimator == c.target_estimator.kind).unwrap();
        assert_eq!(*t, e.snapped);
        assert!(c.effect_grid.contains(t));
    }
    assert!(runs.iter().all(|r| !r.failed));
    let csv = fs::read_to_string(d.path().join("runs.csv")).unwrap();
    assert!(csv.starts_with("config_hash,method,kappa,seed,R,epoch,acc_maj,acc_min,acc_avg,acc_worst,delta_prob\n"));
    assert_eq!(csv.lines().count(), 4);

    let rows = cmd_report(d.path(), d.path()).unwrap();
    assert_eq!(rows.len(), 3 * METRICS.len());
    assert!(fs::read_to_string(d.path().join("report.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn train_without_estimates_is_rejected() {
    let mut c = tiny();
    c.seeds = vec![0];
    c.kappas = vec![0.7];
    let d = tempfile::tempdir().unwrap();
    cmd_gen(&c, d.path()).unwrap();
    assert!(cmd_train(&c, d.path()).is_err());
    c.methods = vec![MethodSpec::Erm];
    assert!(cmd_train(&c, d.path()).is_ok());
}

#[test]
fn divergent_sweep_points_are_recorded_and_excluded() {
    let mut c = tiny();
    c.train.optimizer = crate::nn::Optimizer::Gd { lr: f64::INFINITY };
    let s = generate_cell(&c, 0.7, 0).unwrap();
    let r = train_cell(&c, "h", "id", 0.7, 0, &s, &BTreeMap::new(), MethodSpec::Erm).unwrap();
    assert!(r.failed && r.grid[0].failed && r.grid[0].error.is_some());
    assert!(r.report.acc_average.is_nan());
}

fn record(method: &str, kappa: f64, seed: u64, acc: f64, failed: bool) -> RunRecord {
    RunRecord {
        config_hash: "h".into(),
        experiment: "e".into(),
        dataset: "d".into(),
        method: method.into(),
        kappa,
        seed,
        setting: String::new(),
        r: 0.0,
        epoch: 0,
        report: GroupReport {
            acc_majority: acc,
            acc_minority: acc,
            acc_average: acc,
            acc_worst: acc,
            delta_prob: 1.0 - acc,
            kappa,
            empty_cells: Vec::new(),
        },
        targets: BTreeMap::new(),
        detected: None,
        grid: Vec::new(),
        notes: Vec::new(),
        failed,
        wall_ms: 7,
    }
}

#[test]
fn aggregation_matches_recomputation_and_flags_gaps() {
    let recs = vec![
        record("erm", 0.5, 0, 0.6, false),
        record("erm", 0.5, 1, 0.8, false),
        record("erm", 0.5, 2, 0.7, false),
        record("erm", 0.9, 0, 0.5, false),
        record("erm", 0.9, 1, 0.9, true),
    ];
    let rows = aggregate(&recs).unwrap();
    let full = rows.iter().find(|r| r.kappa == 0.5 && r.metric == "acc_avg").unwrap();
    assert_eq!(full.n, 3);
    assert!((full.mean - 0.7).abs() < 1e-12);
    assert!((full.stderr - 0.1 / 3f64.sqrt()).abs() < 1e-12);
    assert!(full.complete());
    let gap = rows.iter().find(|r| r.kappa == 0.9 && r.metric == "acc_avg").unwrap();
    assert_eq!(gap.missing_seeds, vec![1, 2]);
    assert_eq!(gap.n, 1);
    assert!(gap.stderr.is_nan());
    assert!(aggregate(&[]).is_err());
}

#[test]
fn record_hash_ignores_wall_time() {
    let a = record("erm", 0.5, 0, 0.6, false);
    let mut b = a.clone();
    b.wall_ms = 99;
    assert_eq!(a.hash(), b.hash());
    b.seed = 1;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn theorem_command_writes_one_row_per_instance() {
    let c = tiny();
    let d = tempfile::tempdir().unwrap();
    let s = cmd_theorem(&c, d.path()).unwrap();
    let csv = fs::read_to_string(d.path().join("theorem_audit.csv")).unwrap();
    assert!(csv.starts_with("instance,K,J,mean_cond,holds,R_threshold,preferred\n"));
    assert_eq!(csv.lines().count(), 1 + s.rows.len());
    assert_eq!(s.rows.len(), 5);
}
