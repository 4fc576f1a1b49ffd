use super::config::{ExperimentConfig, GroupKappa, MethodSpec, SelectionCriterion};
use super::record::{
    read_jsonl, write_estimates_csv, write_jsonl, write_runs_csv, EstimateRecord, GridEntry, RunRecord,
};
use crate::error::{Error, Result};
use crate::estimators::{fit_regression, fit_riesz, EstimatorKind, RegressionModel, RieszModel};
use crate::metrics::{group_accuracies, select_by_accuracy, select_spurious_known, GroupReport};
use crate::scm::Scm;
use crate::synthgen::{
    assemble, natural_kappa, read_dataset, write_dataset, AssembleConfig, DatasetSplits, LabeledDataset, Split,
};
use crate::theory::{audit, AuditSummary};
use crate::trainer::{mouli_detect, train, train_irm, JttConfig, Method, TrainConfig, TrainRun};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Runs `f` on a pool of `jobs` threads, or on the global pool when `None`.
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match jobs {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

pub fn dataset_id(cfg: &ExperimentConfig, kappa: f64, seed: u64) -> String {
    format!("{}-k{kappa}-s{seed}", cfg.name)
}

pub fn dataset_path(out: &Path, id: &str, split: &str) -> PathBuf {
    out.join("datasets").join(format!("{id}_{split}.jsonl"))
}

/// `(κ, seed)` cells in config order.
pub fn cells(cfg: &ExperimentConfig) -> Vec<(f64, u64)> {
    cfg.kappas.iter().flat_map(|&k| cfg.seeds.iter().map(move |&s| (k, s))).collect()
}

pub fn build_scm(cfg: &ExperimentConfig, kappa: f64) -> Result<Scm> {
    let mut spec = cfg.dgp.clone();
    spec.kappa = kappa;
    spec.build()
}

/// Group ratio and majority count of the assembled pool for model κ.
fn group_plan(cfg: &ExperimentConfig, scm: &Scm, kappa: f64) -> Result<(f64, usize)> {
    let gk = match cfg.group_kappa {
        GroupKappa::Natural => natural_kappa(scm, &cfg.label, &cfg.spurious_attribute)?,
        GroupKappa::Scm => kappa,
    };
    Ok((gk, (cfg.examples as f64 * gk) as usize))
}

fn assemble_config(cfg: &ExperimentConfig, n_majority: usize, kappa: f64, seed: u64) -> AssembleConfig {
    let mut a = AssembleConfig::new(n_majority, kappa, seed, &cfg.spurious_attribute);
    a.label = cfg.label.clone();
    a
}

pub fn generate_cell(cfg: &ExperimentConfig, kappa: f64, seed: u64) -> Result<DatasetSplits> {
    let scm = build_scm(cfg, kappa)?;
    let (gk, n_maj) = group_plan(cfg, &scm, kappa)?;
    assemble(&scm, &cfg.renderer, &assemble_config(cfg, n_maj, gk, seed))
}

fn splits_of(s: &DatasetSplits) -> [(&'static str, &LabeledDataset); 3] {
    [("train", &s.train), ("val", &s.val), ("test", &s.test)]
}

/// Writes train/val/test files for every `(κ, seed)` cell.
pub fn cmd_gen(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    fs::create_dir_all(out.join("datasets"))?;
    let written = cells(cfg)
        .into_par_iter()
        .map(|(k, s)| {
            let splits = generate_cell(cfg, k, s)?;
            let id = dataset_id(cfg, k, s);
            let mut paths = Vec::new();
            for (name, data) in splits_of(&splits) {
                let p = dataset_path(out, &id, name);
                write_dataset(BufWriter::new(File::create(&p)?), data, &cfg.renderer)?;
                paths.push(p);
            }
            Ok(paths)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(written.into_iter().flatten().collect())
}

pub fn load_cell(out: &Path, id: &str) -> Result<DatasetSplits> {
    let read = |split: &str| -> Result<LabeledDataset> {
        let p = dataset_path(out, id, split);
        let f = File::open(&p).map_err(|e| Error::Dataset(format!("cannot open {}: {e}", p.display())))?;
        Ok(read_dataset(BufReader::new(f))?.1)
    };
    Ok(DatasetSplits { train: read("train")?, val: read("val")?, test: read("test")? })
}

/// Attributes that carry counterfactual renderings.
pub fn rendered_attributes(data: &LabeledDataset) -> Vec<String> {
    data.examples.first().map(|e| e.counterfactuals.keys().cloned().collect()).unwrap_or_default()
}

/// Every configured estimator on one attribute of one cell, fitted on train,
/// selected on validation and evaluated on train ∪ validation.
pub fn estimate_attribute(
    cfg: &ExperimentConfig,
    id: &str,
    kappa: f64,
    seed: u64,
    splits: &DatasetSplits,
    attribute: &str,
) -> Result<Vec<EstimateRecord>> {
    let all = LabeledDataset::concat(&[&splits.train, &splits.val], Split::Train)?;
    let mut regression: Option<RegressionModel> = None;
    let mut riesz: Option<RieszModel> = None;
    let mut out = Vec::new();
    for spec in &cfg.estimators {
        let est = match spec.kind {
            EstimatorKind::Direct => {
                if regression.is_none() {
                    let rc = crate::estimators::RegressionConfig { seed, ..cfg.regression.clone() };
                    regression = Some(fit_regression(&splits.train, &splits.val, attribute, &rc)?);
                }
                regression.as_ref().expect("fitted").estimate(&all, spec.selection, &cfg.effect_grid)?
            }
            EstimatorKind::Riesz | EstimatorKind::DebiasedRiesz => {
                if riesz.is_none() {
                    let rc = crate::estimators::RieszConfig { seed, ..cfg.riesz.clone() };
                    riesz = Some(fit_riesz(&splits.train, &splits.val, attribute, &rc)?);
                }
                riesz.as_ref().expect("fitted").estimate(&all, spec.kind, spec.selection, &cfg.effect_grid)?
            }
        };
        out.push(EstimateRecord {
            dataset: id.to_string(),
            attribute: attribute.to_string(),
            estimator: spec.kind,
            selection: spec.selection,
            raw: est.value,
            snapped: est.snapped,
            seed,
            kappa,
        });
    }
    Ok(out)
}

/// Runs every estimator on every attribute of every dataset and writes
/// `estimates.csv`, `estimates.jsonl` and `table1.csv`.
pub fn cmd_estimate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<EstimateRecord>> {
    cfg.validate()?;
    if cfg.estimators.is_empty() {
        return Err(Error::Config("no estimators configured".into()));
    }
    let loaded = cells(cfg)
        .into_iter()
        .map(|(k, s)| {
            let id = dataset_id(cfg, k, s);
            let splits = load_cell(out, &id)?;
            Ok((k, s, id, splits))
        })
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(usize, String)> = loaded
        .iter()
        .enumerate()
        .flat_map(|(i, (_, _, _, sp))| cfg.attributes_for(&rendered_attributes(&sp.train)).into_iter().map(move |a| (i, a)))
        .collect();
    let rows: Vec<EstimateRecord> = tasks
        .into_par_iter()
        .map(|(i, a)| {
            let (k, s, id, splits) = &loaded[i];
            estimate_attribute(cfg, id, *k, *s, splits, &a)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    write_estimates_csv(BufWriter::new(File::create(out.join("estimates.csv"))?), &rows)?;
    write_jsonl(BufWriter::new(File::create(out.join("estimates.jsonl"))?), &rows)?;
    write_table1(cfg, &rows, BufWriter::new(File::create(out.join("table1.csv"))?))?;
    Ok(rows)
}

/// Mean raw estimate over seeds, one row per (attribute, estimator,
/// selection) and one column per κ, preceded by the true effect per attribute.
pub fn write_table1<W: std::io::Write>(cfg: &ExperimentConfig, rows: &[EstimateRecord], w: W) -> Result<()> {
    use super::record::enum_name;
    let mut c = csv::Writer::from_writer(w);
    let mut header = vec!["attribute".to_string(), "estimator".into(), "selection".into()];
    header.extend(cfg.kappas.iter().map(|k| format!("kappa={k}")));
    c.write_record(&header)?;
    let mut attrs: Vec<&str> = rows.iter().map(|r| r.attribute.as_str()).collect();
    attrs.sort();
    attrs.dedup();
    for a in attrs {
        let mut line = vec![a.to_string(), "ground_truth".into(), String::new()];
        for &k in &cfg.kappas {
            line.push(build_scm(cfg, k)?.ace(a, &cfg.label)?.to_string());
        }
        c.write_record(&line)?;
        for spec in &cfg.estimators {
            let mut line = vec![a.to_string(), enum_name(&spec.kind), enum_name(&spec.selection)];
            for &k in &cfg.kappas {
                let v: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.attribute == a && r.estimator == spec.kind && r.selection == spec.selection && r.kappa == k)
                    .map(|r| r.raw)
                    .collect();
                line.push(if v.is_empty() { String::new() } else { (v.iter().sum::<f64>() / v.len() as f64).to_string() });
            }
            c.write_record(&line)?;
        }
    }
    c.flush()?;
    Ok(())
}

/// Snapped targets of the configured target estimator for one dataset.
pub fn targets_for(cfg: &ExperimentConfig, estimates: &[EstimateRecord], id: &str, attributes: &[String]) -> Result<BTreeMap<String, f64>> {
    let t = cfg.target_estimator;
    attributes
        .iter()
        .map(|a| {
            estimates
                .iter()
                .find(|r| r.dataset == id && &r.attribute == a && r.estimator == t.kind && r.selection == t.selection)
                .map(|r| (a.clone(), r.snapped))
                .ok_or_else(|| Error::Dataset(format!("no {:?}/{:?} estimate of `{a}` for {id}", t.kind, t.selection)))
        })
        .collect()
}

/// Second IRM environment: the same model assembled at another group ratio.
fn irm_environment(cfg: &ExperimentConfig, kappa: f64, seed: u64) -> Result<LabeledDataset> {
    let scm = build_scm(cfg, kappa)?;
    let n = (cfg.examples as f64 * cfg.irm_env_kappa) as usize;
    let a = assemble_config(cfg, n, cfg.irm_env_kappa, seed ^ 0x5eed_0f_1e17);
    Ok(assemble(&scm, &cfg.renderer, &a)?.train)
}

fn sweep(
    cfg: &ExperimentConfig,
    splits: &DatasetSplits,
    kappa: f64,
    seed: u64,
    targets: &BTreeMap<String, f64>,
    method: MethodSpec,
    detected: &mut Option<Vec<String>>,
) -> Result<Vec<(GridEntry, Result<TrainRun>)>> {
    let base = TrainConfig { seed, ..cfg.train.clone() };
    let (tr, va) = (&splits.train, &splits.val);
    let entry = |setting: String, r: f64| GridEntry { setting, r, failed: false, error: None };
    let mut runs = Vec::new();
    match method {
        MethodSpec::Erm => {
            let c = TrainConfig { objective: Method::Erm, r: 0.0, ..base };
            runs.push((entry("R=0".into(), 0.0), train(&c, tr, va)));
        }
        MethodSpec::AutoAcer => {
            for &r in &cfg.r_grid {
                let c = TrainConfig { objective: Method::AutoAcer, r, effect_targets: targets.clone(), ..base.clone() };
                runs.push((entry(format!("R={r}"), r), train(&c, tr, va)));
            }
        }
        MethodSpec::Cad => {
            let c = TrainConfig { objective: Method::Cad, cad_attributes: vec![cfg.spurious_attribute.clone()], ..base };
            runs.push((entry("cad".into(), 0.0), train(&c, tr, va)));
        }
        MethodSpec::MouliCad | MethodSpec::MouliAutoAcer => {
            let attrs = cfg.attributes_for(&rendered_attributes(tr));
            let mut mc = cfg.mouli.clone();
            mc.base.seed = seed;
            let (set, _) = mouli_detect(tr, va, &attrs, &mc)?;
            let c = if method == MethodSpec::MouliCad {
                TrainConfig { objective: Method::Cad, cad_attributes: set.clone(), ..base }
            } else {
                let zero = set.iter().map(|a| (a.clone(), 0.0)).collect();
                TrainConfig { objective: Method::AutoAcer, r: mc.r, effect_targets: zero, ..base }
            };
            let r = c.r;
            runs.push((entry(format!("detected={}", set.join("+")), r), train(&c, tr, va)));
            *detected = Some(set);
        }
        MethodSpec::Jtt => {
            for &lambda_up in &cfg.jtt_lambda_up {
                for &first_epochs in &cfg.jtt_first_epochs {
                    let c = TrainConfig { objective: Method::Jtt, jtt: JttConfig { lambda_up, first_epochs }, ..base.clone() };
                    runs.push((entry(format!("lambda_up={lambda_up},first_epochs={first_epochs}"), 0.0), train(&c, tr, va)));
                }
            }
        }
        MethodSpec::Irm => {
            let envs = [splits.train.clone(), irm_environment(cfg, kappa, seed)?];
            for &l in &cfg.irm_lambdas {
                let c = TrainConfig { objective: Method::Irm, irm_lambda: l, ..base.clone() };
                runs.push((entry(format!("irm_lambda={l}"), 0.0), train_irm(&envs, va, &c)));
            }
        }
    }
    Ok(runs)
}

fn nan_report() -> GroupReport {
    GroupReport {
        acc_majority: f64::NAN,
        acc_minority: f64::NAN,
        acc_average: f64::NAN,
        acc_worst: f64::NAN,
        delta_prob: f64::NAN,
        kappa: f64::NAN,
        empty_cells: Vec::new(),
    }
}

/// Sweeps one method on one cell, selects a checkpoint with the configured
/// criterion and reports it on the test split. Failed sweep points are kept
/// in `grid` and excluded from selection.
#[allow(clippy::too_many_arguments)]
pub fn train_cell(
    cfg: &ExperimentConfig,
    config_hash: &str,
    id: &str,
    kappa: f64,
    seed: u64,
    splits: &DatasetSplits,
    targets: &BTreeMap<String, f64>,
    method: MethodSpec,
) -> Result<RunRecord> {
    let start = Instant::now();
    let mut detected = None;
    let runs = sweep(cfg, splits, kappa, seed, targets, method, &mut detected)?;
    let mut grid = Vec::new();
    let mut cands = Vec::new();
    let mut index = Vec::new();
    let mut notes = Vec::new();
    for (ri, (mut entry, run)) in runs.iter().map(|(e, r)| (e.clone(), r)).enumerate() {
        match run {
            Ok(run) => {
                for (ci, c) in run.checkpoints.iter().enumerate() {
                    cands.push(c.candidate());
                    index.push((ri, ci));
                }
                notes.extend(run.notes.iter().map(|n| format!("{}: {n}", entry.setting)));
            }
            Err(e) => {
                entry.failed = true;
                entry.error = Some(e.to_string());
            }
        }
        grid.push(entry);
    }
    let chosen = match cfg.selection {
        SelectionCriterion::Accuracy => select_by_accuracy(&cands),
        SelectionCriterion::SpuriousKnown => select_spurious_known(&cands),
    };
    let mut record = RunRecord {
        config_hash: config_hash.to_string(),
        experiment: cfg.name.clone(),
        dataset: id.to_string(),
        method: method.name().to_string(),
        kappa,
        seed,
        setting: String::new(),
        r: f64::NAN,
        epoch: 0,
        report: nan_report(),
        targets: if matches!(method, MethodSpec::AutoAcer) { targets.clone() } else { BTreeMap::new() },
        detected,
        grid,
        notes,
        failed: true,
        wall_ms: 0,
    };
    if let Ok(b) = chosen {
        let (ri, ci) = index[b];
        let model = runs[ri].1.as_ref().expect("selected runs succeeded").model_at(ci);
        record.report = group_accuracies(&model, &splits.test)?;
        record.setting = record.grid[ri].setting.clone();
        record.r = cands[b].r;
        record.epoch = cands[b].epoch;
        record.failed = false;
    }
    record.wall_ms = start.elapsed().as_millis() as u64;
    Ok(record)
}

/// Full method sweep over every cell; writes `runs.csv`, `runs.jsonl` and
/// the resolved config.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let needs_targets = cfg.methods.contains(&MethodSpec::AutoAcer);
    let estimates: Vec<EstimateRecord> = if needs_targets {
        let p = out.join("estimates.jsonl");
        let f = File::open(&p).map_err(|e| Error::Dataset(format!("cannot open {}: {e}", p.display())))?;
        read_jsonl(BufReader::new(f))?
    } else {
        Vec::new()
    };
    let hash = cfg.hash();
    let loaded = cells(cfg)
        .into_iter()
        .map(|(k, s)| {
            let id = dataset_id(cfg, k, s);
            let splits = load_cell(out, &id)?;
            let targets = if needs_targets {
                targets_for(cfg, &estimates, &id, &cfg.attributes_for(&rendered_attributes(&splits.train)))?
            } else {
                BTreeMap::new()
            };
            Ok((k, s, id, splits, targets))
        })
        .collect::<Result<Vec<_>>>()?;
    let tasks: Vec<(MethodSpec, usize)> =
        cfg.methods.iter().flat_map(|&m| (0..loaded.len()).map(move |i| (m, i))).collect();
    let records = tasks
        .into_par_iter()
        .map(|(m, i)| {
            let (k, s, id, splits, targets) = &loaded[i];
            train_cell(cfg, &hash, id, *k, *s, splits, targets, m)
        })
        .collect::<Result<Vec<_>>>()?;
    fs::write(out.join("config.toml"), cfg.to_toml()?)?;
    write_runs_csv(BufWriter::new(File::create(out.join("runs.csv"))?), &records)?;
    write_jsonl(BufWriter::new(File::create(out.join("runs.jsonl"))?), &records)?;
    Ok(records)
}

/// Randomized theorem audit; writes `theorem_audit.csv` and
/// `theorem_summary.json`.
pub fn cmd_theorem(cfg: &ExperimentConfig, out: &Path) -> Result<AuditSummary> {
    let summary = audit(&cfg.audit)?;
    fs::create_dir_all(out)?;
    let mut c = csv::Writer::from_writer(BufWriter::new(File::create(out.join("theorem_audit.csv"))?));
    c.write_record(["instance", "K", "J", "mean_cond", "holds", "R_threshold", "preferred"])?;
    for r in &summary.rows {
        c.write_record([
            r.instance.to_string(),
            r.k.to_string(),
            r.j.to_string(),
            r.mean_value.to_string(),
            r.mean_holds.to_string(),
            r.r_threshold.to_string(),
            r.preferred.to_string(),
        ])?;
    }
    c.flush()?;
    let brief = serde_json::json!({
        "instances": summary.rows.len(),
        "mean_condition_holding": summary.mean_holding,
        "counterexamples": summary.counterexamples,
        "implication_violations": summary.implication_violations,
        "passed": summary.passed(),
    });
    fs::write(out.join("theorem_summary.json"), serde_json::to_string_pretty(&brief)? + "\n")?;
    Ok(summary)
}
