//! Config-driven sweeps: dataset generation, effect estimation, training
//! sweeps with model selection, theorem audits and reports.
//!
//! Everything is written under one output directory:
//!
//! * `datasets/{id}_{train,val,test}.jsonl`
//! * `estimates.csv`, `estimates.jsonl`, `table1.csv`
//! * `runs.csv`, `runs.jsonl`, `config.toml`
//! * `theorem_audit.csv`, `theorem_summary.json`
//! * `report.csv`, `report.svg`

mod config;
mod pipeline;
mod record;
mod report;

pub use config::{ExperimentConfig, EstimatorSpec, GroupKappa, MethodSpec, SelectionCriterion, CONFIG_VERSION};
pub use pipeline::{
    build_scm, cells, cmd_estimate, cmd_gen, cmd_theorem, cmd_train, dataset_id, dataset_path, estimate_attribute,
    generate_cell, load_cell, rendered_attributes, targets_for, train_cell, with_jobs, write_table1,
};
pub use record::{
    read_jsonl, write_estimates_csv, write_jsonl, write_runs_csv, EstimateRecord, GridEntry, RunRecord,
};
pub use report::{aggregate, cmd_report, collect_records, mean_stderr, render_svg, write_report_csv, ReportRow, METRICS};

#[cfg(test)]
mod tests;
