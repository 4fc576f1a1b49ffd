use super::record::{read_jsonl, RunRecord};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

pub const METRICS: [&str; 5] = ["acc_avg", "acc_worst", "acc_maj", "acc_min", "delta_prob"];

fn metric(r: &RunRecord, name: &str) -> f64 {
    let g = &r.report;
    match name {
        "acc_avg" => g.acc_average,
        "acc_worst" => g.acc_worst,
        "acc_maj" => g.acc_majority,
        "acc_min" => g.acc_minority,
        "delta_prob" => g.delta_prob,
        _ => f64::NAN,
    }
}

/// Mean and standard error over seeds of one metric in one
/// (experiment, method, κ) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub method: String,
    pub kappa: f64,
    pub metric: String,
    pub mean: f64,
    /// Sample standard deviation over `√n`; NaN for a single seed.
    pub stderr: f64,
    pub n: usize,
    /// Seeds present elsewhere in the experiment but missing or failed here.
    pub missing_seeds: Vec<u64>,
}

impl ReportRow {
    pub fn complete(&self) -> bool {
        self.missing_seeds.is_empty()
    }
}

pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::NAN);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Aggregates records per (experiment, method, κ, metric). Failed records
/// count as missing seeds rather than entering the mean.
pub fn aggregate(records: &[RunRecord]) -> Result<Vec<ReportRow>> {
    if records.is_empty() {
        return Err(Error::Empty("no run records to report".into()));
    }
    let mut seeds: BTreeMap<&str, BTreeSet<u64>> = BTreeMap::new();
    let mut cells: BTreeMap<(&str, &str, u64), (f64, Vec<&RunRecord>)> = BTreeMap::new();
    for r in records {
        seeds.entry(&r.experiment).or_default().insert(r.seed);
        cells.entry((&r.experiment, &r.method, r.kappa.to_bits())).or_insert((r.kappa, Vec::new())).1.push(r);
    }
    let mut rows = Vec::new();
    for ((exp, method, _), (kappa, recs)) in cells {
        let ok: Vec<&RunRecord> = recs.iter().copied().filter(|r| !r.failed).collect();
        let present: BTreeSet<u64> = ok.iter().map(|r| r.seed).collect();
        let missing: Vec<u64> = seeds[exp].difference(&present).copied().collect();
        for m in METRICS {
            let v: Vec<f64> = ok.iter().map(|r| metric(r, m)).collect();
            let (mean, stderr) = mean_stderr(&v);
            rows.push(ReportRow {
                experiment: exp.to_string(),
                method: method.to_string(),
                kappa,
                metric: m.to_string(),
                mean,
                stderr,
                n: v.len(),
                missing_seeds: missing.clone(),
            });
        }
    }
    rows.sort_by(|a, b| {
        (&a.experiment, &a.method, &a.metric)
            .cmp(&(&b.experiment, &b.method, &b.metric))
            .then(a.kappa.total_cmp(&b.kappa))
    });
    Ok(rows)
}

/// `runs.jsonl` in `dir` and in its immediate subdirectories.
pub fn collect_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let mut files: Vec<PathBuf> = Vec::new();
    let direct = dir.join("runs.jsonl");
    if direct.is_file() {
        files.push(direct);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    files.extend(subdirs.into_iter().map(|d| d.join("runs.jsonl")).filter(|p| p.is_file()));
    let mut out = Vec::new();
    for f in files {
        out.extend(read_jsonl::<RunRecord, _>(BufReader::new(File::open(f)?))?);
    }
    Ok(out)
}

pub fn write_report_csv<W: std::io::Write>(w: W, rows: &[ReportRow]) -> Result<()> {
    let mut c = csv::Writer::from_writer(w);
    c.write_record(["experiment", "method", "kappa", "metric", "mean", "stderr", "n", "complete", "missing_seeds"])?;
    for r in rows {
        let missing: Vec<String> = r.missing_seeds.iter().map(u64::to_string).collect();
        c.write_record([
            r.experiment.clone(),
            r.method.clone(),
            r.kappa.to_string(),
            r.metric.clone(),
            r.mean.to_string(),
            r.stderr.to_string(),
            r.n.to_string(),
            r.complete().to_string(),
            missing.join(" "),
        ])?;
    }
    c.flush()?;
    Ok(())
}

const PALETTE: [&str; 7] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

/// Two-row figure: average group accuracy on top, ΔProb below, one column per
/// experiment and one series per method, with ±stderr bars. Incomplete cells
/// are drawn as hollow markers.
pub fn render_svg(rows: &[ReportRow]) -> String {
    let experiments: Vec<&str> = rows.iter().map(|r| r.experiment.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    let methods: Vec<&str> = rows.iter().map(|r| r.method.as_str()).collect::<BTreeSet<_>>().into_iter().collect();
    let (pw, ph, ml, mt, gap) = (300.0, 200.0, 60.0, 40.0, 50.0);
    let width = ml + experiments.len() as f64 * (pw + gap) + 120.0;
    let height = mt + 2.0 * (ph + gap) + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (col, exp) in experiments.iter().enumerate() {
        let here: Vec<&ReportRow> = rows.iter().filter(|r| r.experiment == *exp).collect();
        let (kmin, kmax) = here.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.kappa), b.max(r.kappa)));
        let (kmin, kmax) = if kmax > kmin { (kmin, kmax) } else { (kmin - 0.05, kmax + 0.05) };
        for (row, (metric, label)) in [("acc_avg", "average group accuracy"), ("delta_prob", "ΔProb")].iter().enumerate() {
            let x0 = ml + col as f64 * (pw + gap);
            let y0 = mt + row as f64 * (ph + gap);
            let px = |k: f64| x0 + (k - kmin) / (kmax - kmin) * pw;
            let py = |v: f64| y0 + ph - v.clamp(0.0, 1.0) * ph;
            let _ = writeln!(s, r##"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>"##);
            for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let _ = writeln!(
                    s,
                    r##"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="#ddd"/><text x="{tx}" y="{ty}" text-anchor="end">{t}</text>"##,
                    y = py(t),
                    x1 = x0 + pw,
                    tx = x0 - 4.0,
                    ty = py(t) + 4.0
                );
            }
            let kappas: BTreeSet<u64> = here.iter().map(|r| r.kappa.to_bits()).collect();
            for kb in kappas {
                let k = f64::from_bits(kb);
                let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{k}</text>"#, px(k), y0 + ph + 14.0);
            }
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">κ</text>"#, x0 + pw / 2.0, y0 + ph + 28.0);
            let title = if row == 0 { format!("{exp}: {label}") } else { label.to_string() };
            let _ = writeln!(s, r#"<text x="{x0}" y="{}">{}</text>"#, y0 - 8.0, escape(&title));
            for (mi, m) in methods.iter().enumerate() {
                let color = PALETTE[mi % PALETTE.len()];
                let mut pts: Vec<&&ReportRow> =
                    here.iter().filter(|r| r.method == *m && r.metric == *metric && r.mean.is_finite()).collect();
                pts.sort_by(|a, b| a.kappa.total_cmp(&b.kappa));
                if pts.is_empty() {
                    continue;
                }
                let path: Vec<String> = pts.iter().map(|r| format!("{:.2},{:.2}", px(r.kappa), py(r.mean))).collect();
                let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
                for r in pts {
                    let (x, y) = (px(r.kappa), py(r.mean));
                    if r.stderr.is_finite() {
                        let _ = writeln!(
                            s,
                            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{color}"/>"#,
                            py(r.mean - r.stderr),
                            py(r.mean + r.stderr)
                        );
                    }
                    let fill = if r.complete() { color } else { "white" };
                    let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{fill}" stroke="{color}"/>"#);
                }
            }
        }
    }
    let lx = width - 110.0;
    for (mi, m) in methods.iter().enumerate() {
        let y = mt + 10.0 + 16.0 * mi as f64;
        let color = PALETTE[mi % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 18.0,
            lx + 22.0,
            y + 4.0,
            escape(m)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Reads every record under `dir`, writes `report.csv` and `report.svg`
/// into `out`.
pub fn cmd_report(dir: &Path, out: &Path) -> Result<Vec<ReportRow>> {
    let records = collect_records(dir)?;
    let rows = aggregate(&records)?;
    fs::create_dir_all(out)?;
    write_report_csv(File::create(out.join("report.csv"))?, &rows)?;
    fs::write(out.join("report.svg"), render_svg(&rows))?;
    Ok(rows)
}
