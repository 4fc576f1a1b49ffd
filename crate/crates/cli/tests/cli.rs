use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_causal-reg"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    let o = bin().args(args).arg("--out").arg(out).output().expect("binary runs");
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

#[test]
fn smoke_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = config("smoke.toml");
    let cfg = cfg.to_str().unwrap();
    run(&["gen", "--config", cfg], out);
    assert_eq!(std::fs::read_dir(out.join("datasets")).unwrap().count(), 2 * 2 * 3);
    run(&["estimate", "--config", cfg, "--jobs", "2"], out);
    let est = std::fs::read_to_string(out.join("estimates.csv")).unwrap();
    assert!(est.starts_with("dataset,attribute,estimator,selection,raw,snapped,seed\n"));
    run(&["train", "--config", cfg], out);
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    // 4 methods × 2 κ × 2 seeds
    assert_eq!(runs.lines().count(), 1 + 16);
    run(&["theorem", "--config", cfg], out);
    let audit = std::fs::read_to_string(out.join("theorem_audit.csv")).unwrap();
    assert_eq!(audit.lines().count(), 1 + 20);
    run(&["report", "--config", cfg], out);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.lines().skip(1).all(|l| l.contains(",true,")));
    assert!(out.join("report.svg").is_file());
}

#[test]
fn seed_override_and_determinism() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = config("smoke.toml");
    let cfg = cfg.to_str().unwrap();
    for d in [a.path(), b.path()] {
        run(&["gen", "--config", cfg, "--seed-override", "7"], d);
    }
    let names: Vec<String> = {
        let mut v: Vec<String> = std::fs::read_dir(a.path().join("datasets"))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    assert_eq!(names.len(), 2 * 3);
    assert!(names.iter().all(|n| n.contains("-s7_")));
    for n in &names {
        let p = |d: &Path| std::fs::read(d.join("datasets").join(n)).unwrap();
        assert_eq!(p(a.path()), p(b.path()));
    }
}

#[test]
fn bad_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "kappas = [1.0]\n").unwrap();
    let o = bin().args(["gen", "--config"]).arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!o.status.success());
    let o = bin().args(["gen", "--jobs", "0"]).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!o.status.success());
    let o = bin().args(["estimate"]).arg("--out").arg(dir.path().join("empty")).output().unwrap();
    assert!(!o.status.success(), "estimating without datasets must fail");
    let o = bin().args(["report"]).arg("--out").arg(dir.path().join("none")).output().unwrap();
    assert!(String::from_utf8_lossy(&o.stderr).contains("no run records"));
}

#[test]
fn shipped_configs_parse() {
    for f in std::fs::read_dir(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")).unwrap() {
        let p = f.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        causal_reg::runner::ExperimentConfig::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}
