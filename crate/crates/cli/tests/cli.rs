use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mfbma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfbma")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn forrester_inputs(dir: &Path) -> PathBuf {
    let hf = |x: f64| (6.0 * x - 2.0f64).powi(2) * (12.0 * x - 4.0).sin();
    let mut lf = String::from("x1,y\n");
    for i in 0..11 {
        let x = i as f64 / 10.0;
        lf.push_str(&format!("{x:?},{:?}\n", 0.5 * hf(x) + 10.0 * (x - 0.5) - 5.0));
    }
    let mut hfs = String::from("x1,y\n");
    for x in [0.0, 0.4, 0.6, 1.0] {
        hfs.push_str(&format!("{x:?},{:?}\n", hf(x)));
    }
    write(dir, "lf.csv", &lf);
    write(dir, "hf.csv", &hfs);
    write(
        dir,
        "fit.json",
        r#"{"datasets":["lf.csv","hf.csv"],"optimizer":{"seed":3}}"#,
    )
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn fit_then_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = forrester_inputs(dir.path());
    let out = dir.path().join("fit");
    let o = mfbma(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("fit_summary.json")).unwrap()).unwrap();
    assert!(summary.is_object());

    write(dir.path(), "q.csv", "x1\n0.4\n0.25\n0.6\n");
    let pcfg = write(
        dir.path(),
        "predict.json",
        r#"{"ensemble":"fit/ensemble.json","queries":"q.csv"}"#,
    );
    let pout = dir.path().join("pred");
    let o = mfbma(&[
        "predict",
        "--config",
        pcfg.to_str().unwrap(),
        "--out",
        pout.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&pout.join("predictions.csv"));
    assert_eq!(&header[..5], ["x1", "mean", "var_within", "var_between", "var_total"]);
    assert_eq!(header.len(), 5 + 4);
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!((r[4] - (r[2] + r[3])).abs() <= 1e-12 * r[4].abs().max(1.0));
    }
    let hf4 = (6.0 * 0.4 - 2.0f64).powi(2) * (12.0 * 0.4 - 4.0f64).sin();
    assert!((rows[0][1] - hf4).abs() <= 1e-6);
    assert!(rows[0][4] <= 1e-6);

    write(dir.path(), "empty.csv", "x1\n");
    let ecfg = write(
        dir.path(),
        "empty.json",
        r#"{"ensemble":"fit/ensemble.json","queries":"empty.csv"}"#,
    );
    let o = mfbma(&[
        "predict",
        "--config",
        ecfg.to_str().unwrap(),
        "--out",
        pout.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read_to_string(pout.join("predictions.csv"))
            .unwrap()
            .lines()
            .count(),
        1
    );

    write(dir.path(), "wide.csv", "x1,x2\n0.1,0.2\n");
    let wcfg = write(
        dir.path(),
        "wide.json",
        r#"{"ensemble":"fit/ensemble.json","queries":"wide.csv"}"#,
    );
    let o = mfbma(&[
        "predict",
        "--config",
        wcfg.to_str().unwrap(),
        "--out",
        pout.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn fit_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = forrester_inputs(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = mfbma(&[
            "fit",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "9",
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("ensemble.json")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn duplicate_rows_are_named() {
    let dir = tempfile::tempdir().unwrap();
    forrester_inputs(dir.path());
    write(dir.path(), "hf.csv", "x1,y\n0.0,1.0\n0.4,2.0\n0.4,2.0\n");
    let cfg = dir.path().join("fit.json");
    let o = mfbma(&[
        "fit",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("hf.csv") && msg.contains("row 2"), "{msg}");
}

#[test]
fn unknown_config_keys_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.json",
        r#"{"benchmark":"currin2","replicats":3,"optimizer":{"start":2}}"#,
    );
    let o = mfbma(&[
        "benchmark",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let msg = stderr(&o);
    assert!(msg.contains("replicats") && msg.contains("optimizer.start"), "{msg}");
}

#[test]
fn bad_arguments_exit_with_validation_code() {
    assert_eq!(mfbma(&["fit"]).status.code(), Some(1));
    assert_eq!(mfbma(&["nonsense"]).status.code(), Some(1));
    let o = mfbma(&["fit", "--config", "/nonexistent/fit.json", "--out", "/tmp/x"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn benchmark_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.json",
        r#"{"benchmark":"currin2","replicates":2,"test_set_size":100,"adaptive":{"extra_hf_budget_multiple":0.5,"candidates_per_iter":20,"fidelity_policy":"hf_only"}}"#,
    );
    let out = dir.path().join("bench");
    let o = mfbma(&[
        "benchmark",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--quiet",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(out.join("rmse.csv")).unwrap().lines().count(), 3);
    assert!(!out.join("adaptive_trace.csv").exists());

    let aout = dir.path().join("adapt");
    let o = mfbma(&[
        "adaptive",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        aout.to_str().unwrap(),
        "--replicates",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = fs::read_to_string(aout.join("adaptive_trace.csv")).unwrap();
    assert!(trace.starts_with("replicate,step,level,cum_cost,rmse\n"));
    assert_eq!(trace.lines().count(), 1 + 1);
    assert!(aout.join("summary.json").exists());
}

#[test]
fn demo_grid_has_default_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = mfbma(&["demo1d", "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = read_csv(&dir.path().join("demo1d_grid.csv"));
    assert_eq!(header[0], "x");
    assert_eq!(rows.len(), 401);
    for r in &rows {
        assert!(r[2] <= r[1] && r[1] <= r[3]);
    }
    let points = fs::read_to_string(dir.path().join("demo1d_points.csv")).unwrap();
    assert_eq!(points.lines().count(), 1 + 11 + 4);
}
