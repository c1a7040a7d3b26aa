use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noisycost")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(p: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(p).unwrap().records().collect::<Result<_, _>>().unwrap()
}

fn header(p: &Path) -> Vec<String> {
    csv::Reader::from_path(p).unwrap().headers().unwrap().iter().map(String::from).collect()
}

fn gen(dir: &Path, name: &str, m: &str, seed: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    ok(&["gen-data", "--preset", "syn2d", "--m", m, "--seed", seed, "--out", s(&p)]);
    p
}

#[test]
fn gen_data_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let a = gen(dir.path(), "a.csv", "200", "3");
    let b = gen(dir.path(), "b.csv", "200", "3");
    let c = gen(dir.path(), "c.csv", "200", "4");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(header(&a), ["x1", "x2", "label", "eta"]);
    assert_eq!(csv_rows(&a).len(), 200);
}

#[test]
fn gen_data_from_spec_with_prior() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"pi":0.5,"mu_pos":[1.0],"mu_neg":[-1.0],"sigma_pos":[[1.0]],"sigma_neg":[[1.0]],"m":400}"#,
    )
    .unwrap();
    let out = dir.path().join("g.csv");
    ok(&["gen-data", "--spec", s(&spec), "--pi", "0.1", "--seed", "1", "--out", s(&out)]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 400);
    let pos = rows.iter().filter(|r| &r[1] == "1").count();
    assert!((20..=60).contains(&pos), "{pos}");
}

#[test]
fn train_usq_writes_model() {
    let dir = tempfile::tempdir().unwrap();
    let train = gen(dir.path(), "t.csv", "300", "1");
    let plain = dir.path().join("m1.json");
    let scaled = dir.path().join("m2.json");
    let args = |m: &Path| vec!["train-usq", "--train", s(&train), "--alpha", "0.4", "--gamma", "1.5", "--lambda", "0.1", "--model-out", s(m)]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    let a = args(&plain);
    ok(&a.iter().map(String::as_str).collect::<Vec<_>>());
    let mut b = args(&scaled);
    b.push("--standardize".into());
    ok(&b.iter().map(String::as_str).collect::<Vec<_>>());
    for p in [&plain, &scaled] {
        let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["w"].as_array().unwrap().len(), 2);
        assert!(v["b"].is_f64());
        assert_eq!(v["gamma"], 1.5);
        assert!(v["w"][0].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn estimate_eta_report() {
    let dir = tempfile::tempdir().unwrap();
    let train = gen(dir.path(), "tr.csv", "300", "1");
    let test = gen(dir.path(), "te.csv", "200", "2");
    let report = dir.path().join("eta.csv");
    ok(&["estimate-eta", "--method", "knn", "--train", s(&train), "--test", s(&test), "--report-out", s(&report)]);
    let h = header(&report);
    for col in ["method", "mse", "rmse", "mad", "md", "kl", "acc"] {
        assert!(h.iter().any(|c| c == col), "missing {col}");
    }
    let row = &csv_rows(&report)[0];
    assert_eq!(&row[0], "knn");
    let mse: f64 = row[1].parse().unwrap();
    assert!((0.0..0.1).contains(&mse));
}

#[test]
fn resample_predict_report_and_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let train = gen(dir.path(), "tr.csv", "300", "1");
    let test = gen(dir.path(), "te.csv", "150", "2");
    let report = dir.path().join("r.csv");
    let preds = dir.path().join("p.csv");
    ok(&[
        "resample-predict", "--train", s(&train), "--test", s(&test), "--alpha", "0.3", "--pm", "am",
        "--eta-method", "knn", "--gamma-grid", "0.6,0.9,1.2", "--report-out", s(&report),
        "--predictions-out", s(&preds),
    ]);
    let h = header(&report);
    let row = &csv_rows(&report)[0];
    let gamma: f64 = row[h.iter().position(|c| c == "gamma_star").unwrap()].parse().unwrap();
    assert!([0.6, 0.9, 1.2].contains(&gamma));
    let p = csv_rows(&preds);
    assert_eq!(p.len(), 150);
    assert!(p.iter().all(|r| &r[0] == "1" || &r[0] == "-1"));
}

#[test]
fn metrics_from_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("pairs.csv");
    std::fs::write(&input, "pred,truth\n1,1\n1,-1\n-1,1\n-1,-1\n1,1\n").unwrap();
    let out = ok(&["metrics", "--input", s(&input), "--alpha", "0.5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let h: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    let row = rdr.records().next().unwrap().unwrap();
    let get = |k: &str| -> f64 { row[h.iter().position(|c| c == k).unwrap()].parse().unwrap() };
    assert!((get("acc") - 0.6).abs() < 1e-12);
    assert!((get("am") - (2.0 / 3.0 + 0.5) / 2.0).abs() < 1e-12);
    assert!((get("f") - 2.0 / 3.0).abs() < 1e-12);
    assert!((get("wc") - 1.0).abs() < 1e-12);

    std::fs::write(&input, "pred,truth\n1,2\n").unwrap();
    assert_eq!(run(&["metrics", "--input", s(&input), "--alpha", "0.5"]).status.code(), Some(2));
}

#[test]
fn counterexample_table() {
    let out = run(&["verify-counterexamples"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("PASS"));
    let failed = text.lines().filter(|l| l.ends_with("FAIL")).count();
    assert_eq!(out.status.code(), Some(if failed == 0 { 0 } else { 1 }));
}

#[test]
fn run_experiment_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"source":{"kind":"preset","name":"syn2d","m":200},"alpha":0.5,"rho_list":[0.0,0.2],
            "schemes":["usq_erm","resample:knn"],"n_trials":2,"seed":5}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = ok(&["run-experiment", "--config", s(&cfg), "--out-dir", s(&out_dir)]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("usq_erm"));
    assert_eq!(csv_rows(&out_dir.join("trials.csv")).len(), 8);
    assert!(out_dir.join("summary.json").exists());
    assert!(out_dir.join("summary.md").exists());

    std::fs::write(&cfg, r#"{"source":{"kind":"preset","name":"syn2d"},"alpha":0.5,"bogus":1}"#).unwrap();
    assert_eq!(run(&["run-experiment", "--config", s(&cfg), "--out-dir", s(&out_dir)]).status.code(), Some(2));
}

#[test]
fn bad_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let model = dir.path().join("m.json");
    let o = run(&["train-usq", "--train", s(&missing), "--alpha", "0.5", "--gamma", "1", "--lambda", "1", "--model-out", s(&model)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let train = gen(dir.path(), "t.csv", "50", "1");
    let o = run(&["train-usq", "--train", s(&train), "--alpha", "1.5", "--gamma", "1", "--lambda", "1", "--model-out", s(&model)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!model.exists());
    let o = run(&["gen-data", "--preset", "nosuch", "--out", s(&missing)]);
    assert_eq!(o.status.code(), Some(2));
}
