use std::path::Path;
use std::process::{Command, Output};

fn fedecg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedecg"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"
rounds = 2
seed = 3
[data]
classes = ["NSR", "AF", "SB"]
per_class = 10
seconds = 8.0
[pipeline]
k = 12
fractions = [0.6, 0.2, 0.2]
[model]
kind = "DNN"
hidden_layers = 1
hidden_units = 16
[gbdt]
rounds = 3
"#;

fn write_config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, format!("{extra}\n{SMALL}")).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn synth_writes_records_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = fedecg(&["synth", "--out", out.to_str().unwrap(), "--classes", "NSR,AF", "--per-class", "3", "--seed", "9"]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = String::from_utf8(o.stdout).unwrap();
        assert!(text.contains("NSR\t3") && text.contains("AF\t3"), "{text}");
    }
    assert_eq!(std::fs::read(a.join("manifest.csv")).unwrap(), std::fs::read(b.join("manifest.csv")).unwrap());
    let names: Vec<_> = std::fs::read_dir(a.join("records")).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 6);
    for n in names {
        let rel = Path::new("records").join(&n);
        assert_eq!(std::fs::read(a.join(&rel)).unwrap(), std::fs::read(b.join(&rel)).unwrap());
    }
}

#[test]
fn synth_rejects_unsupported_class() {
    let dir = tempfile::tempdir().unwrap();
    let o = fedecg(&["synth", "--out", dir.path().to_str().unwrap(), "--classes", "LBBB"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().filter(|l| l.starts_with("error kind=")).count(), 1, "{err}");
}

#[test]
fn run_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cl = write_config(dir.path(), "cl.toml", "scenario = \"CL\"\nout = \"cl\"");
    let fl = write_config(dir.path(), "fl.toml", "scenario = \"FL-IID\"\nclients = 2\nout = \"fl\"");
    for c in [&cl, &fl] {
        let o = fedecg(&["run", "--config", c]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let metrics = std::fs::read_to_string(dir.path().join("fl/metrics.json")).unwrap();
    assert!(metrics.contains("\"f1\""));
    let partition = std::fs::read_to_string(dir.path().join("fl/partition.json")).unwrap();
    assert_eq!(partition.matches("\"distinct_records\"").count(), 2);

    let csv = dir.path().join("cmp.csv");
    let o = fedecg(&[
        "compare",
        dir.path().join("fl").to_str().unwrap(),
        dir.path().join("cl").to_str().unwrap(),
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scenario,model,balancing,N,F1,accuracy,seconds");
    assert!(lines[1].starts_with("CL,DNN,ROS+RUS,1,"));
    assert!(lines[2].starts_with("FL-IID,DNN,ROS+RUS,2,"));
}

#[test]
fn same_seed_same_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "out = \"r\"");
    let out1 = dir.path().join("r1");
    let out2 = dir.path().join("r2");
    for out in [&out1, &out2] {
        let o = fedecg(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "11"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let strip = |p: &Path| {
        std::fs::read_to_string(p.join("metrics.json")).unwrap().lines().filter(|l| !l.contains("seconds")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(strip(&out1), strip(&out2));
    assert!(std::fs::read_to_string(out1.join("config.json")).unwrap().contains("\"seed\": 11"));
}

#[test]
fn user_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = fedecg(&["run", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error kind=io"));

    let bad = write_config(dir.path(), "bad.toml", "rounds_typo = 1");
    let o = fedecg(&["run", "--config", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error kind=config"));

    let o = fedecg(&["compare", dir.path().to_str().unwrap(), "--out", "x.csv"]);
    assert_eq!(o.status.code(), Some(1));

    let o = fedecg(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error kind=usage"));
}

