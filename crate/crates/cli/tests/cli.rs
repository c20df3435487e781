use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const PREP: &str = "# preparation with error excision
load 10 0.6 init=detect
image nondestructive
pump {PUMP}
microwave 0.99 DPRIME M_MINUS
image error
measure M_MINUS
";

fn erasim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_erasim")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_script(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn preparation_run_reports_excised_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "prep.txt", &PREP.replace("{PUMP}", "20ms"));
    let out = dir.path().join("out");
    let args = [
        "run",
        "--script",
        script.to_str().unwrap(),
        "--trials",
        "100000",
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ];
    let res = erasim(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["master_seed"], 7);
    assert_eq!(summary["measure_target"], "M_MINUS");
    let f_e = summary["excised_fidelity"]["value"].as_f64().unwrap();
    let sigma = summary["excised_fidelity"]["sigma"].as_f64().unwrap();
    assert!(sigma > 0.0 && sigma < 1e-3);
    assert!((f_e - 0.952).abs() < 0.010, "f_E {f_e}");
    let meta = json(&out.join("meta.json"));
    assert!(meta["started_unix_s"].as_f64().unwrap() > 0.0);
    assert!(fs::read_to_string(out.join("records.csv")).unwrap().lines().count() > 1);
}

#[test]
fn rerun_is_byte_identical_outside_the_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "prep.txt", &PREP.replace("{PUMP}", "20ms"));
    let run = |name: &str, format: &str| {
        let out = dir.path().join(name);
        let res = erasim(&[
            "run",
            "--script",
            script.to_str().unwrap(),
            "--trials",
            "500",
            "--seed",
            "3",
            "--out",
            out.to_str().unwrap(),
            "--format",
            format,
        ]);
        assert_eq!(code(&res), 0, "{}", stderr(&res));
        out
    };
    for format in ["csv", "jsonl"] {
        let (a, b) = (run(&format!("a-{format}"), format), run(&format!("b-{format}"), format));
        let records = format!("records.{format}");
        assert_eq!(fs::read(a.join(&records)).unwrap(), fs::read(b.join(&records)).unwrap());
        assert_eq!(fs::read(a.join("summary.json")).unwrap(), fs::read(b.join("summary.json")).unwrap());
    }
}

#[test]
fn exit_codes_separate_error_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let run = |script: &Path, extra: &[&str]| {
        let mut args = vec!["run", "--script", script.to_str().unwrap(), "--trials", "10", "--out", out];
        args.extend_from_slice(extra);
        erasim(&args)
    };

    let bad = write_script(dir.path(), "bad.txt", "load 10 1 init=Q_DOWN\nhold 5 parsecs\nmeasure Q_DOWN\n");
    let res = run(&bad, &["--seed", "1"]);
    assert_eq!(code(&res), 3);
    assert!(stderr(&res).contains("line 2"), "{}", stderr(&res));

    let good = write_script(dir.path(), "good.txt", "load 2 1 init=Q_DOWN\nhold 1ms\nmeasure Q_DOWN\n");
    assert_eq!(code(&run(&good, &[])), 2, "seed is mandatory");
    assert_eq!(code(&run(&good, &["--seed", "1", "--set", "trap.nope=3"])), 2);
    assert_eq!(code(&run(&good, &["--seed", "1", "--set", "noequals"])), 2);
    assert_eq!(code(&erasim(&["run", "--bogus"])), 2);

    let rule =
        write_script(dir.path(), "rule.txt", "load 2 1 init=Q_DOWN\nmicrowave 0.9 Q_DOWN M_MINUS\nmeasure Q_DOWN\n");
    let res = run(&rule, &["--seed", "1"]);
    assert_eq!(code(&res), 3, "selection rules are checked while parsing");
    assert!(stderr(&res).contains("E012"));

    let long = write_script(dir.path(), "long.txt", "load 1 1 init=Q_DOWN\nhold 2s\nmeasure Q_DOWN\n");
    assert_eq!(code(&run(&long, &["--seed", "1"])), 0);
    assert_eq!(code(&run(&long, &["--seed", "1", "--strict"])), 4);

    let composite = write_script(
        dir.path(),
        "composite.txt",
        "load 2 1 init=Q_DOWN\ncomposite_detect xb mode=full\nmeasure Q_DOWN\n",
    );
    assert_eq!(code(&run(&composite, &["--seed", "1"])), 0);
    assert_eq!(code(&run(&composite, &["--seed", "1", "--preset", "xa-current"])), 4);
}

#[test]
fn config_file_merges_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    write_script(dir.path(), "hold.txt", "load 2 1 init=Q_DOWN\nhold 10ms\nmeasure Q_DOWN\n");
    let cfg = write_script(
        dir.path(),
        "run.toml",
        "script = \"hold.txt\"\ntrials = 20\nseed = 1\nout = \"out\"\n[params.vacuum]\ngamma_vac = 0.5\n",
    );
    let res = erasim(&["run", "--config", cfg.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let summary = json(&dir.path().join("out/summary.json"));
    assert_eq!(summary["master_seed"], 9);
    assert_eq!(summary["n_records"], 40);

    let default = erasim(&["run", "--config", cfg.to_str().unwrap(), "--set", "vacuum.gamma_vac=0.074"]);
    assert_eq!(code(&default), 0);
    let again = json(&dir.path().join("out/summary.json"));
    assert_ne!(summary["params_digest"], again["params_digest"]);
}

#[test]
fn threshold_sweep_gives_monotone_roc_columns() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "prep.txt", &PREP.replace("{PUMP}", "20ms"));
    let out = dir.path().join("sweep");
    let res = erasim(&[
        "sweep",
        "--script",
        script.to_str().unwrap(),
        "--trials",
        "200",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
        "--key",
        "images.error.threshold",
        "--values",
        "3,4,5,6,7,8",
    ]);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut rows = csv_rows(&table);
    let header = rows.remove(0);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let e01: Vec<f64> = rows.iter().map(|r| r[col("model_eps01")].parse().unwrap()).collect();
    let e10: Vec<f64> = rows.iter().map(|r| r[col("model_eps10")].parse().unwrap()).collect();
    assert_eq!(rows.len(), 6);
    assert!(e01.windows(2).all(|w| w[1] <= w[0]));
    assert!(e10.windows(2).all(|w| w[1] >= w[0]));
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn pump_duration_sweep_through_placeholder() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_script(dir.path(), "prep.txt", PREP);
    let out = dir.path().join("pump");
    let base = [
        "sweep",
        "--script",
        script.to_str().unwrap(),
        "--trials",
        "300",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ];
    let mut args = base.to_vec();
    args.extend(["--key", "script.PUMP", "--values", "0.2ms,1ms,20ms"]);
    let res = erasim(&args);
    assert_eq!(code(&res), 0, "{}", stderr(&res));
    let rows = csv_rows(&fs::read_to_string(out.join("sweep.csv")).unwrap());
    assert_eq!(rows.len(), 4);
    let mut empty = base.to_vec();
    empty.extend(["--key", "images.error.threshold", "--values", ""]);
    assert_eq!(code(&erasim(&empty)), 2);
    let mut missing = base.to_vec();
    missing.extend(["--key", "script.NOPE", "--values", "1"]);
    assert_eq!(code(&erasim(&missing)), 2);
}

#[test]
fn reproduce_lists_and_rejects_unknown_targets() {
    let listed = erasim(&["reproduce", "--list"]);
    assert_eq!(code(&listed), 0);
    let text = String::from_utf8_lossy(&listed.stdout);
    assert_eq!(text.lines().count(), 9);
    assert!(text.contains("prep-fidelity") && text.contains("composite-eps-p"));

    let unknown = erasim(&["reproduce", "no-such-target"]);
    assert_eq!(code(&unknown), 2);
    assert!(stderr(&unknown).contains("imaging-lifetime"));
}

#[test]
fn reproduce_property_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let res = erasim(&["reproduce", "property-suite", "--json", report.to_str().unwrap()]);
    assert_eq!(code(&res), 0, "{}", String::from_utf8_lossy(&res.stdout));
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("PASS criterion 9"));
    let reports = json(&report);
    assert!(reports[0]["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn reproduce_failure_exits_with_one() {
    let res = erasim(&["reproduce", "roc-operating-point", "--set", "images.error.dropout_prob=0.5"]);
    assert_eq!(code(&res), 1);
    assert!(String::from_utf8_lossy(&res.stdout).starts_with("FAIL criterion 2"));
}

#[test]
fn catalog_and_rates_are_json() {
    let res = erasim(&["catalog"]);
    assert_eq!(code(&res), 0);
    let bins: Value = serde_json::from_slice(&res.stdout).unwrap();
    let bins = bins.as_array().unwrap();
    assert_eq!(bins.len(), 14);
    let m_minus = bins.iter().find(|b| b["bin"] == "M_MINUS").unwrap();
    assert_eq!(m_minus["preparation_class"], "TARGET");
    assert_eq!(m_minus["qubit_class"], "ERASABLE");

    let res = erasim(&["rates", "--set", "blackbody.gamma_01=0.125"]);
    assert_eq!(code(&res), 0);
    let table: Value = serde_json::from_slice(&res.stdout).unwrap();
    let rates = table["rates"].as_array().unwrap();
    let excite = rates.iter().find(|r| r["from"] == "Q_DOWN" && r["to"] == "V1_N1").unwrap();
    assert!((excite["rate_per_s"].as_f64().unwrap() - 0.125).abs() < 1e-12);
}
