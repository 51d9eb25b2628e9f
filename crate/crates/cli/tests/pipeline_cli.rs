mod common;

use std::path::Path;
use std::process::Command;

use weatherpair_core::Domain;

use common::{line, review_corpus, write_corpus};

fn weatherpair(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_weatherpair"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn perfect_pair_auto_matches_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    write_corpus(
        &data,
        &[
            ("s1", Domain::Snowy, line(0.0, 0.0, 200)),
            ("c1", Domain::Clear, line(-50.0, 0.3, 400)),
            ("c2", Domain::Clear, line(0.0, 300.0, 400)),
        ],
    );
    let o = weatherpair(&["pipeline", "run", "--data-dir", s(&data), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let matches = json(&out.join("matches.json"));
    assert_eq!(matches["schema_version"], 1);
    assert_eq!(matches["outcomes"][0]["tier"], 1);
    assert_eq!(matches["outcomes"][0]["status"], "auto_matched");
    let pairs = json(&out.join("pairs.json"));
    assert_eq!(pairs["pairs"][0]["clear_id"], "c1");
    assert_eq!(pairs["pairs"][0]["sampling_interval"], 2);
    let csv = std::fs::read_to_string(out.join("coverage.csv")).unwrap();
    assert!(csv.starts_with("# weatherpair coverage-table v1\nsnowy_id,clear_id,theta,fraction\n"));
    assert_eq!(csv.lines().count(), 2 + 2 * 3);

    let first = std::fs::read(out.join("state.json")).unwrap();
    let o = weatherpair(&["pipeline", "run", "--data-dir", s(&data), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(out.join("state.json")).unwrap(), first);

    let o = weatherpair(&["splits", "generate", "--state", s(&out.join("state.json")), "--fraction-snowy", "1.0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let split = json(&out.join("splits_1.00.json"));
    assert_eq!(split["summary"]["train_snowy"], 20);
    assert_eq!(split["summary"]["train_clear"], 0);

    let o = weatherpair(&["splits", "generate", "--state", s(&out.join("state.json")), "--fraction-snowy", "0.3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("0.3"));
}

#[test]
fn tie_reports_pending_review() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    review_corpus(&data);
    let o = weatherpair(&["pipeline", "run", "--data-dir", s(&data), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stdout).contains("review pending: 2"));
    let matches = json(&out.join("matches.json"));
    let statuses: Vec<&str> = matches["outcomes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["status"].as_str().unwrap())
        .collect();
    assert_eq!(statuses, ["needs_review", "unmatched"]);

    let o = weatherpair(&["splits", "generate", "--state", s(&out.join("state.json")), "--fraction-snowy", "0.5"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 outcomes pending"));
}

#[test]
fn missing_data_dir_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = weatherpair(&["pipeline", "run", "--data-dir", s(&tmp.path().join("nope")), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn bad_config_and_bad_data_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let out = tmp.path().join("out");
    review_corpus(&data);
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "thresholds = [4.0, 2.0]\n").unwrap();
    let o = weatherpair(&["pipeline", "run", "--config", s(&cfg), "--data-dir", s(&data), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.toml"));
    assert!(!out.exists());

    std::fs::write(&cfg, "thresholds = [1.0, 3.0]\ndelta_d = 0.5\n").unwrap();
    let o = weatherpair(&["pipeline", "run", "--config", s(&cfg), "--data-dir", s(&data), "--out-dir", s(&out)]);
    assert_eq!(o.status.code(), Some(3));

    let broken = data.join("c2.csv");
    let text = std::fs::read_to_string(&broken).unwrap().replacen("\n3,", "\n3,x", 1);
    std::fs::write(&broken, text).unwrap();
    let out2 = tmp.path().join("out2");
    let o = weatherpair(&["pipeline", "run", "--data-dir", s(&data), "--out-dir", s(&out2)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("c2.csv:5:"), "{err}");
    assert!(!out2.exists());
}

#[test]
fn stats_command_writes_report_and_ecdfs() {
    let tmp = tempfile::tempdir().unwrap();
    let header = "sequence_id,frame_index,object_id,category,x,y,z,point_count,timestamp\n";
    let snowy = tmp.path().join("snowy.csv");
    let clear = tmp.path().join("clear.csv");
    std::fs::write(&snowy, format!("{header}a,0,o1,Car,0,0,0,10,0.0\na,1,o1,Car,1,0,0,12,0.3\na,0,o2,Pedestrian,5,5,0,3,0.0\n")).unwrap();
    std::fs::write(&clear, format!("{header}b,0,o1,Car,0,0,0,20,0.0\nb,1,o1,Car,0,0,0,22,0.1\n")).unwrap();
    let out = tmp.path().join("stats");
    let o = weatherpair(&[
        "stats", "--snowy", s(&snowy), "--clear", s(&clear), "--out-dir", s(&out), "--category", "Car",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&out.join("report.json"));
    assert_eq!(report["kind"], "distribution-report");
    assert_eq!(report["snowy"]["instances_per_category"]["Pedestrian"], 1);
    assert_eq!(report["snowy"]["dynamic"], 1);
    assert_eq!(report["clear"]["stationary"], 1);
    assert_eq!(report["ks"]["point_counts"], 1.0);
    let ecdf = std::fs::read_to_string(out.join("ecdf_point_count_clear.csv")).unwrap();
    assert_eq!(ecdf, "value,fraction\n20,0.5\n22,1\n");
}

#[test]
fn synth_then_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let o = weatherpair(&["synth", "--out-dir", s(&data), "--snowy", "5", "--clear", "12", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(data.join("index.csv").exists());
    let out = tmp.path().join("out");
    let o = weatherpair(&["pipeline", "run", "--data-dir", s(&data), "--out-dir", s(&out)]);
    assert!(matches!(o.status.code(), Some(0) | Some(3)));
    assert_eq!(json(&out.join("matches.json"))["outcomes"].as_array().unwrap().len(), 5);
}
