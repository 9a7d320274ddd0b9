use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_orthoqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn same_seed_same_bytes() {
    let args = [
        "run",
        "--protocol",
        "2",
        "--n",
        "30",
        "--trials",
        "4",
        "--seed",
        "11",
        "--attack",
        "purify-block",
        "--error-threshold",
        "1",
    ];
    let a = cli(&args);
    let b = cli(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json(&a);
    assert_eq!(v["runs"].as_array().unwrap().len(), 4);
    assert_eq!(v["settings"]["attack"], "purify-block");
}

#[test]
fn echoed_settings_reproduce_the_batch() {
    let dir = tempfile::tempdir().unwrap();
    let first = cli(&[
        "run",
        "--n",
        "20",
        "--trials",
        "3",
        "--noise",
        "pauli:0.7,0.1,0.1,0.1",
        "--attack",
        "two-stage",
        "--error-threshold",
        "1",
    ]);
    let seed_line = String::from_utf8(first.stderr.clone()).unwrap();
    let v = json(&first);
    assert_eq!(seed_line.trim(), format!("seed: {}", v["settings"]["seed"]));
    let path = dir.path().join("settings.json");
    std::fs::write(&path, serde_json::to_string(&v["settings"]).unwrap()).unwrap();
    let second = cli(&["run", "--config", path.to_str().unwrap()]);
    assert!(second.stderr.is_empty());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn toml_config_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("batch.toml");
    std::fs::write(
        &path,
        "protocol = 2\nn = 16\ntrials = 2\nseed = 5\nattack = \"measure-resend:block\"\nerror_threshold = 1.0\n",
    )
    .unwrap();
    let v = json(&cli(&[
        "run",
        "--config",
        path.to_str().unwrap(),
        "--trials",
        "3",
    ]));
    assert_eq!(v["settings"]["protocol"], "2");
    assert_eq!(v["settings"]["n"], 16);
    assert_eq!(v["settings"]["trials"], 3);
    assert_eq!(v["settings"]["seed"], 5);
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = dir.path().join("bad.toml");
    std::fs::write(&unknown, "protocl = 1\n").unwrap();
    for args in [
        vec!["run", "--bogus"],
        vec!["run", "--protocol", "3"],
        vec!["run", "--n", "1"],
        vec!["run", "--trials", "0"],
        vec!["run", "--attack", "purify-block", "--protocol", "1"],
        vec!["run", "--attack", "two-stage", "--protocol", "2"],
        vec!["run", "--noise", "pauli:0.5,0.5,0.5,0.5"],
        vec!["run", "--grouping", "sometimes"],
        vec!["run", "--format", "yaml"],
        vec!["run", "--config", unknown.to_str().unwrap()],
        vec!["run", "--config", "/does/not/exist.toml"],
        vec!["launch"],
    ] {
        let o = cli(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn runtime_errors_exit_two() {
    let o = cli(&["run", "--seed", "1", "--out", "/nonexistent/dir/out.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    assert_eq!(cli(&["--help"]).status.code(), Some(0));
    assert_eq!(cli(&["run", "--help"]).status.code(), Some(0));
}

#[test]
fn csv_has_a_row_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs.csv");
    let o = cli(&[
        "run",
        "--trials",
        "5",
        "--n",
        "10",
        "--seed",
        "2",
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let mut r = csv::Reader::from_path(Path::new(&out)).unwrap();
    let headers = r.headers().unwrap().clone();
    assert_eq!(&headers[0], "trial");
    let rows: Vec<_> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 5);
    for row in rows {
        assert_eq!(&row[2], "0");
        assert_eq!(&row[7], "20");
    }
}

#[test]
fn text_summary_mentions_rates() {
    let o = cli(&[
        "run", "--seed", "3", "--n", "10", "--trials", "2", "--format", "text",
    ]);
    let s = stdout(&o);
    assert!(s.starts_with("protocol 1 N=10 trials=2 seed=3"));
    assert!(s.contains("checking  error 0.000000"));
    assert!(s.contains("decoy     error 0.000000"));
}

#[test]
fn attack_table_lists_sixteen_cases() {
    let v = json(&cli(&["attack-table"]));
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 16);
    assert_eq!(v["published_inline_sum"], "88/160");
    assert_eq!(v["oracle_whole_rate"], "9/32");
    assert_eq!(v["published_whole_rate"], "93/320");
    let b00 = rows.iter().find(|r| r["case"] == "b_00").unwrap();
    assert_eq!(b00["oracle"], "0");
    let csv = stdout(&cli(&["attack-table", "--format", "csv"]));
    assert_eq!(csv.lines().count(), 17);
}

#[test]
fn efficiency_table_has_reference_rows() {
    let v = json(&cli(&["efficiency-table"]));
    let rows = v.as_array().unwrap();
    let find = |name: &str| rows.iter().find(|r| r["name"] == name).unwrap()["efficiency"].clone();
    assert_eq!(find("BB84"), "1/15");
    assert_eq!(find("modified BB84"), "1/7");
    assert_eq!(find("protocol 1"), "2/11");
    assert_eq!(find("protocol 2"), "2/9");
}
