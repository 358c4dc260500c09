use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use firecdr::cli::run;

const SMALL: &str = r#"
seed = 7

[window]
first_day = "2012-01-01"
last_day = "2012-02-29"

[synth]
n_antennas = 150
n_fires = 400
n_missing_hours = 10

[synth.sites]
big = 2
small = 3
rural = 6
double_fire = 1

[synth.trajectories]
users_per_period = 300
"#;

const STAGE_FILES: &[(&str, &[&str])] = &[
    ("ingest", &["ingest_summary.txt"]),
    ("join", &["pairs.csv", "join_summary.json"]),
    ("classify", &["classes.csv", "centroids.json"]),
    (
        "align",
        &["profile_RURAL.csv", "profile_SMALL_CITY.csv", "profile_BIG_CITY.csv", "ratios.json"],
    ),
    ("visitors", &["visitors.csv", "visitors_summary.json"]),
    ("daily", &["daily.csv", "daily_trend.json"]),
    ("export", &["scene.json"]),
];

fn firecdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_firecdr")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A small scenario generated into `<tmp>/data`, with its config at `<tmp>/small.toml`.
fn small_data(tmp: &Path) -> (PathBuf, PathBuf) {
    let cfg = tmp.join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let data = tmp.join("data");
    let o = firecdr(&["synth", "--config", s(&cfg), "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    (cfg, data)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(["firecdr", "--help"]), 0);
    assert_eq!(run(["firecdr", "pipeline", "--help"]), 0);
    assert_eq!(run(["firecdr", "--version"]), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(["firecdr"]), 1);
    assert_eq!(run(["firecdr", "frobnicate"]), 1);
    assert_eq!(run(["firecdr", "join", "--data", "x"]), 1);
}

#[test]
fn missing_input_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("nowhere");
    let o = firecdr(&["join", "--data", s(&data), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&s(&data.join("antennas.csv")).to_owned()), "{}", stderr(&o));
}

#[test]
fn malformed_row_names_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    let (_, data) = small_data(tmp.path());
    let path = data.join("antennas.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "3,not-a-number,-5.0";
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let o = firecdr(&["join", "--data", s(&data), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("antennas.csv") && err.contains("line 3"), "{err}");
}

#[test]
fn bad_config_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[analysis]\njoin_threshold_km = -1.0\n").unwrap();
    let o = firecdr(&["synth", "--config", s(&cfg), "--out", s(&tmp.path().join("d"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.toml"), "{}", stderr(&o));
}

#[test]
fn synth_is_deterministic_and_seed_sensitive() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, data) = small_data(tmp.path());
    let again = tmp.path().join("again");
    assert!(firecdr(&["synth", "--config", s(&cfg), "--out", s(&again)]).status.success());
    assert_eq!(snapshot(&data), snapshot(&again));
    let other = tmp.path().join("other");
    assert!(firecdr(&["synth", "--config", s(&cfg), "--seed", "8", "--out", s(&other)]).status.success());
    assert_ne!(snapshot(&data), snapshot(&other));
}

#[test]
fn every_stage_writes_its_files_reruns_identically_and_leaves_inputs_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, data) = small_data(tmp.path());
    let before = snapshot(&data);
    for (stage, files) in STAGE_FILES {
        let mut outs = Vec::new();
        for round in 0..2 {
            let out = tmp.path().join(format!("{stage}-{round}"));
            let o = firecdr(&[stage, "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
            assert!(o.status.success(), "{stage}: {}", stderr(&o));
            assert!(!stderr(&o).trim().is_empty(), "{stage} printed no summary");
            for f in *files {
                assert!(out.join(f).is_file(), "{stage} did not write {f}");
            }
            outs.push(snapshot(&out));
        }
        assert_eq!(outs[0], outs[1], "{stage} rerun differs");
    }
    assert_eq!(before, snapshot(&data), "inputs were modified");
}

#[test]
fn ingest_reports_every_file() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, data) = small_data(tmp.path());
    let out = tmp.path().join("out");
    let o = firecdr(&["ingest", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]);
    assert!(o.status.success());
    let summary = fs::read_to_string(out.join("ingest_summary.txt")).unwrap();
    for f in ["antennas.csv", "traffic.csv", "trajectories.csv", "fires.csv", "lights.asc"] {
        let line = summary.lines().find(|l| l.starts_with(f)).unwrap_or_else(|| panic!("no line for {f}"));
        assert!(line.contains("rows=") && line.contains("kept=") && line.contains("skipped=") && line.contains("missing_hours="));
    }
    assert!(summary.contains("traffic.csv") && summary.lines().any(|l| l.starts_with("traffic.csv") && l.ends_with("missing_hours=10")));
}

#[test]
fn pipeline_matches_the_stages_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, data) = small_data(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = firecdr(&["--threads", "1", "pipeline", "--config", s(&cfg), "--data", s(&data), "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert_eq!(snapshot(&a), snapshot(&b));
    let staged = tmp.path().join("staged");
    let o = firecdr(&["export", "--config", s(&cfg), "--data", s(&data), "--out", s(&staged)]);
    assert!(o.status.success());
    assert_eq!(fs::read(a.join("scene.json")).unwrap(), fs::read(staged.join("scene.json")).unwrap());
}

#[test]
fn pipeline_without_data_synthesizes_first() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let out = tmp.path().join("out");
    let o = firecdr(&["pipeline", "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("data/manifest.json").is_file());
    assert!(out.join("scene.json").is_file());
}

#[test]
fn serve_refuses_a_malformed_scene() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene.json");
    fs::write(&scene, r#"{"schema_version":2}"#).unwrap();
    let o = firecdr(&["serve", "--scene", s(&scene), "--addr", "127.0.0.1:0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("scene.json"));
}

fn get(addr: &str, path: &str) -> (String, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    write!(stream, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut text = String::new();
    stream.read_to_string(&mut text).unwrap();
    let (head, body) = text.split_once("\r\n\r\n").unwrap();
    (head.to_owned(), body.to_owned())
}

#[test]
fn serve_answers_over_http() {
    let tmp = tempfile::tempdir().unwrap();
    let (cfg, data) = small_data(tmp.path());
    let out = tmp.path().join("out");
    assert!(firecdr(&["export", "--config", s(&cfg), "--data", s(&data), "--out", s(&out)]).status.success());
    let mut child = Command::new(env!("CARGO_BIN_EXE_firecdr"))
        .args(["serve", "--scene", s(&out.join("scene.json")), "--addr", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit("http://").next().unwrap().to_owned();

    let (head, body) = get(&addr, "/healthz");
    assert!(head.starts_with("HTTP/1.1 200"));
    assert!(head.to_ascii_lowercase().contains("access-control-allow-origin: *"));
    assert_eq!(body, "ok");
    let (head, _) = get(&addr, "/missing");
    assert!(head.starts_with("HTTP/1.1 404"));
    let (_, first) = get(&addr, "/scene");
    let (_, second) = get(&addr, "/scene");
    assert_eq!(first, second);
    child.kill().unwrap();
    child.wait().unwrap();
}
