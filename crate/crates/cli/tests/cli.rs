use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn manifest() -> PathBuf {
    fixtures().join("demo-food-order/manifest.json")
}

fn corpus() -> PathBuf {
    fixtures().join("trajectories")
}

fn gb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphbench")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_and_stats() {
    let o = gb(&["validate", s(&manifest())]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("ok: 20 nodes, 31 edges, 3 tasks"));

    let o = gb(&["stats", s(&manifest()), "--json"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["nodes"], 20);
    assert_eq!(v["tasks"], 3);
    assert_eq!(v["cross_app_tasks"], 1);

    let o = gb(&["validate", "/nonexistent/manifest.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_score_and_replay_agree() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = gb(&["eval", s(&manifest()), "--agent", "oracle", "--seed", "11", "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["average"]["sr"], 100.0);
    assert_eq!(report["meta"]["seed"], 11);

    let scored = dir.path().join("scored");
    let o = gb(&["score", s(&manifest()), "--logs", s(&out.join("logs")), "--out", s(&scored)]);
    assert!(o.status.success());
    let again: Value = serde_json::from_str(&std::fs::read_to_string(scored.join("report.json")).unwrap()).unwrap();
    assert_eq!(again["episodes"], report["episodes"]);
    assert_eq!(again["average"], report["average"]);

    let log = out.join("logs/order-status.jsonl");
    let o = gb(&["replay", s(&manifest()), s(&log)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("identical: 4 steps"));

    // Flip one observation hash and replay names that step.
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    lines[3]["observation_hash"] = Value::String("0".repeat(64));
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, lines.iter().map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    let o = gb(&["replay", s(&manifest()), s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("diverged at step 2"), "{}", stdout(&o));
}

#[test]
fn eval_rejects_unknown_agents_and_tasks() {
    let o = gb(&["eval", s(&manifest()), "--agent", "psychic"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gb(&["eval", s(&manifest()), "--agent", "oracle", "--tasks", "no-such-task"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gb(&["eval", s(&manifest()), "--agent", "random", "--tasks", "kind:cross_app", "--sequential"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("cross-app         1"));
}

#[test]
fn merge_writes_a_draft_and_queues_review() {
    let dir = tempfile::tempdir().unwrap();
    let (out, store) = (dir.path().join("draft"), dir.path().join("store"));
    let (input, oracles) = (corpus(), corpus().join("oracles.json"));
    let args = ["merge", "--in", s(&input), "--oracles", s(&oracles), "--out", s(&out), "--store", s(&store)];
    let o = gb(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).trim(), "draft: 7 nodes, 7 edges, 7 merge candidates, 8 queued");
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("merge-report.json")).unwrap()).unwrap();
    assert_eq!(report["gaps"].as_array().unwrap().len(), 1);

    // The gap leaves one screen without an inbound edge until it is curated.
    let o = gb(&["validate", s(&out.join("manifest.json")), "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let findings = v["findings"].as_array().unwrap();
    assert_eq!(findings.len(), 1);
    assert_eq!(findings[0]["finding"], "unreachable");

    let o = gb(&args);
    assert!(stdout(&o).trim().ends_with("0 queued"));

    let o = gb(&["merge", "--in", s(&corpus()), "--oracles", s(&oracles), "--out", s(&out), "--threshold", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn annotate_prints_boxes() {
    let o = gb(&["annotate", "--in", s(&corpus()), "--oracles", s(&corpus().join("oracles.json"))]);
    assert!(o.status.success());
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["trajectory"], "t1");
    assert_eq!(v[0]["step"], 4);
}

#[test]
fn supplement_reads_probe_logs() {
    let dir = tempfile::tempdir().unwrap();
    let probes = dir.path().join("probes");
    std::fs::create_dir_all(&probes).unwrap();
    let script = dir.path().join("probe.json");
    let clicks: Vec<Value> = [(30, 90), (40, 100), (320, 690), (330, 700)]
        .iter()
        .map(|&(x, y)| serde_json::json!({"action": "click", "coordinate": [x, y]}))
        .collect();
    std::fs::write(&script, serde_json::json!([{"task": "order-status", "actions": clicks}]).to_string()).unwrap();
    let run = dir.path().join("run");
    let spec = format!("script:{}", script.display());
    let o = gb(&["eval", s(&manifest()), "--agent", &spec, "--tasks", "order-status", "--out", s(&run)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::copy(run.join("logs/order-status.jsonl"), probes.join("p1.jsonl")).unwrap();

    let store = dir.path().join("store");
    let o = gb(&["supplement", s(&manifest()), "--probes", s(&probes), "--store", s(&store)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("2 proposals queued"));
}

#[test]
fn serve_answers_until_interrupted() {
    use std::io::{BufRead, BufReader};
    let mut child = Command::new(env!("CARGO_BIN_EXE_graphbench"))
        .args(["serve", s(&manifest()), "--addr", "127.0.0.1:0"])
        .stderr(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let url = loop {
        let l = lines.next().unwrap().unwrap();
        if let Some(u) = l.strip_prefix("listening on ") {
            break u.to_string();
        }
    };
    let health = std::net::TcpStream::connect(url.trim_start_matches("http://")).map(|mut c| {
        use std::io::{Read, Write};
        c.write_all(b"GET /v1/health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
        let mut buf = String::new();
        c.read_to_string(&mut buf).unwrap();
        buf
    });
    child.kill().unwrap();
    child.wait().unwrap();
    let body = health.unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("graphbench-wire/1"));
}
