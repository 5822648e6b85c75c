mod common;

use base64::Engine as _;
use common::*;
use graphbench_core::digest::sha256_hex;
use graphbench_core::engine::{replay, EpisodeLog, ReplayVerdict};
use graphbench_core::ActionSpec;
use graphbench_service::{ServiceConfig, PROTOCOL_HEADER, PROTOCOL_VERSION};
use reqwest::StatusCode;
use serde_json::{json, Value};

fn server() -> Server {
    Server::start(ServiceConfig::new(demo(), demo_root()))
}

fn create(s: &Server, task: &str, seed: u64) -> String {
    let res = client().post(s.url("/v1/sessions")).json(&json!({"task": task, "seed": seed})).send().unwrap();
    assert_eq!(res.status(), StatusCode::CREATED);
    let v: Value = res.json().unwrap();
    assert_eq!(v["protocol_version"], PROTOCOL_VERSION);
    v["session"].as_str().unwrap().to_string()
}

fn act(s: &Server, id: &str, body: Value) -> (StatusCode, Value) {
    let res = client().post(s.url(&format!("/v1/sessions/{id}/action"))).json(&body).send().unwrap();
    (res.status(), res.json().unwrap())
}

fn observe(s: &Server, id: &str) -> (StatusCode, Value) {
    let res = client().get(s.url(&format!("/v1/sessions/{id}/observation"))).send().unwrap();
    (res.status(), res.json().unwrap())
}

#[test]
fn unknown_task_is_a_structured_404() {
    let s = server();
    let res = client().post(s.url("/v1/sessions")).json(&json!({"task": "nope"})).send().unwrap();
    assert_eq!(res.status(), StatusCode::NOT_FOUND);
    assert_eq!(res.headers()[PROTOCOL_HEADER], PROTOCOL_VERSION);
    let v: Value = res.json().unwrap();
    assert_eq!(v["error"]["code"], "unknown-task");
    assert_eq!(v["protocol_version"], PROTOCOL_VERSION);

    let res = client().post(s.url("/v1/sessions")).json(&json!({"task": "order-status", "bogus": 1})).send().unwrap();
    assert_eq!(res.status(), StatusCode::BAD_REQUEST);
    let res = client()
        .post(s.url("/v1/sessions"))
        .json(&json!({"task": "order-status", "profile": "nope"}))
        .send()
        .unwrap();
    assert_eq!(res.status(), StatusCode::BAD_REQUEST);
    let res = client().get(s.url("/v1/sessions/zzz/observation")).send().unwrap();
    assert_eq!(res.status(), StatusCode::NOT_FOUND);
}

#[test]
fn golden_paths_complete_over_the_wire() {
    let s = server();
    let g = demo();
    for task in &g.tasks {
        let id = create(&s, &task.id, 7);
        let path = &task.golden_paths[0];
        let mut last = Value::Null;
        for a in path {
            let (st, _) = observe(&s, &id);
            assert_eq!(st, StatusCode::OK);
            let (st, v) = act(&s, &id, json!({"action": a}));
            assert_eq!(st, StatusCode::OK, "{v}");
            last = v;
        }
        let want = if task.answer_rule.is_some() { "terminated-by-agent" } else { "completed" };
        assert_eq!(last["status"], want, "{}", task.id);
        assert_eq!(last["result"]["success"], true);
        assert_eq!(last["result"]["completion"], 100.0);
        assert_eq!(last["step_index"], path.len());
        // Nothing more can happen.
        let (st, v) = act(&s, &id, json!({"action": {"action": "navigate_home"}}));
        assert_eq!(st, StatusCode::CONFLICT);
        assert_eq!(v["error"]["code"], "session-ended");
        assert_eq!(observe(&s, &id).0, StatusCode::CONFLICT);
    }
}

#[test]
fn responses_reveal_no_graph_structure() {
    let s = server();
    let id = create(&s, "order-burger-coupon", 1);
    let (_, obs) = observe(&s, &id);
    let (_, step) = act(&s, &id, json!({"action": {"action": "click", "coordinate": [200, 300]}}));
    for v in [&obs, &step] {
        let text = v.to_string();
        for leak in ["\"n0", "\"n1", "milestone", "bbox", "edge", "find-shop"] {
            assert!(!text.contains(leak), "{leak} in {text}");
        }
    }
    for path in ["/v1/curation/queue", "/v1/graph/nodes/n00", "/v1/graph"] {
        let res = client().get(s.url(path)).send().unwrap();
        assert_eq!(res.status(), StatusCode::NOT_FOUND, "{path}");
        assert_eq!(res.headers()[PROTOCOL_HEADER], PROTOCOL_VERSION);
    }
}

#[test]
fn same_seed_sessions_see_the_same_hashes() {
    let s = server();
    let path = demo().task("order-burger-coupon").unwrap().golden_paths[1].clone();
    let run = |s: &Server| {
        let id = create(s, "order-burger-coupon", 99);
        let mut hashes = Vec::new();
        for a in &path {
            hashes.push(observe(s, &id).1["observation_hash"].as_str().unwrap().to_string());
            act(s, &id, json!({"action": a}));
        }
        hashes
    };
    let (a, b) = std::thread::scope(|sc| {
        let a = sc.spawn(|| run(&s));
        let b = sc.spawn(|| run(&s));
        (a.join().unwrap(), b.join().unwrap())
    });
    assert_eq!(a, b);
    assert_eq!(a.len(), path.len());
}

#[test]
fn images_by_url_and_inline() {
    let s = server();
    let id = create(&s, "order-status", 1);
    let res = client().get(s.url(&format!("/v1/sessions/{id}/observation?inline=true"))).send().unwrap();
    let v: Value = res.json().unwrap();
    let sha = v["screen"]["sha256"].as_str().unwrap().to_string();
    let inline = base64::engine::general_purpose::STANDARD.decode(v["screen"]["data_base64"].as_str().unwrap()).unwrap();
    assert_eq!(sha256_hex(&inline), sha);

    let res = client().get(s.url(v["screen"]["url"].as_str().unwrap())).send().unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.headers()["content-type"], "image/png");
    assert_eq!(res.headers()[PROTOCOL_HEADER], PROTOCOL_VERSION);
    assert_eq!(sha256_hex(&res.bytes().unwrap()), sha);

    let (_, plain) = observe(&s, &id);
    assert!(plain["screen"].get("data_base64").is_none());
    let res = client().get(s.url(&format!("/v1/images/{}", "0".repeat(64)))).send().unwrap();
    assert_eq!(res.status(), StatusCode::NOT_FOUND);
}

#[test]
fn raw_replies_and_busy_sessions() {
    let s = server();
    let id = create(&s, "order-status", 1);
    // 720x1440 canvas, scaled to the 360x720 screen: the Meituan icon.
    let (st, v) = act(
        &s,
        &id,
        json!({"text": "sure {\"action\":\"click\",\"coordinate\":[400,600]}", "declared_dims": {"width": 720, "height": 1440}}),
    );
    assert_eq!(st, StatusCode::OK);
    assert_eq!(v["applied"], json!({"action": "click", "coordinate": [200, 300]}));
    let (_, v) = act(&s, &id, json!({"text": "no idea"}));
    assert_eq!(v["applied"], json!({"action": "wait"}));
    assert!(v["note"].as_str().unwrap().starts_with("unparseable"));
    assert_eq!(v["step_index"], 2);

    let hold = s.state.hold(&id).unwrap();
    let (st, v) = act(&s, &id, json!({"action": {"action": "navigate_back"}}));
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "busy");
    drop(hold);
    assert_eq!(act(&s, &id, json!({"action": {"action": "navigate_back"}})).0, StatusCode::OK);
}

#[test]
fn closing_a_running_session() {
    let s = server();
    let id = create(&s, "order-status", 1);
    act(&s, &id, json!({"action": {"action": "click", "coordinate": [200, 300]}}));
    let res = client().delete(s.url(&format!("/v1/sessions/{id}"))).send().unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    let v: Value = res.json().unwrap();
    assert_eq!(v["status"], "failed-agent");
    assert_eq!(v["result"]["reason"], "closed by client");
    assert_eq!(v["result"]["success"], false);
    assert_eq!(client().delete(s.url(&format!("/v1/sessions/{id}"))).send().unwrap().status(), StatusCode::NOT_FOUND);
}

#[test]
fn killed_service_leaves_a_replayable_prefix() {
    let logs = tempfile::tempdir().unwrap();
    let mut cfg = ServiceConfig::new(demo(), demo_root());
    cfg.log_dir = Some(logs.path().to_path_buf());
    let mut s = Server::start(cfg);
    let id = create(&s, "order-burger-coupon", 5);
    let path = demo().task("order-burger-coupon").unwrap().golden_paths[0].clone();
    let mut hashes = Vec::new();
    for a in &path[..4] {
        hashes.push(observe(&s, &id).1["observation_hash"].as_str().unwrap().to_string());
        act(&s, &id, json!({"action": a}));
    }
    s.stop();

    let text = std::fs::read_to_string(logs.path().join(format!("{id}.jsonl"))).unwrap();
    let log = EpisodeLog::from_jsonl(&text).unwrap();
    assert!(log.is_partial());
    assert_eq!(log.steps.len(), 4);
    assert_eq!(log.steps.iter().map(|r| r.observation_hash.clone()).collect::<Vec<_>>(), hashes);
    assert_eq!(replay(&demo(), &log).unwrap(), ReplayVerdict::Identical);
    assert_eq!(log.steps[2].action, ActionSpec::type_text("burger"));

    // A fresh service picks up where a client would resume: same seed, same prefix.
    let s2 = Server::start(ServiceConfig::new(demo(), demo_root()));
    let id2 = create(&s2, "order-burger-coupon", 5);
    for (a, h) in path[..4].iter().zip(&hashes) {
        assert_eq!(observe(&s2, &id2).1["observation_hash"].as_str().unwrap(), h);
        act(&s2, &id2, json!({"action": a}));
    }
}

#[test]
fn finished_sessions_write_a_footer() {
    let logs = tempfile::tempdir().unwrap();
    let mut cfg = ServiceConfig::new(demo(), demo_root());
    cfg.log_dir = Some(logs.path().to_path_buf());
    let s = Server::start(cfg);
    let id = create(&s, "order-status", 3);
    for a in &demo().task("order-status").unwrap().golden_paths[0] {
        act(&s, &id, json!({"action": a}));
    }
    let log = EpisodeLog::from_jsonl(&std::fs::read_to_string(logs.path().join(format!("{id}.jsonl"))).unwrap()).unwrap();
    assert!(!log.is_partial());
    assert_eq!(log.footer.as_ref().unwrap().answer.as_deref(), Some("Delivering"));
    assert_eq!(replay(&demo(), &log).unwrap(), ReplayVerdict::Identical);
}
