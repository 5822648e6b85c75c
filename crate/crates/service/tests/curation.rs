mod common;

use common::*;
use graphbench_core::builder::*;
use graphbench_core::digest::sha256_hex;
use graphbench_core::graph::load_graph;
use graphbench_service::{CurationConfig, ServiceConfig};
use reqwest::StatusCode;
use serde_json::{json, Value};
use std::sync::Arc;

fn corpus() -> std::path::PathBuf {
    fixtures().join("trajectories")
}

/// Runs the pipeline into a fresh store and serves the resulting draft.
fn curated() -> (Server, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let mut store = CurationStore::open(&dir.path().join("store")).unwrap();
    let suite = OracleSuite::from_config(&corpus().join("oracles.json"), None).unwrap();
    let ts = ingest_trajectories(&corpus()).unwrap();
    let out = build_draft(ts, &suite, Some(&mut store), &PipelineConfig::default()).unwrap();
    let draft = dir.path().join("draft");
    write_draft(&out.draft, &out.trajectories, &draft).unwrap();
    let g = Arc::new(load_graph(&draft.join("manifest.json")).unwrap());
    let mut cfg = ServiceConfig::new(g, draft);
    cfg.curation = Some(CurationConfig { store, image_dirs: vec![corpus().join("screens")] });
    (Server::start(cfg), dir)
}

fn get(s: &Server, path: &str) -> (StatusCode, Value) {
    let res = client().get(s.url(path)).send().unwrap();
    (res.status(), res.json().unwrap())
}

fn post(s: &Server, path: &str, body: Value) -> (StatusCode, Value) {
    let res = client().post(s.url(path)).json(&body).send().unwrap();
    (res.status(), res.json().unwrap())
}

#[test]
fn queue_filters_and_pages() {
    let (s, _d) = curated();
    let (st, all) = get(&s, "/v1/curation/queue");
    assert_eq!(st, StatusCode::OK);
    assert_eq!(all["total"], 8);
    assert!(all["items"].as_array().unwrap().iter().all(|i| i["status"] == "open"));

    let (_, merges) = get(&s, "/v1/curation/queue?kind=merge-candidate");
    assert_eq!(merges["total"], 7);
    let (_, boxes) = get(&s, "/v1/curation/queue?kind=bbox");
    assert_eq!(boxes["total"], 1);
    assert_eq!(boxes["items"][0]["id"], "bb-t1-4");
    assert_eq!(boxes["items"][0]["payload"]["bbox"], json!([280, 600, 340, 660]));

    let (_, page) = get(&s, "/v1/curation/queue?limit=3&offset=3");
    assert_eq!(page["items"].as_array().unwrap().len(), 3);
    assert_eq!(page["next_offset"], 6);
    assert_eq!(page["items"][0]["id"], all["items"][3]["id"]);
    let (_, tail) = get(&s, "/v1/curation/queue?limit=3&offset=6");
    assert!(tail.get("next_offset").is_none() || tail["next_offset"].is_null());

    let (st, v) = get(&s, "/v1/curation/queue?kind=nonsense");
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "bad-request");
}

#[test]
fn decisions_are_recorded_once() {
    let (s, _d) = curated();
    let (_, merges) = get(&s, "/v1/curation/queue?kind=merge-candidate&limit=1");
    let id = merges["items"][0]["id"].as_str().unwrap().to_string();
    let path = format!("/v1/curation/items/{id}/decision");

    let (st, v) = post(&s, &path, json!({"actor": "ann", "verdict": "approve"}));
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "invalid-decision");
    let (st, _) = post(&s, &path, json!({"actor": "", "verdict": "same-node"}));
    assert_eq!(st, StatusCode::UNPROCESSABLE_ENTITY);
    let (st, _) = post(&s, &path, json!({"verdict": "same-node"}));
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (st, d) = post(&s, &path, json!({"actor": "ann", "verdict": "different-node"}));
    assert_eq!(st, StatusCode::CREATED, "{d}");
    assert_eq!(d["actor"], "ann");
    assert_eq!(d["verdict"], "different-node");

    let (st, v) = post(&s, &path, json!({"actor": "bob", "verdict": "same-node"}));
    assert_eq!(st, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "conflict");
    assert_eq!(v["detail"]["actor"], "ann");

    let (_, item) = get(&s, &format!("/v1/curation/items/{id}"));
    assert_eq!(item["status"], "decided");
    assert_eq!(item["decision"]["verdict"], "different-node");
    let (_, open) = get(&s, "/v1/curation/queue?status=open");
    assert_eq!(open["total"], 7);
    // Decided items sort after open ones.
    let (_, all) = get(&s, "/v1/curation/queue");
    assert_eq!(all["items"][7]["id"], id.as_str());

    let (st, v) = post(&s, "/v1/curation/items/nope/decision", json!({"actor": "ann", "verdict": "reject"}));
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "unknown-item");

    let (st, d) = post(&s, "/v1/curation/items/bb-t1-4/decision", json!({"actor": "ann", "verdict": "edit-bbox", "bbox": [1, 2, 30, 40]}));
    assert_eq!(st, StatusCode::CREATED);
    assert_eq!(d["bbox"], json!([1, 2, 30, 40]));
}

#[test]
fn decisions_persist_across_restarts() {
    let (mut s, d) = curated();
    let (_, q) = get(&s, "/v1/curation/queue?kind=merge-candidate&limit=1");
    let id = q["items"][0]["id"].as_str().unwrap().to_string();
    post(&s, &format!("/v1/curation/items/{id}/decision"), json!({"actor": "ann", "verdict": "same-node"}));
    s.stop();
    let store = CurationStore::open(&d.path().join("store")).unwrap();
    assert_eq!(store.get(&id).unwrap().decision.unwrap().verdict, DecisionVerdict::SameNode);
}

#[test]
fn node_inspection() {
    let (s, _d) = curated();
    let (_, summary) = get(&s, "/v1/graph");
    assert_eq!(summary["nodes"].as_array().unwrap().len(), 7);
    let home = summary["home"].as_str().unwrap().to_string();

    let (st, n) = get(&s, &format!("/v1/graph/nodes/{home}"));
    assert_eq!(st, StatusCode::OK);
    assert_eq!(n["is_home"], true);
    assert_eq!(n["in_edges"].as_array().unwrap().len(), 0);
    let out = n["out_edges"].as_array().unwrap();
    assert!(!out.is_empty());
    assert!(out.iter().all(|e| e["src"] == home.as_str() && e["index"].is_u64()));
    assert_eq!(n["milestones"], json!([]));

    let sc = &n["screens"][0];
    let res = client().get(s.url(sc["url"].as_str().unwrap())).send().unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(sha256_hex(&res.bytes().unwrap()), sc["sha256"].as_str().unwrap());

    let meituan = summary["apps"]["Meituan"].as_str().unwrap();
    let (_, m) = get(&s, &format!("/v1/graph/nodes/{meituan}"));
    assert_eq!(m["app_root_of"], json!(["Meituan"]));
    assert!(m["in_edges"].as_array().unwrap().iter().any(|e| e["src"] == home.as_str()));

    let (st, v) = get(&s, "/v1/graph/nodes/n99");
    assert_eq!(st, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "unknown-node");
}

#[test]
fn corpus_screens_are_served_by_hash() {
    let (s, _d) = curated();
    // Screens cut by the per-node cap are still reachable for review.
    let (_, q) = get(&s, "/v1/curation/queue?kind=merge-candidate");
    for item in q["items"].as_array().unwrap() {
        for sha in item["screens"].as_array().unwrap() {
            let res = client().get(s.url(&format!("/v1/images/{}", sha.as_str().unwrap()))).send().unwrap();
            assert_eq!(res.status(), StatusCode::OK);
            assert_eq!(sha256_hex(&res.bytes().unwrap()), sha.as_str().unwrap());
        }
    }
}

#[test]
fn demo_milestones_show_on_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ServiceConfig::new(demo(), demo_root());
    cfg.curation = Some(CurationConfig { store: CurationStore::open(dir.path()).unwrap(), image_dirs: vec![] });
    let s = Server::start(cfg);
    let g = demo();
    let task = g.task("order-status").unwrap();
    let m = &task.milestones[0];
    let node = m.accept.iter().next().unwrap();
    let (_, n) = get(&s, &format!("/v1/graph/nodes/{node}"));
    let ms = n["milestones"].as_array().unwrap();
    assert!(ms.iter().any(|x| x["task"] == "order-status" && x["milestone"] == m.id.as_str()));
    let (_, q) = get(&s, "/v1/curation/queue");
    assert_eq!(q["total"], 0);
}
