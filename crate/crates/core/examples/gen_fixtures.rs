//! Regenerates the checked-in fixtures:
//!
//! - `fixtures/demo-food-order`: a 20-node food-ordering graph (Meituan +
//!   WeChat) with three tasks, golden paths and agent scripts.
//! - `fixtures/trajectories`: a small recorded-trajectory corpus with stub
//!   oracle answers and the node/edge counts a correct merge must produce.
//!
//! Run with `cargo run -p graphbench-core --example gen_fixtures [root]`.

use graphbench_core::digest::sha256_hex;
use image::{Rgb, RgbImage};
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

const W: u32 = 360;
const H: u32 = 720;

fn color(seed: &str) -> Rgb<u8> {
    let h = sha256_hex(seed.as_bytes());
    let b = hex::decode(&h[..6]).unwrap();
    Rgb([b[0] / 2 + 64, b[1] / 2 + 64, b[2] / 2 + 64])
}

fn fill(img: &mut RgbImage, r: [u32; 4], c: Rgb<u8>) {
    for y in r[1]..=r[3].min(H - 1) {
        for x in r[0]..=r[2].min(W - 1) {
            img.put_pixel(x, y, c);
        }
    }
}

/// A flat mock screenshot: app-colored background, a node-specific header,
/// one block per tappable region and a variant-specific feed strip.
fn render(app: &str, node: &str, variant: &str, boxes: &[[u32; 4]]) -> Vec<u8> {
    let mut img = RgbImage::from_pixel(W, H, color(app));
    fill(&mut img, [0, 0, W - 1, 15], color(node));
    fill(&mut img, [0, 520, W - 1, 540], color(&format!("{node}/{variant}")));
    for (i, b) in boxes.iter().enumerate() {
        fill(&mut img, *b, color(&format!("{node}#{i}")));
    }
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

fn write(path: &Path, bytes: &[u8]) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, bytes).unwrap();
}

fn write_json(path: &Path, v: &Value) {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    write(path, s.as_bytes());
}

fn click(x: u32, y: u32) -> Value {
    json!({"action": "click", "coordinate": [x, y]})
}

fn center(b: [u32; 4]) -> Value {
    click((b[0] + b[2]) / 2, (b[1] + b[3]) / 2)
}

struct DemoNode {
    id: &'static str,
    app: &'static str,
    name: &'static str,
    screens: usize,
    labels: &'static [&'static str],
}

const fn node(
    id: &'static str,
    app: &'static str,
    name: &'static str,
    screens: usize,
    labels: &'static [&'static str],
) -> DemoNode {
    DemoNode { id, app, name, screens, labels }
}

// Boxes reused by edges and golden paths.
const MT_ICON: [u32; 4] = [100, 200, 300, 400];
const WX_ICON: [u32; 4] = [100, 450, 300, 650];
const SEARCH_BAR: [u32; 4] = [20, 60, 340, 110];
const FAST_FOOD: [u32; 4] = [20, 150, 120, 250];
const AD_BANNER: [u32; 4] = [20, 300, 340, 450];
const ORDERS_TAB: [u32; 4] = [240, 650, 340, 710];
const RESULT_SHOP: [u32; 4] = [20, 150, 340, 250];
const CHIP: [u32; 4] = [20, 100, 120, 140];
const CATEGORY_SHOP: [u32; 4] = [20, 200, 340, 300];
const ITEM_CARD: [u32; 4] = [80, 300, 280, 500];
const ITEM_PLUS: [u32; 4] = [200, 420, 250, 470];
const ADD_BUTTON: [u32; 4] = [100, 600, 260, 660];
const CHECKOUT: [u32; 4] = [200, 650, 350, 710];
const COUPON_ROW: [u32; 4] = [20, 300, 340, 360];
const PAY_NOW: [u32; 4] = [200, 650, 350, 710];
const USE_COUPON: [u32; 4] = [20, 200, 340, 260];
const CONFIRM: [u32; 4] = [60, 600, 300, 680];
const VIEW_ORDER: [u32; 4] = [60, 400, 300, 460];
const CLOSE_AD: [u32; 4] = [300, 20, 350, 70];
const LATEST_ORDER: [u32; 4] = [20, 100, 340, 200];
const ALICE: [u32; 4] = [20, 100, 340, 180];
const DISCOVER: [u32; 4] = [180, 650, 270, 710];
const SEND: [u32; 4] = [280, 650, 350, 710];
const BACK_ARROW: [u32; 4] = [10, 20, 60, 70];
const CHATS_TAB: [u32; 4] = [0, 650, 90, 710];

fn demo(root: &Path) {
    let dir = root.join("demo-food-order");
    let nodes = [
        node("n00", "system", "home", 2, &[]),
        node("n01", "Meituan", "mt_home", 3, &[]),
        node("n02", "Meituan", "search", 1, &[]),
        node("n03", "Meituan", "results", 2, &[]),
        node("n04", "Meituan", "category", 1, &[]),
        node("n05", "Meituan", "shop", 1, &[]),
        node("n06", "Meituan", "item", 1, &[]),
        node("n07", "Meituan", "item_added", 1, &[]),
        node("n08", "Meituan", "checkout", 1, &[]),
        node("n09", "Meituan", "coupon", 1, &[]),
        node("n10", "Meituan", "pay", 1, &[]),
        node("n11", "Meituan", "order_done", 1, &[]),
        node("n12", "Meituan", "ad", 1, &["error-path"]),
        node("n13", "Meituan", "orders", 1, &[]),
        node("n14", "Meituan", "order_detail", 1, &[]),
        node("n15", "WeChat", "wx_home", 2, &[]),
        node("n16", "WeChat", "chat_alice", 1, &[]),
        node("n17", "WeChat", "chat_typed", 1, &[]),
        node("n18", "WeChat", "chat_sent", 1, &[]),
        node("n19", "WeChat", "discover", 1, &[]),
    ];
    let boxed = |src: &str, b: [u32; 4], dst: &str, note: &str| {
        json!({"src": src, "dst": dst, "action": "click", "bbox": b, "note": note})
    };
    let edges = vec![
        boxed("n00", MT_ICON, "n01", "Meituan icon"),
        boxed("n00", WX_ICON, "n15", "WeChat icon"),
        boxed("n01", SEARCH_BAR, "n02", "search bar"),
        boxed("n01", FAST_FOOD, "n04", "fast food category"),
        boxed("n01", AD_BANNER, "n12", "promotion banner"),
        boxed("n01", ORDERS_TAB, "n13", "orders tab"),
        json!({"src": "n02", "dst": "n03", "action": "type", "text": "burger", "note": "search query"}),
        boxed("n03", RESULT_SHOP, "n05", "Burger House result"),
        boxed("n03", CHIP, "n04", "fast food chip"),
        boxed("n04", CATEGORY_SHOP, "n05", "Burger House listing"),
        boxed("n05", ITEM_CARD, "n06", "item card"),
        boxed("n05", ITEM_PLUS, "n07", "quick add button inside the card"),
        boxed("n06", ADD_BUTTON, "n07", "add to cart"),
        boxed("n07", CHECKOUT, "n08", "checkout"),
        boxed("n08", COUPON_ROW, "n09", "coupon row"),
        boxed("n08", PAY_NOW, "n10", "pay now"),
        boxed("n09", USE_COUPON, "n10", "use coupon"),
        boxed("n10", CONFIRM, "n11", "confirm payment"),
        boxed("n11", VIEW_ORDER, "n14", "view order"),
        boxed("n12", CLOSE_AD, "n01", "close ad"),
        boxed("n13", LATEST_ORDER, "n14", "latest order"),
        boxed("n15", ALICE, "n16", "chat with Alice"),
        boxed("n15", DISCOVER, "n19", "discover tab"),
        json!({"src": "n16", "dst": "n17", "action": "type", "match": "regex", "text": "(?i)deliver",
               "example": "My order is delivering", "note": "message mentioning delivery"}),
        boxed("n17", SEND, "n18", "send"),
        boxed("n18", BACK_ARROW, "n15", "back arrow"),
        boxed("n19", CHATS_TAB, "n15", "chats tab"),
        json!({"src": "n12", "dst": "n01", "action": "navigate_back", "note": "leave the ad"}),
        json!({"src": "n09", "dst": "n08", "action": "navigate_back"}),
        json!({"src": "n16", "dst": "n15", "action": "navigate_back"}),
        json!({"src": "n14", "dst": "n00", "action": "navigate_home"}),
    ];

    let mut node_docs = Vec::new();
    for n in &nodes {
        let boxes: Vec<[u32; 4]> = edges
            .iter()
            .filter(|e| e["src"] == n.id)
            .filter_map(|e| serde_json::from_value(e["bbox"].clone()).ok())
            .collect();
        let mut screens = Vec::new();
        for v in 0..n.screens {
            let rel = format!("screens/{}_{}_{v}.png", n.id, n.name);
            let bytes = render(n.app, n.name, &v.to_string(), &boxes);
            write(&dir.join(&rel), &bytes);
            screens.push(json!({"image": rel, "sha256": sha256_hex(&bytes), "width": W, "height": H}));
        }
        let mut doc = json!({"id": n.id, "app": n.app, "screens": screens});
        if !n.labels.is_empty() {
            doc["labels"] = json!(n.labels);
        }
        node_docs.push(doc);
    }

    let golden_search = vec![
        center(MT_ICON),
        center(SEARCH_BAR),
        json!({"action": "type", "text": "burger"}),
        center(RESULT_SHOP),
        click(150, 350),
        center(ADD_BUTTON),
        center(CHECKOUT),
        center(COUPON_ROW),
        center(USE_COUPON),
        center(CONFIRM),
    ];
    let golden_category = vec![
        center(MT_ICON),
        center(FAST_FOOD),
        center(CATEGORY_SHOP),
        center(ITEM_PLUS),
        center(CHECKOUT),
        center(COUPON_ROW),
        center(USE_COUPON),
        center(CONFIRM),
    ];
    let tasks = json!([
        {
            "id": "order-burger-coupon",
            "instruction": "Order a burger from Burger House on Meituan, apply a coupon and pay.",
            "kind": "single_app",
            "max_steps": 15,
            "milestones": [
                {"id": "find-shop", "accept": ["n03", "n04"], "capability": "search"},
                {"id": "add-item", "accept": ["n07"], "capability": "others"},
                {"id": "apply-coupon", "accept": ["n09"], "capability": "set", "requires": ["add-item"]},
                {"id": "pay", "accept": ["n11"], "capability": "pay", "requires": ["add-item"]}
            ],
            "golden_paths": [golden_search, golden_category]
        },
        {
            "id": "order-status",
            "instruction": "Check the status of my latest Meituan order and tell me what it is.",
            "kind": "single_app",
            "max_steps": 15,
            "milestones": [
                {"id": "open-orders", "accept": ["n13"], "capability": "navigation"},
                {"id": "open-latest", "accept": ["n14"], "capability": "find"}
            ],
            "answer_rule": {"match": "regex", "text": "(?i)deliver", "example": "Delivering"},
            "golden_paths": [[center(MT_ICON), center(ORDERS_TAB), center(LATEST_ORDER),
                              {"action": "complete", "text": "Delivering"}]]
        },
        {
            "id": "tell-alice-status",
            "instruction": "Look up my latest Meituan order and message Alice on WeChat that it is being delivered.",
            "kind": "cross_app",
            "max_steps": 15,
            "milestones": [
                {"id": "open-latest", "accept": ["n14"], "capability": "find"},
                {"id": "open-chat", "accept": ["n16"], "capability": "navigation"},
                {"id": "send", "accept": ["n18"], "capability": "send"}
            ],
            "golden_paths": [[center(MT_ICON), center(ORDERS_TAB), center(LATEST_ORDER),
                              {"action": "open", "app": "WeChat"}, center(ALICE),
                              {"action": "type", "text": "My order is delivering"}, center(SEND)]]
        }
    ]);
    let manifest = json!({
        "version": 1,
        "home": "n00",
        "apps": {"Meituan": "n01", "WeChat": "n15"},
        "nodes": node_docs,
        "edges": edges,
        "tasks": tasks,
        "meta": {
            "name": "demo-food-order",
            "description": "Food ordering on Meituan plus a WeChat follow-up; n12 is an ad reached by mistake."
        }
    });
    write_json(&dir.join("manifest.json"), &manifest);

    // Ad detour, then back, then the search golden path.
    let mut backtrack = vec![center(MT_ICON), center(AD_BANNER), json!({"action": "navigate_back"})];
    backtrack.extend(golden_search.iter().skip(1).cloned());
    write_json(
        &dir.join("scripts/backtrack.json"),
        &json!([{"task": "order-burger-coupon", "actions": backtrack}]),
    );
    // Pays straight from checkout, skipping the coupon screens.
    write_json(
        &dir.join("scripts/skip-coupon.json"),
        &json!([{"task": "order-burger-coupon", "path": 0,
                 "injections": [{"at_step": 7, "action": center(PAY_NOW), "skip": 2}]}]),
    );
}

/// Planted states of the trajectory corpus. Screens sharing a group are the
/// same state; `dp` is the detail page after "like", a different state that
/// looks almost identical to `d`.
struct Shot {
    key: &'static str,
    group: &'static str,
    app: &'static str,
    boxes: &'static [[u32; 4]],
}

const T_ICON: [u32; 4] = [100, 200, 300, 400];
const T_SEARCH: [u32; 4] = [20, 60, 340, 110];
const T_TITLE: [u32; 4] = [20, 150, 340, 200];
const T_THUMB: [u32; 4] = [20, 210, 120, 300];
const T_LIKE_POINT: (u32, u32) = (310, 630);
const T_CLOSE: [u32; 4] = [300, 20, 350, 70];

const SHOTS: [Shot; 11] = [
    Shot { key: "h0", group: "H", app: "system", boxes: &[T_ICON] },
    Shot { key: "a0", group: "A", app: "Meituan", boxes: &[T_SEARCH] },
    Shot { key: "s0", group: "S", app: "Meituan", boxes: &[] },
    Shot { key: "r0", group: "R", app: "Meituan", boxes: &[T_TITLE, T_THUMB] },
    Shot { key: "d0", group: "D", app: "Meituan", boxes: &[] },
    Shot { key: "dp0", group: "DP", app: "Meituan", boxes: &[] },
    Shot { key: "a1", group: "A", app: "Meituan", boxes: &[T_SEARCH] },
    Shot { key: "s1", group: "S", app: "Meituan", boxes: &[] },
    Shot { key: "d1", group: "D", app: "Meituan", boxes: &[] },
    Shot { key: "a2", group: "A", app: "Meituan", boxes: &[T_SEARCH] },
    Shot { key: "c0", group: "C", app: "Meituan", boxes: &[T_CLOSE] },
];

/// Embedding axis per group; `dp` shares the detail axis.
fn embedding(shot_index: usize, group: &str) -> Vec<f64> {
    let axis = match group {
        "H" => 0,
        "A" => 1,
        "S" => 2,
        "R" => 3,
        "D" | "DP" => 4,
        "C" => 5,
        _ => unreachable!(),
    };
    let mut v = vec![0.0; 8];
    v[axis] = 1.0;
    if group == "DP" {
        v[7] = 0.5;
    } else {
        v[6 + shot_index % 2] = 0.3;
    }
    v
}

fn trajectories(root: &Path) {
    let dir = root.join("trajectories");
    let mut sha: BTreeMap<&str, String> = BTreeMap::new();
    let mut stubs = json!({
        "describer": {}, "embedder": {}, "judge": {}, "action_completer": {},
        "boxer_large": {}, "boxer_small": {}, "box_selector": {}
    });
    let mut texts = BTreeMap::new();
    for (i, s) in SHOTS.iter().enumerate() {
        let bytes = render(s.app, &format!("traj-{}", s.group), s.key, s.boxes);
        write(&dir.join(format!("screens/{}.png", s.key)), &bytes);
        let h = sha256_hex(&bytes);
        let text = format!("{} screen {} ({})", s.app, s.group, s.key);
        stubs["describer"][&h] = json!(text);
        stubs["embedder"][sha256_hex(text.as_bytes())] = json!(embedding(i, s.group));
        texts.insert(s.key, text);
        sha.insert(s.key, h);
    }
    // The first trajectory revisits home through a byte-identical copy.
    std::fs::copy(dir.join("screens/h0.png"), dir.join("screens/h0-copy.png")).unwrap();

    let group = |k: &str| SHOTS.iter().find(|s| s.key == k).unwrap().group;
    let keys: Vec<&str> = SHOTS.iter().map(|s| s.key).collect();
    let mut same_pairs = 0;
    for (i, a) in keys.iter().enumerate() {
        for b in &keys[i + 1..] {
            let (ga, gb) = (group(a), group(b));
            let similar = ga == gb || (ga.starts_with('D') && gb.starts_with('D'));
            if similar {
                let (x, y) = (&sha[a], &sha[b]);
                let key = if x < y { format!("{x}:{y}") } else { format!("{y}:{x}") };
                let verdict = if ga == gb { "same" } else { "different" };
                same_pairs += usize::from(ga == gb);
                stubs["judge"][key] = json!({"verdict": verdict, "rationale": format!("{a} vs {b}")});
            }
        }
    }
    // The gap in t3 stays a gap: the completer cannot name the action.
    stubs["action_completer"][format!("{}:{}", sha["a2"], sha["c0"])] = Value::Null;

    let like_key = format!("{}@{},{}", sha["d0"], T_LIKE_POINT.0, T_LIKE_POINT.1);
    stubs["boxer_large"][&like_key] = json!([270, 590, 350, 670]);
    stubs["boxer_small"][&like_key] = json!([280, 600, 340, 660]);
    stubs["box_selector"][&like_key] = json!({"choice": "small"});

    let step = |key: &str, image: &str, action: Option<Value>, bbox: Option<[u32; 4]>| {
        let s = SHOTS.iter().find(|s| s.key == key).unwrap();
        let mut v = json!({"image": format!("screens/{image}.png"), "app": s.app});
        if let Some(a) = action {
            v["action"] = a;
        }
        if let Some(b) = bbox {
            v["bbox"] = json!(b);
        }
        v
    };
    let typed = || json!({"action": "type", "text": "burger"});
    let like = click(T_LIKE_POINT.0, T_LIKE_POINT.1);
    let corpus = [
        (
            "t1",
            "bfs",
            "search, open an item, like it",
            vec![
                step("h0", "h0", Some(center(T_ICON)), Some(T_ICON)),
                step("a0", "a0", Some(center(T_SEARCH)), Some(T_SEARCH)),
                step("s0", "s0", Some(typed()), None),
                step("r0", "r0", Some(center(T_TITLE)), Some(T_TITLE)),
                step("d0", "d0", Some(like), None),
                step("dp0", "dp0", None, None),
            ],
        ),
        (
            "t2",
            "dfs",
            "same search, open the item through its thumbnail",
            vec![
                step("h0", "h0-copy", Some(center(T_ICON)), Some(T_ICON)),
                step("a1", "a1", Some(center(T_SEARCH)), Some(T_SEARCH)),
                step("s1", "s1", Some(typed()), None),
                step("r0", "r0", Some(center(T_THUMB)), Some(T_THUMB)),
                step("d1", "d1", None, None),
            ],
        ),
        (
            "t3",
            "bfs",
            "recording with a lost action, then closing a coupon popup",
            vec![
                step("a2", "a2", None, None),
                step("c0", "c0", Some(center(T_CLOSE)), Some(T_CLOSE)),
                step("a0", "a0", None, None),
            ],
        ),
    ];
    for (id, source, desc, steps) in &corpus {
        let mut out =
            serde_json::to_string(&json!({"trajectory": id, "source": source, "description": desc})).unwrap();
        out.push('\n');
        for s in steps {
            out += &serde_json::to_string(s).unwrap();
            out.push('\n');
        }
        write(&dir.join(format!("{id}.jsonl")), out.as_bytes());
    }
    write_json(&dir.join("stubs.json"), &stubs);
    write_json(
        &dir.join("oracles.json"),
        &json!({
            "describer": {"stub": "stubs.json"},
            "embedder": {"stub": "stubs.json"},
            "judge": {"stub": "stubs.json"},
            "action_completer": {"stub": "stubs.json"},
            "boxer_large": {"stub": "stubs.json"},
            "boxer_small": {"stub": "stubs.json"},
            "box_selector": {"stub": "stubs.json"}
        }),
    );
    let groups: BTreeMap<&str, Vec<&str>> = SHOTS.iter().fold(BTreeMap::new(), |mut m, s| {
        m.entry(s.group).or_default().push(s.key);
        m
    });
    write_json(
        &dir.join("ground_truth.json"),
        &json!({
            "unique_screens": SHOTS.len(),
            "nodes": groups.len(),
            "edges": 7,
            "coarse_candidates": same_pairs + 2,
            "same_pairs": same_pairs,
            "groups": groups,
            "screens": sha,
            "texts": texts
        }),
    );
}

fn main() {
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
    });
    demo(&root);
    trajectories(&root);
    println!("fixtures written to {}", root.display());
}
