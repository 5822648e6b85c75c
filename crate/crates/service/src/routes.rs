use crate::state::{AppState, Entry};
use crate::wire::*;
use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use base64::Engine as _;
use graphbench_core::builder::{CurationError, QueueFilter};
use graphbench_core::engine::{EngineError, LogHeader, LogWriter, Session};
use graphbench_core::harness::{apply_reply, AgentReply};
use graphbench_core::NodeId;
use serde::Serialize;
use serde_json::{json, Value};
use std::sync::Arc;

type Shared = Arc<AppState>;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    extra: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into(), extra: None }
    }

    fn with(mut self, extra: Value) -> Self {
        self.extra = Some(extra);
        self
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }

    fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown-session", format!("no session `{id}`"))
    }

    fn busy() -> Self {
        Self::new(StatusCode::CONFLICT, "busy", "another request on this session is in flight")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({
            "protocol_version": PROTOCOL_VERSION,
            "error": ErrorBody { code: self.code.into(), message: self.message },
        });
        if let Some(extra) = self.extra {
            body["detail"] = extra;
        }
        (self.status, axum::Json(body)).into_response()
    }
}

fn reply<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let mut v = serde_json::to_value(body).expect("response serializes");
    if let Value::Object(m) = &mut v {
        m.insert("protocol_version".into(), PROTOCOL_VERSION.into());
    }
    (status, axum::Json(v)).into_response()
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn add_protocol_header(mut res: Response) -> Response {
    res.headers_mut().insert(PROTOCOL_HEADER, HeaderValue::from_static(PROTOCOL_VERSION));
    res
}

/// Session endpoints, images and health. Curation and graph inspection are
/// added only when the state carries a curation store, so agents never see
/// graph structure.
pub fn router(state: Shared) -> Router {
    let mut r = Router::new()
        .route("/v1/health", get(health))
        .route("/v1/profiles", get(profiles))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(session_status).delete(close_session))
        .route("/v1/sessions/{id}/observation", get(observation))
        .route("/v1/sessions/{id}/action", post(action))
        .route("/v1/images/{sha}", get(image));
    if state.store.is_some() {
        r = r
            .route("/v1/curation/queue", get(queue))
            .route("/v1/curation/items/{id}", get(item))
            .route("/v1/curation/items/{id}/decision", post(decide))
            .route("/v1/graph", get(graph_summary))
            .route("/v1/graph/nodes/{id}", get(node));
    }
    r.fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not-found", "no such endpoint") })
        .layer(axum::middleware::map_response(add_protocol_header))
        .with_state(state)
}

async fn health(State(s): State<Shared>) -> Response {
    reply(
        StatusCode::OK,
        &json!({"status": "ok", "manifest_digest": s.graph().digest(), "sessions": s.session_count()}),
    )
}

async fn profiles(State(s): State<Shared>) -> Response {
    let names: Vec<&str> = s.cfg.profiles.names().collect();
    reply(StatusCode::OK, &json!({"profiles": names, "default": s.cfg.default_profile}))
}

async fn create_session(State(s): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let profile_name = req.profile.unwrap_or_else(|| s.cfg.default_profile.clone());
    let profile = s
        .cfg
        .profiles
        .get(&profile_name)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "unknown-profile", e.to_string()))?
        .clone();
    let seed = req.seed.unwrap_or_else(graphbench_core::default_seed);
    let session = match Session::start(s.cfg.graph.clone(), &req.task, seed) {
        Ok(x) => x,
        Err(EngineError::UnknownTask(t)) => {
            return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown-task", format!("no task `{t}`")));
        }
        Err(e) => return Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "engine", e.to_string())),
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let writer = match &s.cfg.log_dir {
        Some(dir) => {
            let task = session.task();
            let header = LogHeader::new(&task.id, seed, s.graph().digest(), task.max_steps);
            let path = dir.join(format!("{id}.jsonl"));
            Some(LogWriter::create(&path, &header).map_err(|e| {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "log", format!("{}: {e}", path.display()))
            })?)
        }
        None => None,
    };
    let body = SessionCreated {
        session: id.clone(),
        task: session.task().id.clone(),
        instruction: session.task().instruction.clone(),
        seed,
        max_steps: session.task().max_steps,
        profile: profile_name,
    };
    let entry = Entry { session, writer, profile };
    s.sessions.write().expect("session map").insert(id, Arc::new(tokio::sync::Mutex::new(entry)));
    Ok(reply(StatusCode::CREATED, &body))
}

async fn lock(s: &AppState, id: &str) -> Result<tokio::sync::OwnedMutexGuard<Entry>, ApiError> {
    let slot = s.slot(id).ok_or_else(|| ApiError::unknown_session(id))?;
    slot.try_lock_owned().map_err(|_| ApiError::busy())
}

fn ended(e: &Entry) -> ApiError {
    ApiError::new(StatusCode::CONFLICT, "session-ended", format!("session is {:?}", e.session.status()))
        .with(serde_json::to_value(e.result()).expect("result serializes"))
}

#[derive(serde::Deserialize)]
struct ObservationQuery {
    #[serde(default)]
    inline: bool,
}

async fn observation(
    State(s): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<ObservationQuery>,
) -> Result<Response, ApiError> {
    let e = lock(&s, &id).await?;
    let obs = e.session.observe().map_err(|_| ended(&e))?;
    let data_base64 = if q.inline {
        let path = s.images.path(&obs.screen.sha256).ok_or_else(|| {
            ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "missing-image", obs.screen.sha256.clone())
        })?;
        let bytes = tokio::fs::read(path)
            .await
            .map_err(|err| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "missing-image", err.to_string()))?;
        Some(base64::engine::general_purpose::STANDARD.encode(bytes))
    } else {
        None
    };
    let body = ObservationBody {
        session: id,
        step_index: obs.step_index,
        remaining_steps: obs.remaining_steps,
        observation_hash: obs.hash(),
        screen: ScreenRef {
            url: format!("/v1/images/{}", obs.screen.sha256),
            sha256: obs.screen.sha256,
            width: obs.screen.width,
            height: obs.screen.height,
            data_base64,
        },
    };
    Ok(reply(StatusCode::OK, &body))
}

fn summary(id: String, e: &Entry) -> StepSummary {
    let log = e.session.log();
    let last = log.steps.last();
    StepSummary {
        session: id,
        step_index: e.session.step_count(),
        remaining_steps: e.session.task().max_steps.saturating_sub(e.session.step_count()),
        applied: last.map(|r| r.outcome.applied.clone()).unwrap_or(graphbench_core::ActionSpec::Wait { coordinate: None }),
        note: last.and_then(|r| r.note.clone()),
        status: e.session.status(),
        result: e.result(),
    }
}

async fn action(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: ActionRequest = parse_body(&body)?;
    let mut e = lock(&s, &id).await?;
    if e.session.status().is_terminal() {
        return Err(ended(&e));
    }
    let reply_ = match (&req, req.raw()) {
        (ActionRequest::Canonical { action }, _) => AgentReply::Action(action.clone()),
        (_, Some(raw)) => AgentReply::Raw(raw),
        _ => unreachable!("raw requests carry text"),
    };
    let entry = &mut *e;
    apply_reply(&mut entry.session, &reply_, &entry.profile)
        .map_err(|err| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "engine", err.to_string()))?;
    e.sync();
    Ok(reply(StatusCode::OK, &summary(id, &e)))
}

async fn session_status(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let e = lock(&s, &id).await?;
    Ok(reply(StatusCode::OK, &summary(id, &e)))
}

/// Ends the session. A running one is recorded as failed by the agent.
async fn close_session(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let mut e = lock(&s, &id).await?;
    if !e.session.status().is_terminal() {
        e.session.fail_agent("closed by client");
    }
    e.sync();
    let body = summary(id.clone(), &e);
    drop(e);
    s.sessions.write().expect("session map").remove(&id);
    Ok(reply(StatusCode::OK, &body))
}

async fn image(State(s): State<Shared>, Path(sha): Path<String>) -> Result<Response, ApiError> {
    let not_found = || ApiError::new(StatusCode::NOT_FOUND, "unknown-image", format!("no image `{sha}`"));
    let path = s.images.path(&sha).ok_or_else(not_found)?;
    let bytes = tokio::fs::read(path).await.map_err(|_| not_found())?;
    Ok((
        [(header::CONTENT_TYPE, "image/png"), (header::CACHE_CONTROL, "public, max-age=31536000, immutable")],
        bytes,
    )
        .into_response())
}

fn curation_err(e: CurationError) -> ApiError {
    match e {
        CurationError::UnknownItem(id) => ApiError::new(StatusCode::NOT_FOUND, "unknown-item", format!("no item `{id}`")),
        CurationError::Conflict(d) => ApiError::new(StatusCode::CONFLICT, "conflict", format!("already decided by {}", d.actor))
            .with(serde_json::to_value(*d).expect("decision serializes")),
        e @ (CurationError::WrongVerdict { .. } | CurationError::NoActor) => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-decision", e.to_string())
        }
        e => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store", e.to_string()),
    }
}

async fn queue(State(s): State<Shared>, f: Result<Query<QueueFilter>, QueryRejection>) -> Result<Response, ApiError> {
    let Query(f) = f.map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "bad-request", e.body_text()))?;
    let store = s.store.as_ref().expect("mounted with a store").lock().expect("store lock");
    Ok(reply(StatusCode::OK, &store.queue(&f)))
}

async fn item(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let store = s.store.as_ref().expect("mounted with a store").lock().expect("store lock");
    let e = store.get(&id).ok_or(CurationError::UnknownItem(id)).map_err(curation_err)?;
    Ok(reply(StatusCode::OK, &e))
}

async fn decide(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: DecisionRequest = parse_body(&body)?;
    let mut store = s.store.as_ref().expect("mounted with a store").lock().expect("store lock");
    let d = store.decide(&id, &req.actor, req.verdict).map_err(curation_err)?;
    Ok(reply(StatusCode::CREATED, &d))
}

async fn graph_summary(State(s): State<Shared>) -> Response {
    let g = s.graph();
    let nodes: Vec<Value> = g
        .nodes
        .values()
        .map(|n| json!({"id": n.id, "app": n.app, "screens": n.screens.len(), "out_edges": g.out_edges(&n.id).len()}))
        .collect();
    reply(
        StatusCode::OK,
        &json!({"manifest_digest": g.digest(), "home": g.home, "apps": g.apps, "nodes": nodes}),
    )
}

async fn node(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let g = s.graph();
    let nid = NodeId::new(id.clone());
    let n = g.node(&nid).ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown-node", format!("no node `{id}`")))?;
    let screens: Vec<Value> = n
        .screens
        .iter()
        .map(|sc| json!({"sha256": sc.sha256, "width": sc.width, "height": sc.height, "url": format!("/v1/images/{}", sc.sha256)}))
        .collect();
    let edge = |i: usize| {
        let e = &g.edges[i];
        let mut v = serde_json::to_value(e).expect("edge serializes");
        v["index"] = i.into();
        v
    };
    let out: Vec<Value> = g.out_edges(&nid).iter().map(|&i| edge(i)).collect();
    let inbound: Vec<Value> = (0..g.edges.len()).filter(|&i| g.edges[i].dst == nid).map(edge).collect();
    let milestones: Vec<Value> = g
        .tasks
        .iter()
        .flat_map(|t| {
            t.milestones
                .iter()
                .filter(|m| m.accept.contains(&nid))
                .map(|m| json!({"task": t.id, "milestone": m.id, "capability": m.capability}))
        })
        .collect();
    let roots: Vec<&str> = g.apps.iter().filter(|(_, r)| **r == nid).map(|(a, _)| a.as_str()).collect();
    Ok(reply(
        StatusCode::OK,
        &json!({
            "id": n.id,
            "app": n.app,
            "labels": n.labels,
            "is_home": g.home == nid,
            "app_root_of": roots,
            "screens": screens,
            "out_edges": out,
            "in_edges": inbound,
            "milestones": milestones,
        }),
    ))
}
