use crate::images::ImageIndex;
use crate::wire::FinalResult;
use graphbench_core::action::{ParserProfile, ProfileRegistry};
use graphbench_core::builder::CurationStore;
use graphbench_core::engine::{LogWriter, Session};
use graphbench_core::metrics::{score_episode, Percent};
use graphbench_core::GraphBenchmark;
use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use tokio::sync::OwnedMutexGuard;

pub struct ServiceConfig {
    pub graph: Arc<GraphBenchmark>,
    /// Directory the manifest's image paths are relative to.
    pub asset_root: PathBuf,
    /// One `<session>.jsonl` per session, synced after every step.
    pub log_dir: Option<PathBuf>,
    pub profiles: ProfileRegistry,
    pub default_profile: String,
    /// Mounts the curation and graph-inspection endpoints.
    pub curation: Option<CurationConfig>,
}

impl ServiceConfig {
    pub fn new(graph: Arc<GraphBenchmark>, asset_root: PathBuf) -> Self {
        Self {
            graph,
            asset_root,
            log_dir: None,
            profiles: ProfileRegistry::builtin(),
            default_profile: "json".into(),
            curation: None,
        }
    }
}

pub struct CurationConfig {
    pub store: CurationStore,
    /// Extra directories of screenshots (e.g. the trajectory corpus) served
    /// by content address alongside the graph's own screens.
    pub image_dirs: Vec<PathBuf>,
}

pub(crate) struct Entry {
    pub session: Session<Arc<GraphBenchmark>>,
    pub writer: Option<LogWriter>,
    pub profile: ParserProfile,
}

impl Entry {
    pub fn sync(&mut self) {
        if let Some(w) = &mut self.writer {
            if let Err(e) = w.sync(self.session.log()) {
                tracing::error!(error = %e, "episode log write failed");
            }
        }
    }

    pub fn result(&self) -> Option<FinalResult> {
        let footer = self.session.log().footer.as_ref()?;
        let score = score_episode(self.session.task(), self.session.log()).ok()?;
        Some(FinalResult {
            status: footer.status,
            steps: footer.steps as usize,
            success: score.success,
            completion: Percent::of(score.reached.len(), score.total).map_or(0.0, Percent::as_f64),
            answer: footer.answer.clone(),
            reason: footer.reason.clone(),
        })
    }
}

pub(crate) type SessionSlot = Arc<tokio::sync::Mutex<Entry>>;

pub struct AppState {
    pub(crate) cfg: ServiceConfig,
    pub(crate) images: ImageIndex,
    pub(crate) sessions: RwLock<HashMap<String, SessionSlot>>,
    pub(crate) store: Option<Mutex<CurationStore>>,
}

/// Holds a session's lock; actions on it are answered `busy` meanwhile.
pub struct SessionHold(#[allow(dead_code)] OwnedMutexGuard<Entry>);

impl AppState {
    pub fn new(mut cfg: ServiceConfig) -> std::io::Result<Arc<Self>> {
        let mut images = ImageIndex::from_graph(&cfg.graph, &cfg.asset_root);
        let store = match cfg.curation.take() {
            Some(c) => {
                for d in &c.image_dirs {
                    images.scan_dir(d)?;
                }
                Some(Mutex::new(c.store))
            }
            None => None,
        };
        Ok(Arc::new(Self { cfg, images, sessions: RwLock::new(HashMap::new()), store }))
    }

    pub fn graph(&self) -> &GraphBenchmark {
        &self.cfg.graph
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().expect("session map").len()
    }

    pub(crate) fn slot(&self, id: &str) -> Option<SessionSlot> {
        self.sessions.read().expect("session map").get(id).cloned()
    }

    /// Takes a session's lock from outside a request, e.g. for maintenance.
    pub fn hold(&self, id: &str) -> Option<SessionHold> {
        self.slot(id)?.try_lock_owned().ok().map(SessionHold)
    }

    /// Flushes every open session's log. Logs of unfinished sessions stay
    /// footer-less and replay as prefixes.
    pub async fn drain(&self) {
        let slots: Vec<SessionSlot> = self.sessions.read().expect("session map").values().cloned().collect();
        for s in slots {
            s.lock().await.sync();
        }
    }
}
