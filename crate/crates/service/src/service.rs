use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use axum::http::StatusCode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use ucrec_core::data::{Config, SplitDataset};
use ucrec_core::engine::{
    explain_retrospective, prospective_preview, render_explanation, Method, ProspectivePreview, RetroHyperParams,
    RetroRequest,
};
use ucrec_core::{recommend_top_k, ItemId, MaskVector, RecommendationList, ScorerParams, SequenceWindow, UserId};

use crate::error::ApiError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct Settings {
    pub k: usize,
    pub exclude_history: bool,
    pub hyper: RetroHyperParams,
    pub method: Method,
    pub verb: String,
    pub idle: Duration,
    pub snapshot: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        Settings::from_config(&Config::default())
    }
}

impl Settings {
    pub fn from_config(cfg: &Config) -> Self {
        Settings {
            k: cfg.k,
            exclude_history: cfg.exclude_history,
            hyper: cfg.retro_hyper(),
            method: cfg.method,
            verb: cfg.interaction_verb.clone(),
            idle: Duration::from_secs(cfg.session_idle_minutes * 60),
            snapshot: cfg.snapshot_path.as_ref().map(PathBuf::from),
        }
    }
}

struct Pending {
    item: ItemId,
    preview: ProspectivePreview,
}

struct Session {
    id: String,
    user: UserId,
    window: SequenceWindow,
    mask: MaskVector,
    pending: Option<Pending>,
    created: u64,
    touched: Instant,
    cache: HashMap<(Vec<usize>, ItemId, Method), Value>,
}

#[derive(Serialize, Deserialize)]
struct SessionSnapshot {
    id: String,
    user: UserId,
    window: SequenceWindow,
    revoked: Vec<usize>,
    pending: Option<ItemId>,
    created: u64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    schema_version: u32,
    sessions: Vec<SessionSnapshot>,
}

/// Session store plus the immutable model and dataset.
pub struct Service {
    params: ScorerParams,
    data: SplitDataset,
    names: Vec<String>,
    settings: Settings,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn with_version(mut v: Value) -> Value {
    if let Value::Object(map) = &mut v {
        map.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    v
}

impl Service {
    /// `names` maps raw item ids to titles; missing titles fall back to
    /// `"Item <id>"`.
    pub fn new(
        params: ScorerParams,
        data: SplitDataset,
        names: &HashMap<String, String>,
        settings: Settings,
    ) -> anyhow::Result<Self> {
        anyhow::ensure!(
            params.n_items() == data.n_items,
            "model has {} items but the dataset has {}",
            params.n_items(),
            data.n_items
        );
        anyhow::ensure!(settings.k > 0, "k must be at least 1");
        let names = (0..data.n_items)
            .map(|i| {
                let raw = data.id_map.item_raw(ItemId::from(i));
                names.get(raw).cloned().unwrap_or_else(|| format!("Item {raw}"))
            })
            .collect();
        let service = Service {
            params,
            data,
            names,
            settings,
            sessions: Mutex::new(HashMap::new()),
        };
        if let Some(path) = service.settings.snapshot.clone() {
            if path.exists() {
                service.restore(&path)?;
            }
        }
        Ok(service)
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn params(&self) -> &ScorerParams {
        &self.params
    }

    fn name(&self, item: ItemId) -> String {
        self.names[item.idx()].clone()
    }

    fn raw(&self, item: ItemId) -> &str {
        self.data.id_map.item_raw(item)
    }

    fn item_json(&self, item: ItemId) -> Value {
        json!({"item": self.raw(item), "name": self.name(item)})
    }

    fn resolve_item(&self, raw: &str) -> Result<ItemId, ApiError> {
        self.data.id_map.item(raw).ok_or_else(|| ApiError::unknown_item(raw))
    }

    fn list_json(&self, list: &RecommendationList) -> Value {
        Value::Array(
            list.entries
                .iter()
                .enumerate()
                .map(|(r, &(item, score))| {
                    json!({"rank": r + 1, "item": self.raw(item), "name": self.name(item), "score": score})
                })
                .collect(),
        )
    }

    fn recommend(&self, window: &SequenceWindow, mask: &MaskVector) -> Result<RecommendationList, ApiError> {
        recommend_top_k(&self.params, window, mask, self.settings.k, self.settings.exclude_history)
            .map_err(|e| ApiError::internal(e.to_string()))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.expire();
        let sessions = self.sessions.lock().expect("session table");
        let s = sessions.get(id).cloned().ok_or_else(|| ApiError::unknown_session(id))?;
        Ok(s)
    }

    fn expire(&self) {
        let idle = self.settings.idle;
        if idle.is_zero() {
            return;
        }
        let mut sessions = self.sessions.lock().expect("session table");
        sessions.retain(|_, s| match s.try_lock() {
            Ok(s) => s.touched.elapsed() < idle,
            // Busy sessions are in use.
            Err(_) => true,
        });
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session table").len()
    }

    fn recommendations_body(&self, s: &Session) -> Result<Value, ApiError> {
        let list = self.recommend(&s.window, &s.mask)?;
        Ok(with_version(json!({
            "session_id": s.id,
            "recommendations": self.list_json(&list),
        })))
    }

    pub fn health(&self) -> Value {
        let dims = self.params.dims();
        with_version(json!({
            "status": "ok",
            "model": {
                "kind": self.params.kind().as_str(),
                "n_items": dims.n_items,
                "dim": dims.dim,
                "window": dims.window,
                "trained": self.params.is_trained(),
            },
            "users": self.data.users.len(),
            "sessions": self.session_count(),
            "k": self.settings.k,
            "method": self.settings.method.as_str(),
        }))
    }

    pub fn items(&self) -> Value {
        let items: Vec<Value> = (0..self.data.n_items).map(|i| self.item_json(ItemId::from(i))).collect();
        with_version(json!({ "items": items }))
    }

    /// Opens a session over the user's most recent `T` interactions.
    pub fn create_session(&self, raw_user: &str) -> Result<Value, ApiError> {
        let unknown = || ApiError::new(StatusCode::NOT_FOUND, "unknown_user", format!("no user {raw_user}"));
        let user = self.data.id_map.user(raw_user).ok_or_else(unknown)?;
        let split = self.data.user(user).ok_or_else(unknown)?;
        let window = SequenceWindow::from_history(&split.sequence(), self.params.window());
        let mask = MaskVector::binary(window.capacity());
        let session = Session {
            id: uuid::Uuid::new_v4().simple().to_string(),
            user,
            window,
            mask,
            pending: None,
            created: now_secs(),
            touched: Instant::now(),
            cache: HashMap::new(),
        };
        let body = self.recommendations_body(&session)?;
        let id = session.id.clone();
        self.expire();
        self.sessions
            .lock()
            .expect("session table")
            .insert(id.clone(), Arc::new(Mutex::new(session)));
        log::info!("session {id} opened for user {raw_user}");
        self.persist();
        Ok(body)
    }

    pub fn describe_session(&self, id: &str) -> Result<Value, ApiError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session");
        s.touched = Instant::now();
        let history: Vec<Value> = s
            .window
            .slots()
            .iter()
            .enumerate()
            .filter_map(|(t, slot)| {
                slot.map(|item| {
                    json!({
                        "position": t,
                        "item": self.raw(item),
                        "name": self.name(item),
                        "revoked": s.mask.is_revoked(t),
                    })
                })
            })
            .collect();
        let mut body = self.recommendations_body(&s)?;
        body["user_id"] = json!(self.data.id_map.user_raw(s.user));
        body["history"] = Value::Array(history);
        body["pending"] = s.pending.as_ref().map(|p| self.item_json(p.item)).unwrap_or(Value::Null);
        Ok(body)
    }

    pub fn recommendations(&self, id: &str) -> Result<Value, ApiError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session");
        s.touched = Instant::now();
        self.recommendations_body(&s)
    }

    /// Retrospective explanation for a currently recommended item.
    pub fn explain(&self, id: &str, raw_item: &str, method: Option<&str>) -> Result<Value, ApiError> {
        let method = match method {
            None => self.settings.method,
            Some(m) => match m.parse::<Method>() {
                Ok(m @ (Method::Search | Method::Relax)) => m,
                _ => {
                    return Err(ApiError::new(
                        StatusCode::BAD_REQUEST,
                        "invalid_method",
                        format!("method must be search or relax, got {m}"),
                    ))
                }
            },
        };
        let item = self.resolve_item(raw_item)?;
        let s = self.session(id)?;
        let mut s = s.lock().expect("session");
        s.touched = Instant::now();
        let key = (s.mask.revoked_positions(), item, method);
        if let Some(cached) = s.cache.get(&key) {
            return Ok(cached.clone());
        }
        let list = self.recommend(&s.window, &s.mask)?;
        if !list.contains(item) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "not_recommended",
                format!("item {raw_item} is not currently recommended"),
            ));
        }
        let req = RetroRequest::new(s.window.clone(), item, self.settings.k)
            .with_base_mask(s.mask.clone())
            .with_hyper(self.settings.hyper.clone())
            .with_exclude_history(self.settings.exclude_history);
        let started = Instant::now();
        let record = explain_retrospective(&self.params, &req, method, 0).map_err(|e| ApiError::internal(e.to_string()))?;
        log::info!(
            "explanation for item {raw_item} ({method}) in {:?}: {:?}",
            started.elapsed(),
            record.status
        );
        let name = |i: ItemId| self.name(i);
        let text = render_explanation(&record, &name, &self.settings.verb);
        let revoked: Vec<Value> = record
            .revoked
            .iter()
            .map(|&(t, i)| json!({"position": t, "item": self.raw(i), "name": self.name(i)}))
            .collect();
        let mut body = json!({
            "session_id": s.id,
            "item": self.raw(item),
            "name": self.name(item),
            "method": method.as_str(),
            "status": if record.is_success() { "success" } else { "failure" },
            "target_rank": record.target_rank.map(|r| r + 1),
            "revoked": revoked,
            "iterations": record.iterations,
            "text": text,
        });
        if let Some(reason) = &record.diagnostic {
            body["reason"] = json!(reason);
        }
        let body = with_version(body);
        s.cache.insert(key, body.clone());
        Ok(body)
    }

    /// Revokes window positions atomically.
    pub fn revoke(&self, id: &str, positions: &[usize]) -> Result<Value, ApiError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session");
        s.touched = Instant::now();
        let invalid = |msg: String| ApiError::new(StatusCode::BAD_REQUEST, "invalid_positions", msg);
        let mut seen = BTreeSet::new();
        for &t in positions {
            if t >= s.window.capacity() || s.window.slot(t).is_none() {
                return Err(invalid(format!("position {t} holds no past behavior")));
            }
            if s.mask.is_revoked(t) {
                return Err(invalid(format!("position {t} is already revoked")));
            }
            if !seen.insert(t) {
                return Err(invalid(format!("position {t} is listed twice")));
            }
        }
        if !positions.is_empty() {
            for &t in positions {
                s.mask.set(t, true);
            }
            s.cache.clear();
            if let Some(p) = s.pending.take() {
                // The staged preview was computed against the old mask.
                let preview = self.preview(&s, p.item)?;
                s.pending = Some(Pending { item: p.item, preview });
            }
        }
        let body = self.recommendations_body(&s)?;
        drop(s);
        self.persist();
        Ok(body)
    }

    fn preview(&self, s: &Session, item: ItemId) -> Result<ProspectivePreview, ApiError> {
        prospective_preview(&self.params, &s.window, &s.mask, item, self.settings.k, self.settings.exclude_history)
            .map_err(|e| ApiError::internal(e.to_string()))
    }

    /// Stages an interaction and reports which items it would bring in.
    pub fn interact(&self, id: &str, raw_item: &str) -> Result<Value, ApiError> {
        let item = self.resolve_item(raw_item)?;
        let s = self.session(id)?;
        let mut s = s.lock().expect("session");
        s.touched = Instant::now();
        if let Some(p) = &s.pending {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "pending_interaction",
                format!("item {} is still pending; confirm or undo it first", self.raw(p.item)),
            ));
        }
        let preview = self.preview(&s, item)?;
        let name = |i: ItemId| self.name(i);
        let text = render_explanation(&preview.record, &name, &self.settings.verb);
        let added: Vec<Value> = preview.record.added_items.iter().map(|&i| self.item_json(i)).collect();
        let body = with_version(json!({
            "session_id": s.id,
            "item": self.raw(item),
            "name": self.name(item),
            "added_items": added,
            "text": text,
            "recommendations_after": self.list_json(&preview.after),
        }));
        s.pending = Some(Pending { item, preview });
        drop(s);
        self.persist();
        Ok(body)
    }

    /// Commits the pending interaction.
    pub fn confirm(&self, id: &str) -> Result<Value, ApiError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session");
        s.touched = Instant::now();
        let p = s.pending.take().ok_or_else(nothing_pending)?;
        s.window = p.preview.window_after;
        s.mask = p.preview.mask_after;
        s.cache.clear();
        let body = self.recommendations_body(&s)?;
        drop(s);
        self.persist();
        Ok(body)
    }

    /// Discards the pending interaction.
    pub fn undo(&self, id: &str) -> Result<Value, ApiError> {
        let s = self.session(id)?;
        let mut s = s.lock().expect("session");
        s.touched = Instant::now();
        s.pending.take().ok_or_else(nothing_pending)?;
        let body = self.recommendations_body(&s)?;
        drop(s);
        self.persist();
        Ok(body)
    }

    fn persist(&self) {
        let Some(path) = &self.settings.snapshot else { return };
        if let Err(e) = self.write_snapshot(path) {
            log::warn!("could not write session snapshot {}: {e}", path.display());
        }
    }

    fn write_snapshot(&self, path: &Path) -> anyhow::Result<()> {
        let sessions: Vec<Arc<Mutex<Session>>> =
            self.sessions.lock().expect("session table").values().cloned().collect();
        let mut snaps: Vec<SessionSnapshot> = sessions
            .iter()
            .map(|s| {
                let s = s.lock().expect("session");
                SessionSnapshot {
                    id: s.id.clone(),
                    user: s.user,
                    window: s.window.clone(),
                    revoked: s.mask.revoked_positions(),
                    pending: s.pending.as_ref().map(|p| p.item),
                    created: s.created,
                }
            })
            .collect();
        snaps.sort_by(|a, b| a.id.cmp(&b.id));
        let text = serde_json::to_string(&Snapshot {
            schema_version: SCHEMA_VERSION,
            sessions: snaps,
        })?;
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    fn restore(&self, path: &Path) -> anyhow::Result<()> {
        let snap: Snapshot = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let mut table = self.sessions.lock().expect("session table");
        for s in snap.sessions {
            anyhow::ensure!(
                s.window.capacity() == self.params.window(),
                "snapshot window size does not match the model"
            );
            s.window.validate(self.params.n_items())?;
            anyhow::ensure!(
                s.revoked.iter().all(|&t| t < s.window.capacity()),
                "snapshot revokes a position outside the window"
            );
            let mut session = Session {
                id: s.id,
                user: s.user,
                mask: MaskVector::from_positions(s.window.capacity(), s.revoked),
                window: s.window,
                pending: None,
                created: s.created,
                touched: Instant::now(),
                cache: HashMap::new(),
            };
            if let Some(item) = s.pending {
                let preview = self.preview(&session, item)?;
                session.pending = Some(Pending { item, preview });
            }
            table.insert(session.id.clone(), Arc::new(Mutex::new(session)));
        }
        log::info!("restored {} sessions from {}", table.len(), path.display());
        Ok(())
    }
}

fn nothing_pending() -> ApiError {
    ApiError::new(StatusCode::CONFLICT, "nothing_pending", "no interaction is pending")
}
