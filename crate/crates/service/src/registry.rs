//! Live sessions, their expiry and the per-session action coalescer.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::Notify;

use posemap_core::avatar::{AvatarAssets, PredictorConfig, MANIFEST_FILE};
use posemap_core::rollout::{Session, WorldFrame};
use posemap_core::{splat, ActionLabel, Vec3};

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::protocol::{FrameMessage, PayloadKind};

/// Public description of a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub avatar: String,
    /// Seconds since the Unix epoch.
    pub created_at: f64,
    pub predictor: PredictorConfig,
    pub payload: PayloadKind,
    pub origin: [f64; 3],
    pub round: u64,
    pub world_root: [f64; 3],
    pub dropped: u64,
}

/// Single-slot mailbox: a newer action replaces one not yet stepped.
#[derive(Debug, Default)]
pub struct Coalescer {
    pending: Mutex<Option<ActionLabel>>,
    notify: Notify,
    dropped: AtomicU64,
}

impl Coalescer {
    pub fn offer(&self, action: ActionLabel) {
        if self.pending.lock().unwrap().replace(action).is_some() {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
        self.notify.notify_one();
    }

    pub fn take(&self) -> Option<ActionLabel> {
        self.pending.lock().unwrap().take()
    }

    /// Discards a pending action, counting it as dropped.
    pub fn clear(&self) {
        if self.take().is_some() {
            self.dropped.fetch_add(1, Ordering::Relaxed);
        }
    }

    pub async fn wait(&self) {
        self.notify.notified().await
    }

    pub fn dropped(&self) -> u64 {
        self.dropped.load(Ordering::Relaxed)
    }
}

pub struct SessionEntry {
    id: String,
    avatar: Arc<AvatarAssets>,
    predictor: PredictorConfig,
    payload: PayloadKind,
    origin: Vec3,
    created_at: f64,
    session: Mutex<Session>,
    last_used: Mutex<Instant>,
    pub coalescer: Coalescer,
}

impl SessionEntry {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn payload(&self) -> PayloadKind {
        self.payload
    }

    pub fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }

    fn idle_for(&self) -> Duration {
        self.last_used.lock().unwrap().elapsed()
    }

    pub fn info(&self) -> SessionInfo {
        let s = self.session.lock().unwrap();
        SessionInfo {
            id: self.id.clone(),
            avatar: self.avatar.id().to_string(),
            created_at: self.created_at,
            predictor: self.predictor,
            payload: self.payload,
            origin: self.origin.into(),
            round: s.state.round(),
            world_root: s.state.world_root().into(),
            dropped: self.coalescer.dropped(),
        }
    }

    /// Advances one round and encodes the result. Blocking.
    pub fn step(&self, action: ActionLabel) -> Result<FrameMessage, ServiceError> {
        self.touch();
        let frame = self.session.lock().unwrap().step(action)?;
        frame_message(&frame, &self.avatar, self.payload, self.coalescer.dropped())
    }
}

/// Encodes a rollout frame as points or world-placed splats.
pub fn frame_message(
    frame: &WorldFrame,
    avatar: &AvatarAssets,
    kind: PayloadKind,
    dropped: u64,
) -> Result<FrameMessage, ServiceError> {
    let payload = match kind {
        PayloadKind::Points => frame.world_positions.iter().flat_map(|p| [p.x as f32, p.y as f32, p.z as f32]).collect(),
        PayloadKind::Splats => splat::world_splats(frame, &avatar.base, avatar.manifest.upscale_factor)?
            .splats
            .iter()
            .flat_map(|s| s.channels())
            .collect(),
    };
    Ok(FrameMessage {
        round: u32::try_from(frame.round).unwrap_or(u32::MAX),
        action: frame.action,
        kind,
        dropped: u32::try_from(dropped).unwrap_or(u32::MAX),
        world_root: frame.world_root.into(),
        payload,
    })
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub avatar: String,
    #[serde(default)]
    pub predictor: Option<PredictorConfig>,
    #[serde(default)]
    pub payload: Option<PayloadKind>,
    #[serde(default)]
    pub origin: Option<[f64; 3]>,
}

pub struct Registry {
    config: ServiceConfig,
    avatars: HashMap<String, Arc<AvatarAssets>>,
    sessions: RwLock<HashMap<String, Arc<SessionEntry>>>,
    closed: Mutex<HashSet<String>>,
    counter: AtomicU64,
}

impl Registry {
    pub fn new(config: ServiceConfig, avatars: Vec<AvatarAssets>) -> Self {
        let avatars = avatars.into_iter().map(|a| (a.id().to_string(), Arc::new(a))).collect();
        Self {
            config,
            avatars,
            sessions: RwLock::new(HashMap::new()),
            closed: Mutex::new(HashSet::new()),
            counter: AtomicU64::new(0),
        }
    }

    /// Loads every avatar named in the config or found under its assets directory.
    pub fn from_config(config: ServiceConfig) -> Result<Self, ServiceError> {
        let mut dirs: Vec<_> = config.avatars.iter().map(|a| (Some(a.id.clone()), a.path.clone())).collect();
        if let Some(root) = &config.assets {
            let mut found: Vec<_> = std::fs::read_dir(root)
                .map_err(|e| ServiceError::Config(format!("{}: {e}", root.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join(MANIFEST_FILE).is_file())
                .collect();
            found.sort();
            dirs.extend(found.into_iter().map(|p| (None, p)));
        }
        let mut avatars: Vec<AvatarAssets> = Vec::new();
        for (id, dir) in dirs {
            let mut a = load_avatar(&dir)?;
            if let Some(id) = id {
                a.manifest.id = id;
            }
            if avatars.iter().any(|b| b.id() == a.id()) {
                return Err(ServiceError::Config(format!("avatar id {:?} registered twice", a.id())));
            }
            log::info!("avatar {} loaded from {}", a.id(), dir.display());
            avatars.push(a);
        }
        Ok(Self::new(config, avatars))
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn avatar(&self, id: &str) -> Option<&Arc<AvatarAssets>> {
        self.avatars.get(id)
    }

    pub fn avatar_ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self.avatars.keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn session_count(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    /// Builds and registers a session. Blocking (initialises predictor state).
    pub fn create(&self, req: &CreateSession) -> Result<Arc<SessionEntry>, ServiceError> {
        let avatar = self.avatars.get(&req.avatar).ok_or_else(|| ServiceError::UnknownAvatar(req.avatar.clone()))?.clone();
        if self.session_count() >= self.config.max_sessions {
            return Err(ServiceError::Capacity(self.config.max_sessions));
        }
        let predictor = req.predictor.unwrap_or(self.config.defaults);
        let origin = Vec3::from(req.origin.unwrap_or([0.0; 3]));
        let session = avatar.new_session(&predictor, origin)?;
        let n = self.counter.fetch_add(1, Ordering::Relaxed) + 1;
        let id = format!("s-{n}-{:08x}", rand::rng().random::<u32>());
        let entry = Arc::new(SessionEntry {
            id: id.clone(),
            avatar,
            predictor,
            payload: req.payload.unwrap_or(self.config.payload),
            origin,
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
            session: Mutex::new(session),
            last_used: Mutex::new(Instant::now()),
            coalescer: Coalescer::default(),
        });
        let mut sessions = self.sessions.write().unwrap();
        if sessions.len() >= self.config.max_sessions {
            return Err(ServiceError::Capacity(self.config.max_sessions));
        }
        sessions.insert(id, entry.clone());
        Ok(entry)
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionEntry>, ServiceError> {
        if let Some(e) = self.sessions.read().unwrap().get(id) {
            return Ok(e.clone());
        }
        if self.closed.lock().unwrap().contains(id) {
            Err(ServiceError::SessionGone(id.to_string()))
        } else {
            Err(ServiceError::UnknownSession(id.to_string()))
        }
    }

    pub fn close(&self, id: &str) -> Result<(), ServiceError> {
        let entry = self.get(id)?;
        self.retire(&entry);
        Ok(())
    }

    fn retire(&self, entry: &SessionEntry) {
        entry.coalescer.clear();
        self.sessions.write().unwrap().remove(&entry.id);
        self.closed.lock().unwrap().insert(entry.id.clone());
        entry.coalescer.notify.notify_waiters();
    }

    /// Retires sessions idle for longer than `timeout`; returns their ids.
    pub fn expire_idle(&self, timeout: Duration) -> Vec<String> {
        let stale: Vec<_> =
            self.sessions.read().unwrap().values().filter(|e| e.idle_for() > timeout).cloned().collect();
        for e in &stale {
            log::info!("session {} expired after {:?} idle", e.id, timeout);
            self.retire(e);
        }
        stale.into_iter().map(|e| e.id.clone()).collect()
    }

    pub fn is_live(&self, id: &str) -> bool {
        self.sessions.read().unwrap().contains_key(id)
    }
}

fn load_avatar(dir: &Path) -> Result<AvatarAssets, ServiceError> {
    AvatarAssets::load(dir).map_err(|e| ServiceError::Config(format!("avatar at {}: {e}", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coalescer_counts_replacements() {
        let c = Coalescer::default();
        assert_eq!(c.take(), None);
        c.offer(ActionLabel::Forward);
        c.offer(ActionLabel::Left);
        c.offer(ActionLabel::Right);
        assert_eq!(c.dropped(), 2);
        assert_eq!(c.take(), Some(ActionLabel::Right));
        assert_eq!(c.take(), None);
        c.offer(ActionLabel::Idle);
        c.clear();
        assert_eq!(c.dropped(), 3);
    }
}
