//! In-memory session store.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use seeded_laplacian::image::{ImageRgb, Mask};
use seeded_laplacian::segment::SessionState;

pub const DEFAULT_TTL: Duration = Duration::from_secs(30 * 60);

#[derive(Debug)]
pub struct SessionData {
    pub gt: Option<Mask>,
    /// Taken out while a computation runs.
    pub state: Option<SessionState>,
    pub mask: Option<Mask>,
    pub last_used: Instant,
}

#[derive(Debug)]
pub struct Session {
    pub id: String,
    pub image: Arc<ImageRgb>,
    pub created: Instant,
    busy: AtomicBool,
    data: Mutex<SessionData>,
}

/// Exclusive claim on a session; released when dropped.
#[derive(Debug)]
pub struct Claim(Arc<Session>);

impl Claim {
    pub fn session(&self) -> &Session {
        &self.0
    }
}

impl Drop for Claim {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

impl Session {
    pub fn new(id: String, image: ImageRgb) -> Self {
        let now = Instant::now();
        Self {
            id,
            image: Arc::new(image),
            created: now,
            busy: AtomicBool::new(false),
            data: Mutex::new(SessionData {
                gt: None,
                state: None,
                mask: None,
                last_used: now,
            }),
        }
    }

    /// Claims the session for one computation, or `None` if another is
    /// in flight.
    pub fn try_claim(self: &Arc<Self>) -> Option<Claim> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| Claim(self.clone()))
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::Acquire)
    }

    pub fn data(&self) -> MutexGuard<'_, SessionData> {
        let mut d = self.data.lock().unwrap_or_else(|p| p.into_inner());
        d.last_used = Instant::now();
        d
    }

    fn idle_since(&self, now: Instant) -> Duration {
        let d = self.data.lock().unwrap_or_else(|p| p.into_inner());
        now.saturating_duration_since(d.last_used)
    }
}

#[derive(Debug)]
pub struct SessionStore {
    sessions: Mutex<HashMap<String, Arc<Session>>>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        Self {
            sessions: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    fn map(&self) -> MutexGuard<'_, HashMap<String, Arc<Session>>> {
        self.sessions.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn insert(&self, image: ImageRgb) -> Arc<Session> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let s = Arc::new(Session::new(id.clone(), image));
        self.map().insert(id, s.clone());
        s
    }

    /// Looks a session up; an expired one is dropped and reported missing.
    pub fn get(&self, id: &str) -> Option<Arc<Session>> {
        let mut map = self.map();
        let s = map.get(id)?.clone();
        if !s.is_busy() && s.idle_since(Instant::now()) > self.ttl {
            map.remove(id);
            return None;
        }
        Some(s)
    }

    /// Removes idle sessions; returns how many were dropped.
    pub fn sweep(&self, now: Instant) -> usize {
        let mut map = self.map();
        let before = map.len();
        map.retain(|_, s| s.is_busy() || s.idle_since(now) <= self.ttl);
        before - map.len()
    }

    pub fn len(&self) -> usize {
        self.map().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ttl(&self) -> Duration {
        self.ttl
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image() -> ImageRgb {
        ImageRgb::from_fn(2, 2, |_, _| [1, 2, 3])
    }

    #[test]
    fn ids_are_distinct() {
        let store = SessionStore::new(DEFAULT_TTL);
        let a = store.insert(image());
        let b = store.insert(image());
        assert_ne!(a.id, b.id);
        assert_eq!(store.len(), 2);
        assert!(store.get(&a.id).is_some());
        assert!(store.get("nope").is_none());
    }

    #[test]
    fn claims_are_exclusive() {
        let s = Arc::new(Session::new("x".into(), image()));
        let g = s.try_claim().unwrap();
        assert!(s.try_claim().is_none());
        drop(g);
        assert!(s.try_claim().is_some());
    }

    #[test]
    fn idle_sessions_expire() {
        let store = SessionStore::new(Duration::from_millis(0));
        let a = store.insert(image());
        std::thread::sleep(Duration::from_millis(2));
        assert!(store.get(&a.id).is_none());
        let b = store.insert(image());
        let _busy = b.try_claim().unwrap();
        std::thread::sleep(Duration::from_millis(2));
        assert_eq!(store.sweep(Instant::now()), 0);
        assert_eq!(store.len(), 1);
    }
}
