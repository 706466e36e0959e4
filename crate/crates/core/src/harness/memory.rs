use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use super::SyntheticWorld;
use crate::transport::{HeadInfo, Response, Transport, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Probe,
    Fetch,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Access {
    pub kind: AccessKind,
    pub url: String,
    pub status: u16,
    /// Body bytes handed out; always 0 for probes.
    pub bytes: u64,
}

/// Serves a synthetic world from memory. Unknown URLs are 404. Every
/// request is appended to the access log.
#[derive(Debug)]
pub struct MemoryTransport {
    world: Arc<SyntheticWorld>,
    log: Mutex<Vec<Access>>,
    delay: Option<Duration>,
    stalled: Arc<(Mutex<bool>, Condvar)>,
}

impl MemoryTransport {
    pub fn new(world: Arc<SyntheticWorld>) -> Self {
        Self { world, log: Mutex::new(Vec::new()), delay: None, stalled: Arc::new((Mutex::new(false), Condvar::new())) }
    }

    /// Fixed wall-clock delay before every response.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }

    pub fn world(&self) -> &SyntheticWorld {
        &self.world
    }

    /// Blocks every request until `resume`.
    pub fn stall(&self) {
        *self.stalled.0.lock().unwrap() = true;
    }

    pub fn resume(&self) {
        *self.stalled.0.lock().unwrap() = false;
        self.stalled.1.notify_all();
    }

    pub fn access_log(&self) -> Vec<Access> {
        self.log.lock().unwrap().clone()
    }

    pub fn clear_log(&self) {
        self.log.lock().unwrap().clear();
    }

    /// Body bytes served for URLs the world labels as media.
    pub fn media_bytes(&self) -> u64 {
        self.log
            .lock()
            .unwrap()
            .iter()
            .filter(|a| self.world.label(&a.url) == Some(super::Label::Media))
            .map(|a| a.bytes)
            .sum()
    }

    fn gate(&self) {
        let (lock, cv) = &*self.stalled;
        let mut stalled = lock.lock().unwrap();
        while *stalled {
            stalled = cv.wait(stalled).unwrap();
        }
        drop(stalled);
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
    }

    fn record(&self, a: Access) {
        self.log.lock().unwrap().push(a);
    }
}

impl Transport for MemoryTransport {
    fn fetch(&self, url: &str, max_bytes: usize, _timeout: Duration) -> Result<Response, TransportError> {
        self.gate();
        let resp = match self.world.sites.get(url) {
            Some(site) => {
                let truncated = site.body.len() > max_bytes;
                let body = site.body[..site.body.len().min(max_bytes)].to_vec();
                Response { status: site.status, content_type: site.content_type.clone(), body, truncated }
            }
            None => Response { status: 404, content_type: "text/html".into(), body: Vec::new(), truncated: false },
        };
        self.record(Access { kind: AccessKind::Fetch, url: url.to_string(), status: resp.status, bytes: resp.body.len() as u64 });
        Ok(resp)
    }

    fn probe(&self, url: &str, _timeout: Duration) -> Result<HeadInfo, TransportError> {
        self.gate();
        let head = match self.world.sites.get(url) {
            Some(site) => HeadInfo { status: site.status, content_type: site.content_type.clone(), size: Some(site.body.len() as u64) },
            None => HeadInfo { status: 404, content_type: "text/html".into(), size: None },
        };
        self.record(Access { kind: AccessKind::Probe, url: url.to_string(), status: head.status, bytes: 0 });
        Ok(head)
    }
}
