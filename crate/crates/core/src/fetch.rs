//! Shared fetch plumbing: politeness wait, bandwidth charge, limits.

use crate::clock::Clock;
use crate::throttle::{Politeness, TokenBucket};
use crate::transport::{FetchLimits, HeadInfo, Response, Transport, TransportError};
use crate::urlnorm;

/// Everything a fetch needs besides the URL.
#[derive(Clone, Copy)]
pub struct FetchContext<'a> {
    pub transport: &'a dyn Transport,
    pub limits: FetchLimits,
    pub clock: &'a dyn Clock,
    pub throttle: Option<&'a TokenBucket>,
    pub politeness: Option<&'a Politeness>,
}

impl<'a> FetchContext<'a> {
    pub fn new(transport: &'a dyn Transport, clock: &'a dyn Clock) -> Self {
        Self { transport, limits: FetchLimits::default(), clock, throttle: None, politeness: None }
    }

    /// GET with politeness wait before and bandwidth charge after.
    pub fn get(&self, url: &str) -> Result<Response, TransportError> {
        self.wait_turn(url);
        let resp = self.transport.fetch(url, self.limits.max_bytes, self.limits.timeout)?;
        if let Some(t) = self.throttle {
            t.acquire(resp.body.len() as u64, self.clock);
        }
        Ok(resp)
    }

    pub fn probe(&self, url: &str) -> Result<HeadInfo, TransportError> {
        self.wait_turn(url);
        self.transport.probe(url, self.limits.timeout)
    }

    fn wait_turn(&self, url: &str) {
        if let (Some(p), Some(host)) = (self.politeness, urlnorm::host_of(url)) {
            p.wait(&host, self.clock);
        }
    }
}

