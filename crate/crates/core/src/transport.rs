//! The fetch interface every layer talks to, plus a live HTTP implementation.

use std::time::Duration;

/// Status line and headers of a resource, obtained without downloading the body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeadInfo {
    pub status: u16,
    pub content_type: String,
    /// Declared body size, if known.
    pub size: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
    /// Body was cut at `max_bytes`.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("network error: {0}")]
    Network(String),
    #[error("timed out")]
    Timeout,
}

/// Concrete fetch backend. Implementations must be safe for concurrent use.
pub trait Transport: Send + Sync {
    fn fetch(&self, url: &str, max_bytes: usize, timeout: Duration) -> Result<Response, TransportError>;
    fn probe(&self, url: &str, timeout: Duration) -> Result<HeadInfo, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn fetch(&self, url: &str, max_bytes: usize, timeout: Duration) -> Result<Response, TransportError> {
        (**self).fetch(url, max_bytes, timeout)
    }
    fn probe(&self, url: &str, timeout: Duration) -> Result<HeadInfo, TransportError> {
        (**self).probe(url, timeout)
    }
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn fetch(&self, url: &str, max_bytes: usize, timeout: Duration) -> Result<Response, TransportError> {
        (**self).fetch(url, max_bytes, timeout)
    }
    fn probe(&self, url: &str, timeout: Duration) -> Result<HeadInfo, TransportError> {
        (**self).probe(url, timeout)
    }
}

/// Per-fetch caps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FetchLimits {
    pub max_bytes: usize,
    pub timeout: Duration,
    /// Posts kept per summary.
    pub max_posts: usize,
}

impl Default for FetchLimits {
    fn default() -> Self {
        Self {
            max_bytes: 512 * 1024,
            timeout: Duration::from_secs(10),
            max_posts: 50,
        }
    }
}

/// Media types never downloaded by the focused crawler.
pub fn is_media_type(content_type: &str) -> bool {
    let ct = mime_essence(content_type);
    ct.starts_with("image/") || ct.starts_with("audio/") || ct.starts_with("video/")
}

pub fn is_textual_type(content_type: &str) -> bool {
    let ct = mime_essence(content_type);
    ct.starts_with("text/")
        || ct == "application/xhtml+xml"
        || ct == "application/xml"
        || ct == "application/rss+xml"
}

/// Lowercased type/subtype without parameters.
pub fn mime_essence(content_type: &str) -> String {
    content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

/// Blocking HTTP transport for online mode. Follows at most three redirects.
pub struct HttpTransport {
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(user_agent: &str) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .redirect(reqwest::redirect::Policy::limited(3))
            .build()
            .map_err(|e| TransportError::Network(e.to_string()))?;
        Ok(Self { client })
    }
}

fn map_err(e: reqwest::Error) -> TransportError {
    if e.is_timeout() {
        TransportError::Timeout
    } else {
        TransportError::Network(e.to_string())
    }
}

fn content_type_of(headers: &reqwest::header::HeaderMap) -> String {
    headers
        .get(reqwest::header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_string()
}

impl Transport for HttpTransport {
    fn fetch(&self, url: &str, max_bytes: usize, timeout: Duration) -> Result<Response, TransportError> {
        use std::io::Read;
        let resp = self.client.get(url).timeout(timeout).send().map_err(map_err)?;
        let status = resp.status().as_u16();
        let content_type = content_type_of(resp.headers());
        let mut body = Vec::new();
        let mut limited = resp.take(max_bytes as u64 + 1);
        limited
            .read_to_end(&mut body)
            .map_err(|e| TransportError::Network(e.to_string()))?;
        let truncated = body.len() > max_bytes;
        body.truncate(max_bytes);
        Ok(Response { status, content_type, body, truncated })
    }

    fn probe(&self, url: &str, timeout: Duration) -> Result<HeadInfo, TransportError> {
        let resp = self.client.head(url).timeout(timeout).send().map_err(map_err)?;
        Ok(HeadInfo {
            status: resp.status().as_u16(),
            content_type: content_type_of(resp.headers()),
            size: resp.content_length(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn media_and_text_classification() {
        assert!(is_media_type("image/png"));
        assert!(is_media_type("Audio/MPEG; foo=bar"));
        assert!(is_media_type("video/mp4"));
        assert!(!is_media_type("text/html; charset=utf-8"));
        assert!(is_textual_type("text/html; charset=utf-8"));
        assert!(is_textual_type("application/rss+xml"));
        assert!(!is_textual_type("application/pdf"));
    }
}
