//! URL normalization shared by every layer.

use url::Url;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum UrlError {
    #[error("unparseable url {0:?}")]
    Parse(String),
    #[error("unsupported scheme in {0:?}")]
    Scheme(String),
    #[error("url without host: {0:?}")]
    NoHost(String),
}

/// Parses an absolute http(s) URL and normalizes it: lowercase host, no
/// fragment, no default port, empty path becomes `/`.
pub fn normalize(raw: &str) -> Result<Url, UrlError> {
    let mut url = Url::parse(raw.trim()).map_err(|_| UrlError::Parse(raw.to_string()))?;
    check(&mut url, raw)?;
    Ok(url)
}

/// Resolves `raw` (possibly relative) against `base` and normalizes it.
pub fn resolve(base: &Url, raw: &str) -> Result<Url, UrlError> {
    let mut url = base
        .join(raw.trim())
        .map_err(|_| UrlError::Parse(raw.to_string()))?;
    check(&mut url, raw)?;
    Ok(url)
}

pub fn normalize_str(raw: &str) -> Result<String, UrlError> {
    normalize(raw).map(String::from)
}

fn check(url: &mut Url, raw: &str) -> Result<(), UrlError> {
    match url.scheme() {
        "http" | "https" => {}
        _ => return Err(UrlError::Scheme(raw.to_string())),
    }
    if url.host_str().map_or(true, str::is_empty) {
        return Err(UrlError::NoHost(raw.to_string()));
    }
    // The url crate already lowercases hosts and drops default ports.
    url.set_fragment(None);
    Ok(())
}

/// Lowercased host of a normalized URL string, if any.
pub fn host_of(url: &str) -> Option<String> {
    Url::parse(url).ok()?.host_str().map(str::to_ascii_lowercase)
}
