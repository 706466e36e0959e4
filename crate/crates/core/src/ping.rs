//! Layer 1: ping-server change feeds turned into fresh seed URLs.
//!
//! A changes document looks like
//!
//! ```text
//! <weblogUpdates version="2" updated="..." count="2">
//!   <weblog name="A blog" url="http://a.blogs.example/" when="5"/>
//!   ...
//! </weblogUpdates>
//! ```
//!
//! Entries whose `url` does not parse are skipped individually; structural
//! problems reject the whole document.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use tracing::warn;

use crate::clock::Timestamp;
use crate::urlnorm;

pub const DEFAULT_DEDUPE_WINDOW: Duration = Duration::from_secs(15 * 60);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PingEvent {
    pub site_name: String,
    /// Normalized absolute http(s) URL.
    pub url: String,
    /// Seconds since the site notified the ping server.
    pub when: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeedOrigin {
    Ping,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeedUrl {
    pub url: String,
    pub discovered_at: Timestamp,
    pub origin: SeedOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PingError {
    #[error("malformed changes feed: {0}")]
    MalformedFeed(String),
    #[error("registry {path}:{line}: invalid pattern {pattern:?}")]
    BadPattern { path: String, line: usize, pattern: String },
    #[error("reading {path}: {message}")]
    Io { path: String, message: String },
}

/// A `weblog` entry that was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryError {
    /// Zero-based position among the `weblog` elements.
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangesFeed {
    pub events: Vec<PingEvent>,
    pub skipped: Vec<EntryError>,
}

pub fn parse_changes_feed(feed_text: &str) -> Result<ChangesFeed, PingError> {
    let doc = roxmltree::Document::parse(feed_text)
        .map_err(|e| PingError::MalformedFeed(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "weblogUpdates" {
        return Err(PingError::MalformedFeed(format!(
            "root element is <{}>, expected <weblogUpdates>",
            root.tag_name().name()
        )));
    }

    let mut feed = ChangesFeed::default();
    let mut seen = 0usize;
    for (index, node) in root
        .children()
        .filter(|n| n.is_element() && n.tag_name().name() == "weblog")
        .enumerate()
    {
        seen += 1;
        let attr = |name: &str| {
            node.attribute(name).ok_or_else(|| {
                PingError::MalformedFeed(format!("weblog #{index} lacks required attribute {name:?}"))
            })
        };
        let site_name = attr("name")?;
        let raw_url = attr("url")?;
        let when = attr("when")?;
        let when: u64 = when.trim().parse().map_err(|_| {
            PingError::MalformedFeed(format!("weblog #{index} has non-numeric when={when:?}"))
        })?;
        match urlnorm::normalize_str(raw_url) {
            Ok(url) => feed.events.push(PingEvent { site_name: site_name.to_string(), url, when }),
            Err(e) => {
                warn!(index, url = raw_url, "skipping weblog entry: {e}");
                feed.skipped.push(EntryError { index, message: e.to_string() });
            }
        }
    }

    if let Some(count) = root.attribute("count") {
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| PingError::MalformedFeed(format!("non-numeric count={count:?}")))?;
        if count != seen {
            return Err(PingError::MalformedFeed(format!(
                "count={count} but document holds {seen} weblog entries"
            )));
        }
    }
    Ok(feed)
}

/// Writes events as a changes document that [`parse_changes_feed`] reads back unchanged.
pub fn serialize_changes_feed(events: &[PingEvent], updated: &str) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<weblogUpdates version=\"2\" updated=\"{}\" count=\"{}\">",
        escape_attr(updated),
        events.len()
    );
    for e in events {
        let _ = writeln!(
            out,
            "  <weblog name=\"{}\" url=\"{}\" when=\"{}\"/>",
            escape_attr(&e.site_name),
            escape_attr(&e.url),
            e.when
        );
    }
    out.push_str("</weblogUpdates>\n");
    out
}

pub(crate) fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // attribute-value normalization would turn these into spaces
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

/// Known blog hosts: exact hosts and `*.suffix` wildcard patterns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BlogRegistry {
    exact: HashSet<String>,
    suffixes: HashSet<String>,
    pub source_path: String,
}

impl BlogRegistry {
    /// Parses the registry file format: one pattern per line, `#` comments,
    /// blank lines ignored.
    pub fn parse(text: &str, source_path: &str) -> Result<Self, PingError> {
        let mut reg = BlogRegistry { source_path: source_path.to_string(), ..Default::default() };
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            reg.insert(line).map_err(|_| PingError::BadPattern {
                path: source_path.to_string(),
                line: i + 1,
                pattern: line.to_string(),
            })?;
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, PingError> {
        let text = std::fs::read_to_string(path).map_err(|e| PingError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn from_patterns<'a>(patterns: impl IntoIterator<Item = &'a str>) -> Result<Self, PingError> {
        let mut reg = BlogRegistry::default();
        for p in patterns {
            reg.insert(p).map_err(|_| PingError::BadPattern {
                path: String::new(),
                line: 0,
                pattern: p.to_string(),
            })?;
        }
        Ok(reg)
    }

    fn insert(&mut self, pattern: &str) -> Result<(), ()> {
        let p = pattern.trim().to_ascii_lowercase();
        let valid_host = |h: &str| {
            !h.is_empty()
                && h.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '.')
                && !h.starts_with('.')
                && !h.ends_with('.')
        };
        if let Some(suffix) = p.strip_prefix("*.") {
            if !valid_host(suffix) {
                return Err(());
            }
            self.suffixes.insert(suffix.to_string());
        } else {
            if !valid_host(&p) {
                return Err(());
            }
            self.exact.insert(p);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.exact.len() + self.suffixes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Patterns in sorted order, wildcards written as `*.suffix`.
    pub fn patterns(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .exact
            .iter()
            .cloned()
            .chain(self.suffixes.iter().map(|s| format!("*.{s}")))
            .collect();
        v.sort();
        v
    }

    /// Exact match, or a proper subdomain of a wildcard suffix. `*.x.example`
    /// does not match `x.example` itself.
    pub fn matches_host(&self, host: &str) -> bool {
        let host = host.to_ascii_lowercase();
        if self.exact.contains(&host) {
            return true;
        }
        let mut rest = host.as_str();
        while let Some(dot) = rest.find('.') {
            rest = &rest[dot + 1..];
            if self.suffixes.contains(rest) {
                return true;
            }
        }
        false
    }
}

/// Events whose host is in the registry, as seeds stamped `now`, order preserved.
pub fn match_registry(events: &[PingEvent], registry: &BlogRegistry, now: Timestamp) -> Vec<SeedUrl> {
    events
        .iter()
        .filter(|e| urlnorm::host_of(&e.url).is_some_and(|h| registry.matches_host(&h)))
        .map(|e| SeedUrl { url: e.url.clone(), discovered_at: now, origin: SeedOrigin::Ping })
        .collect()
}

/// Suppresses a URL already emitted within the trailing window.
#[derive(Debug, Clone)]
pub struct SeedDeduper {
    window: Duration,
    last_emitted: HashMap<String, Timestamp>,
}

impl SeedDeduper {
    pub fn new(window: Duration) -> Self {
        assert!(!window.is_zero(), "dedupe window must be positive");
        Self { window, last_emitted: HashMap::new() }
    }

    pub fn admit(&mut self, seed: &SeedUrl) -> bool {
        let t = seed.discovered_at;
        match self.last_emitted.get(&seed.url) {
            Some(&prev) if t.since(prev) < self.window => false,
            _ => {
                self.last_emitted.insert(seed.url.clone(), t);
                true
            }
        }
    }

    /// Forgets entries whose window has passed.
    pub fn prune(&mut self, now: Timestamp) {
        let w = self.window;
        self.last_emitted.retain(|_, &mut t| now.since(t) < w);
    }

    pub fn tracked(&self) -> usize {
        self.last_emitted.len()
    }
}

pub fn dedupe_window(seeds: &[SeedUrl], window: Duration) -> Vec<SeedUrl> {
    let mut d = SeedDeduper::new(window);
    seeds.iter().filter(|s| d.admit(s)).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(url: &str, at: u64) -> SeedUrl {
        SeedUrl { url: url.into(), discovered_at: Timestamp(at), origin: SeedOrigin::Ping }
    }

    #[test]
    fn parses_two_entries_in_order() {
        let xml = r#"<?xml version="1.0"?>
<weblogUpdates version="2" updated="Thu, 01 Jan 2026 00:00:00 GMT" count="2">
  <weblog name="A" url="http://a.example/" when="5"/>
  <weblog name="B" url="http://b.example/" when="60"/>
</weblogUpdates>"#;
        let feed = parse_changes_feed(xml).unwrap();
        assert_eq!(
            feed.events,
            vec![
                PingEvent { site_name: "A".into(), url: "http://a.example/".into(), when: 5 },
                PingEvent { site_name: "B".into(), url: "http://b.example/".into(), when: 60 },
            ]
        );
        assert!(feed.skipped.is_empty());
    }

    #[test]
    fn empty_document() {
        let feed = parse_changes_feed(r#"<weblogUpdates version="2" count="0"></weblogUpdates>"#).unwrap();
        assert!(feed.events.is_empty());
        let feed = parse_changes_feed("<weblogUpdates/>").unwrap();
        assert!(feed.events.is_empty());
    }

    #[test]
    fn structural_errors_reject_document() {
        assert!(matches!(parse_changes_feed("<weblogUpdates>"), Err(PingError::MalformedFeed(_))));
        assert!(matches!(parse_changes_feed("<rss/>"), Err(PingError::MalformedFeed(_))));
        let missing = r#"<weblogUpdates><weblog name="A" when="1"/></weblogUpdates>"#;
        assert!(matches!(parse_changes_feed(missing), Err(PingError::MalformedFeed(_))));
        let bad_when = r#"<weblogUpdates><weblog name="A" url="http://a.example/" when="soon"/></weblogUpdates>"#;
        assert!(matches!(parse_changes_feed(bad_when), Err(PingError::MalformedFeed(_))));
        let bad_count = r#"<weblogUpdates count="3"><weblog name="A" url="http://a.example/" when="1"/></weblogUpdates>"#;
        assert!(matches!(parse_changes_feed(bad_count), Err(PingError::MalformedFeed(_))));
    }

    #[test]
    fn bad_url_skips_entry_only() {
        let xml = r#"<weblogUpdates count="2">
  <weblog name="A" url="not a url" when="1"/>
  <weblog name="B" url="http://b.example/" when="2"/>
</weblogUpdates>"#;
        let feed = parse_changes_feed(xml).unwrap();
        assert_eq!(feed.events.len(), 1);
        assert_eq!(feed.skipped, vec![EntryError { index: 0, message: feed.skipped[0].message.clone() }]);
    }

    #[test]
    fn wildcard_matching() {
        let reg = BlogRegistry::from_patterns(["*.blogs.example"]).unwrap();
        let events = vec![
            PingEvent { site_name: "a".into(), url: "http://a.blogs.example/".into(), when: 0 },
            PingEvent { site_name: "n".into(), url: "http://news.example/".into(), when: 0 },
        ];
        let seeds = match_registry(&events, &reg, Timestamp(7));
        assert_eq!(seeds, vec![seed("http://a.blogs.example/", 7)]);
        assert!(!reg.matches_host("blogs.example"));
        assert!(reg.matches_host("x.y.blogs.example"));
        assert!(!reg.matches_host("evilblogs.example"));
    }

    #[test]
    fn empty_registry_matches_nothing() {
        let events = vec![PingEvent { site_name: "a".into(), url: "http://a.example/".into(), when: 0 }];
        assert!(match_registry(&events, &BlogRegistry::default(), Timestamp(0)).is_empty());
    }

    #[test]
    fn registry_file_format() {
        let text = "# blogs\n*.Blogs.Example\n\nnews.example  # exact\n";
        let reg = BlogRegistry::parse(text, "reg.txt").unwrap();
        assert_eq!(reg.patterns(), vec!["*.blogs.example".to_string(), "news.example".to_string()]);
        let err = BlogRegistry::parse("ok.example\nhttp://bad.example/\n", "reg.txt").unwrap_err();
        assert!(matches!(err, PingError::BadPattern { line: 2, .. }));
    }

    #[test]
    fn dedupe_within_window() {
        let w = Duration::from_secs(60);
        let s = [seed("u1", 0), seed("u1", 1000), seed("u2", 2000)];
        assert_eq!(dedupe_window(&s, w), vec![seed("u1", 0), seed("u2", 2000)]);
    }

    #[test]
    fn dedupe_after_expiry() {
        let w = Duration::from_secs(60);
        let s = [seed("u1", 0), seed("u1", 60_000)];
        assert_eq!(dedupe_window(&s, w), s.to_vec());
    }

    #[test]
    fn prune_forgets_expired() {
        let mut d = SeedDeduper::new(Duration::from_secs(1));
        assert!(d.admit(&seed("a", 0)));
        d.prune(Timestamp(5000));
        assert_eq!(d.tracked(), 0);
    }
}
