//! Layer 2: fetch a blog's RSS summary and parse it into posts and link
//! contexts. Only RSS 2.0 style documents (`<rss><channel><item>`) are read.

use url::Url;

use crate::clock::Timestamp;
use crate::fetch::FetchContext;
use crate::markup;
use crate::ping::SeedUrl;
use crate::urlnorm;

pub const DEFAULT_CONTEXT_WINDOW: usize = 10;

/// An out-link together with the words around it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkContext {
    pub target: String,
    pub anchor_text: String,
    /// Up to W normalized tokens before the anchor, same block.
    pub context_before: String,
    /// Up to W normalized tokens after the anchor, same block.
    pub context_after: String,
}

impl LinkContext {
    /// `before … after`, the surrounding tokens with the anchor elided.
    pub fn context_window(&self) -> String {
        match (self.context_before.is_empty(), self.context_after.is_empty()) {
            (true, true) => String::new(),
            (false, true) => format!("{} …", self.context_before),
            (true, false) => format!("… {}", self.context_after),
            (false, false) => format!("{} … {}", self.context_before, self.context_after),
        }
    }

    /// Context tokens, then anchor tokens, in document order.
    pub fn evidence_text(&self) -> String {
        format!("{} {} {}", self.context_before, self.anchor_text, self.context_after)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Post {
    pub title: String,
    pub link: String,
    /// Plain text, markup stripped.
    pub description: String,
    /// Unix seconds.
    pub published: Option<i64>,
    pub out_links: Vec<LinkContext>,
}

impl Post {
    /// The item itself seen as a link from the blog: the title is the anchor
    /// and the opening words of the description are the context.
    pub fn permalink_context(&self, window: usize) -> LinkContext {
        let after: Vec<String> = crate::phrases::tokenize(&self.description)
            .into_iter()
            .take(window)
            .map(|t| t.normalized)
            .collect();
        LinkContext {
            target: self.link.clone(),
            anchor_text: self.title.clone(),
            context_before: String::new(),
            context_after: after.join(" "),
        }
    }

    /// Title and description as one text, separated by a sentence boundary.
    pub fn text(&self) -> String {
        format!("{}\n{}", self.title, self.description)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryDoc {
    pub blog_url: String,
    pub title: String,
    /// Newest first, at most the configured cap.
    pub posts: Vec<Post>,
    pub fetched_at: Timestamp,
}

impl SummaryDoc {
    /// All post texts, each post its own sentence run.
    pub fn text(&self) -> String {
        self.posts.iter().map(Post::text).collect::<Vec<_>>().join("\n")
    }

    /// Permalinks and description links, in post order.
    pub fn link_contexts(&self, window: usize) -> Vec<LinkContext> {
        let mut out = Vec::new();
        for p in &self.posts {
            out.push(p.permalink_context(window));
            out.extend(p.out_links.iter().cloned());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SummaryError {
    #[error("fetch failed for {url}: {reason}")]
    FetchFailed { url: String, reason: String },
    #[error("not a feed: {0}")]
    NotAFeed(String),
    #[error("feed body exceeds {max_bytes} bytes and the truncated body does not parse")]
    OversizeBody { max_bytes: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RssOptions {
    pub context_window: usize,
    pub max_posts: usize,
}

impl Default for RssOptions {
    fn default() -> Self {
        Self { context_window: DEFAULT_CONTEXT_WINDOW, max_posts: 50 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedFeed {
    pub doc: SummaryDoc,
    /// Items without a usable link.
    pub dropped_items: usize,
    /// Items beyond the post cap.
    pub truncated_items: usize,
}

/// Feed URL from an RSS `<link rel="alternate">` in `page_head`, otherwise
/// `blog_url` with `rss` appended to its path.
pub fn resolve_feed_url(blog_url: &Url, page_head: Option<&str>) -> Url {
    if let Some(head) = page_head {
        let e = markup::extract_document(head, blog_url, 0);
        let declared = e
            .alternates
            .iter()
            .filter(|a| a.mime == "application/rss+xml")
            .find_map(|a| urlnorm::resolve(blog_url, &a.href).ok());
        if let Some(u) = declared {
            return u;
        }
    }
    conventional_feed_url(blog_url)
}

fn conventional_feed_url(blog_url: &Url) -> Url {
    let mut u = blog_url.clone();
    let path = u.path().to_string();
    if path.ends_with('/') {
        u.set_path(&format!("{path}rss"));
    } else {
        u.set_path(&format!("{path}/rss"));
    }
    u.set_query(None);
    u
}

/// Decodes feed bytes per the XML declaration: UTF-8 (default) or Latin-1.
pub fn decode_feed(bytes: &[u8]) -> Result<String, SummaryError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let encoding = declared_encoding(bytes).unwrap_or_else(|| "utf-8".into());
    match encoding.as_str() {
        "utf-8" | "utf8" => String::from_utf8(bytes.to_vec())
            .map_err(|_| SummaryError::NotAFeed("invalid UTF-8".into())),
        "iso-8859-1" | "iso8859-1" | "latin1" | "latin-1" | "l1" | "iso_8859-1" => {
            Ok(bytes.iter().map(|&b| b as char).collect())
        }
        other => Err(SummaryError::NotAFeed(format!("unsupported encoding {other:?}"))),
    }
}

fn declared_encoding(bytes: &[u8]) -> Option<String> {
    let head = bytes.get(..bytes.len().min(200))?;
    let head = String::from_utf8_lossy(head);
    let decl = head.strip_prefix("<?xml")?;
    let decl = &decl[..decl.find("?>")?];
    let at = decl.find("encoding")?;
    let rest = decl[at + "encoding".len()..].trim_start().strip_prefix('=')?.trim_start();
    let quote = rest.chars().next()?;
    if quote != '"' && quote != '\'' {
        return None;
    }
    let rest = &rest[1..];
    Some(rest[..rest.find(quote)?].trim().to_ascii_lowercase())
}

/// Parses an RSS document. Item links resolve against `base_url`, description
/// links against their item's link. Posts come out newest first and capped.
pub fn parse_rss(feed_text: &str, base_url: &Url, opts: RssOptions) -> Result<ParsedFeed, SummaryError> {
    let xml = roxmltree::Document::parse_with_options(
        feed_text,
        roxmltree::ParsingOptions { allow_dtd: true, ..Default::default() },
    )
    .map_err(|e| SummaryError::NotAFeed(e.to_string()))?;
    let root = xml.root_element();
    if root.tag_name().name() != "rss" {
        return Err(SummaryError::NotAFeed(format!("root element <{}>", root.tag_name().name())));
    }
    let channel = child(root, "channel").ok_or_else(|| SummaryError::NotAFeed("no <channel>".into()))?;

    let title = child_text(channel, "title").map(|t| plain(&t, base_url)).unwrap_or_default();
    let mut posts = Vec::new();
    let mut dropped = 0;
    for item in channel.children().filter(|n| n.is_element() && n.tag_name().name() == "item") {
        let link = child_text(item, "link")
            .or_else(|| {
                child(item, "guid")
                    .filter(|g| g.attribute("isPermaLink").map_or(true, |v| v.trim() != "false"))
                    .and_then(|g| g.text().map(str::to_string))
            })
            .and_then(|l| urlnorm::resolve(base_url, &l).ok());
        let Some(link) = link else {
            dropped += 1;
            continue;
        };
        let extracted = child_text(item, "description")
            .map(|d| markup::extract_fragment(&d, &link, opts.context_window))
            .unwrap_or_default();
        let published = child_text(item, "pubDate")
            .and_then(|d| chrono::DateTime::parse_from_rfc2822(d.trim()).ok())
            .map(|d| d.timestamp());
        posts.push(Post {
            title: child_text(item, "title").map(|t| plain(&t, &link)).unwrap_or_default(),
            link: link.to_string(),
            description: extracted.text,
            published,
            out_links: extracted.links,
        });
    }

    // newest first; undated items keep document order after dated ones
    posts.sort_by(|a, b| match (a.published, b.published) {
        (Some(x), Some(y)) => y.cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let truncated = posts.len().saturating_sub(opts.max_posts);
    posts.truncate(opts.max_posts);

    Ok(ParsedFeed {
        doc: SummaryDoc { blog_url: base_url.to_string(), title, posts, fetched_at: Timestamp::default() },
        dropped_items: dropped,
        truncated_items: truncated,
    })
}

fn child<'a, 'i>(node: roxmltree::Node<'a, 'i>, name: &str) -> Option<roxmltree::Node<'a, 'i>> {
    node.children().find(|n| n.is_element() && n.tag_name().name() == name && n.tag_name().namespace().is_none())
}

/// Concatenated text and CDATA of a child element.
fn child_text(node: roxmltree::Node<'_, '_>, name: &str) -> Option<String> {
    let c = child(node, name)?;
    let s: String = c.descendants().filter(|n| n.is_text()).filter_map(|n| n.text()).collect();
    let s = s.trim();
    (!s.is_empty()).then(|| s.to_string())
}

fn plain(s: &str, base: &Url) -> String {
    markup::extract_fragment(s, base, 0).text.replace('\n', " ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryFetch {
    pub doc: SummaryDoc,
    pub feed_url: String,
    /// Body bytes transferred, discovery page included.
    pub bytes: u64,
    pub dropped_items: usize,
}

/// Fetches and parses the seed's feed. Tries the conventional `/rss` location
/// first and falls back to auto-discovery from the blog's front page.
pub fn fetch_summary(seed: &SeedUrl, ctx: &FetchContext<'_>, window: usize) -> Result<SummaryFetch, SummaryError> {
    let blog = urlnorm::normalize(&seed.url).map_err(|e| SummaryError::FetchFailed {
        url: seed.url.clone(),
        reason: e.to_string(),
    })?;
    let opts = RssOptions { context_window: window, max_posts: ctx.limits.max_posts };
    let mut bytes = 0u64;

    let first = resolve_feed_url(&blog, None);
    let err = match try_feed(&first, &blog, ctx, opts, &mut bytes) {
        Ok(parsed) => return Ok(finish(parsed, first, bytes, ctx)),
        Err(e) => e,
    };

    // the conventional location failed: look for a declared feed
    let home = match ctx.get(blog.as_str()) {
        Ok(r) if r.status < 400 => {
            bytes += r.body.len() as u64;
            r
        }
        Ok(r) => {
            return Err(prefer(err, SummaryError::FetchFailed { url: blog.to_string(), reason: format!("HTTP {}", r.status) }));
        }
        Err(e) => return Err(prefer(err, SummaryError::FetchFailed { url: blog.to_string(), reason: e.to_string() })),
    };
    let head = String::from_utf8_lossy(&home.body);
    let declared = resolve_feed_url(&blog, Some(&head));
    if declared == first {
        return Err(err);
    }
    let parsed = try_feed(&declared, &blog, ctx, opts, &mut bytes)?;
    Ok(finish(parsed, declared, bytes, ctx))
}

// a 404 on the guessed URL is less informative than the first real error
fn prefer(first: SummaryError, second: SummaryError) -> SummaryError {
    match first {
        SummaryError::FetchFailed { ref reason, .. } if reason == "HTTP 404" => second,
        other => other,
    }
}

fn finish(mut parsed: ParsedFeed, feed_url: Url, bytes: u64, ctx: &FetchContext<'_>) -> SummaryFetch {
    parsed.doc.fetched_at = ctx.clock.now();
    SummaryFetch { doc: parsed.doc, feed_url: feed_url.to_string(), bytes, dropped_items: parsed.dropped_items }
}

fn try_feed(
    feed_url: &Url,
    blog: &Url,
    ctx: &FetchContext<'_>,
    opts: RssOptions,
    bytes: &mut u64,
) -> Result<ParsedFeed, SummaryError> {
    let resp = ctx.get(feed_url.as_str()).map_err(|e| SummaryError::FetchFailed {
        url: feed_url.to_string(),
        reason: e.to_string(),
    })?;
    *bytes += resp.body.len() as u64;
    if resp.status >= 400 {
        return Err(SummaryError::FetchFailed { url: feed_url.to_string(), reason: format!("HTTP {}", resp.status) });
    }
    let parsed = decode_feed(&resp.body).and_then(|text| parse_rss(&text, blog, opts));
    match parsed {
        Err(_) if resp.truncated => Err(SummaryError::OversizeBody { max_bytes: ctx.limits.max_bytes }),
        other => other,
    }
}
