//! Layer 3: full-text fetches of frontier pages, the relevance gate on link
//! expansion, and the page analyzer that corrects the graph.

use std::collections::{BTreeSet, HashMap};
use std::fs::{self, OpenOptions};
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use sha2::{Digest, Sha256};

use crate::clock::Timestamp;
use crate::fetch::FetchContext;
use crate::graph::{Correction, CorrectionKind, FrontierGraph, NodeRecord, Provenance};
use crate::markup::extract_document;
use crate::phrases::{tokenize, KeyPhrase, PhraseExtractor};
use crate::relevance::{RelevanceError, RelevanceModel};
use crate::summary::LinkContext;
use crate::transport::{is_media_type, is_textual_type, mime_essence};
use crate::urlnorm;

#[derive(Debug, Clone, PartialEq)]
pub struct Page {
    pub url: String,
    pub content_type: String,
    /// Markup-free; blocks separated by `\n`.
    pub text: String,
    pub out_links: Vec<LinkContext>,
    pub fetched_at: Timestamp,
    pub bytes: u64,
    pub has_rss_alternate: bool,
    pub headings: Vec<String>,
}

impl Page {
    /// Number of distinct link targets.
    pub fn out_degree(&self) -> usize {
        self.out_links.iter().map(|l| l.target.as_str()).collect::<BTreeSet<_>>().len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PageError {
    #[error("{url}: media type {content_type} not fetched")]
    MediaSkipped { url: String, content_type: String },
    #[error("{url}: content type {content_type} is not text")]
    Unsupported { url: String, content_type: String },
    #[error("fetch failed for {url}: {reason}")]
    FetchFailed { url: String, reason: String, transient: bool },
    #[error("{url}: body exceeds {max_bytes} bytes")]
    OversizeBody { url: String, max_bytes: usize },
}

/// Probes headers first; media, non-text and oversize resources are
/// rejected without downloading a body.
pub fn fetch_page(url: &str, ctx: &FetchContext<'_>, window: usize) -> Result<Page, PageError> {
    let failed = |reason: String, transient: bool| PageError::FetchFailed { url: url.to_string(), reason, transient };
    let base = urlnorm::normalize(url).map_err(|e| failed(e.to_string(), false))?;
    let head = ctx.probe(url).map_err(|e| failed(e.to_string(), true))?;
    if head.status >= 400 {
        return Err(failed(format!("HTTP {}", head.status), head.status >= 500));
    }
    if is_media_type(&head.content_type) {
        return Err(PageError::MediaSkipped { url: url.to_string(), content_type: mime_essence(&head.content_type) });
    }
    if !is_textual_type(&head.content_type) {
        return Err(PageError::Unsupported { url: url.to_string(), content_type: mime_essence(&head.content_type) });
    }
    let max_bytes = ctx.limits.max_bytes;
    if head.size.is_some_and(|s| s > max_bytes as u64) {
        return Err(PageError::OversizeBody { url: url.to_string(), max_bytes });
    }
    let resp = ctx.get(url).map_err(|e| failed(e.to_string(), true))?;
    if resp.status >= 400 {
        return Err(failed(format!("HTTP {}", resp.status), resp.status >= 500));
    }
    if resp.truncated {
        return Err(PageError::OversizeBody { url: url.to_string(), max_bytes });
    }
    let html = String::from_utf8_lossy(&resp.body);
    let ex = extract_document(&html, &base, window);
    Ok(Page {
        url: url.to_string(),
        content_type: mime_essence(&resp.content_type),
        has_rss_alternate: ex.has_rss_alternate(),
        text: ex.text,
        out_links: ex.links,
        fetched_at: ctx.clock.now(),
        bytes: resp.body.len() as u64,
        headings: ex.headings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpamRules {
    pub max_out_degree: usize,
    /// Distinct targets sharing one anchor text.
    pub max_dup_anchor: usize,
    pub min_words_per_link: f64,
}

impl Default for SpamRules {
    fn default() -> Self {
        Self { max_out_degree: 200, max_dup_anchor: 10, min_words_per_link: 5.0 }
    }
}

#[derive(Debug, Clone)]
pub struct Analyzer {
    pub spam: SpamRules,
    /// Banned terms; multi-word entries match as token sequences.
    pub glossary: Vec<Vec<String>>,
    pub glossary_factor: f64,
    pub min_dated_headings: usize,
}

impl Default for Analyzer {
    fn default() -> Self {
        Self { spam: SpamRules::default(), glossary: Vec::new(), glossary_factor: 0.5, min_dated_headings: 3 }
    }
}

static DATED: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)\b\d{4}-\d{2}-\d{2}\b|\b(jan(uary)?|feb(ruary)?|mar(ch)?|apr(il)?|may|june?|july?|aug(ust)?|sep(t(ember)?)?|oct(ober)?|nov(ember)?|dec(ember)?)\.? \d{1,2}, \d{4}\b",
    )
    .unwrap()
});

impl Analyzer {
    /// Glossary from lines of text; `#` starts a comment.
    pub fn with_glossary_text(mut self, text: &str) -> Self {
        self.glossary = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(|l| tokenize(l).into_iter().map(|t| t.normalized).collect::<Vec<_>>())
            .filter(|t| !t.is_empty())
            .collect();
        self
    }

    /// Spam exclusion short-circuits; otherwise a blog confirmation and a
    /// glossary rescale may both apply.
    pub fn analyze(&self, page: &Page) -> Vec<Correction> {
        let correction = |kind, reason: String| Correction { target: page.url.clone(), kind, reason };
        if let Some(reason) = self.spam_reason(page) {
            return vec![correction(CorrectionKind::ExcludeSpam, reason)];
        }
        let mut out = Vec::new();
        let dated = page.headings.iter().filter(|h| DATED.is_match(h)).count();
        if page.has_rss_alternate {
            out.push(correction(CorrectionKind::ConfirmBlog, "rss alternate".into()));
        } else if dated >= self.min_dated_headings {
            out.push(correction(CorrectionKind::ConfirmBlog, format!("{dated} dated headings")));
        }
        if let Some(term) = self.banned_term(&page.text) {
            out.push(correction(CorrectionKind::Rescale(self.glossary_factor), format!("glossary term {term:?}")));
        }
        out
    }

    fn spam_reason(&self, page: &Page) -> Option<String> {
        let degree = page.out_degree();
        if degree > self.spam.max_out_degree {
            return Some(format!("out-degree {degree}"));
        }
        let mut by_anchor: HashMap<String, BTreeSet<&str>> = HashMap::new();
        for l in &page.out_links {
            let key = l.anchor_text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
            if !key.is_empty() {
                by_anchor.entry(key).or_default().insert(&l.target);
            }
        }
        if let Some((anchor, n)) = by_anchor
            .iter()
            .map(|(a, t)| (a, t.len()))
            .filter(|&(_, n)| n >= self.spam.max_dup_anchor)
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(a.0)))
        {
            return Some(format!("{n} links share anchor {anchor:?}"));
        }
        if !page.out_links.is_empty() {
            let words = tokenize(&page.text).len() as f64;
            let ratio = words / page.out_links.len() as f64;
            if ratio < self.spam.min_words_per_link {
                return Some(format!("{ratio:.2} words per link"));
            }
        }
        None
    }

    fn banned_term(&self, text: &str) -> Option<String> {
        if self.glossary.is_empty() {
            return None;
        }
        let toks: Vec<String> = tokenize(text).into_iter().map(|t| t.normalized).collect();
        self.glossary
            .iter()
            .find(|g| g.len() <= toks.len() && toks.windows(g.len()).any(|w| w == g.as_slice()))
            .map(|g| g.join(" "))
    }
}

pub fn analyze_page(page: &Page, analyzer: &Analyzer) -> Vec<Correction> {
    analyzer.analyze(page)
}

/// Append-only store of relevant pages: `index.tsv` with
/// `url<TAB>fetched_at<TAB>score` and the text under `pages/<sha256>.txt`.
#[derive(Debug, Clone)]
pub struct PageStore {
    dir: PathBuf,
}

impl PageStore {
    pub fn open(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir.join("pages"))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Returns the content hash.
    pub fn append(&self, page: &Page, score: f64) -> io::Result<String> {
        let hash = hex::encode(Sha256::digest(page.text.as_bytes()));
        let path = self.dir.join("pages").join(format!("{hash}.txt"));
        if !path.exists() {
            fs::write(&path, &page.text)?;
        }
        let mut index = OpenOptions::new().create(true).append(true).open(self.dir.join("index.tsv"))?;
        writeln!(index, "{}\t{}\t{}", page.url, page.fetched_at, score)?;
        Ok(hash)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Fetched,
    MediaSkipped,
    Unsupported,
    Failed(String),
}

/// A page fetch and its relevance judgment, before touching the graph.
#[derive(Debug, Clone)]
pub struct Visit {
    pub node: NodeRecord,
    pub page: Option<Page>,
    pub outcome: Outcome,
    pub score: f64,
    pub relevant: bool,
    pub attempts: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrawlResult {
    pub url: String,
    pub page: Option<Page>,
    pub outcome: Outcome,
    pub score: f64,
    pub relevant: bool,
    pub corrections: Vec<Correction>,
    /// Always zero when `relevant` is false.
    pub new_edges: usize,
    /// The page's top key phrases; empty unless relevant.
    pub phrases: Vec<KeyPhrase>,
}

/// Stateless layer-3 policy. The graph and the transport are passed per call.
#[derive(Debug, Clone)]
pub struct FocusedCrawler {
    pub model: RelevanceModel,
    pub extractor: PhraseExtractor,
    pub analyzer: Analyzer,
    pub context_window: usize,
    pub retries: u32,
}

impl FocusedCrawler {
    pub fn new(model: RelevanceModel, extractor: PhraseExtractor, analyzer: Analyzer, context_window: usize) -> Self {
        Self { model, extractor, analyzer, context_window, retries: 1 }
    }

    /// Fetches and judges `node`; transient failures are retried.
    pub fn visit(&self, node: NodeRecord, ctx: &FetchContext<'_>) -> Result<Visit, RelevanceError> {
        let mut attempts = 0;
        let fetched = loop {
            attempts += 1;
            match fetch_page(&node.url, ctx, self.context_window) {
                Err(PageError::FetchFailed { transient: true, .. }) if attempts <= self.retries => continue,
                other => break other,
            }
        };
        let (page, outcome) = match fetched {
            Ok(p) => (Some(p), Outcome::Fetched),
            Err(PageError::MediaSkipped { .. }) => (None, Outcome::MediaSkipped),
            Err(PageError::Unsupported { .. }) => (None, Outcome::Unsupported),
            Err(e) => (None, Outcome::Failed(e.to_string())),
        };
        let (score, relevant) = match &page {
            Some(p) => self.model.judge(&p.text)?,
            None => (0.0, false),
        };
        Ok(Visit { node, page, outcome, score, relevant, attempts })
    }

    /// Applies a visit to the graph: expansion for relevant pages, status
    /// resolution, then the analyzer's corrections.
    pub fn commit(&self, graph: &mut FrontierGraph, visit: Visit, now: Timestamp) -> CrawlResult {
        let url = visit.node.url.clone();
        let mut result = CrawlResult {
            url: url.clone(),
            page: None,
            outcome: visit.outcome.clone(),
            score: visit.score,
            relevant: visit.relevant,
            corrections: Vec::new(),
            new_edges: 0,
            phrases: Vec::new(),
        };
        let Some(page) = visit.page else {
            let _ = match visit.outcome {
                Outcome::MediaSkipped | Outcome::Unsupported => graph.exclude(&url, now),
                _ => graph.mark_failed(&url, now),
            };
            return result;
        };
        if visit.relevant {
            let phrases = self.extractor.extract(&page.text, graph.in_degree(&url), page.out_degree());
            let report = graph.insert_links(&url, &page.out_links, &phrases, Provenance::Fulltext, now);
            result.new_edges = report.edges_added.len();
            result.phrases = phrases;
        } else {
            let _ = graph.mark_fetched(&url, now);
        }
        result.corrections = self.analyzer.analyze(&page);
        graph.apply_corrections(&result.corrections, now);
        result.page = Some(page);
        result
    }

    /// One sequential step; `None` when the frontier is empty.
    pub fn crawl_step(&self, graph: &mut FrontierGraph, ctx: &FetchContext<'_>) -> Result<Option<CrawlResult>, RelevanceError> {
        let Some(node) = graph.next_frontier(1, ctx.clock.now()).pop() else {
            return Ok(None);
        };
        let url = node.url.clone();
        match self.visit(node, ctx) {
            Ok(v) => Ok(Some(self.commit(graph, v, ctx.clock.now()))),
            Err(e) => {
                let _ = graph.release(&url, ctx.clock.now());
                Err(e)
            }
        }
    }
}
