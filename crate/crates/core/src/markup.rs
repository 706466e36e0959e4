//! HTML to plain text with link contexts.
//!
//! Script and style content is dropped; block elements become line breaks,
//! which the tokenizer treats as sentence boundaries. Each anchor keeps the
//! tokens around it within its own block.

use std::sync::LazyLock;

use regex::Regex;
use scraper::node::Node;
use scraper::{ElementRef, Html};
use url::Url;

use crate::phrases::tokenize;
use crate::summary::LinkContext;
use crate::urlnorm;

const SKIPPED: &[&str] = &["script", "style", "noscript", "template", "svg", "iframe", "object"];

const BLOCKS: &[&str] = &[
    "address", "article", "aside", "blockquote", "body", "br", "dd", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hr", "html", "li", "main", "nav", "ol", "p", "pre", "section", "table", "tbody",
    "td", "tfoot", "th", "thead", "tr", "ul",
];

static TAG_LIKE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^<>]*>").unwrap());

/// A `<link rel="alternate">` declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlternateLink {
    pub mime: String,
    pub href: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extracted {
    /// Block texts joined with `\n`; contains no markup.
    pub text: String,
    pub title: Option<String>,
    pub links: Vec<LinkContext>,
    /// Anchors whose href could not be resolved to an http(s) URL.
    pub unresolved_links: usize,
    pub alternates: Vec<AlternateLink>,
    pub headings: Vec<String>,
}

impl Extracted {
    pub fn has_rss_alternate(&self) -> bool {
        self.alternates.iter().any(|a| a.mime == "application/rss+xml")
    }
}

#[derive(Default)]
struct Block {
    text: String,
    anchors: Vec<(usize, usize, String)>,
}

#[derive(Default)]
struct Walker {
    blocks: Vec<Block>,
    current: Block,
    title: Option<String>,
    alternates: Vec<AlternateLink>,
    headings: Vec<String>,
}

impl Walker {
    fn flush(&mut self) {
        let mut b = std::mem::take(&mut self.current);
        // trailing space from whitespace collapsing
        while b.text.ends_with(' ') {
            b.text.pop();
        }
        for a in &mut b.anchors {
            a.0 = a.0.min(b.text.len());
            a.1 = a.1.min(b.text.len());
        }
        if !b.text.is_empty() || !b.anchors.is_empty() {
            self.blocks.push(b);
        }
    }

    fn push_text(&mut self, raw: &str) {
        let cleaned = TAG_LIKE.replace_all(raw, " ");
        for c in cleaned.chars() {
            let c = if c == '<' || c == '>' { ' ' } else { c };
            if c.is_whitespace() {
                if !self.current.text.is_empty() && !self.current.text.ends_with(' ') {
                    self.current.text.push(' ');
                }
            } else {
                self.current.text.push(c);
            }
        }
    }

    fn walk(&mut self, el: ElementRef<'_>) {
        let name = el.value().name();
        if SKIPPED.contains(&name) {
            return;
        }
        match name {
            "title" => {
                let t = collapse(&el.text().collect::<String>());
                if self.title.is_none() && !t.is_empty() {
                    self.title = Some(t);
                }
                return;
            }
            "link" => {
                let v = el.value();
                let rel_alt = v
                    .attr("rel")
                    .is_some_and(|r| r.split_ascii_whitespace().any(|t| t.eq_ignore_ascii_case("alternate")));
                if let (true, Some(href)) = (rel_alt, v.attr("href")) {
                    self.alternates.push(AlternateLink {
                        mime: v.attr("type").unwrap_or("").trim().to_ascii_lowercase(),
                        href: href.trim().to_string(),
                    });
                }
                return;
            }
            "head" => {
                // only title/link are of interest here; text inside head is not content
                for child in el.children().filter_map(ElementRef::wrap) {
                    self.walk(child);
                }
                return;
            }
            _ => {}
        }

        let is_block = BLOCKS.contains(&name);
        if is_block {
            self.flush();
        }
        let generation = self.blocks.len();
        let heading_start = matches!(name, "h1" | "h2" | "h3" | "h4" | "h5" | "h6").then(|| self.current.text.len());
        let anchor = (name == "a")
            .then(|| el.value().attr("href"))
            .flatten()
            .map(|h| (self.current.text.len(), h.to_string()));

        for child in el.children() {
            match child.value() {
                Node::Text(t) => self.push_text(t),
                Node::Element(_) => {
                    if let Some(c) = ElementRef::wrap(child) {
                        self.walk(c);
                    }
                }
                _ => {}
            }
        }

        // a block inside the element started a new block: offsets restart at 0
        let restarted = self.blocks.len() != generation;
        if let Some((start, href)) = anchor {
            let text = &self.current.text;
            let end = text.trim_end().len();
            let start = if restarted { 0 } else { start.min(end) };
            let start = start + (text[start..end].len() - text[start..end].trim_start().len());
            self.current.anchors.push((start, end, href));
        }
        if let Some(start) = heading_start {
            let start = if restarted { 0 } else { start };
            let h = collapse(&self.current.text[start..]);
            if !h.is_empty() {
                self.headings.push(h);
            }
        }
        if is_block {
            self.flush();
        }
    }

    fn finish(mut self, base: &Url, window: usize) -> Extracted {
        self.flush();
        let mut out = Extracted {
            title: self.title,
            alternates: self.alternates,
            headings: self.headings,
            ..Default::default()
        };
        let mut texts = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            for (start, end, href) in &b.anchors {
                let target = match urlnorm::resolve(base, href) {
                    Ok(u) => u.to_string(),
                    Err(_) => {
                        out.unresolved_links += 1;
                        continue;
                    }
                };
                let before = tokenize(&b.text[..*start]);
                let after = tokenize(&b.text[*end..]);
                let skip = before.len().saturating_sub(window);
                out.links.push(LinkContext {
                    target,
                    anchor_text: b.text[*start..*end].trim().to_string(),
                    context_before: join_normalized(&before[skip..]),
                    context_after: join_normalized(&after[..after.len().min(window)]),
                });
            }
            if !b.text.is_empty() {
                texts.push(b.text.as_str());
            }
        }
        out.text = texts.join("\n");
        out
    }
}

fn join_normalized(tokens: &[crate::phrases::Token]) -> String {
    tokens.iter().map(|t| t.normalized.as_str()).collect::<Vec<_>>().join(" ")
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Extracts a full HTML document.
pub fn extract_document(html: &str, base: &Url, window: usize) -> Extracted {
    let doc = Html::parse_document(html);
    let mut w = Walker::default();
    w.walk(doc.root_element());
    w.finish(base, window)
}

/// Extracts an HTML fragment such as an RSS item description.
pub fn extract_fragment(html: &str, base: &Url, window: usize) -> Extracted {
    let doc = Html::parse_fragment(html);
    let mut w = Walker::default();
    w.walk(doc.root_element());
    w.finish(base, window)
}
