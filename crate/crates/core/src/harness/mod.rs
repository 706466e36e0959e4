//! Deterministic synthetic blogosphere for tests and experiments.
//!
//! Topicality is vocabulary based: topical blogs keep returning to a few
//! trending event phrases built from the topic vocabulary, off-topic blogs
//! chat about a wider spread of background phrases. Every generated URL
//! carries a ground-truth label.

mod bfs;
mod fixture;
mod memory;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ping::{escape_attr, serialize_changes_feed, PingEvent};
use crate::phrases::StopList;

pub use bfs::{baseline_bfs_crawl, harvest_rate, BfsTrace};
pub use fixture::{load_fixture, materialize, FixtureError};
pub use memory::{Access, AccessKind, MemoryTransport};

pub const BLOG_DOMAIN: &str = "blogs.example";
pub const NEWS_HOST: &str = "news.example";
/// Blogs whose index is congruent to this modulo 7 declare their feed at
/// `/feed.xml`, so `/rss` is absent and discovery must read the home page.
const DECLARED_FEED_RESIDUE: usize = 3;
const BASE_EPOCH: i64 = 1_790_812_800; // 2026-10-01T00:00:00Z
const CONNECTORS: &[&str] = &["the", "of", "and", "with", "for", "on", "in", "about", "from", "into"];
const SPAM_ANCHOR: &str = "see more here";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Topical,
    Offtopic,
    Spam,
    Empty,
    Media,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Topical => "topical",
            Label::Offtopic => "offtopic",
            Label::Spam => "spam",
            Label::Empty => "empty",
            Label::Media => "media",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "topical" => Label::Topical,
            "offtopic" => Label::Offtopic,
            "spam" => Label::Spam,
            "empty" => Label::Empty,
            "media" => Label::Media,
            other => return Err(format!("unknown label {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("{0} must be within [0, 1]")]
    Fraction(&'static str),
    #[error("special fractions sum to {0}, above 1")]
    FractionSum(f64),
    #[error("range {0} is empty or inverted")]
    Range(&'static str),
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("spec line: {0}")]
    Syntax(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSpec {
    pub rng_seed: u64,
    pub n_blogs: usize,
    pub topical_fraction: f64,
    pub spam_fraction: f64,
    pub empty_fraction: f64,
    pub media_fraction: f64,
    /// Inclusive.
    pub posts_per_blog: (usize, usize),
    /// Inclusive; in-text links of topical and off-topic posts.
    pub links_per_post: (usize, usize),
    pub topic_vocab: usize,
    pub background_vocab: usize,
    /// Share of topic words that also turn up in off-topic text.
    pub overlap_ratio: f64,
    pub topic_events: usize,
    pub ping_documents: usize,
    pub ping_interval: Duration,
    /// Extra announcements as a share of `n_blogs`.
    pub duplicate_ratio: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            rng_seed: 7,
            n_blogs: 200,
            topical_fraction: 0.4,
            spam_fraction: 0.1,
            empty_fraction: 0.1,
            media_fraction: 0.05,
            posts_per_blog: (3, 8),
            links_per_post: (2, 5),
            topic_vocab: 60,
            background_vocab: 600,
            overlap_ratio: 0.1,
            topic_events: 12,
            ping_documents: 4,
            ping_interval: Duration::from_secs(60),
            duplicate_ratio: 0.2,
        }
    }
}

impl WorldSpec {
    /// 200 blogs: 40% topical, 10% spam, 10% empty, 5% media.
    pub fn mixed_200(rng_seed: u64) -> Self {
        Self { rng_seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let fractions = [
            ("topical_fraction", self.topical_fraction),
            ("spam_fraction", self.spam_fraction),
            ("empty_fraction", self.empty_fraction),
            ("media_fraction", self.media_fraction),
            ("overlap_ratio", self.overlap_ratio),
        ];
        for (name, f) in fractions {
            if !(0.0..=1.0).contains(&f) {
                return Err(SpecError::Fraction(name));
            }
        }
        let sum = self.topical_fraction + self.spam_fraction + self.empty_fraction + self.media_fraction;
        if sum > 1.0 + 1e-12 {
            return Err(SpecError::FractionSum(sum));
        }
        if self.posts_per_blog.0 == 0 || self.posts_per_blog.0 > self.posts_per_blog.1 {
            return Err(SpecError::Range("posts_per_blog"));
        }
        if self.links_per_post.0 > self.links_per_post.1 {
            return Err(SpecError::Range("links_per_post"));
        }
        if self.duplicate_ratio < 0.0 {
            return Err(SpecError::Fraction("duplicate_ratio"));
        }
        for (name, v) in [
            ("topic_vocab", self.topic_vocab),
            ("background_vocab", self.background_vocab),
            ("topic_events", self.topic_events),
            ("ping_documents", self.ping_documents),
        ] {
            if v == 0 {
                return Err(SpecError::NonPositive(name));
            }
        }
        if self.topic_vocab < 2 * self.topic_events.min(self.topic_vocab) || self.background_vocab < 4 {
            return Err(SpecError::Range("vocabulary"));
        }
        Ok(())
    }

    /// Blog counts per label: `⌊fraction · n⌋` for each special label, the
    /// remainder off-topic.
    pub fn label_counts(&self) -> BTreeMap<Label, usize> {
        let n = self.n_blogs;
        let floor = |f: f64| (f * n as f64 + 1e-9).floor() as usize;
        let topical = floor(self.topical_fraction);
        let spam = floor(self.spam_fraction);
        let empty = floor(self.empty_fraction);
        let media = floor(self.media_fraction);
        let offtopic = n - topical - spam - empty - media;
        BTreeMap::from([
            (Label::Topical, topical),
            (Label::Offtopic, offtopic),
            (Label::Spam, spam),
            (Label::Empty, empty),
            (Label::Media, media),
        ])
    }

    /// Reads `key = value` lines; ranges are written `lo..hi`.
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let pairs = crate::kv::parse(text).map_err(|e| SpecError::Syntax(e.to_string()))?;
        let mut s = WorldSpec::default();
        for (k, v) in &pairs {
            let bad = || SpecError::Syntax(format!("bad value {v:?} for {k}"));
            let num = || v.parse::<f64>().map_err(|_| bad());
            let int = || v.parse::<usize>().map_err(|_| bad());
            let range = || -> Result<(usize, usize), SpecError> {
                let (a, b) = v.split_once("..").ok_or_else(bad)?;
                Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
            };
            match k.as_str() {
                "rng_seed" => s.rng_seed = v.parse().map_err(|_| bad())?,
                "n_blogs" => s.n_blogs = int()?,
                "topical_fraction" => s.topical_fraction = num()?,
                "spam_fraction" => s.spam_fraction = num()?,
                "empty_fraction" => s.empty_fraction = num()?,
                "media_fraction" => s.media_fraction = num()?,
                "posts_per_blog" => s.posts_per_blog = range()?,
                "links_per_post" => s.links_per_post = range()?,
                "topic_vocab" => s.topic_vocab = int()?,
                "background_vocab" => s.background_vocab = int()?,
                "overlap_ratio" => s.overlap_ratio = num()?,
                "topic_events" => s.topic_events = int()?,
                "ping_documents" => s.ping_documents = int()?,
                "ping_interval" => s.ping_interval = Duration::from_secs_f64(num()?),
                "duplicate_ratio" => s.duplicate_ratio = num()?,
                other => return Err(SpecError::Syntax(format!("unknown key {other:?}"))),
            }
        }
        s.validate()?;
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        format!(
            "rng_seed = {}\nn_blogs = {}\ntopical_fraction = {}\nspam_fraction = {}\nempty_fraction = {}\nmedia_fraction = {}\n\
             posts_per_blog = {}..{}\nlinks_per_post = {}..{}\ntopic_vocab = {}\nbackground_vocab = {}\noverlap_ratio = {}\n\
             topic_events = {}\nping_documents = {}\nping_interval = {}\nduplicate_ratio = {}\n",
            self.rng_seed,
            self.n_blogs,
            self.topical_fraction,
            self.spam_fraction,
            self.empty_fraction,
            self.media_fraction,
            self.posts_per_blog.0,
            self.posts_per_blog.1,
            self.links_per_post.0,
            self.links_per_post.1,
            self.topic_vocab,
            self.background_vocab,
            self.overlap_ratio,
            self.topic_events,
            self.ping_documents,
            self.ping_interval.as_secs_f64(),
            self.duplicate_ratio,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Site {
    pub status: u16,
    pub content_type: String,
    pub body: Vec<u8>,
}

/// One changes document, published `at` after the start of the run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PingDocument {
    pub at: Duration,
    pub body: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SyntheticWorld {
    pub sites: BTreeMap<String, Site>,
    pub ping_script: Vec<PingDocument>,
    /// Every site URL has one.
    pub labels: BTreeMap<String, Label>,
    /// Per blog home URL; media blogs are labeled media here.
    pub blog_labels: BTreeMap<String, Label>,
    /// Referenced URLs deliberately absent from `sites`.
    pub external: BTreeSet<String>,
    pub registry: Vec<String>,
    pub topic_corpus: Vec<String>,
    pub background_corpus: Vec<String>,
    /// Banned terms for the analyzer's glossary rule.
    pub glossary: Vec<String>,
}

impl SyntheticWorld {
    pub fn label(&self, url: &str) -> Option<Label> {
        self.labels.get(url).copied()
    }

    /// Blog home URLs in announcement order, first sighting only.
    pub fn announced_blogs(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for doc in &self.ping_script {
            if let Ok(feed) = crate::ping::parse_changes_feed(&doc.body) {
                for e in feed.events {
                    if self.blog_labels.contains_key(&e.url) && seen.insert(e.url.clone()) {
                        out.push(e.url);
                    }
                }
            }
        }
        out
    }
}

struct PostPlan {
    url: String,
    title: String,
    published: i64,
}

struct BlogPlan {
    url: String,
    name: String,
    kind: Label,
    feed_path: &'static str,
    /// Phrases this blog keeps returning to.
    hot: Vec<String>,
    posts: Vec<PostPlan>,
}

struct Vocab {
    topic_words: Vec<String>,
    background_words: Vec<String>,
    events: Vec<String>,
    background_phrases: Vec<String>,
    /// Background filler plus the overlapping topic words.
    background_filler: Vec<String>,
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "dr", "gr", "kr", "pl", "st", "tr", "sk"];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou", "ea"];
    const CODAS: &[&str] = &["", "", "n", "r", "s", "l", "x"];
    let mut w = String::new();
    for _ in 0..rng.gen_range(2..=3) {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(VOWELS.choose(rng).unwrap());
    }
    w.push_str(CODAS.choose(rng).unwrap());
    w
}

fn build_vocab(spec: &WorldSpec, rng: &mut ChaCha8Rng) -> Vocab {
    let stops = StopList::english();
    let mut seen = BTreeSet::new();
    let mut words = Vec::new();
    while words.len() < spec.topic_vocab + spec.background_vocab {
        let w = pseudo_word(rng);
        if !stops.contains(&w) && seen.insert(w.clone()) {
            words.push(w);
        }
    }
    let background_words = words.split_off(spec.topic_vocab);
    let topic_words = words;

    let mut events = Vec::new();
    let mut shuffled = topic_words.clone();
    shuffled.shuffle(rng);
    let mut it = shuffled.iter().cycle();
    for i in 0..spec.topic_events {
        let len = if i % 3 == 2 { 3 } else { 2 };
        let phrase: Vec<&str> = (0..len).map(|_| it.next().unwrap().as_str()).collect();
        events.push(phrase.join(" "));
    }
    let background_phrases = background_words.chunks_exact(2).map(|c| format!("{} {}", c[0], c[1])).collect();
    let n_overlap = (spec.overlap_ratio * topic_words.len() as f64).round() as usize;
    let mut background_filler = background_words.clone();
    background_filler.extend(topic_words.iter().take(n_overlap).cloned());
    Vocab { topic_words, background_words, events, background_phrases, background_filler }
}

/// Connector-separated filler around one phrase, so the phrase is the only
/// multi-word candidate in the sentence.
fn sentence(rng: &mut ChaCha8Rng, phrase: &str, filler: &[String]) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for _ in 0..rng.gen_range(1..=3) {
        parts.push(CONNECTORS.choose(rng).unwrap());
        parts.push(filler.choose(rng).unwrap());
    }
    parts.push(CONNECTORS.choose(rng).unwrap());
    parts.push(phrase);
    for _ in 0..rng.gen_range(1..=2) {
        parts.push(CONNECTORS.choose(rng).unwrap());
        parts.push(filler.choose(rng).unwrap());
    }
    let mut s = parts.join(" ");
    if let Some(first) = s.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    s
}

/// Four sentences on one line.
fn corpus_doc(rng: &mut ChaCha8Rng, phrases: &[String], filler: &[String]) -> String {
    (0..4)
        .map(|_| {
            let phrase = phrases.choose(rng).unwrap().clone();
            sentence(rng, &phrase, filler) + "."
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn title_case(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn rfc2822(secs: i64) -> String {
    chrono::DateTime::from_timestamp(secs, 0).expect("in range").to_rfc2822()
}

fn ymd(secs: i64) -> String {
    chrono::DateTime::from_timestamp(secs, 0).expect("in range").format("%Y-%m-%d").to_string()
}

fn html_page(title: &str, feed: Option<&str>, body: &str) -> String {
    let alt = feed
        .map(|f| format!("<link rel=\"alternate\" type=\"application/rss+xml\" href=\"{f}\">"))
        .unwrap_or_default();
    format!("<!DOCTYPE html>\n<html><head><title>{}</title>{alt}</head>\n<body>\n{body}</body></html>\n", escape_attr(title))
}

fn anchor(href: &str, text: &str) -> String {
    format!("<a href=\"{}\">{}</a>", escape_attr(href), escape_attr(text))
}

struct Pools {
    topical: Vec<(usize, usize)>,
    offtopic: Vec<(usize, usize)>,
    spam: Vec<(usize, usize)>,
}

pub fn generate_world(spec: &WorldSpec) -> Result<SyntheticWorld, SpecError> {
    spec.validate()?;
    let mut world = SyntheticWorld { registry: vec![format!("*.{BLOG_DOMAIN}")], ..Default::default() };
    if spec.n_blogs == 0 {
        return Ok(world);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let vocab = build_vocab(spec, &mut rng);

    let mut kinds: Vec<Label> = spec.label_counts().into_iter().flat_map(|(l, n)| std::iter::repeat(l).take(n)).collect();
    kinds.shuffle(&mut rng);

    let mut blogs = Vec::with_capacity(spec.n_blogs);
    for (i, &kind) in kinds.iter().enumerate() {
        let url = format!("http://b{i:03}.{BLOG_DOMAIN}/");
        let feed_path = if i % 7 == DECLARED_FEED_RESIDUE { "feed.xml" } else { "rss" };
        let hot: Vec<String> = match kind {
            Label::Topical | Label::Media => vocab.events.choose_multiple(&mut rng, 3.min(vocab.events.len())).cloned().collect(),
            Label::Offtopic => vocab.background_phrases.choose_multiple(&mut rng, 8.min(vocab.background_phrases.len())).cloned().collect(),
            _ => Vec::new(),
        };
        let n_posts = if kind == Label::Empty { 0 } else { rng.gen_range(spec.posts_per_blog.0..=spec.posts_per_blog.1) };
        let mut posts = Vec::with_capacity(n_posts);
        for j in 1..=n_posts {
            let post_url = if kind == Label::Media { format!("{url}media/{j}.mp3") } else { format!("{url}post/{j}") };
            let title = match kind {
                Label::Topical => format!("{} {} {}", hot.choose(&mut rng).unwrap(), CONNECTORS.choose(&mut rng).unwrap(), vocab.topic_words.choose(&mut rng).unwrap()),
                Label::Media => format!("{} podcast episode {j}", hot.choose(&mut rng).unwrap()),
                Label::Offtopic => format!("{} {} {}", hot.choose(&mut rng).unwrap(), CONNECTORS.choose(&mut rng).unwrap(), vocab.background_words.choose(&mut rng).unwrap()),
                _ => (0..3).map(|_| vocab.background_words.choose(&mut rng).unwrap().as_str()).collect::<Vec<_>>().join(" "),
            };
            let published = BASE_EPOCH - (j as i64) * 86_400 - rng.gen_range(0..86_400);
            posts.push(PostPlan { url: post_url, title: title_case(&title), published });
        }
        blogs.push(BlogPlan { url, name: format!("Blog {i:03}"), kind, feed_path, hot, posts });
    }

    let mut pools = Pools { topical: Vec::new(), offtopic: Vec::new(), spam: Vec::new() };
    for (b, blog) in blogs.iter().enumerate() {
        let pool = match blog.kind {
            Label::Topical => &mut pools.topical,
            Label::Offtopic => &mut pools.offtopic,
            Label::Spam => &mut pools.spam,
            _ => continue,
        };
        pool.extend((0..blog.posts.len()).map(|p| (b, p)));
    }

    let mut news = 0usize;
    for b in 0..blogs.len() {
        emit_blog(spec, &blogs, b, &vocab, &pools, &mut rng, &mut news, &mut world);
    }
    world.ping_script = ping_script(spec, &blogs, &mut rng);

    world.topic_corpus = (0..20).map(|_| corpus_doc(&mut rng, &vocab.events, &vocab.topic_words)).collect();
    world.background_corpus = (0..40).map(|_| corpus_doc(&mut rng, &vocab.background_phrases, &vocab.background_filler)).collect();
    world.glossary = vec!["casino".into(), "payday loans".into()];
    Ok(world)
}

#[allow(clippy::too_many_arguments)]
fn emit_blog(
    spec: &WorldSpec,
    blogs: &[BlogPlan],
    b: usize,
    vocab: &Vocab,
    pools: &Pools,
    rng: &mut ChaCha8Rng,
    news: &mut usize,
    world: &mut SyntheticWorld,
) {
    let blog = &blogs[b];
    let html = "text/html; charset=utf-8";
    // media blogs' own pages carry no article text
    let page_label = if blog.kind == Label::Media { Label::Offtopic } else { blog.kind };
    let feed_url = format!("{}{}", blog.url, blog.feed_path);
    world.blog_labels.insert(blog.url.clone(), blog.kind);

    let mut items = Vec::new();
    for (p, post) in blog.posts.iter().enumerate() {
        let (first_para, body_html) = match blog.kind {
            Label::Topical | Label::Offtopic => post_body(spec, blogs, b, p, vocab, pools, rng, news, world),
            Label::Spam => spam_body(blogs, vocab, pools, rng),
            Label::Media => {
                let size = rng.gen_range(2_000..6_000);
                let bytes: Vec<u8> = (0..size).map(|_| rng.gen()).collect();
                world.sites.insert(post.url.clone(), Site { status: 200, content_type: "audio/mpeg".into(), body: bytes });
                world.labels.insert(post.url.clone(), Label::Media);
                let s = sentence(rng, &blog.hot[p % blog.hot.len()], &vocab.topic_words);
                (format!("<p>{}.</p>", escape_attr(&s)), String::new())
            }
            Label::Empty => unreachable!("empty blogs have no posts"),
        };
        if blog.kind != Label::Media {
            let page = html_page(&post.title, Some(&format!("/{}", blog.feed_path)), &format!("<h1>{}</h1>\n<article>\n<h2>{}</h2>\n{body_html}</article>\n", blog.name, escape_attr(&post.title)));
            world.sites.insert(post.url.clone(), Site { status: 200, content_type: html.into(), body: page.into_bytes() });
            world.labels.insert(post.url.clone(), page_label);
        }
        items.push(format!(
            "<item><title>{}</title><link>{}</link><description>{}</description><pubDate>{}</pubDate></item>",
            escape_attr(&post.title),
            escape_attr(&post.url),
            escape_attr(&first_para),
            rfc2822(post.published)
        ));
    }
    let feed = format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<rss version=\"2.0\"><channel><title>{}</title><link>{}</link><description>posts</description>\n{}\n</channel></rss>\n",
        blog.name,
        blog.url,
        items.join("\n")
    );
    world.sites.insert(feed_url.clone(), Site { status: 200, content_type: "application/rss+xml".into(), body: feed.into_bytes() });
    world.labels.insert(feed_url, page_label);

    let mut home = format!("<h1>{}</h1>\n", blog.name);
    if blog.posts.is_empty() {
        home.push_str("<p>Nothing posted yet.</p>\n");
    }
    for post in &blog.posts {
        home.push_str(&format!("<h2>{}: {}</h2>\n", ymd(post.published), anchor(&post.url, &post.title)));
    }
    let page = html_page(&blog.name, Some(&format!("/{}", blog.feed_path)), &home);
    world.sites.insert(blog.url.clone(), Site { status: 200, content_type: html.into(), body: page.into_bytes() });
    world.labels.insert(blog.url.clone(), page_label);
}

/// Article paragraphs with in-text links; returns the first paragraph
/// (the feed description) and the whole article body.
#[allow(clippy::too_many_arguments)]
fn post_body(
    spec: &WorldSpec,
    blogs: &[BlogPlan],
    b: usize,
    p: usize,
    vocab: &Vocab,
    pools: &Pools,
    rng: &mut ChaCha8Rng,
    news: &mut usize,
    world: &mut SyntheticWorld,
) -> (String, String) {
    let blog = &blogs[b];
    let topical = blog.kind == Label::Topical;
    let filler: &[String] = if topical { &vocab.topic_words } else { &vocab.background_filler };
    let pick_phrase = |rng: &mut ChaCha8Rng| -> String {
        if topical && rng.gen_bool(0.25) {
            vocab.events.choose(rng).unwrap().clone()
        } else {
            blog.hot.choose(rng).unwrap().clone()
        }
    };

    let mut paragraphs: Vec<Vec<String>> = (0..3)
        .map(|_| {
            (0..rng.gen_range(3..=4))
                .map(|_| {
                    let phrase = pick_phrase(rng);
                    escape_attr(&sentence(rng, &phrase, filler))
                })
                .collect()
        })
        .collect();

    let own = (b, p);
    let n_links = rng.gen_range(spec.links_per_post.0..=spec.links_per_post.1);
    for _ in 0..n_links {
        let roll: f64 = rng.gen();
        let target = if topical {
            if roll < 0.65 {
                pick_other(&pools.topical, own, rng)
            } else if roll < 0.85 {
                pick_other(&pools.offtopic, own, rng)
            } else {
                None
            }
        } else if roll < 0.7 {
            pick_other(&pools.offtopic, own, rng)
        } else {
            pick_other(&pools.topical, own, rng)
        };
        let link = match target {
            Some((tb, tp)) => anchor(&blogs[tb].posts[tp].url, &blogs[tb].posts[tp].title),
            None => {
                *news += 1;
                let url = format!("http://{NEWS_HOST}/story/{news}");
                world.external.insert(url.clone());
                anchor(&url, &format!("{} coverage", pick_phrase(rng)))
            }
        };
        let para = rng.gen_range(0..paragraphs.len());
        let sent = rng.gen_range(0..paragraphs[para].len());
        paragraphs[para][sent].push(' ');
        paragraphs[para][sent].push_str(&link);
    }

    let first = format!("<p>{}.</p>", paragraphs[0].join(". "));
    let mut body: String = paragraphs.iter().map(|s| format!("<p>{}.</p>\n", s.join(". "))).collect();
    if rng.gen_bool(0.5) {
        let img = format!("{}img/{}.png", blog.url, p + 1);
        let size = rng.gen_range(1_000..4_000);
        let bytes: Vec<u8> = (0..size).map(|_| rng.gen()).collect();
        world.sites.insert(img.clone(), Site { status: 200, content_type: "image/png".into(), body: bytes });
        world.labels.insert(img.clone(), Label::Media);
        body.push_str(&format!("<figure>{}</figure>\n", anchor(&img, &format!("photo of {}", pick_phrase(rng)))));
    }
    if !pools.spam.is_empty() && rng.gen_bool(0.5) {
        let (sb, sp) = *pools.spam.choose(rng).unwrap();
        body.push_str(&format!("<div class=\"comments\"><p>Great post! {}</p></div>\n", anchor(&blogs[sb].posts[sp].url, SPAM_ANCHOR)));
    }
    (first, body)
}

fn pick_other(pool: &[(usize, usize)], own: (usize, usize), rng: &mut ChaCha8Rng) -> Option<(usize, usize)> {
    for _ in 0..4 {
        let c = *pool.choose(rng)?;
        if c != own {
            return Some(c);
        }
    }
    None
}

/// Link-farm page: a few words and a list of identical anchors into the farm.
fn spam_body(blogs: &[BlogPlan], vocab: &Vocab, pools: &Pools, rng: &mut ChaCha8Rng) -> (String, String) {
    let words: Vec<&str> = (0..8).map(|_| vocab.background_words.choose(rng).unwrap().as_str()).collect();
    let intro = format!("<p>{}</p>", words.join(" "));
    let mut list = String::from("<ul>\n");
    let n = rng.gen_range(12..=20).min(pools.spam.len());
    for &(sb, sp) in pools.spam.choose_multiple(rng, n) {
        list.push_str(&format!("<li>{}</li>\n", anchor(&blogs[sb].posts[sp].url, SPAM_ANCHOR)));
    }
    list.push_str("</ul>\n");
    (intro.clone(), format!("{intro}\n{list}"))
}

fn ping_script(spec: &WorldSpec, blogs: &[BlogPlan], rng: &mut ChaCha8Rng) -> Vec<PingDocument> {
    let mut announce: Vec<(String, String)> = blogs.iter().map(|b| (b.name.clone(), b.url.clone())).collect();
    let dups = (spec.duplicate_ratio * blogs.len() as f64).round() as usize;
    for _ in 0..dups {
        let b = blogs.choose(rng).unwrap();
        announce.push((b.name.clone(), b.url.clone()));
    }
    for k in 0..5 {
        let host = if k % 2 == 0 { NEWS_HOST } else { "elsewhere.example" };
        announce.push((format!("Outside {k}"), format!("http://{host}/")));
    }
    announce.shuffle(rng);
    let per_doc = announce.len().div_ceil(spec.ping_documents);
    announce
        .chunks(per_doc)
        .enumerate()
        .map(|(d, chunk)| {
            let events: Vec<PingEvent> = chunk
                .iter()
                .map(|(name, url)| PingEvent { site_name: name.clone(), url: url.clone(), when: rng.gen_range(0..spec.ping_interval.as_secs().max(1)) })
                .collect();
            let at = spec.ping_interval * d as u32;
            let updated = chrono::DateTime::from_timestamp(BASE_EPOCH + at.as_secs() as i64, 0)
                .expect("in range")
                .format("%a, %d %b %Y %H:%M:%S GMT")
                .to_string();
            PingDocument { at, body: serialize_changes_feed(&events, &updated) }
        })
        .collect()
}
