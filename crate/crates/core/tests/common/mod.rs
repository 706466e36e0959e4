//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use blogwatch::clock::{Clock, SimClock, Timestamp};
use blogwatch::fetch::FetchContext;
use blogwatch::focused::{CrawlResult, Outcome};
use blogwatch::graph::{Correction, CorrectionKind, FrontierGraph, NodeStatus, Provenance};
use blogwatch::harness::{Access, MemoryTransport, SyntheticWorld};
use blogwatch::phrases::{KeyPhrase, Phrase, StopList};
use blogwatch::ping::{match_registry, parse_changes_feed, SeedUrl};
use blogwatch::pipeline::{RunConfig, Setup};
use blogwatch::summary::{fetch_summary, LinkContext};
use blogwatch::throttle::{Politeness, TokenBucket};
use blogwatch::transport::FetchLimits;

/// A generated document as words, each flagged when a sentence ends after it.
pub type Words = Vec<(String, bool)>;

pub fn render(words: &Words) -> String {
    let mut s = String::new();
    for (w, end) in words {
        s.push_str(w);
        s.push_str(if *end { ". " } else { " " });
    }
    s
}

pub const WORD_POOL: &[&str] = &[
    "harbor", "storm", "ferry", "grid", "solar", "panel", "river", "flood", "market", "vote", "senate", "quake",
    "drill", "engine", "Rocket", "Orbit", "lunar", "crater",
];
pub const STOP_POOL: &[&str] = &["the", "of", "and", "a", "in", "to", "is", "The", "OF"];

/// Content and stop words mixed, with random sentence ends.
pub fn random_words(rng: &mut impl Rng, len: usize) -> Words {
    (0..len)
        .map(|_| {
            let w = if rng.gen_bool(0.3) { STOP_POOL[rng.gen_range(0..STOP_POOL.len())] } else { WORD_POOL[rng.gen_range(0..WORD_POOL.len())] };
            (w.to_string(), rng.gen_bool(0.08))
        })
        .collect()
}

/// Every 2- and 3-word window of the raw word sequence that contains no
/// stop word and no sentence end before its last word.
pub fn ngram_oracle(words: &Words, stops: &StopList) -> BTreeMap<Vec<String>, u32> {
    let mut out = BTreeMap::new();
    for n in 2..=3 {
        for i in 0..words.len().saturating_sub(n - 1) {
            let w = &words[i..i + n];
            let clean = w.iter().all(|(t, _)| !stops.contains(&t.to_lowercase()));
            let unbroken = w[..n - 1].iter().all(|(_, end)| !end);
            if clean && unbroken {
                *out.entry(w.iter().map(|(t, _)| t.to_lowercase()).collect()).or_insert(0) += 1;
            }
        }
    }
    out
}

/// Frontier order by repeated argmax over a snapshot of the graph:
/// priority is the max weight over incoming edges from non-excluded
/// sources, ties go to the node inserted first.
pub fn argmax_order(graph: &FrontierGraph) -> Vec<(String, f64)> {
    let order: Vec<String> = graph.nodes().map(|n| n.url.clone()).collect();
    let mut status: HashMap<String, NodeStatus> = graph.nodes().map(|n| (n.url.clone(), n.status)).collect();
    let mut incoming: HashMap<String, Vec<(String, f64)>> = HashMap::new();
    for e in graph.edges() {
        incoming.entry(e.dst).or_default().push((e.src, e.weight));
    }
    let mut out = Vec::new();
    loop {
        let mut best: Option<(usize, f64)> = None;
        for (i, url) in order.iter().enumerate() {
            if status[url] != NodeStatus::Unfetched {
                continue;
            }
            let live: Vec<f64> = incoming
                .get(url)
                .into_iter()
                .flatten()
                .filter(|(src, _)| status[src] != NodeStatus::Excluded)
                .map(|(_, w)| *w)
                .collect();
            if live.is_empty() {
                continue;
            }
            let p = live.iter().copied().fold(0.0, f64::max);
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((i, p));
            }
        }
        let Some((i, p)) = best else { return out };
        status.insert(order[i].clone(), NodeStatus::InFlight);
        out.push((order[i].clone(), p));
    }
}

/// Normalized token string of `text`, space separated and space padded.
fn padded(text: &str) -> String {
    let words: Vec<String> = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect();
    format!(" {} ", words.join(" "))
}

/// `Σ score · occurrences`, counting overlapping substring hits of each
/// padded phrase in the padded evidence.
pub fn weight_oracle(evidence: &str, phrases: &[(&str, f64)]) -> f64 {
    let hay = padded(evidence);
    phrases
        .iter()
        .map(|(p, s)| {
            let needle = padded(p);
            let hits = (0..hay.len()).filter(|&i| hay[i..].starts_with(&needle)).count();
            s * hits as f64
        })
        .sum()
}

/// What an independent sequential replay observed.
pub struct Replay {
    pub graph: FrontierGraph,
    pub steps: Vec<CrawlResult>,
    pub log: Vec<Access>,
    pub seeds_in: u64,
    pub summaries_ok: u64,
}

/// Replays a batch run step by step from the documented schedule: each
/// changes document is parsed, matched and deduplicated; every admitted
/// seed is summarized; then pages are crawled until the running total
/// reaches `fetched + ceil(left / documents_remaining)`. A final crawl
/// drains the rest of the budget.
pub fn replay_batch(world: &Arc<SyntheticWorld>, setup: &Setup, cfg: &RunConfig) -> Replay {
    let clock = SimClock::new();
    let transport = MemoryTransport::new(world.clone());
    let bucket = TokenBucket::new(cfg.bandwidth_limit);
    let politeness = Politeness::new(cfg.politeness_delay);
    let ctx = FetchContext {
        transport: &transport,
        limits: FetchLimits::default(),
        clock: &clock,
        throttle: Some(&bucket),
        politeness: Some(&politeness),
    };
    let mut graph = FrontierGraph::new(cfg.max_nodes);
    let mut last_seen: HashMap<String, Timestamp> = HashMap::new();
    let mut steps = Vec::new();
    let (mut seeds_in, mut summaries_ok, mut fetched) = (0u64, 0u64, 0u64);
    let budget = cfg.max_pages as u64;
    let n_docs = world.ping_script.len() as u64;

    let crawl_to = |target: u64, graph: &mut FrontierGraph, fetched: &mut u64, steps: &mut Vec<CrawlResult>| {
        while *fetched < target {
            let Some(r) = setup.crawler.crawl_step(graph, &ctx).unwrap() else { break };
            if r.outcome == Outcome::Fetched {
                *fetched += 1;
            }
            steps.push(r);
        }
    };

    for (i, doc) in world.ping_script.iter().enumerate() {
        let at = Timestamp(doc.at.as_millis() as u64);
        if clock.now() < at {
            clock.advance(at.since(clock.now()));
        }
        let feed = parse_changes_feed(&doc.body).expect("generated documents parse");
        let seeds: Vec<SeedUrl> = match_registry(&feed.events, &setup.registry, clock.now());
        for seed in seeds {
            let fresh = last_seen
                .get(&seed.url)
                .is_none_or(|&t| seed.discovered_at.since(t) >= cfg.dedupe_window);
            if !fresh {
                continue;
            }
            last_seen.insert(seed.url.clone(), seed.discovered_at);
            seeds_in += 1;
            if let Ok(f) = fetch_summary(&seed, &ctx, setup.context_window) {
                let phrases = setup.summary_phrases(&f.doc, graph.in_degree(&f.doc.blog_url));
                graph.insert_summary(&f.doc, &phrases, setup.context_window, clock.now());
                summaries_ok += 1;
            }
        }
        let remaining = n_docs - i as u64;
        let target = fetched + (budget - fetched.min(budget)).div_ceil(remaining);
        crawl_to(target, &mut graph, &mut fetched, &mut steps);
    }
    crawl_to(budget, &mut graph, &mut fetched, &mut steps);
    Replay { graph, steps, log: transport.access_log(), seeds_in, summaries_ok }
}

pub fn key_phrase(text: &str, score: f64) -> KeyPhrase {
    KeyPhrase { phrase: Phrase::new(text.split(' ')), count: 1, score }
}

pub fn link_to(target: &str, before: &str, anchor: &str, after: &str) -> LinkContext {
    LinkContext { target: target.into(), anchor_text: anchor.into(), context_before: before.into(), context_after: after.into() }
}

pub const ANCHORS: &[&str] = &["alpha beta", "gamma delta", "alpha beta gamma delta", "nothing here", "gamma delta gamma delta"];

/// A random graph of exactly `n` nodes with tied weights, exclusions, rescales
/// and some fetched nodes.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> FrontierGraph {
    let phrases = [key_phrase("alpha beta", 1.0), key_phrase("gamma delta", 2.0)];
    let url = |i: usize| format!("http://n{i}.example/");
    let mut g = FrontierGraph::new(n + 1);
    while g.len() < n {
        let s = rng.gen_range(0..n);
        let links: Vec<LinkContext> = (0..rng.gen_range(1..6))
            .map(|_| link_to(&url(rng.gen_range(0..n)), "", ANCHORS[rng.gen_range(0..ANCHORS.len())], ""))
            .collect();
        g.insert_links(&url(s), &links, &phrases, Provenance::Summary, Timestamp(0));
    }
    let urls: Vec<String> = g.nodes().map(|r| r.url.clone()).collect();
    let mut corrections = Vec::new();
    for u in &urls {
        let kind = match rng.gen_range(0..20) {
            0 => CorrectionKind::ExcludeSpam,
            1 => CorrectionKind::ConfirmBlog,
            2 => CorrectionKind::Rescale(0.5),
            3 => CorrectionKind::Rescale(1.5),
            _ => continue,
        };
        corrections.push(Correction { target: u.clone(), kind, reason: String::new() });
    }
    g.apply_corrections(&corrections, Timestamp(1));
    for u in urls.iter().filter(|_| rng.gen_bool(0.05)) {
        let _ = g.mark_fetched(u, Timestamp(1));
    }
    g
}
