//! Concurrent run: one ingest thread, a pool of summary workers and a pool
//! of page fetchers around a shared graph.
//!
//! Ingest never blocks on downstream stages: seeds enter a bounded ring
//! that overwrites its oldest entry when full.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use crossbeam::queue::ArrayQueue;

use super::{CountingTransport, RunConfig, RunError, RunReport, Setup, Tally};
use crate::clock::Clock;
use crate::fetch::FetchContext;
use crate::focused::PageStore;
use crate::graph::FrontierGraph;
use crate::harness::SyntheticWorld;
use crate::ping::{match_registry, parse_changes_feed, SeedDeduper, SeedUrl};
use crate::summary::fetch_summary;
use crate::throttle::{Politeness, TokenBucket};
use crate::transport::{FetchLimits, Transport};

const IDLE: Duration = Duration::from_millis(2);

pub enum Poll {
    Document(String),
    /// Nothing new this round.
    Nothing,
    /// The source will never produce again.
    Exhausted,
}

pub trait PingSource: Send {
    fn poll(&mut self) -> Poll;
}

/// Replays a fixed list of changes documents, one per poll.
pub struct ScriptSource {
    docs: VecDeque<String>,
}

impl ScriptSource {
    pub fn new(docs: impl IntoIterator<Item = String>) -> Self {
        Self { docs: docs.into_iter().collect() }
    }

    pub fn from_world(world: &SyntheticWorld) -> Self {
        Self::new(world.ping_script.iter().map(|d| d.body.clone()))
    }
}

impl PingSource for ScriptSource {
    fn poll(&mut self) -> Poll {
        self.docs.pop_front().map_or(Poll::Exhausted, Poll::Document)
    }
}

/// Polls a live changes URL.
pub struct HttpPingSource<'a> {
    transport: &'a dyn Transport,
    url: String,
    limits: FetchLimits,
}

impl<'a> HttpPingSource<'a> {
    pub fn new(transport: &'a dyn Transport, url: String) -> Self {
        Self { transport, url, limits: FetchLimits { max_bytes: 8 << 20, ..FetchLimits::default() } }
    }
}

impl PingSource for HttpPingSource<'_> {
    fn poll(&mut self) -> Poll {
        match self.transport.fetch(&self.url, self.limits.max_bytes, self.limits.timeout) {
            Ok(r) if r.status < 400 => Poll::Document(String::from_utf8_lossy(&r.body).into_owned()),
            Ok(r) => {
                tracing::warn!(url = %self.url, status = r.status, "changes poll failed");
                Poll::Nothing
            }
            Err(e) => {
                tracing::warn!(url = %self.url, error = %e, "changes poll failed");
                Poll::Nothing
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestStats {
    pub polls: u64,
    /// Longest single enqueue.
    pub max_enqueue: Duration,
    /// Wall time from start until the ingest thread exited.
    pub elapsed: Duration,
}

pub struct OnlineOutcome {
    pub report: RunReport,
    pub graph: FrontierGraph,
    pub ingest: IngestStats,
}

struct Shared<'a> {
    setup: &'a Setup,
    cfg: &'a RunConfig,
    ctx: FetchContext<'a>,
    store: Option<&'a PageStore>,
    graph: Mutex<FrontierGraph>,
    tally: Mutex<Tally>,
    queue: ArrayQueue<SeedUrl>,
    external_stop: &'a AtomicBool,
    internal_stop: AtomicBool,
    ingest_done: AtomicBool,
    summary_active: AtomicUsize,
    fetch_active: AtomicUsize,
    fetchers_alive: AtomicUsize,
}

impl Shared<'_> {
    fn stopping(&self) -> bool {
        self.external_stop.load(Ordering::SeqCst) || self.internal_stop.load(Ordering::SeqCst)
    }

    fn snapshot(&self) -> RunReport {
        let graph = self.graph.lock().unwrap();
        self.tally.lock().unwrap().finish(&graph, Duration::ZERO, 0, self.cfg.latency_slo)
    }
}

/// Runs until the source is exhausted and all work drains, `max_pages`
/// pages are fetched, or `stop` is raised. On stop, ingest exits first and
/// workers finish only the item in hand.
pub fn run_online(
    setup: &Setup,
    cfg: &RunConfig,
    transport: &dyn Transport,
    source: &mut dyn PingSource,
    clock: &dyn Clock,
    stop: &AtomicBool,
    store: Option<&PageStore>,
) -> Result<OnlineOutcome, RunError> {
    cfg.validate()?;
    let started = Instant::now();
    let counting = CountingTransport::new(transport);
    let bucket = TokenBucket::new(cfg.bandwidth_limit);
    let politeness = Politeness::new(cfg.politeness_delay);
    let shared = Shared {
        setup,
        cfg,
        ctx: FetchContext {
            transport: &counting,
            limits: FetchLimits::default(),
            clock,
            throttle: Some(&bucket),
            politeness: Some(&politeness),
        },
        store,
        graph: Mutex::new(FrontierGraph::new(cfg.max_nodes)),
        tally: Mutex::new(Tally::default()),
        queue: ArrayQueue::new(cfg.queue_capacity),
        external_stop: stop,
        internal_stop: AtomicBool::new(false),
        ingest_done: AtomicBool::new(false),
        summary_active: AtomicUsize::new(0),
        fetch_active: AtomicUsize::new(0),
        fetchers_alive: AtomicUsize::new(cfg.fetch_workers),
    };
    let errors: Mutex<Vec<RunError>> = Mutex::new(Vec::new());

    let ingest = std::thread::scope(|s| {
        let ingest = s.spawn(|| ingest_loop(&shared, source, started));
        for _ in 0..cfg.summary_workers {
            s.spawn(|| summary_loop(&shared));
        }
        for _ in 0..cfg.fetch_workers {
            s.spawn(|| {
                if let Err(e) = fetch_loop(&shared) {
                    errors.lock().unwrap().push(e);
                    shared.internal_stop.store(true, Ordering::SeqCst);
                }
                shared.fetchers_alive.fetch_sub(1, Ordering::SeqCst);
            });
        }
        let mut last_report = Instant::now();
        while shared.fetchers_alive.load(Ordering::SeqCst) > 0 {
            std::thread::sleep(Duration::from_millis(10));
            if last_report.elapsed() >= cfg.report_interval {
                last_report = Instant::now();
                let r = shared.snapshot();
                tracing::info!(
                    seeds = r.seeds_in,
                    dropped = r.seeds_dropped,
                    summaries = r.summaries_ok,
                    pages = r.pages_fetched,
                    relevant = r.pages_relevant,
                    nodes = r.graph_nodes,
                    "progress"
                );
            }
        }
        shared.internal_stop.store(true, Ordering::SeqCst);
        ingest.join().expect("ingest thread panicked")
    });

    if let Some(e) = errors.into_inner().unwrap().into_iter().next() {
        return Err(e);
    }
    let graph = shared.graph.into_inner().unwrap();
    let report = shared.tally.into_inner().unwrap().finish(&graph, started.elapsed(), counting.bytes(), cfg.latency_slo);
    Ok(OnlineOutcome { report, graph, ingest })
}

fn sleep_unless_stopped(shared: &Shared<'_>, total: Duration) {
    let until = Instant::now() + total;
    while !shared.stopping() {
        let now = Instant::now();
        if now >= until {
            return;
        }
        std::thread::sleep((until - now).min(Duration::from_millis(10)));
    }
}

fn ingest_loop(shared: &Shared<'_>, source: &mut dyn PingSource, started: Instant) -> IngestStats {
    let mut stats = IngestStats::default();
    let mut deduper = SeedDeduper::new(shared.cfg.dedupe_window);
    while !shared.stopping() {
        let polled = source.poll();
        stats.polls += 1;
        let text = match polled {
            Poll::Document(t) => t,
            Poll::Nothing => {
                sleep_unless_stopped(shared, shared.cfg.poll_interval);
                continue;
            }
            Poll::Exhausted => break,
        };
        let now = shared.ctx.clock.now();
        deduper.prune(now);
        let seeds = match parse_changes_feed(&text) {
            Ok(feed) => match_registry(&feed.events, &shared.setup.registry, now),
            Err(e) => {
                tracing::warn!(error = %e, "changes document rejected");
                Vec::new()
            }
        };
        let (mut admitted, mut duplicate, mut dropped) = (0, 0, 0);
        for seed in seeds {
            if !deduper.admit(&seed) {
                duplicate += 1;
                continue;
            }
            admitted += 1;
            let t = Instant::now();
            if shared.queue.force_push(seed).is_some() {
                dropped += 1;
            }
            stats.max_enqueue = stats.max_enqueue.max(t.elapsed());
        }
        {
            let mut tally = shared.tally.lock().unwrap();
            tally.report.seeds_in += admitted;
            tally.report.seeds_duplicate += duplicate;
            tally.report.seeds_dropped += dropped;
            tally.report.max_queue_depth = tally.report.max_queue_depth.max(shared.queue.len() as u64);
        }
        sleep_unless_stopped(shared, shared.cfg.poll_interval);
    }
    stats.elapsed = started.elapsed();
    shared.ingest_done.store(true, Ordering::SeqCst);
    stats
}

fn summary_loop(shared: &Shared<'_>) {
    let setup = shared.setup;
    loop {
        shared.summary_active.fetch_add(1, Ordering::SeqCst);
        let Some(seed) = shared.queue.pop() else {
            shared.summary_active.fetch_sub(1, Ordering::SeqCst);
            if shared.stopping() || shared.ingest_done.load(Ordering::SeqCst) && shared.queue.is_empty() {
                return;
            }
            std::thread::sleep(IDLE);
            continue;
        };
        match fetch_summary(&seed, &shared.ctx, setup.context_window) {
            Ok(fetched) => {
                let doc = fetched.doc;
                let in_degree = shared.graph.lock().unwrap().in_degree(&doc.blog_url);
                let phrases = setup.summary_phrases(&doc, in_degree);
                let now = shared.ctx.clock.now();
                shared.graph.lock().unwrap().insert_summary(&doc, &phrases, setup.context_window, now);
                shared.tally.lock().unwrap().summary_ok(&phrases, now.since(seed.discovered_at));
            }
            Err(e) => {
                tracing::debug!(seed = %seed.url, error = %e, "summary failed");
                shared.tally.lock().unwrap().report.summaries_failed += 1;
            }
        }
        shared.summary_active.fetch_sub(1, Ordering::SeqCst);
        if shared.stopping() {
            return;
        }
    }
}

fn fetch_loop(shared: &Shared<'_>) -> Result<(), RunError> {
    let crawler = &shared.setup.crawler;
    let clock = shared.ctx.clock;
    loop {
        if shared.stopping() {
            return Ok(());
        }
        let node = {
            let mut g = shared.graph.lock().unwrap();
            // In-flight fetches count against the budget until they resolve.
            let fetched = shared.tally.lock().unwrap().report.pages_fetched;
            let in_flight = shared.fetch_active.load(Ordering::SeqCst) as u64;
            if fetched >= shared.cfg.max_pages as u64 {
                return Ok(());
            }
            if fetched + in_flight >= shared.cfg.max_pages as u64 {
                drop(g);
                std::thread::sleep(IDLE);
                continue;
            }
            let node = g.next_frontier(1, clock.now()).pop();
            if node.is_some() {
                shared.fetch_active.fetch_add(1, Ordering::SeqCst);
            }
            node
        };
        let Some(node) = node else {
            let idle = shared.ingest_done.load(Ordering::SeqCst)
                && shared.queue.is_empty()
                && shared.summary_active.load(Ordering::SeqCst) == 0
                && shared.fetch_active.load(Ordering::SeqCst) == 0;
            if idle && shared.graph.lock().unwrap().frontier_len() == 0 {
                return Ok(());
            }
            std::thread::sleep(IDLE);
            continue;
        };
        let url = node.url.clone();
        let visit = crawler.visit(node, &shared.ctx);
        let result = {
            let mut g = shared.graph.lock().unwrap();
            match visit {
                Ok(v) => Ok(crawler.commit(&mut g, v, clock.now())),
                Err(e) => {
                    let _ = g.release(&url, clock.now());
                    Err(e)
                }
            }
        };
        let result = match result {
            Ok(r) => r,
            Err(e) => {
                shared.fetch_active.fetch_sub(1, Ordering::SeqCst);
                return Err(e.into());
            }
        };
        shared.tally.lock().unwrap().page(&result);
        shared.fetch_active.fetch_sub(1, Ordering::SeqCst);
        if let (Some(store), Some(page), true) = (shared.store, &result.page, result.relevant) {
            store.append(page, result.score).map_err(|e| RunError::Io(format!("page store: {e}")))?;
        }
    }
}
