//! Wires the three layers together: ping ingestion feeds seeds to the
//! summary crawler, summaries and relevant pages grow the graph, and the
//! focused crawler drains its frontier.

mod config;
mod online;
mod report;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use crate::clock::{Clock, SimClock, SystemClock, Timestamp};
use crate::fetch::FetchContext;
use crate::focused::{Analyzer, CrawlResult, FocusedCrawler, Outcome, PageStore};
use crate::graph::{CorrectionKind, FrontierGraph};
use crate::harness::{generate_world, load_fixture, MemoryTransport, SyntheticWorld, WorldSpec};
use crate::phrases::{KeyPhrase, PhraseExtractor, StopList};
use crate::ping::{match_registry, parse_changes_feed, BlogRegistry, SeedDeduper, SeedUrl};
use crate::relevance::{load_corpus, Classifier, NaiveBayes, RelevanceError, RelevanceModel, TopicProfile};
use crate::summary::{fetch_summary, SummaryDoc, DEFAULT_CONTEXT_WINDOW};
use crate::throttle::{Politeness, TokenBucket};
use crate::transport::{FetchLimits, HeadInfo, HttpTransport, Response, Transport, TransportError};

pub use config::{ConfigError, Mode, RunConfig};
pub use online::{run_online, HttpPingSource, IngestStats, OnlineOutcome, PingSource, Poll, ScriptSource};
pub use report::{harvest, median, PhraseTally, ReportError, RunReport, DEFAULT_TOP_PHRASES};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Relevance(#[from] RelevanceError),
    #[error("{0}")]
    Io(String),
}

/// Everything derived from configuration before any network activity.
#[derive(Debug, Clone)]
pub struct Setup {
    pub registry: BlogRegistry,
    pub crawler: FocusedCrawler,
    pub context_window: usize,
}

impl Setup {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, ConfigError> {
        let io = |p: &Path, e: String| ConfigError::Io { path: p.display().to_string(), message: e };
        let registry = BlogRegistry::load(&cfg.registry_path).map_err(|e| io(&cfg.registry_path, e.to_string()))?;
        let stops = match &cfg.stoplist_path {
            Some(p) => StopList::load(p).map_err(|e| io(p, e.to_string()))?,
            None => StopList::english(),
        };
        let topic = load_corpus(&cfg.topic_corpus_path).map_err(|e| io(&cfg.topic_corpus_path, e.to_string()))?;
        let background =
            load_corpus(&cfg.background_corpus_path).map_err(|e| io(&cfg.background_corpus_path, e.to_string()))?;
        let glossary = match &cfg.glossary_path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| io(p, e.to_string()))?,
            None => String::new(),
        };
        let mut setup = Self::build(registry, stops, &topic, &background, &glossary, cfg.classifier, cfg.threshold)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        setup.crawler.analyzer.spam = cfg.spam;
        Ok(setup)
    }

    /// Uses the world's own registry, corpora and glossary.
    pub fn for_world(world: &SyntheticWorld, classifier: Classifier, threshold: f64) -> Result<Self, RelevanceError> {
        let registry = BlogRegistry::from_patterns(world.registry.iter().map(String::as_str))
            .map_err(|e| RelevanceError::Io { path: "registry".into(), message: e.to_string() })?;
        Self::build(
            registry,
            StopList::english(),
            &world.topic_corpus,
            &world.background_corpus,
            &world.glossary.join("\n"),
            classifier,
            threshold,
        )
    }

    pub fn build(
        registry: BlogRegistry,
        stops: StopList,
        topic: &[String],
        background: &[String],
        glossary: &str,
        classifier: Classifier,
        threshold: f64,
    ) -> Result<Self, RelevanceError> {
        let profile = TopicProfile::build(topic, background, &stops, threshold)?;
        let nb = match classifier {
            Classifier::NaiveBayes => Some(NaiveBayes::train(topic, background, &stops)?),
            Classifier::Vsm => None,
        };
        let model = RelevanceModel { classifier, profile, nb, stops: stops.clone() };
        let analyzer = Analyzer::default().with_glossary_text(glossary);
        let crawler = FocusedCrawler::new(model, PhraseExtractor::new(stops), analyzer, DEFAULT_CONTEXT_WINDOW);
        Ok(Self { registry, crawler, context_window: DEFAULT_CONTEXT_WINDOW })
    }

    /// Phrases of a summary, scored with the blog node's current degrees.
    pub fn summary_phrases(&self, doc: &SummaryDoc, in_degree: usize) -> Vec<KeyPhrase> {
        let out_degree = doc.link_contexts(self.context_window).iter().map(|l| l.target.as_str()).collect::<BTreeSet<_>>().len();
        self.crawler.extractor.extract(&doc.text(), in_degree, out_degree)
    }
}

/// Counts body bytes passing through.
pub struct CountingTransport<'a> {
    inner: &'a dyn Transport,
    bytes: AtomicU64,
}

impl<'a> CountingTransport<'a> {
    pub fn new(inner: &'a dyn Transport) -> Self {
        Self { inner, bytes: AtomicU64::new(0) }
    }

    pub fn bytes(&self) -> u64 {
        self.bytes.load(Ordering::Relaxed)
    }
}

impl Transport for CountingTransport<'_> {
    fn fetch(&self, url: &str, max_bytes: usize, timeout: Duration) -> Result<Response, TransportError> {
        let r = self.inner.fetch(url, max_bytes, timeout)?;
        self.bytes.fetch_add(r.body.len() as u64, Ordering::Relaxed);
        Ok(r)
    }
    fn probe(&self, url: &str, timeout: Duration) -> Result<HeadInfo, TransportError> {
        self.inner.probe(url, timeout)
    }
}

/// Per-run accumulators shared by both modes.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tally {
    pub report: RunReport,
    pub latencies_ms: Vec<u64>,
    pub phrases: PhraseTally,
}

impl Tally {
    pub fn summary_ok(&mut self, phrases: &[KeyPhrase], latency: Duration) {
        self.report.summaries_ok += 1;
        self.latencies_ms.push(latency.as_millis() as u64);
        self.phrases.add(phrases);
    }

    pub fn page(&mut self, r: &CrawlResult) {
        match r.outcome {
            Outcome::Fetched => {
                self.report.pages_fetched += 1;
                if r.relevant {
                    self.report.pages_relevant += 1;
                    self.phrases.add(&r.phrases);
                }
            }
            Outcome::MediaSkipped => self.report.media_skipped += 1,
            Outcome::Unsupported | Outcome::Failed(_) => self.report.pages_failed += 1,
        }
        self.report.spam_excluded += r.corrections.iter().filter(|c| c.kind == CorrectionKind::ExcludeSpam).count() as u64;
    }

    pub fn finish(&self, graph: &FrontierGraph, elapsed: Duration, bytes: u64, slo: Option<Duration>) -> RunReport {
        let mut r = self.report.clone();
        r.elapsed_ms = elapsed.as_millis() as u64;
        r.harvest_rate = harvest(r.pages_relevant, r.pages_fetched);
        r.bytes_fetched = bytes;
        r.median_latency_ms = median(&mut self.latencies_ms.clone());
        r.latency_slo_met = slo.map(|s| r.median_latency_ms.is_none_or(|m| m <= s.as_millis() as u64));
        r.graph_nodes = graph.len() as u64;
        r.graph_edges = graph.edge_count() as u64;
        r.top_phrases = self.phrases.top(DEFAULT_TOP_PHRASES);
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRecord {
    pub blog_url: String,
    pub ok: bool,
    pub phrases: Vec<KeyPhrase>,
    /// Link targets extracted from the summary.
    pub links: Vec<String>,
}

/// Everything a sequential run decided, in order.
#[derive(Debug, Clone, Default)]
pub struct RunTrace {
    /// URLs handed to the summary layer.
    pub layer2_inputs: Vec<String>,
    pub summaries: Vec<SummaryRecord>,
    pub steps: Vec<CrawlResult>,
}

impl RunTrace {
    pub fn layer2_links(&self) -> BTreeSet<String> {
        self.summaries.iter().flat_map(|s| s.links.iter().cloned()).collect()
    }
}

pub struct BatchOutcome {
    pub report: RunReport,
    pub graph: FrontierGraph,
    pub trace: RunTrace,
    pub transport: MemoryTransport,
}

/// Loads a fixture directory, or generates a world from a spec file.
pub fn load_world(cfg: &RunConfig) -> Result<SyntheticWorld, RunError> {
    let path = cfg.fixture.as_ref().ok_or(ConfigError::Invalid("no fixture configured".into()))?;
    if path.is_dir() {
        return load_fixture(path).map_err(|e| ConfigError::Invalid(e.to_string()).into());
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let mut spec = WorldSpec::parse(&text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if let Some(seed) = cfg.rng_seed {
        spec.rng_seed = seed;
    }
    generate_world(&spec).map_err(|e| ConfigError::Invalid(e.to_string()).into())
}

/// Sequential, simulated-clock run. Each changes document is ingested and
/// summarized in full, then the crawler takes its share of the page budget;
/// after the last document the crawler runs until the budget or the
/// frontier is exhausted.
pub fn run_batch(
    setup: &Setup,
    cfg: &RunConfig,
    world: Arc<SyntheticWorld>,
    store: Option<&PageStore>,
) -> Result<BatchOutcome, RunError> {
    let clock = SimClock::new();
    let memory = MemoryTransport::new(world.clone());
    let counting = CountingTransport::new(&memory);
    let bucket = TokenBucket::new(cfg.bandwidth_limit);
    let politeness = Politeness::new(cfg.politeness_delay);
    let ctx = FetchContext {
        transport: &counting,
        limits: FetchLimits::default(),
        clock: &clock,
        throttle: Some(&bucket),
        politeness: Some(&politeness),
    };
    let mut graph = FrontierGraph::new(cfg.max_nodes);
    let mut deduper = SeedDeduper::new(cfg.dedupe_window);
    let mut tally = Tally::default();
    let mut trace = RunTrace::default();
    let docs = &world.ping_script;

    for (i, doc) in docs.iter().enumerate() {
        let at = Timestamp::from_duration(doc.at);
        if clock.now() < at {
            clock.advance(at.since(clock.now()));
        }
        let seeds = match parse_changes_feed(&doc.body) {
            Ok(feed) => match_registry(&feed.events, &setup.registry, clock.now()),
            Err(e) => {
                tracing::warn!(doc = i, error = %e, "changes document rejected");
                continue;
            }
        };
        let mut admitted = Vec::new();
        for s in seeds {
            if deduper.admit(&s) {
                admitted.push(s);
            } else {
                tally.report.seeds_duplicate += 1;
            }
        }
        tally.report.seeds_in += admitted.len() as u64;
        tally.report.max_queue_depth = tally.report.max_queue_depth.max(admitted.len() as u64);
        for seed in &admitted {
            summarize(setup, seed, &ctx, &mut graph, &mut tally, &mut trace);
        }
        let remaining_docs = (docs.len() - i) as u64;
        let left = (cfg.max_pages as u64).saturating_sub(tally.report.pages_fetched);
        let quota = tally.report.pages_fetched + left.div_ceil(remaining_docs);
        crawl_until(setup, &ctx, &mut graph, &mut tally, &mut trace, store, quota)?;
    }
    crawl_until(setup, &ctx, &mut graph, &mut tally, &mut trace, store, cfg.max_pages as u64)?;

    let report = tally.finish(&graph, clock.elapsed(), counting.bytes(), cfg.latency_slo);
    Ok(BatchOutcome { report, graph, trace, transport: memory })
}

fn summarize(
    setup: &Setup,
    seed: &SeedUrl,
    ctx: &FetchContext<'_>,
    graph: &mut FrontierGraph,
    tally: &mut Tally,
    trace: &mut RunTrace,
) {
    trace.layer2_inputs.push(seed.url.clone());
    match fetch_summary(seed, ctx, setup.context_window) {
        Ok(fetched) => {
            let doc = fetched.doc;
            let phrases = setup.summary_phrases(&doc, graph.in_degree(&doc.blog_url));
            let now = ctx.clock.now();
            graph.insert_summary(&doc, &phrases, setup.context_window, now);
            tally.summary_ok(&phrases, now.since(seed.discovered_at));
            let links = doc.link_contexts(setup.context_window).into_iter().map(|l| l.target).collect();
            trace.summaries.push(SummaryRecord { blog_url: doc.blog_url, ok: true, phrases, links });
        }
        Err(e) => {
            tracing::debug!(seed = %seed.url, error = %e, "summary failed");
            tally.report.summaries_failed += 1;
            trace.summaries.push(SummaryRecord { blog_url: seed.url.clone(), ok: false, phrases: Vec::new(), links: Vec::new() });
        }
    }
}

fn crawl_until(
    setup: &Setup,
    ctx: &FetchContext<'_>,
    graph: &mut FrontierGraph,
    tally: &mut Tally,
    trace: &mut RunTrace,
    store: Option<&PageStore>,
    pages: u64,
) -> Result<(), RunError> {
    while tally.report.pages_fetched < pages {
        let Some(result) = setup.crawler.crawl_step(graph, ctx)? else { break };
        tally.page(&result);
        if let (Some(store), Some(page), true) = (store, &result.page, result.relevant) {
            store.append(page, result.score).map_err(|e| RunError::Io(format!("page store: {e}")))?;
        }
        trace.steps.push(result);
    }
    Ok(())
}

/// Where a run writes its report, checkpoint and page store.
#[derive(Debug, Clone)]
pub struct Outputs {
    pub dir: PathBuf,
    pub report: PathBuf,
}

impl Outputs {
    pub fn resolve(cfg: &RunConfig, report_override: Option<&Path>) -> Self {
        let dir = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("blogwatch-out"));
        let report = report_override.map(Path::to_path_buf).unwrap_or_else(|| dir.join("report.txt"));
        Self { dir, report }
    }

    pub fn checkpoint(&self) -> PathBuf {
        self.dir.join("graph.tsv")
    }

    pub fn store(&self) -> PathBuf {
        self.dir.join("store")
    }
}

fn write_outputs(outputs: &Outputs, report: &RunReport, graph: &FrontierGraph) -> Result<(), RunError> {
    let io = |p: &Path, e: std::io::Error| RunError::Io(format!("{}: {e}", p.display()));
    if let Some(parent) = outputs.report.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io(parent, e))?;
    }
    std::fs::write(&outputs.report, report.to_text()).map_err(|e| io(&outputs.report, e))?;
    let cp = outputs.checkpoint();
    std::fs::write(&cp, graph.to_checkpoint()).map_err(|e| io(&cp, e))?;
    Ok(())
}

/// Runs per `cfg`, writing the report, checkpoint and page store.
pub fn run(cfg: &RunConfig, report_override: Option<&Path>, stop: Arc<std::sync::atomic::AtomicBool>) -> Result<RunReport, RunError> {
    cfg.validate()?;
    let setup = Setup::from_config(cfg)?;
    let outputs = Outputs::resolve(cfg, report_override);
    let world = match (&cfg.mode, &cfg.fixture) {
        (_, Some(_)) => Some(Arc::new(load_world(cfg)?)),
        _ => None,
    };
    std::fs::create_dir_all(&outputs.dir).map_err(|e| RunError::Io(format!("{}: {e}", outputs.dir.display())))?;
    let store = PageStore::open(&outputs.store()).map_err(|e| RunError::Io(format!("page store: {e}")))?;

    let (report, graph) = match cfg.mode {
        Mode::Batch => {
            let out = run_batch(&setup, cfg, world.expect("batch has a fixture"), Some(&store))?;
            (out.report, out.graph)
        }
        Mode::Online => {
            let clock = SystemClock::new();
            let out = match world {
                Some(world) => {
                    let transport = MemoryTransport::new(world.clone());
                    let mut source = ScriptSource::from_world(&world);
                    run_online(&setup, cfg, &transport, &mut source, &clock, &stop, Some(&store))?
                }
                None => {
                    let transport = HttpTransport::new(concat!("blogwatch/", env!("CARGO_PKG_VERSION")))
                        .map_err(|e| RunError::Io(e.to_string()))?;
                    let url = cfg.ping_url.clone().expect("validated");
                    let mut source = HttpPingSource::new(&transport, url);
                    run_online(&setup, cfg, &transport, &mut source, &clock, &stop, Some(&store))?
                }
            };
            (out.report, out.graph)
        }
    };
    write_outputs(&outputs, &report, &graph)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini() -> (Setup, RunConfig, Arc<SyntheticWorld>) {
        let world = generate_world(&WorldSpec { n_blogs: 20, ..WorldSpec::default() }).unwrap();
        let setup = Setup::for_world(&world, Classifier::Vsm, 0.3).unwrap();
        let mut cfg = RunConfig::new("r".into(), "t".into(), "b".into());
        cfg.mode = Mode::Batch;
        cfg.fixture = Some("unused".into());
        cfg.max_pages = 30;
        (setup, cfg, Arc::new(world))
    }

    #[test]
    fn empty_world_gives_zero_report() {
        let world = Arc::new(generate_world(&WorldSpec { n_blogs: 0, ..WorldSpec::default() }).unwrap());
        let (_, cfg, w) = mini();
        let setup = Setup::for_world(&w, Classifier::Vsm, 0.3).unwrap();
        let out = run_batch(&setup, &cfg, world, None).unwrap();
        assert_eq!(out.report, RunReport::default());
    }

    #[test]
    fn batch_is_deterministic() {
        let (setup, cfg, world) = mini();
        let a = run_batch(&setup, &cfg, world.clone(), None).unwrap();
        let b = run_batch(&setup, &cfg, world, None).unwrap();
        assert_eq!(a.report.to_text(), b.report.to_text());
        assert_eq!(a.graph.to_checkpoint(), b.graph.to_checkpoint());
        assert!(a.report.pages_fetched > 0);
        assert!(a.report.pages_fetched <= 30);
    }
}
