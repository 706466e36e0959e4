mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blogwatch::clock::{SimClock, SystemClock};
use blogwatch::focused::Outcome;
use blogwatch::graph::{FrontierGraph, Provenance};
use blogwatch::harness::{generate_world, AccessKind, Label, MemoryTransport, SyntheticWorld, WorldSpec};
use blogwatch::ping::{serialize_changes_feed, PingEvent};
use blogwatch::pipeline::{run_batch, run_online, Mode, RunConfig, RunReport, ScriptSource, Setup};
use blogwatch::relevance::Classifier;
use blogwatch::throttle::TokenBucket;

fn batch_config(max_pages: usize) -> RunConfig {
    let mut cfg = RunConfig::new("registry".into(), "topic".into(), "background".into());
    cfg.mode = Mode::Batch;
    cfg.fixture = Some("in-memory".into());
    cfg.max_pages = max_pages;
    cfg
}

fn mixed(seed: u64) -> (Arc<SyntheticWorld>, Setup) {
    let world = Arc::new(generate_world(&WorldSpec::mixed_200(seed)).unwrap());
    let setup = Setup::for_world(&world, Classifier::Vsm, 0.3).unwrap();
    (world, setup)
}

#[test]
fn empty_fixture_reports_zero() {
    let world = Arc::new(generate_world(&WorldSpec { n_blogs: 0, ..WorldSpec::default() }).unwrap());
    let (_, setup) = mixed(7);
    let out = run_batch(&setup, &batch_config(100), world, None).unwrap();
    assert_eq!(out.report, RunReport::default());
    assert_eq!(out.report.harvest_rate, 0.0);
    assert!(out.report.render().contains("(none)"));
}

#[test]
fn equal_seeds_give_identical_reports() {
    let a = mixed(11);
    let b = mixed(11);
    let ra = run_batch(&a.1, &batch_config(60), a.0, None).unwrap();
    let rb = run_batch(&b.1, &batch_config(60), b.0, None).unwrap();
    assert_eq!(ra.report.to_text(), rb.report.to_text());
    assert_eq!(ra.graph.to_checkpoint(), rb.graph.to_checkpoint());
}

#[test]
fn mixed_200_matches_replay_oracle() {
    let (world, setup) = mixed(7);
    let cfg = batch_config(100);
    let out = run_batch(&setup, &cfg, world.clone(), None).unwrap();
    let replay = common::replay_batch(&world, &setup, &cfg);

    assert_eq!(out.trace.steps, replay.steps);
    assert_eq!(out.graph.to_checkpoint(), replay.graph.to_checkpoint());
    assert_eq!(out.transport.access_log(), replay.log);
    assert_eq!(out.report.seeds_in, replay.seeds_in);
    assert_eq!(out.report.summaries_ok, replay.summaries_ok);

    let fetched: Vec<_> = replay.steps.iter().filter(|s| s.outcome == Outcome::Fetched).collect();
    let relevant = fetched.iter().filter(|s| s.relevant).count();
    assert_eq!(out.report.pages_fetched, fetched.len() as u64);
    assert_eq!(out.report.pages_fetched, 100);
    assert_eq!(out.report.harvest_rate, relevant as f64 / fetched.len() as f64);
    let r = &out.report;
    assert_eq!(r.summaries_ok + r.summaries_failed, r.seeds_in);
}

#[test]
fn top_phrases_are_summed_per_document() {
    let (world, setup) = mixed(3);
    let out = run_batch(&setup, &batch_config(100), world, None).unwrap();
    let mut totals: BTreeMap<String, f64> = BTreeMap::new();
    let docs = out.trace.summaries.iter().map(|s| &s.phrases);
    let pages = out.trace.steps.iter().filter(|s| s.relevant).map(|s| &s.phrases);
    for phrases in docs.chain(pages) {
        for p in phrases {
            *totals.entry(p.phrase.to_string()).or_default() += p.score;
        }
    }
    let mut expected: Vec<(String, f64)> = totals.into_iter().collect();
    expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    expected.truncate(20);
    let got = &out.report.top_phrases;
    assert_eq!(got.len(), 20);
    for ((gp, gs), (ep, es)) in got.iter().zip(&expected) {
        assert_eq!(gp, ep);
        assert!((gs - es).abs() < 1e-9 * es.abs().max(1.0), "{gp}: {gs} vs {es}");
    }
}

#[test]
fn layer_two_never_feeds_itself() {
    for seed in [7, 8] {
        let (world, setup) = mixed(seed);
        let out = run_batch(&setup, &batch_config(100), world, None).unwrap();
        let inputs: BTreeSet<String> = out.trace.layer2_inputs.iter().cloned().collect();
        assert!(!inputs.is_empty());
        assert!(inputs.is_disjoint(&out.trace.layer2_links()));
    }
}

#[test]
fn fulltext_edges_come_only_from_relevant_pages() {
    let (world, setup) = mixed(5);
    let out = run_batch(&setup, &batch_config(100), world, None).unwrap();
    let relevant: BTreeSet<&str> = out.trace.steps.iter().filter(|s| s.relevant).map(|s| s.url.as_str()).collect();
    let fulltext: Vec<_> = out.graph.edges().into_iter().filter(|e| e.provenance == Provenance::Fulltext).collect();
    assert!(!fulltext.is_empty());
    for e in fulltext {
        assert!(relevant.contains(e.src.as_str()), "fulltext edge from {}", e.src);
    }
    for s in &out.trace.steps {
        if !s.relevant {
            assert_eq!(s.new_edges, 0);
        }
    }
}

#[test]
fn media_bodies_are_never_downloaded() {
    let (world, setup) = mixed(9);
    let out = run_batch(&setup, &batch_config(200), world.clone(), None).unwrap();
    assert_eq!(out.transport.media_bytes(), 0);
    for a in out.transport.access_log() {
        if world.label(&a.url) == Some(Label::Media) {
            assert_eq!(a.kind, AccessKind::Probe);
        }
    }
}

#[test]
fn checkpoint_survives_reload() {
    let (world, setup) = mixed(2);
    let out = run_batch(&setup, &batch_config(50), world, None).unwrap();
    let text = out.graph.to_checkpoint();
    let again = FrontierGraph::from_checkpoint(&text, out.graph.max_nodes()).unwrap();
    assert_eq!(again.to_checkpoint(), text);
}

#[test]
fn bandwidth_limit_holds_over_random_requests() {
    let limit = 10 * 1024;
    let bucket = TokenBucket::new(Some(limit));
    let clock = SimClock::new();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut bytes = 0u64;
    while clock.elapsed() < Duration::from_secs(30) {
        let n = rng.gen_range(200..6000);
        bucket.acquire(n, &clock);
        bytes += n;
    }
    let rate = bytes as f64 / clock.elapsed().as_secs_f64();
    assert!((rate - limit as f64).abs() <= 0.1 * limit as f64, "rate {rate}");

    let free = TokenBucket::new(None);
    let clock = SimClock::new();
    for _ in 0..100 {
        assert_eq!(free.acquire(rng.gen_range(1..1 << 20), &clock), Duration::ZERO);
    }
    assert_eq!(clock.elapsed(), Duration::ZERO);
}

#[test]
fn ingest_keeps_polling_while_fetchers_stall() {
    let (world, setup) = mixed(4);
    let blogs = world.announced_blogs();
    let docs: Vec<String> = (0..50)
        .map(|d| {
            let events: Vec<PingEvent> = (0..20)
                .map(|k| {
                    let url = &blogs[(d * 20 + k) % blogs.len()];
                    PingEvent { site_name: format!("b{k}"), url: url.clone(), when: k as u64 }
                })
                .collect();
            serialize_changes_feed(&events, "now")
        })
        .collect();
    let mut cfg = RunConfig::new("r".into(), "t".into(), "b".into());
    cfg.ping_url = Some("script".into());
    cfg.queue_capacity = 8;
    cfg.poll_interval = Duration::from_millis(1);
    cfg.politeness_delay = Duration::ZERO;
    cfg.dedupe_window = Duration::from_millis(1);

    let transport = MemoryTransport::new(world.clone());
    transport.stall();
    let stop = AtomicBool::new(false);
    let clock = SystemClock::new();
    let mut source = ScriptSource::new(docs);
    let out = std::thread::scope(|s| {
        let run = s.spawn(|| run_online(&setup, &cfg, &transport, &mut source, &clock, &stop, None));
        std::thread::sleep(Duration::from_millis(1500));
        stop.store(true, Ordering::SeqCst);
        transport.resume();
        run.join().unwrap().unwrap()
    });
    // 50 documents plus the poll that found the script exhausted
    assert_eq!(out.ingest.polls, 51);
    assert!(out.ingest.elapsed < Duration::from_millis(1500), "ingest waited on workers: {:?}", out.ingest.elapsed);
    assert!(out.ingest.max_enqueue < Duration::from_millis(5), "{:?}", out.ingest.max_enqueue);
    assert!(out.report.seeds_dropped > 0);
    assert!(out.report.max_queue_depth <= 8);
}

#[test]
fn online_run_respects_budget_and_drains() {
    let (world, setup) = mixed(6);
    let mut cfg = RunConfig::new("r".into(), "t".into(), "b".into());
    cfg.fixture = Some("in-memory".into());
    cfg.max_pages = 40;
    cfg.poll_interval = Duration::from_millis(5);
    cfg.politeness_delay = Duration::ZERO;
    let transport = MemoryTransport::new(world.clone());
    let stop = AtomicBool::new(false);
    let out = run_online(&setup, &cfg, &transport, &mut ScriptSource::from_world(&world), &SystemClock::new(), &stop, None).unwrap();
    assert_eq!(out.report.pages_fetched, 40);
    assert!(out.report.harvest_rate >= 0.0 && out.report.harvest_rate <= 1.0);
    assert_eq!(transport.media_bytes(), 0);
}
