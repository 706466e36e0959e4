use std::collections::{BTreeMap, HashSet, VecDeque};

use super::Label;
use crate::clock::SimClock;
use crate::fetch::FetchContext;
use crate::focused::{fetch_page, PageError};
use crate::summary::DEFAULT_CONTEXT_WINDOW;
use crate::transport::Transport;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BfsTrace {
    /// Pages whose body was downloaded, in fetch order.
    pub fetched: Vec<String>,
    pub media_skipped: Vec<String>,
    pub failed: Vec<String>,
}

/// Breadth-first control crawl: FIFO from the seeds, out-links appended in
/// document order, ignoring weights and relevance. Media is skipped by the
/// same header gate as the focused crawler. Only downloaded pages count
/// toward `budget`.
pub fn baseline_bfs_crawl(transport: &dyn Transport, seeds: &[String], budget: usize) -> BfsTrace {
    assert!(budget >= 1, "budget must be positive");
    let clock = SimClock::new();
    let ctx = FetchContext::new(transport, &clock);
    let mut queue: VecDeque<String> = VecDeque::new();
    let mut seen = HashSet::new();
    for s in seeds {
        if seen.insert(s.clone()) {
            queue.push_back(s.clone());
        }
    }
    let mut trace = BfsTrace::default();
    while trace.fetched.len() < budget {
        let Some(url) = queue.pop_front() else { break };
        match fetch_page(&url, &ctx, DEFAULT_CONTEXT_WINDOW) {
            Ok(page) => {
                for l in page.out_links {
                    if seen.insert(l.target.clone()) {
                        queue.push_back(l.target);
                    }
                }
                trace.fetched.push(url);
            }
            Err(PageError::MediaSkipped { .. }) => trace.media_skipped.push(url),
            Err(_) => trace.failed.push(url),
        }
    }
    trace
}

/// Share of `fetched` labeled topical; 0 for an empty list.
pub fn harvest_rate(fetched: &[String], labels: &BTreeMap<String, Label>) -> f64 {
    if fetched.is_empty() {
        return 0.0;
    }
    let hits = fetched.iter().filter(|u| labels.get(*u) == Some(&Label::Topical)).count();
    hits as f64 / fetched.len() as f64
}
