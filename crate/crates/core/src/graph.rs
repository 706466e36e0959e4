//! The weighted URL graph that drives the focused crawler.
//!
//! Nodes are URLs; an edge `src -> dst` carries the estimated weight of the
//! source's key phrases around the link to `dst`. A node's priority is the
//! maximum weight over its *live* incoming edges, where an edge is live
//! unless its source has been excluded. Unfetched nodes with at least one
//! live incoming edge form the frontier.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::clock::Timestamp;
use crate::phrases::{tokenize, KeyPhrase};
use crate::summary::{LinkContext, SummaryDoc};

pub const DEFAULT_MAX_NODES: usize = 100_000;
/// Incoming-weight factor granted once to a node confirmed as a blog.
pub const CONFIRM_BLOG_FACTOR: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    Unfetched,
    InFlight,
    Fetched,
    Failed,
    Excluded,
}

impl NodeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Unfetched => "unfetched",
            NodeStatus::InFlight => "inflight",
            NodeStatus::Fetched => "fetched",
            NodeStatus::Failed => "failed",
            NodeStatus::Excluded => "excluded",
        }
    }
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeStatus {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "unfetched" => NodeStatus::Unfetched,
            "inflight" => NodeStatus::InFlight,
            "fetched" => NodeStatus::Fetched,
            "failed" => NodeStatus::Failed,
            "excluded" => NodeStatus::Excluded,
            other => return Err(format!("unknown node status {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    Summary,
    Fulltext,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Summary => "summary",
            Provenance::Fulltext => "fulltext",
        }
    }
}

impl FromStr for Provenance {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "summary" => Ok(Provenance::Summary),
            "fulltext" => Ok(Provenance::Fulltext),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub url: String,
    pub status: NodeStatus,
    pub priority: f64,
    pub last_update: Timestamp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub weight: f64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrectionKind {
    ExcludeSpam,
    ConfirmBlog,
    /// Multiplies the node's incoming weights; factor is positive.
    Rescale(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub target: String,
    pub kind: CorrectionKind,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MutationReport {
    pub nodes_added: Vec<String>,
    pub edges_added: Vec<(String, String)>,
    pub edges_updated: usize,
    pub evicted: Vec<String>,
    pub excluded: Vec<String>,
    pub rescaled: Vec<String>,
    pub unknown: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
}

/// `Σ score(p) · occurrences(p)` over the link's context and anchor tokens.
pub fn estimate_edge_weight(link: &LinkContext, phrases: &[KeyPhrase]) -> f64 {
    let evidence: Vec<String> = tokenize(&link.evidence_text()).into_iter().map(|t| t.normalized).collect();
    phrases
        .iter()
        .map(|p| {
            let words = p.phrase.words();
            if words.is_empty() || words.len() > evidence.len() {
                return 0.0;
            }
            let hits = evidence.windows(words.len()).filter(|w| *w == words).count();
            p.score * hits as f64
        })
        .sum()
}

type NodeId = usize;

#[derive(Debug, Clone)]
struct Node {
    rec: NodeRecord,
    /// Product of all rescales applied to incoming weights.
    factor: f64,
    confirmed: bool,
    version: u64,
    incoming: BTreeSet<NodeId>,
    outgoing: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    weight: f64,
    provenance: Provenance,
}

#[derive(Debug, Clone, Copy)]
struct HeapEntry {
    priority: f64,
    id: NodeId,
    version: u64,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    // max-heap: higher priority first, then earlier insertion (lower id)
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.id.cmp(&self.id))
            .then_with(|| self.version.cmp(&other.version))
    }
}

#[derive(Debug, Clone)]
pub struct FrontierGraph {
    // ids are insertion sequence numbers and are never reused
    nodes: Vec<Option<Node>>,
    ids: HashMap<String, NodeId>,
    edges: HashMap<(NodeId, NodeId), Edge>,
    heap: BinaryHeap<HeapEntry>,
    live_nodes: usize,
    max_nodes: usize,
}

impl Default for FrontierGraph {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_NODES)
    }
}

impl FrontierGraph {
    pub fn new(max_nodes: usize) -> Self {
        Self {
            nodes: Vec::new(),
            ids: HashMap::new(),
            edges: HashMap::new(),
            heap: BinaryHeap::new(),
            live_nodes: 0,
            max_nodes: max_nodes.max(1),
        }
    }

    pub fn len(&self) -> usize {
        self.live_nodes
    }

    pub fn is_empty(&self) -> bool {
        self.live_nodes == 0
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn max_nodes(&self) -> usize {
        self.max_nodes
    }

    pub fn node(&self, url: &str) -> Option<&NodeRecord> {
        self.ids.get(url).map(|&id| &self.n(id).rec)
    }

    pub fn contains(&self, url: &str) -> bool {
        self.ids.contains_key(url)
    }

    /// Nodes in insertion order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.iter().flatten().map(|n| &n.rec)
    }

    /// Edges ordered by (source, destination) insertion order.
    pub fn edges(&self) -> Vec<EdgeRecord> {
        let mut keys: Vec<_> = self.edges.keys().copied().collect();
        keys.sort_unstable();
        keys.into_iter()
            .map(|(s, d)| {
                let e = self.edges[&(s, d)];
                EdgeRecord {
                    src: self.n(s).rec.url.clone(),
                    dst: self.n(d).rec.url.clone(),
                    weight: e.weight,
                    provenance: e.provenance,
                }
            })
            .collect()
    }

    pub fn edge(&self, src: &str, dst: &str) -> Option<EdgeRecord> {
        let (&s, &d) = (self.ids.get(src)?, self.ids.get(dst)?);
        self.edges.get(&(s, d)).map(|e| EdgeRecord {
            src: src.to_string(),
            dst: dst.to_string(),
            weight: e.weight,
            provenance: e.provenance,
        })
    }

    pub fn in_degree(&self, url: &str) -> usize {
        self.ids.get(url).map_or(0, |&id| self.n(id).incoming.len())
    }

    pub fn out_degree(&self, url: &str) -> usize {
        self.ids.get(url).map_or(0, |&id| self.n(id).outgoing.len())
    }

    /// Count of nodes per status.
    pub fn status_counts(&self) -> HashMap<NodeStatus, usize> {
        let mut m = HashMap::new();
        for n in self.nodes() {
            *m.entry(n.status).or_insert(0) += 1;
        }
        m
    }

    fn n(&self, id: NodeId) -> &Node {
        self.nodes[id].as_ref().expect("live node id")
    }

    fn n_mut(&mut self, id: NodeId) -> &mut Node {
        self.nodes[id].as_mut().expect("live node id")
    }

    fn ensure_node(&mut self, url: &str, now: Timestamp, report: &mut MutationReport) -> NodeId {
        if let Some(&id) = self.ids.get(url) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(Some(Node {
            rec: NodeRecord { url: url.to_string(), status: NodeStatus::Unfetched, priority: 0.0, last_update: now },
            factor: 1.0,
            confirmed: false,
            version: 0,
            incoming: BTreeSet::new(),
            outgoing: BTreeSet::new(),
        }));
        self.ids.insert(url.to_string(), id);
        self.live_nodes += 1;
        report.nodes_added.push(url.to_string());
        id
    }

    fn is_live_source(&self, id: NodeId) -> bool {
        self.n(id).rec.status != NodeStatus::Excluded
    }

    fn has_live_incoming(&self, id: NodeId) -> bool {
        self.n(id).incoming.iter().any(|&s| self.is_live_source(s))
    }

    fn eligible(&self, id: NodeId) -> bool {
        self.n(id).rec.status == NodeStatus::Unfetched && self.has_live_incoming(id)
    }

    /// Recomputes priority from live incoming edges and refreshes the heap.
    fn refresh(&mut self, id: NodeId, now: Timestamp) {
        let node = self.n(id);
        let priority = node
            .incoming
            .iter()
            .filter(|&&s| self.is_live_source(s))
            .map(|&s| self.edges[&(s, id)].weight)
            .fold(0.0f64, f64::max);
        let eligible = self.eligible(id);
        let node = self.n_mut(id);
        node.rec.priority = priority;
        node.rec.last_update = now;
        node.version += 1;
        let version = node.version;
        if eligible {
            self.heap.push(HeapEntry { priority, id, version });
        }
        self.maybe_compact();
    }

    fn maybe_compact(&mut self) {
        if self.heap.len() > 4 * self.live_nodes + 1024 {
            let entries: Vec<HeapEntry> = self
                .nodes
                .iter()
                .enumerate()
                .filter_map(|(id, n)| n.as_ref().map(|n| (id, n)))
                .filter(|(id, _)| self.eligible(*id))
                .map(|(id, n)| HeapEntry { priority: n.rec.priority, id, version: n.version })
                .collect();
            self.heap = entries.into();
        }
    }

    fn set_status(&mut self, id: NodeId, status: NodeStatus, now: Timestamp) {
        let node = self.n_mut(id);
        // exclusion is permanent
        if node.rec.status == NodeStatus::Excluded {
            return;
        }
        node.rec.status = status;
        self.refresh(id, now);
    }

    /// Adds or raises the edge `src -> link.target`. Returns whether the edge is new.
    fn upsert_edge(&mut self, src: NodeId, link: &LinkContext, weight: f64, provenance: Provenance, now: Timestamp, report: &mut MutationReport) {
        let dst = self.ensure_node(&link.target, now, report);
        if dst == src {
            return;
        }
        let w = weight * self.n(dst).factor;
        match self.edges.get_mut(&(src, dst)) {
            Some(e) => {
                if w > e.weight {
                    e.weight = w;
                    report.edges_updated += 1;
                }
            }
            None => {
                self.edges.insert((src, dst), Edge { weight: w, provenance });
                self.n_mut(src).outgoing.insert(dst);
                self.n_mut(dst).incoming.insert(src);
                report.edges_added.push((self.n(src).rec.url.clone(), link.target.clone()));
            }
        }
        self.refresh(dst, now);
    }

    /// Inserts `src`'s out-links weighted against `phrases`; `src` becomes fetched.
    pub fn insert_links(
        &mut self,
        src: &str,
        links: &[LinkContext],
        phrases: &[KeyPhrase],
        provenance: Provenance,
        now: Timestamp,
    ) -> MutationReport {
        let mut report = MutationReport::default();
        let src_id = self.ensure_node(src, now, &mut report);
        self.set_status(src_id, NodeStatus::Fetched, now);
        for link in links {
            let w = estimate_edge_weight(link, phrases);
            self.upsert_edge(src_id, link, w, provenance, now, &mut report);
        }
        self.evict_overflow(now, &mut report);
        report
    }

    /// Adds a layer-2 summary: the blog node is marked fetched and every
    /// permalink and description link becomes a weighted edge. A summary
    /// with no posts adds nothing.
    pub fn insert_summary(&mut self, doc: &SummaryDoc, phrases: &[KeyPhrase], window: usize, now: Timestamp) -> MutationReport {
        if doc.posts.is_empty() {
            return MutationReport::default();
        }
        self.insert_links(&doc.blog_url, &doc.link_contexts(window), phrases, Provenance::Summary, now)
    }

    /// The `k` best frontier nodes, marked in-flight.
    pub fn next_frontier(&mut self, k: usize, now: Timestamp) -> Vec<NodeRecord> {
        assert!(k >= 1, "k must be positive");
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            let Some(top) = self.heap.pop() else { break };
            let Some(node) = self.nodes.get(top.id).and_then(Option::as_ref) else { continue };
            if node.version != top.version || !self.eligible(top.id) {
                continue;
            }
            let node = self.n_mut(top.id);
            node.rec.status = NodeStatus::InFlight;
            node.rec.last_update = now;
            node.version += 1;
            out.push(node.rec.clone());
        }
        out
    }

    /// Number of nodes currently eligible for the frontier.
    pub fn frontier_len(&self) -> usize {
        (0..self.nodes.len()).filter(|&id| self.nodes[id].is_some() && self.eligible(id)).count()
    }

    pub fn mark_fetched(&mut self, url: &str, now: Timestamp) -> Result<(), GraphError> {
        self.transition(url, NodeStatus::Fetched, now)
    }

    pub fn mark_failed(&mut self, url: &str, now: Timestamp) -> Result<(), GraphError> {
        self.transition(url, NodeStatus::Failed, now)
    }

    /// Returns an in-flight node to the frontier.
    pub fn release(&mut self, url: &str, now: Timestamp) -> Result<(), GraphError> {
        self.transition(url, NodeStatus::Unfetched, now)
    }

    fn transition(&mut self, url: &str, status: NodeStatus, now: Timestamp) -> Result<(), GraphError> {
        let id = *self.ids.get(url).ok_or_else(|| GraphError::UnknownNode(url.to_string()))?;
        self.set_status(id, status, now);
        Ok(())
    }

    /// Excludes a node for good. Its outgoing edges stop counting toward
    /// their targets' priorities.
    pub fn exclude(&mut self, url: &str, now: Timestamp) -> Result<(), GraphError> {
        let id = *self.ids.get(url).ok_or_else(|| GraphError::UnknownNode(url.to_string()))?;
        if self.n(id).rec.status == NodeStatus::Excluded {
            return Ok(());
        }
        self.set_status(id, NodeStatus::Excluded, now);
        let targets: Vec<NodeId> = self.n(id).outgoing.iter().copied().collect();
        for t in targets {
            self.refresh(t, now);
        }
        Ok(())
    }

    fn rescale(&mut self, id: NodeId, factor: f64, now: Timestamp) {
        let sources: Vec<NodeId> = self.n(id).incoming.iter().copied().collect();
        for s in sources {
            if let Some(e) = self.edges.get_mut(&(s, id)) {
                e.weight *= factor;
            }
        }
        self.n_mut(id).factor *= factor;
        self.refresh(id, now);
    }

    pub fn apply_corrections(&mut self, corrections: &[Correction], now: Timestamp) -> MutationReport {
        let mut report = MutationReport::default();
        for c in corrections {
            let Some(&id) = self.ids.get(&c.target) else {
                report.unknown.push(c.target.clone());
                continue;
            };
            match c.kind {
                CorrectionKind::ExcludeSpam => {
                    let _ = self.exclude(&c.target, now);
                    report.excluded.push(c.target.clone());
                }
                CorrectionKind::ConfirmBlog => {
                    if !self.n(id).confirmed {
                        self.n_mut(id).confirmed = true;
                        self.rescale(id, CONFIRM_BLOG_FACTOR, now);
                        report.rescaled.push(c.target.clone());
                    }
                }
                CorrectionKind::Rescale(f) => {
                    if f.is_finite() && f > 0.0 {
                        self.rescale(id, f, now);
                        report.rescaled.push(c.target.clone());
                    }
                }
            }
        }
        report
    }

    /// Drops the lowest-priority unfetched nodes while over capacity.
    fn evict_overflow(&mut self, now: Timestamp, report: &mut MutationReport) {
        if self.live_nodes <= self.max_nodes {
            return;
        }
        let excess = self.live_nodes - self.max_nodes;
        let mut candidates: Vec<(f64, NodeId)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| n.as_ref().map(|n| (id, n)))
            .filter(|(_, n)| n.rec.status == NodeStatus::Unfetched)
            .map(|(id, n)| (if self.has_live_incoming(id) { n.rec.priority } else { -1.0 }, id))
            .collect();
        // lowest priority first, newest first among equals
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)));
        let mut touched = BTreeSet::new();
        for &(_, id) in candidates.iter().take(excess) {
            let node = self.nodes[id].take().expect("candidate is live");
            self.ids.remove(&node.rec.url);
            self.live_nodes -= 1;
            for s in &node.incoming {
                self.edges.remove(&(*s, id));
                if let Some(src) = self.nodes[*s].as_mut() {
                    src.outgoing.remove(&id);
                }
            }
            for d in &node.outgoing {
                self.edges.remove(&(id, *d));
                if let Some(dst) = self.nodes[*d].as_mut() {
                    dst.incoming.remove(&id);
                    touched.insert(*d);
                }
            }
            report.evicted.push(node.rec.url);
        }
        for id in touched {
            if self.nodes[id].is_some() {
                self.refresh(id, now);
            }
        }
    }

    /// Serializes to the line-oriented checkpoint format:
    ///
    /// ```text
    /// N <url> <status> <priority> <factor> <confirmed> <last_update_ms>
    /// E <src> <dst> <weight> <provenance>
    /// ```
    ///
    /// Fields are tab-separated. In-flight nodes are written as unfetched.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        for n in self.nodes.iter().flatten() {
            let status = match n.rec.status {
                NodeStatus::InFlight => NodeStatus::Unfetched,
                s => s,
            };
            let _ = writeln!(
                out,
                "N\t{}\t{}\t{}\t{}\t{}\t{}",
                n.rec.url,
                status,
                n.rec.priority,
                n.factor,
                u8::from(n.confirmed),
                n.rec.last_update.0
            );
        }
        for e in self.edges() {
            let _ = writeln!(out, "E\t{}\t{}\t{}\t{}", e.src, e.dst, e.weight, e.provenance.as_str());
        }
        out
    }

    pub fn from_checkpoint(text: &str, max_nodes: usize) -> Result<Self, GraphError> {
        let mut g = FrontierGraph::new(max_nodes);
        let mut stated: Vec<(NodeId, f64, usize)> = Vec::new();
        let mut scratch = MutationReport::default();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let bad = |message: String| GraphError::Checkpoint { line: lineno, message };
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            match f.as_slice() {
                ["N", url, status, priority, rest @ ..] => {
                    let status: NodeStatus = status.parse().map_err(bad)?;
                    let priority: f64 = priority.parse().map_err(|_| bad(format!("bad priority {priority:?}")))?;
                    let (factor, confirmed, last) = match rest {
                        [] => (1.0, false, 0),
                        [factor, confirmed, last] => (
                            factor.parse::<f64>().map_err(|_| bad(format!("bad factor {factor:?}")))?,
                            *confirmed == "1",
                            last.parse::<u64>().map_err(|_| bad(format!("bad timestamp {last:?}")))?,
                        ),
                        _ => return Err(bad("wrong field count for node".into())),
                    };
                    if g.ids.contains_key(*url) {
                        return Err(bad(format!("duplicate node {url}")));
                    }
                    let id = g.ensure_node(url, Timestamp(last), &mut scratch);
                    let n = g.n_mut(id);
                    n.rec.status = status;
                    n.factor = factor;
                    n.confirmed = confirmed;
                    stated.push((id, priority, lineno));
                }
                ["E", src, dst, weight, provenance] => {
                    let s = *g.ids.get(*src).ok_or_else(|| bad(format!("edge from unknown node {src}")))?;
                    let d = *g.ids.get(*dst).ok_or_else(|| bad(format!("edge to unknown node {dst}")))?;
                    let weight: f64 = weight.parse().map_err(|_| bad(format!("bad weight {weight:?}")))?;
                    if !(weight >= 0.0) {
                        return Err(bad(format!("negative weight {weight}")));
                    }
                    let provenance: Provenance = provenance.parse().map_err(bad)?;
                    g.edges.insert((s, d), Edge { weight, provenance });
                    g.n_mut(s).outgoing.insert(d);
                    g.n_mut(d).incoming.insert(s);
                }
                _ => return Err(bad(format!("unrecognized record {line:?}"))),
            }
        }
        for (id, priority, lineno) in stated {
            let last = g.n(id).rec.last_update;
            g.refresh(id, last);
            let got = g.n(id).rec.priority;
            if got != priority {
                return Err(GraphError::Checkpoint {
                    line: lineno,
                    message: format!("stated priority {priority} but edges give {got}"),
                });
            }
        }
        Ok(g)
    }
}
