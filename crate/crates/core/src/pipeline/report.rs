//! Run report: a `key = value` file plus an aligned console rendering.
//!
//! Keys, in file order: `elapsed_ms seeds_in seeds_duplicate seeds_dropped
//! summaries_ok summaries_failed pages_fetched pages_relevant pages_failed
//! media_skipped spam_excluded harvest_rate bytes_fetched max_queue_depth
//! median_latency_ms latency_slo_met graph_nodes graph_edges`, then one
//! `top_phrase = <phrase><TAB><score>` line per phrase, best first.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::phrases::KeyPhrase;

pub const DEFAULT_TOP_PHRASES: usize = 20;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub elapsed_ms: u64,
    /// Seeds admitted after registry match and deduplication.
    pub seeds_in: u64,
    pub seeds_duplicate: u64,
    /// Seeds displaced from a full queue.
    pub seeds_dropped: u64,
    pub summaries_ok: u64,
    pub summaries_failed: u64,
    pub pages_fetched: u64,
    pub pages_relevant: u64,
    pub pages_failed: u64,
    pub media_skipped: u64,
    pub spam_excluded: u64,
    /// `pages_relevant / pages_fetched`, 0 when nothing was fetched.
    pub harvest_rate: f64,
    pub bytes_fetched: u64,
    pub max_queue_depth: u64,
    pub median_latency_ms: Option<u64>,
    pub latency_slo_met: Option<bool>,
    pub graph_nodes: u64,
    pub graph_edges: u64,
    pub top_phrases: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("report line {line}: {message}")]
    Format { line: usize, message: String },
}

/// Sums each phrase's score over all documents.
#[derive(Debug, Clone, Default)]
pub struct PhraseTally {
    totals: HashMap<String, f64>,
}

impl PhraseTally {
    pub fn add(&mut self, phrases: &[KeyPhrase]) {
        for p in phrases {
            *self.totals.entry(p.phrase.to_string()).or_insert(0.0) += p.score;
        }
    }

    /// Highest aggregate first; ties by phrase text.
    pub fn top(&self, n: usize) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self.totals.iter().map(|(k, &s)| (k.clone(), s)).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v.truncate(n);
        v
    }
}

pub fn harvest(relevant: u64, fetched: u64) -> f64 {
    if fetched == 0 {
        0.0
    } else {
        relevant as f64 / fetched as f64
    }
}

pub fn median(values: &mut [u64]) -> Option<u64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2 })
}

impl RunReport {
    fn counters(&self) -> [(&'static str, u64); 15] {
        [
            ("elapsed_ms", self.elapsed_ms),
            ("seeds_in", self.seeds_in),
            ("seeds_duplicate", self.seeds_duplicate),
            ("seeds_dropped", self.seeds_dropped),
            ("summaries_ok", self.summaries_ok),
            ("summaries_failed", self.summaries_failed),
            ("pages_fetched", self.pages_fetched),
            ("pages_relevant", self.pages_relevant),
            ("pages_failed", self.pages_failed),
            ("media_skipped", self.media_skipped),
            ("spam_excluded", self.spam_excluded),
            ("bytes_fetched", self.bytes_fetched),
            ("max_queue_depth", self.max_queue_depth),
            ("graph_nodes", self.graph_nodes),
            ("graph_edges", self.graph_edges),
        ]
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.counters() {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "harvest_rate = {}", self.harvest_rate);
        let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
        let _ = writeln!(out, "median_latency_ms = {}", opt(self.median_latency_ms.map(|v| v.to_string())));
        let _ = writeln!(out, "latency_slo_met = {}", opt(self.latency_slo_met.map(|v| v.to_string())));
        for (p, s) in &self.top_phrases {
            let _ = writeln!(out, "top_phrase = {p}\t{s}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ReportError> {
        let mut r = RunReport::default();
        for (i, line) in text.lines().enumerate() {
            let bad = |message: String| ReportError::Format { line: i + 1, message };
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once(" = ").ok_or_else(|| bad("expected `key = value`".into()))?;
            let int = || v.parse::<u64>().map_err(|_| bad(format!("bad number {v:?}")));
            match k {
                "elapsed_ms" => r.elapsed_ms = int()?,
                "seeds_in" => r.seeds_in = int()?,
                "seeds_duplicate" => r.seeds_duplicate = int()?,
                "seeds_dropped" => r.seeds_dropped = int()?,
                "summaries_ok" => r.summaries_ok = int()?,
                "summaries_failed" => r.summaries_failed = int()?,
                "pages_fetched" => r.pages_fetched = int()?,
                "pages_relevant" => r.pages_relevant = int()?,
                "pages_failed" => r.pages_failed = int()?,
                "media_skipped" => r.media_skipped = int()?,
                "spam_excluded" => r.spam_excluded = int()?,
                "bytes_fetched" => r.bytes_fetched = int()?,
                "max_queue_depth" => r.max_queue_depth = int()?,
                "graph_nodes" => r.graph_nodes = int()?,
                "graph_edges" => r.graph_edges = int()?,
                "harvest_rate" => r.harvest_rate = v.parse().map_err(|_| bad(format!("bad rate {v:?}")))?,
                "median_latency_ms" => r.median_latency_ms = if v == "none" { None } else { Some(int()?) },
                "latency_slo_met" => {
                    r.latency_slo_met = match v {
                        "none" => None,
                        "true" => Some(true),
                        "false" => Some(false),
                        _ => return Err(bad(format!("bad flag {v:?}"))),
                    }
                }
                "top_phrase" => {
                    let (p, s) = v.rsplit_once('\t').ok_or_else(|| bad("top_phrase needs phrase and score".into()))?;
                    r.top_phrases.push((p.to_string(), s.parse().map_err(|_| bad(format!("bad score {s:?}")))?));
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        Ok(r)
    }

    /// Aligned text for the console.
    pub fn render(&self) -> String {
        let mut rows: Vec<(String, String)> = self.counters().iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        rows.push(("harvest_rate".into(), format!("{:.4}", self.harvest_rate)));
        rows.push(("median_latency_ms".into(), self.median_latency_ms.map_or("-".into(), |v| v.to_string())));
        if let Some(met) = self.latency_slo_met {
            rows.push(("latency_slo_met".into(), met.to_string()));
        }
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>12}");
        }
        let _ = writeln!(out, "\ntop phrases");
        if self.top_phrases.is_empty() {
            let _ = writeln!(out, "  (none)");
        }
        let pw = self.top_phrases.iter().map(|p| p.0.chars().count()).max().unwrap_or(0);
        for (i, (p, s)) in self.top_phrases.iter().enumerate() {
            let _ = writeln!(out, "{:>3}. {p:<pw$}  {s:>12.3}", i + 1);
        }
        out
    }
}
