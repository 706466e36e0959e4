use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::focused::SpamRules;
use crate::relevance::{Classifier, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Online,
    Batch,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "online" => Ok(Mode::Online),
            "batch" => Ok(Mode::Batch),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("config: {0}")]
    Syntax(#[from] crate::kv::KvError),
    #[error("config: unknown key {0:?}")]
    UnknownKey(String),
    #[error("config: bad value {value:?} for {key}")]
    BadValue { key: String, value: String },
    #[error("config: missing required key {0}")]
    Missing(&'static str),
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub registry_path: PathBuf,
    /// Built-in English list when absent.
    pub stoplist_path: Option<PathBuf>,
    pub topic_corpus_path: PathBuf,
    pub background_corpus_path: PathBuf,
    pub classifier: Classifier,
    pub threshold: f64,
    /// Bytes per second; `None` is unlimited.
    pub bandwidth_limit: Option<u64>,
    pub summary_workers: usize,
    pub fetch_workers: usize,
    pub queue_capacity: usize,
    pub max_pages: usize,
    pub report_interval: Duration,
    /// Overrides the seed of a world-spec fixture.
    pub rng_seed: Option<u64>,
    pub mode: Mode,
    /// Materialized fixture directory or world spec file.
    pub fixture: Option<PathBuf>,
    pub ping_url: Option<String>,
    pub poll_interval: Duration,
    pub output_dir: Option<PathBuf>,
    pub glossary_path: Option<PathBuf>,
    pub politeness_delay: Duration,
    pub dedupe_window: Duration,
    pub latency_slo: Option<Duration>,
    pub max_nodes: usize,
    pub spam: SpamRules,
}

impl RunConfig {
    /// Defaults for everything but the three required paths.
    pub fn new(registry_path: PathBuf, topic_corpus_path: PathBuf, background_corpus_path: PathBuf) -> Self {
        Self {
            registry_path,
            stoplist_path: None,
            topic_corpus_path,
            background_corpus_path,
            classifier: Classifier::Vsm,
            threshold: DEFAULT_THRESHOLD,
            bandwidth_limit: None,
            summary_workers: 4,
            fetch_workers: 4,
            queue_capacity: 1024,
            max_pages: 1000,
            report_interval: Duration::from_secs(60),
            rng_seed: None,
            mode: Mode::Online,
            fixture: None,
            ping_url: None,
            poll_interval: Duration::from_secs(60),
            output_dir: None,
            glossary_path: None,
            politeness_delay: Duration::from_secs(1),
            dedupe_window: crate::ping::DEFAULT_DEDUPE_WINDOW,
            latency_slo: None,
            max_nodes: crate::graph::DEFAULT_MAX_NODES,
            spam: SpamRules::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Relative paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let pairs = crate::kv::parse(text)?;
        let get = |k: &str| pairs.get(k).map(String::as_str);
        let path = |k: &str| get(k).map(|v| base_dir.join(v));
        let mut cfg = RunConfig::new(
            path("registry_path").ok_or(ConfigError::Missing("registry_path"))?,
            path("topic_corpus_path").ok_or(ConfigError::Missing("topic_corpus_path"))?,
            path("background_corpus_path").ok_or(ConfigError::Missing("background_corpus_path"))?,
        );
        for (k, v) in &pairs {
            let bad = || ConfigError::BadValue { key: k.clone(), value: v.clone() };
            let secs = || -> Result<Duration, ConfigError> {
                let s: f64 = v.parse().map_err(|_| bad())?;
                if !(s.is_finite() && s >= 0.0) {
                    return Err(bad());
                }
                Ok(Duration::from_secs_f64(s))
            };
            let count = || v.parse::<usize>().map_err(|_| bad());
            match k.as_str() {
                "registry_path" | "topic_corpus_path" | "background_corpus_path" => {}
                "stoplist_path" => cfg.stoplist_path = Some(base_dir.join(v)),
                "classifier" => cfg.classifier = v.parse().map_err(|_| bad())?,
                "threshold" => cfg.threshold = v.parse().map_err(|_| bad())?,
                "bandwidth_limit" => {
                    cfg.bandwidth_limit = match v.as_str() {
                        "" | "none" | "unlimited" => None,
                        n => Some(n.parse().map_err(|_| bad())?),
                    }
                }
                "summary_workers" => cfg.summary_workers = count()?,
                "fetch_workers" => cfg.fetch_workers = count()?,
                "queue_capacity" => cfg.queue_capacity = count()?,
                "max_pages" => cfg.max_pages = count()?,
                "report_interval" => cfg.report_interval = secs()?,
                "rng_seed" => cfg.rng_seed = Some(v.parse().map_err(|_| bad())?),
                "mode" => cfg.mode = v.parse().map_err(|_| bad())?,
                "fixture" => cfg.fixture = Some(base_dir.join(v)),
                "ping_url" => cfg.ping_url = Some(v.clone()),
                "poll_interval" => cfg.poll_interval = secs()?,
                "output_dir" => cfg.output_dir = Some(base_dir.join(v)),
                "glossary_path" => cfg.glossary_path = Some(base_dir.join(v)),
                "politeness_delay" => cfg.politeness_delay = secs()?,
                "dedupe_window" => cfg.dedupe_window = secs()?,
                "latency_slo" => cfg.latency_slo = Some(secs()?),
                "max_nodes" => cfg.max_nodes = count()?,
                "spam_max_out_degree" => cfg.spam.max_out_degree = count()?,
                "spam_max_dup_anchor" => cfg.spam.max_dup_anchor = count()?,
                "spam_min_words_per_link" => cfg.spam.min_words_per_link = v.parse().map_err(|_| bad())?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("summary_workers", self.summary_workers),
            ("fetch_workers", self.fetch_workers),
            ("queue_capacity", self.queue_capacity),
            ("max_pages", self.max_pages),
            ("max_nodes", self.max_nodes),
            ("spam_max_out_degree", self.spam.max_out_degree),
            ("spam_max_dup_anchor", self.spam.max_dup_anchor),
        ];
        for (k, v) in positive {
            if v == 0 {
                return Err(ConfigError::Invalid(format!("{k} must be positive")));
            }
        }
        if self.bandwidth_limit == Some(0) {
            return Err(ConfigError::Invalid("bandwidth_limit must be positive".into()));
        }
        if self.report_interval.is_zero() || self.dedupe_window.is_zero() {
            return Err(ConfigError::Invalid("report_interval and dedupe_window must be positive".into()));
        }
        if !(self.spam.min_words_per_link.is_finite() && self.spam.min_words_per_link > 0.0) {
            return Err(ConfigError::Invalid("spam_min_words_per_link must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Invalid("threshold must be within [0, 1]".into()));
        }
        match self.mode {
            Mode::Batch if self.fixture.is_none() => Err(ConfigError::Invalid("batch mode requires a fixture".into())),
            Mode::Online if self.fixture.is_none() && self.ping_url.is_none() => {
                Err(ConfigError::Invalid("online mode requires ping_url or a fixture".into()))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "registry_path = r.txt\ntopic_corpus_path = t.txt\nbackground_corpus_path = b.txt\n";

    #[test]
    fn defaults_and_relative_paths() {
        let cfg = RunConfig::parse(&format!("{BASE}ping_url = http://p/\n"), Path::new("/etc/bw")).unwrap();
        assert_eq!(cfg.registry_path, PathBuf::from("/etc/bw/r.txt"));
        assert_eq!(cfg.threshold, 0.3);
        assert_eq!(cfg.bandwidth_limit, None);
        assert_eq!(cfg.mode, Mode::Online);
    }

    #[test]
    fn batch_needs_fixture() {
        let err = RunConfig::parse(&format!("{BASE}mode = batch\n"), Path::new(".")).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        assert!(RunConfig::parse(&format!("{BASE}mode = batch\nfixture = f\n"), Path::new(".")).is_ok());
    }

    #[test]
    fn rejects_unknown_zero_and_missing() {
        let p = Path::new(".");
        assert!(matches!(RunConfig::parse(&format!("{BASE}fixture=f\nbogus = 1\n"), p), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(RunConfig::parse(&format!("{BASE}fixture=f\nfetch_workers = 0\n"), p), Err(ConfigError::Invalid(_))));
        assert!(matches!(RunConfig::parse(&format!("{BASE}fixture=f\nmax_pages = -1\n"), p), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse("fixture = f\n", p), Err(ConfigError::Missing(_))));
        let cfg = RunConfig::parse(&format!("{BASE}fixture=f\nbandwidth_limit = 10240\nclassifier = nb\n"), p).unwrap();
        assert_eq!(cfg.bandwidth_limit, Some(10240));
        assert_eq!(cfg.classifier, Classifier::NaiveBayes);
    }
}
