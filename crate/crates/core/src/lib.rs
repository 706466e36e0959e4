//! Blog discovery and focused crawling: ping ingestion, feed summaries,
//! key-phrase weighted link graph and a relevance-gated crawler.

pub mod clock;
pub mod fetch;
pub mod focused;
pub mod graph;
pub mod harness;
pub mod kv;
pub mod markup;
pub mod phrases;
pub mod pipeline;
pub mod relevance;
pub mod ping;
pub mod summary;
pub mod throttle;
pub mod transport;
pub mod urlnorm;
