use std::collections::BTreeSet;
use std::path::Path;
use std::time::Duration;

use proptest::prelude::*;

use blogwatch::clock::Timestamp;
use blogwatch::ping::{dedupe_window, match_registry, parse_changes_feed, BlogRegistry, SeedOrigin, SeedUrl};

fn fixture(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

/// `url="..."` attribute values, in document order, read with plain string search.
fn raw_urls(xml: &str) -> Vec<String> {
    xml.split("url=\"").skip(1).map(|s| s[..s.find('"').unwrap()].to_string()).collect()
}

#[test]
fn hundred_entries_with_three_malformed() {
    let xml = fixture("changes_100.xml");
    assert_eq!(raw_urls(&xml).len(), 100);
    let feed = parse_changes_feed(&xml).unwrap();
    assert_eq!(feed.events.len(), 97);
    assert_eq!(feed.skipped.len(), 3);
    assert_eq!(feed.skipped.iter().map(|e| e.index).collect::<Vec<_>>(), vec![17, 52, 88]);
    assert!(feed.events.windows(2).all(|w| w[0].when < w[1].when));
}

#[test]
fn ten_pattern_registry_yields_twenty_three_seeds() {
    let xml = fixture("changes_100.xml");
    let patterns: Vec<String> = fixture("registry_10.txt")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.trim().to_string())
        .collect();
    assert_eq!(patterns.len(), 10);

    // set-membership oracle over the raw hosts
    let expected: Vec<String> = raw_urls(&xml)
        .into_iter()
        .filter_map(|u| url::Url::parse(&u).ok().filter(|u| u.scheme() == "http"))
        .filter_map(|u| u.host_str().map(str::to_string))
        .filter(|host| {
            patterns.iter().any(|p| match p.strip_prefix("*.") {
                Some(suffix) => host.ends_with(&format!(".{suffix}")),
                None => host == p,
            })
        })
        .collect();
    assert_eq!(expected.len(), 23);

    let registry = BlogRegistry::parse(&fixture("registry_10.txt"), "registry_10.txt").unwrap();
    let feed = parse_changes_feed(&xml).unwrap();
    let seeds = match_registry(&feed.events, &registry, Timestamp(5));
    assert_eq!(seeds.len(), 23);
    let hosts: Vec<String> = seeds.iter().map(|s| url::Url::parse(&s.url).unwrap().host_str().unwrap().to_string()).collect();
    assert_eq!(hosts, expected);
    assert!(seeds.iter().all(|s| s.discovered_at == Timestamp(5)));
}

fn seed(url: String, ms: u64) -> SeedUrl {
    SeedUrl { url, discovered_at: Timestamp(ms), origin: SeedOrigin::Ping }
}

proptest! {
    #[test]
    fn window_spanning_stream_keeps_one_per_url(picks in proptest::collection::vec(0usize..50, 1000)) {
        let stream: Vec<SeedUrl> = picks
            .iter()
            .enumerate()
            .map(|(i, &k)| seed(format!("http://b{k}.blogs.example/"), i as u64))
            .collect();
        let out = dedupe_window(&stream, Duration::from_secs(3600));
        let distinct: BTreeSet<&usize> = picks.iter().collect();
        prop_assert_eq!(out.len(), distinct.len());
        let urls: BTreeSet<&str> = out.iter().map(|s| s.url.as_str()).collect();
        prop_assert_eq!(urls.len(), out.len());
    }

    #[test]
    fn emitted_repeats_are_a_window_apart(
        gaps in proptest::collection::vec(0u64..400, 1..200),
        picks in proptest::collection::vec(0usize..5, 200),
        window_ms in 1u64..1000,
    ) {
        let mut t = 0;
        let stream: Vec<SeedUrl> = gaps
            .iter()
            .zip(&picks)
            .map(|(g, k)| {
                t += g;
                seed(format!("http://b{k}.blogs.example/"), t)
            })
            .collect();
        let out = dedupe_window(&stream, Duration::from_millis(window_ms));
        // brute force: each input is kept iff no kept copy lies within the window before it
        let mut kept: Vec<&SeedUrl> = Vec::new();
        for s in &stream {
            let shadowed = kept.iter().any(|k| k.url == s.url && s.discovered_at.0 - k.discovered_at.0 < window_ms);
            if !shadowed {
                kept.push(s);
            }
        }
        prop_assert_eq!(out.iter().collect::<Vec<_>>(), kept);
    }
}
