mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use blogwatch::clock::Timestamp;
use blogwatch::graph::{estimate_edge_weight, Correction, CorrectionKind, FrontierGraph, NodeStatus, Provenance};
use blogwatch::phrases::{KeyPhrase, Phrase};
use blogwatch::summary::{LinkContext, Post, SummaryDoc};

fn kp(text: &str, score: f64) -> KeyPhrase {
    KeyPhrase { phrase: Phrase::new(text.split(' ')), count: 1, score }
}

fn link(target: &str, before: &str, anchor: &str, after: &str) -> LinkContext {
    LinkContext {
        target: target.into(),
        anchor_text: anchor.into(),
        context_before: before.into(),
        context_after: after.into(),
    }
}

#[test]
fn edge_weights_match_substring_oracle() {
    let phrases = [("solar storm", 4.5), ("grid failure report", 2.25), ("storm surge", 1.5)];
    let key: Vec<KeyPhrase> = phrases.iter().map(|(p, s)| kp(p, *s)).collect();
    let links = [
        link("http://a.example/1", "after the solar storm", "Solar Storm grid failure report", "storm surge expected"),
        link("http://a.example/2", "nothing relevant", "see here", "solar storms differ"),
    ];
    let expected = [4.5 * 2.0 + 2.25 + 1.5, 0.0];
    for (l, want) in links.iter().zip(expected) {
        let oracle = common::weight_oracle(&format!("{} {} {}", l.context_before, l.anchor_text, l.context_after), &phrases);
        assert!((oracle - want).abs() < 1e-12);
        assert!((estimate_edge_weight(l, &key) - oracle).abs() < 1e-12);
    }
    let mut g = FrontierGraph::default();
    g.insert_links("http://src.example/", &links, &key, Provenance::Fulltext, Timestamp(0));
    assert_eq!(g.edge("http://src.example/", "http://a.example/1").unwrap().weight, expected[0]);
    assert_eq!(g.edge("http://src.example/", "http://a.example/2").unwrap().weight, 0.0);
}

fn random_doc(rng: &mut impl Rng, blog: usize, pool: usize) -> SummaryDoc {
    let posts = (0..rng.gen_range(0..4))
        .map(|p| Post {
            title: format!("post {p}"),
            link: format!("http://u{}.example/", rng.gen_range(0..pool)),
            description: String::new(),
            published: None,
            out_links: (0..rng.gen_range(0..4))
                .map(|_| link(&format!("http://u{}.example/", rng.gen_range(0..pool)), "", "x", ""))
                .collect(),
        })
        .collect();
    SummaryDoc { blog_url: format!("http://u{blog}.example/"), title: String::new(), posts, fetched_at: Timestamp(0) }
}

#[test]
fn twenty_summaries_match_offline_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let docs: Vec<SummaryDoc> = (0..20)
        .map(|_| {
            let blog = rng.gen_range(0..30);
            random_doc(&mut rng, blog, 30)
        })
        .collect();
    let mut g = FrontierGraph::default();
    for d in &docs {
        g.insert_summary(d, &[], 10, Timestamp(1));
    }
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    for d in docs.iter().filter(|d| !d.posts.is_empty()) {
        nodes.insert(d.blog_url.clone());
        for p in &d.posts {
            for t in std::iter::once(&p.link).chain(p.out_links.iter().map(|l| &l.target)) {
                nodes.insert(t.clone());
                if *t != d.blog_url {
                    edges.insert((d.blog_url.clone(), t.clone()));
                }
            }
        }
    }
    assert_eq!(g.len(), nodes.len());
    assert_eq!(g.edge_count(), edges.len());
    let got: BTreeSet<(String, String)> = g.edges().into_iter().map(|e| (e.src, e.dst)).collect();
    assert_eq!(got, edges);
}

#[test]
fn halving_the_leader_flips_the_order() {
    let phrases = [kp("alpha beta", 1.0)];
    let mut g = FrontierGraph::default();
    let top = link("http://top.example/", "", "alpha beta alpha beta alpha beta alpha beta alpha beta", "alpha beta alpha beta alpha beta alpha beta alpha beta");
    let second = link("http://second.example/", "alpha beta alpha beta alpha beta", "alpha beta alpha beta alpha beta", "");
    g.insert_links("http://src.example/", &[top, second], &phrases, Provenance::Summary, Timestamp(0));
    assert_eq!(g.node("http://top.example/").unwrap().priority, 10.0);
    assert_eq!(g.node("http://second.example/").unwrap().priority, 6.0);
    let mut before = g.clone();
    assert_eq!(before.next_frontier(1, Timestamp(1))[0].url, "http://top.example/");
    let halve = Correction { target: "http://top.example/".into(), kind: CorrectionKind::Rescale(0.5), reason: String::new() };
    g.apply_corrections(&[halve], Timestamp(1));
    // 10 · 0.5 = 5 < 6
    assert_eq!(g.node("http://top.example/").unwrap().priority, 5.0);
    assert_eq!(g.next_frontier(1, Timestamp(2))[0].url, "http://second.example/");
}

fn assert_matches_oracle(g: &mut FrontierGraph) {
    let expected = common::argmax_order(g);
    let mut got = Vec::new();
    while let Some(r) = g.next_frontier(1, Timestamp(9)).pop() {
        assert_eq!(r.status, NodeStatus::InFlight);
        got.push((r.url, r.priority));
    }
    assert_eq!(got, expected);
}

#[test]
fn five_hundred_node_frontier_matches_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let mut g = common::random_graph(&mut rng, 500);
    assert_eq!(g.len(), 500);
    assert_matches_oracle(&mut g);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn frontier_order_is_repeated_argmax(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = common::random_graph(&mut rng, 500);
        assert_matches_oracle(&mut g);
    }

    #[test]
    fn interleaved_mutations_keep_the_argmax(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = common::random_graph(&mut rng, 120);
        let phrases = [kp("alpha beta", 1.0), kp("gamma delta", 2.0)];
        for step in 0..60 {
            let expected = common::argmax_order(&g).into_iter().next();
            let got = g.next_frontier(1, Timestamp(step)).pop().map(|r| (r.url, r.priority));
            prop_assert_eq!(&got, &expected);
            if let Some((u, _)) = got {
                let links: Vec<LinkContext> = (0..rng.gen_range(0..4))
                    .map(|_| link(&format!("http://n{}.example/", rng.gen_range(0..150)), "", common::ANCHORS[rng.gen_range(0..common::ANCHORS.len())], ""))
                    .collect();
                if rng.gen_bool(0.2) {
                    let _ = g.exclude(&u, Timestamp(step));
                } else {
                    g.insert_links(&u, &links, &phrases, Provenance::Fulltext, Timestamp(step));
                }
            }
        }
    }

    #[test]
    fn checkpoint_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = common::random_graph(&mut rng, 80);
        let text = g.to_checkpoint();
        let h = FrontierGraph::from_checkpoint(&text, g.max_nodes()).unwrap();
        prop_assert_eq!(h.to_checkpoint(), text);
        prop_assert_eq!(common::argmax_order(&h), common::argmax_order(&g));
    }
}
