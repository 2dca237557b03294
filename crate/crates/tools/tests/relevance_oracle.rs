mod support;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::oracle;
use xmaster_tools::relevance::{lexical_rank, windows, TOP_PASSAGES};

const VOCAB: &[&str] = &[
    "orbit", "moon", "tidal", "lock", "planet", "star", "gravity", "torque", "energy", "mass", "Orbit", "MOON", "café",
    "résumé", "x1", "42", "alpha", "beta", "gamma", "delta",
];
const SEPARATORS: &[&str] = &[" ", "  ", ", ", ". ", "\n", " - ", "; ", "(", ") ", "/"];

/// A document of random words and separators with a few planted bursts of
/// one term, plus a query that may include absent terms.
fn case(seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = rng.random_range(200..9000);
    let planted = VOCAB[rng.random_range(0..VOCAB.len())];
    let mut doc = String::new();
    while doc.chars().count() < target {
        if rng.random_bool(0.02) {
            for _ in 0..rng.random_range(2..8) {
                doc.push_str(planted);
                doc.push(' ');
            }
        }
        doc.push_str(VOCAB[rng.random_range(0..VOCAB.len())]);
        doc.push_str(SEPARATORS[rng.random_range(0..SEPARATORS.len())]);
    }
    let mut query = vec![planted.to_string()];
    for _ in 0..rng.random_range(0..4) {
        if rng.random_bool(0.2) {
            query.push("absentterm".into());
        } else {
            query.push(VOCAB[rng.random_range(0..VOCAB.len())].to_string());
        }
    }
    (doc, query.join(" "))
}

#[test]
fn lexical_ranking_matches_brute_force_oracle() {
    for seed in 0..100 {
        let (doc, query) = case(seed);
        let got = lexical_rank(&doc, &query);
        let want = oracle::rank(&doc, &query);
        assert_eq!(got.len(), want.len(), "seed {seed}");
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            assert_eq!(g.text, w.text, "seed {seed} rank {i}");
            assert!((g.relevance_score - w.score).abs() < 1e-12, "seed {seed} rank {i}");
        }
    }
}

#[test]
fn planted_ten_window_document() {
    // Ten windows of distinct filler; window 6 gets the most hits per token,
    // window 2 some, the rest none.
    let mut doc = String::new();
    for w in 0..10 {
        let mut block = String::new();
        let filler = format!("fill{w} ");
        while block.len() < 800 {
            let hits = match w {
                6 => 3,
                2 => 1,
                _ => 0,
            };
            for _ in 0..hits {
                block.push_str("zebra ");
            }
            block.push_str(&filler.repeat(4));
        }
        doc.push_str(&block[..800]);
    }
    let got = lexical_rank(&doc, "zebra");
    let want = oracle::rank(&doc, "zebra");
    assert!(got[0].text.contains("zebra"));
    assert_eq!(got.iter().map(|p| &p.text).collect::<Vec<_>>(), want.iter().map(|p| &p.text).collect::<Vec<_>>());
}

proptest! {
    #[test]
    fn passages_are_sorted_and_bounded(doc in "[a-c ]{0,3000}", query in "[a-c ]{0,10}") {
        let p = lexical_rank(&doc, &query);
        prop_assert!(p.len() <= TOP_PASSAGES);
        prop_assert!(p.len() <= windows(&doc).len());
        prop_assert!(p.iter().all(|x| (0.0..=1.0).contains(&x.relevance_score)));
        prop_assert!(p.windows(2).all(|w| w[0].relevance_score >= w[1].relevance_score));
        if p.iter().any(|x| x.relevance_score > 0.0) {
            prop_assert_eq!(p[0].relevance_score, 1.0);
        }
    }

    #[test]
    fn windows_cover_the_text(doc in "\\PC{0,4000}") {
        let w = windows(&doc);
        let mut rebuilt = String::new();
        for (i, part) in w.iter().enumerate() {
            let skip = if i == 0 { 0 } else { 200 };
            rebuilt.extend(part.chars().skip(skip.min(part.chars().count())));
        }
        prop_assert!(w.iter().all(|x| x.chars().count() <= 1000));
        prop_assert_eq!(rebuilt, doc);
    }
}
