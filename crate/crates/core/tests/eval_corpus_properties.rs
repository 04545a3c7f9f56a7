mod common;

use std::collections::BTreeSet;
use std::io::BufReader;

use common::*;
use lsimpute::corpus::{filter_corpus, CorpusFilter};
use lsimpute::eval::{bootstrap_eval, classify_pairs, pearson, split_vocab, Subset, WordPair, WordPairDataset};
use lsimpute::EmbeddingMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn pair(a: &str, b: &str, s: f64) -> WordPair {
    WordPair {
        term1: a.into(),
        term2: b.into(),
        similarity: s,
        relatedness: 1600.0 - s,
    }
}

fn dataset() -> impl Strategy<Value = WordPairDataset> {
    prop::collection::vec((0u8..20, 0u8..20, 0.0f64..1600.0), 0..80).prop_map(|v| {
        WordPairDataset::from_records(
            v.into_iter()
                .filter(|(a, b, _)| a != b)
                .map(|(a, b, s)| pair(&format!("w{a}"), &format!("w{b}"), s)),
        )
    })
}

fn run_filter(terms: &[String], text: &str) -> (String, u64) {
    let mut out = Vec::new();
    let stats = filter_corpus(&CorpusFilter::new(terms), BufReader::new(text.as_bytes()), &mut out).unwrap();
    (String::from_utf8(out).unwrap(), stats.removed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn split_and_classify_partition_the_dataset(d in dataset(), seed in any::<u64>()) {
        let terms = d.terms();
        let (trained, imputed) = split_vocab(&terms, seed);
        prop_assert!(trained.is_disjoint(&imputed));
        prop_assert_eq!(trained.len(), terms.len().div_ceil(2));
        let union: BTreeSet<_> = trained.union(&imputed).cloned().collect();
        prop_assert_eq!(&union, &terms);

        let split = classify_pairs(&d, &trained, &imputed);
        let sum: usize = Subset::ALL.iter().map(|&s| split.subset(s).len()).sum();
        prop_assert_eq!(sum + split.skipped.len(), d.len());
        prop_assert!(split.skipped.is_empty());
        for p in &split.imputed_trained {
            prop_assert!(imputed.contains(&p.term1) != imputed.contains(&p.term2));
        }
    }

    #[test]
    fn bootstrap_is_reproducible(d in dataset(), seed in any::<u64>()) {
        let terms = d.terms();
        let mut r = rng(seed);
        let emb = EmbeddingMatrix::from_rows(
            4,
            terms.iter().map(|t| (t.clone(), (0..4).map(|_| gaussian(&mut r)).collect::<Vec<_>>())),
        )
        .unwrap();
        let (trained, imputed) = split_vocab(&terms, seed);
        let split = classify_pairs(&d, &trained, &imputed);
        let a = bootstrap_eval(&emb, &split, 50, seed);
        let b = bootstrap_eval(&emb, &split, 50, seed);
        prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn pearson_agrees_with_oracle(xs in prop::collection::vec(-100.0f64..100.0, 3..50), seed in any::<u64>()) {
        let mut r = rng(seed);
        let ys: Vec<f64> = xs.iter().map(|x| x * 0.5 + gaussian(&mut r)).collect();
        match (pearson(&xs, &ys), pearson_oracle(&xs, &ys)) {
            (Ok(a), Some(b)) => prop_assert!((a - b).abs() < 1e-10),
            (Err(_), None) => {}
            (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
        }
    }

    #[test]
    fn filter_matches_brute_force_and_is_idempotent(seed in any::<u64>(), n in 0usize..200) {
        let mut r = rng(seed);
        let lines = random_sentences(&mut r, n);
        let terms: Vec<String> = vec!["anemia".into(), "virus".into(), "coumadin".into()];
        let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
        let (out, removed) = run_filter(&terms, &text);
        let (kept, want_removed) = naive_filter(&lines, &terms);
        prop_assert_eq!(removed as usize, want_removed);
        prop_assert_eq!(&out, &kept.iter().map(|l| format!("{l}\n")).collect::<String>());
        let (again, removed2) = run_filter(&terms, &out);
        prop_assert_eq!(again, out);
        prop_assert_eq!(removed2, 0);
    }

    #[test]
    fn token_order_does_not_change_the_decision(seed in any::<u64>()) {
        let mut r = rng(seed);
        let filter = CorpusFilter::new(["virus", "lasix"]);
        for line in random_sentences(&mut r, 50) {
            let mut toks: Vec<&str> = line.split(' ').collect();
            toks.shuffle(&mut r);
            let shuffled = toks.join(" ");
            prop_assert_eq!(filter.matches(&line).is_empty(), filter.matches(&shuffled).is_empty());
        }
    }
}

#[test]
fn perfect_embeddings_score_one() {
    let terms: Vec<String> = (0..12).map(|i| format!("w{i}")).collect();
    let emb = EmbeddingMatrix::from_rows(
        2,
        terms.iter().enumerate().map(|(i, t)| {
            let a = i as f64 * 0.12;
            (t.clone(), vec![a.cos(), a.sin()])
        }),
    )
    .unwrap();
    let mut pairs = Vec::new();
    for i in 0..12 {
        for j in i + 1..12 {
            let s = 800.0 * (1.0 + ((j - i) as f64 * 0.12).cos());
            pairs.push(pair(&terms[i], &terms[j], s));
        }
    }
    let d = WordPairDataset::from_records(pairs);
    let all: BTreeSet<String> = terms.iter().cloned().collect();
    let split = classify_pairs(&d, &all, &BTreeSet::new());
    let rep = bootstrap_eval(&emb, &split, 100, 1);
    let tt = &rep.subsets[&Subset::TrainedTrained];
    let sim = tt.similarity.as_ref().unwrap();
    assert!((sim.r.unwrap() - 1.0).abs() < 1e-9);
    assert!(sim.boot_std.unwrap() < 1e-9);
    assert!(!tt.evaluable || tt.pairs == 66);
}
