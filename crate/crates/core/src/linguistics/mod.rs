//! Surface and distributional text metrics over annotated corpora.

mod compare;
mod divergence;
mod metrics;

pub use compare::{compare_conditions, summarize, ConditionSummary, Metric, MetricComparison, PairwiseRow};
pub use divergence::{group_divergence, jsd, DivergenceResult, Distribution, Feature};
pub use metrics::{
    avg_sentence_length, dependency_depth, hdd, hdd_tokens, mdd, mdd_with, ne_density, ner_label_profile,
    pos_bigram_profile, profile_corpus, profile_document, write_profiles_csv, CorpusProfiles, LinguisticProfile, Mdd,
    ProfileOptions, HDD_SAMPLE_SIZE,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{Document, EntitySpan, Sentence, Token};
    use crate::stats::RngStream;
    use crate::Error;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    fn tok(form: &str, tag: &str, head: usize) -> Token {
        Token {
            form: form.into(),
            tag: tag.into(),
            head,
            deprel: "dep".into(),
            is_punct: tag == "PUNCT",
            is_space: false,
        }
    }

    fn sent(tokens: Vec<Token>) -> Sentence {
        Sentence {
            id: "s".into(),
            tokens,
        }
    }

    fn doc(sentences: Vec<Sentence>) -> Document {
        Document {
            doc_id: "d".into(),
            participant_id: "p".into(),
            condition: "c".into(),
            sentences,
            entities: Vec::new(),
        }
    }

    /// Flat sentence: every token hangs off the first one.
    fn flat(tags: &[&str]) -> Sentence {
        sent(tags.iter().enumerate().map(|(i, t)| tok(&format!("w{i}"), t, usize::from(i > 0))).collect())
    }

    fn chain() -> Document {
        doc(vec![sent(vec![tok("a", "X", 2), tok("b", "X", 3), tok("c", "X", 0)])])
    }

    #[test]
    fn sentence_length() {
        assert_eq!(avg_sentence_length(&doc(vec![flat(&["X"; 5])])).unwrap(), 5.0);
        let d = doc(vec![flat(&["X"; 3]), flat(&["X"; 5]), sent(vec![tok(".", "PUNCT", 0)])]);
        assert_eq!(avg_sentence_length(&d).unwrap(), 4.0);
        assert!(avg_sentence_length(&doc(vec![sent(vec![tok(".", "PUNCT", 0)])])).is_err());
    }

    #[test]
    fn mdd_examples() {
        let m = mdd(&chain()).unwrap();
        assert_eq!(m.mdd, 1.0);
        assert_abs_diff_eq!(m.mdd_normalized, 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(mdd(&doc(vec![flat(&["X", "Y"])])).unwrap().mdd, 1.0);
        assert!(matches!(mdd(&doc(vec![flat(&["X"])])), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn mdd_punctuation_indices() {
        // a , b  with b -> a: distance 1 over counted tokens, 2 with punctuation indexed
        let d = doc(vec![sent(vec![tok("a", "X", 0), tok(",", "PUNCT", 1), tok("b", "X", 1)])]);
        assert_eq!(mdd(&d).unwrap().mdd, 1.0);
        assert_eq!(mdd_with(&d, true).unwrap().mdd, 2.0);
    }

    #[test]
    fn depth_examples() {
        assert_eq!(dependency_depth(&chain()).unwrap(), 1.0);
        assert_eq!(dependency_depth(&doc(vec![flat(&["X"])])).unwrap(), 0.0);
        let cyc = doc(vec![sent(vec![tok("a", "X", 0), tok("b", "X", 3), tok("c", "X", 2)])]);
        assert!(matches!(dependency_depth(&cyc), Err(Error::Structural { .. })));
    }

    #[test]
    fn hdd_examples() {
        let distinct: Vec<String> = (0..42).map(|i| format!("w{i}")).collect();
        assert_eq!(hdd_tokens(&distinct, 42).unwrap(), 1.0);
        assert_abs_diff_eq!(hdd_tokens(&["same"; 42], 42).unwrap(), 1.0 / 42.0, epsilon = 1e-12);
        assert!(matches!(hdd_tokens(&["x"; 41], 42), Err(Error::InsufficientData(_))));
        // case folding merges types
        assert_abs_diff_eq!(hdd_tokens(&["A", "a"], 2).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn hdd_small_hand_value() {
        // N=4 {a,a,b,c}, s=2: P(a)=1-C(2,2)/C(4,2)=5/6, P(b)=P(c)=1-C(3,2)/C(4,2)=1/2
        let h = hdd_tokens(&["a", "a", "b", "c"], 2).unwrap();
        assert_abs_diff_eq!(h, (5.0 / 6.0 + 1.0) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn density_examples() {
        let mut d = doc(vec![flat(&["X"; 10])]);
        assert_eq!(ne_density(&d).unwrap(), 0.0);
        for (start, end) in [(0, 2), (5, 6)] {
            d.entities.push(EntitySpan {
                sentence: 0,
                start,
                end,
                label: "PER".into(),
            });
        }
        assert_eq!(ne_density(&d).unwrap(), 0.2);
        assert!(ne_density(&doc(vec![sent(vec![tok(".", "PUNCT", 0)])])).is_err());
    }

    #[test]
    fn bigram_examples() {
        let p = pos_bigram_profile(&doc(vec![flat(&["D", "N", "V"])])).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!((p["D-N"], p["N-V"]), (0.5, 0.5));
        let p = pos_bigram_profile(&doc(vec![flat(&["N", "V"]), flat(&["N", "V"])])).unwrap();
        assert_eq!(p.into_iter().collect::<Vec<_>>(), vec![("N-V".to_string(), 1.0)]);
        assert!(pos_bigram_profile(&doc(vec![flat(&["N"]), flat(&["V"])])).is_err());
        let p = pos_bigram_profile(&doc(vec![flat(&["N", "PUNCT", "V"])])).unwrap();
        assert_eq!(p.keys().collect::<Vec<_>>(), vec!["N-V"]);
    }

    fn dist(pairs: &[(&str, f64)]) -> Distribution {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn jsd_examples() {
        let p = dist(&[("a", 1.0), ("b", 0.0)]);
        let q = dist(&[("a", 0.5), ("b", 0.5)]);
        // 0.5*log2(4/3) + 0.5*(0.5*log2(2/3) + 0.5*log2(2))
        let hand = 0.5 * (4.0f64 / 3.0).log2() + 0.25 * (2.0f64 / 3.0).log2() + 0.25;
        assert_abs_diff_eq!(jsd(&p, &q).unwrap(), hand, epsilon = 1e-15);
        assert_abs_diff_eq!(jsd(&p, &q).unwrap(), 0.3113, epsilon = 1e-4);
        assert_eq!(jsd(&p, &p).unwrap(), 0.0);
        assert_eq!(jsd(&dist(&[("a", 1.0)]), &dist(&[("b", 1.0)])).unwrap(), 1.0);
        assert!(jsd(&dist(&[("a", 0.4)]), &q).is_err());
    }

    fn participant_doc(pid: &str, cond: &str, tags: &[&str]) -> Document {
        Document {
            doc_id: format!("{pid}-{cond}"),
            participant_id: pid.into(),
            condition: cond.into(),
            sentences: vec![flat(tags)],
            entities: Vec::new(),
        }
    }

    #[test]
    fn divergence_identical_and_disjoint() {
        let a: Vec<Document> = (0..5).map(|i| participant_doc(&format!("p{i}"), "h", &["N", "V", "N"])).collect();
        let refs: Vec<&Document> = a.iter().collect();
        let r = group_divergence(&refs, &refs, Feature::PosBigrams, 200, &RngStream::new(1)).unwrap();
        assert_eq!((r.divergence, r.p), (0.0, Some(1.0)));

        let x = participant_doc("p1", "h", &["N", "V"]);
        let y = participant_doc("p1", "t", &["D", "A"]);
        let r = group_divergence(&[&x], &[&y], Feature::PosBigrams, 200, &RngStream::new(1)).unwrap();
        assert_eq!(r.divergence, 1.0);
        assert_eq!(r.p, None);
    }

    #[test]
    fn divergence_order_invariant_and_seeded() {
        let a: Vec<Document> = (0..8)
            .map(|i| participant_doc(&format!("p{i}"), "h", if i % 2 == 0 { &["N", "V", "D"] } else { &["N", "N", "V"] }))
            .collect();
        let b: Vec<Document> = (0..8).map(|i| participant_doc(&format!("p{i}"), "t", &["D", "N", "V", "V"])).collect();
        let ra: Vec<&Document> = a.iter().collect();
        let rb: Vec<&Document> = b.iter().collect();
        let r1 = group_divergence(&ra, &rb, Feature::PosBigrams, 300, &RngStream::new(4)).unwrap();
        let mut sa = ra.clone();
        let mut sb = rb.clone();
        sa.reverse();
        sb.swap(0, 5);
        let r2 = group_divergence(&sa, &sb, Feature::PosBigrams, 300, &RngStream::new(4)).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.divergence > 0.0 && r1.p.unwrap() < 0.05);
    }

    fn profile(pid: &str, cond: &str, asl: f64) -> LinguisticProfile {
        LinguisticProfile {
            doc_id: format!("{pid}-{cond}"),
            participant_id: pid.into(),
            condition: cond.into(),
            n_sentences: 1,
            n_tokens: 1,
            avg_sentence_length: asl,
            mdd: None,
            mdd_normalized: None,
            mean_depth: 0.0,
            hdd: None,
            ne_density: 0.0,
            pos_bigrams: Default::default(),
        }
    }

    #[test]
    fn condition_comparison_perfect_agreement() {
        let conds: Vec<String> = ["human", "rich", "lean"].map(String::from).to_vec();
        let mut ps = Vec::new();
        for i in 0..6 {
            let pid = format!("p{i}");
            for (k, c) in conds.iter().enumerate() {
                ps.push(profile(&pid, c, 10.0 + i as f64 + 3.0 * k as f64));
            }
        }
        ps.push(profile("lonely", "human", 1.0));
        let r = compare_conditions(&ps, Metric::AvgSentenceLength, &conds).unwrap();
        assert_eq!(r.n, 6);
        assert_abs_diff_eq!(r.friedman.effect_size.unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(r.pairwise.len(), 3);
        assert!(r.pairwise.iter().all(|row| row.p_bh >= row.test.p_value));
        let s = summarize(&ps, &conds);
        let human = s.iter().find(|x| x.condition == "human" && x.metric == Metric::AvgSentenceLength).unwrap();
        assert_eq!(human.n, 7);
    }

    #[test]
    fn corpus_profiles_flag_short_docs() {
        let corpus = crate::dataio::AnnotatedCorpus {
            documents: vec![chain(), doc(vec![flat(&["X"; 50])])],
            models: Vec::new(),
        };
        let out = profile_corpus(&corpus, &ProfileOptions::default());
        assert_eq!(out.profiles.len(), 2);
        assert_eq!(out.hdd_excluded, vec!["d".to_string()]);
        assert_abs_diff_eq!(out.profiles[1].hdd.unwrap(), 1.0, epsilon = 1e-12);
        let csv = write_profiles_csv(&out.profiles).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().contains(",,"));
    }

    fn arb_doc() -> impl Strategy<Value = Document> {
        proptest::collection::vec(proptest::collection::vec((0u8..4, 0u8..6), 1..8), 1..5).prop_map(|sents| {
            let tags = ["N", "V", "D", "PUNCT"];
            doc(sents
                .into_iter()
                .map(|toks| {
                    let mut v: Vec<Token> = toks
                        .iter()
                        .enumerate()
                        .map(|(i, &(t, w))| tok(&format!("w{w}"), tags[t as usize], usize::from(i > 0)))
                        .collect();
                    // keep at least one counted token, as the root
                    v[0].is_punct = false;
                    v[0].tag = "N".into();
                    sent(v)
                })
                .collect())
        })
    }

    fn brute_force_hdd_full(tokens: &[String]) -> f64 {
        let mut t: Vec<String> = tokens.iter().map(|x| x.to_lowercase()).collect();
        t.sort();
        t.dedup();
        t.len() as f64 / tokens.len() as f64
    }

    proptest! {
        #[test]
        fn normalized_mdd_identity(d in arb_doc()) {
            if let Ok(m) = mdd(&d) {
                let asl = avg_sentence_length(&d).unwrap();
                prop_assert!((m.mdd_normalized * asl - m.mdd).abs() < 1e-9);
            }
        }

        #[test]
        fn hdd_order_and_relabel_invariant(words in proptest::collection::vec(0u8..12, 42..80), seed in 0u64..1000) {
            let toks: Vec<String> = words.iter().map(|w| format!("t{w}")).collect();
            let h = hdd_tokens(&toks, 42).unwrap();
            let mut shuffled = toks.clone();
            shuffled.shuffle(&mut RngStream::new(seed).rng());
            prop_assert!((hdd_tokens(&shuffled, 42).unwrap() - h).abs() < 1e-12);
            let relabeled: Vec<String> = words.iter().map(|w| format!("q{}", 11 - w)).collect();
            prop_assert!((hdd_tokens(&relabeled, 42).unwrap() - h).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&h));
        }

        #[test]
        fn hdd_at_sample_size_is_type_ratio(words in proptest::collection::vec(0u8..20, 42)) {
            let toks: Vec<String> = words.iter().map(|w| format!("t{w}")).collect();
            prop_assert!((hdd_tokens(&toks, 42).unwrap() - brute_force_hdd_full(&toks)).abs() < 1e-12);
        }

        #[test]
        fn jsd_symmetric_and_bounded(a in proptest::collection::vec(0.0f64..1.0, 4), b in proptest::collection::vec(0.0f64..1.0, 4)) {
            let norm = |v: &[f64]| -> Option<Distribution> {
                let s: f64 = v.iter().sum();
                (s > 1e-9).then(|| v.iter().enumerate().map(|(i, x)| (format!("k{i}"), x / s)).collect())
            };
            if let (Some(p), Some(q)) = (norm(&a), norm(&b)) {
                let pq = jsd(&p, &q).unwrap();
                prop_assert!((pq - jsd(&q, &p).unwrap()).abs() < 1e-12);
                prop_assert!((0.0..=1.0).contains(&pq));
            }
        }

        #[test]
        fn bigram_profile_sums_to_one_and_ignores_sentence_order(d in arb_doc(), seed in 0u64..1000) {
            if let Ok(p) = pos_bigram_profile(&d) {
                prop_assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-9);
                let mut s = d.clone();
                s.sentences.shuffle(&mut RngStream::new(seed).rng());
                prop_assert_eq!(pos_bigram_profile(&s).unwrap(), p);
            }
        }
    }
}
